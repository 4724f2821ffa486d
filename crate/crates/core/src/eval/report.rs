//! Report serialization: line-delimited records, an aligned plain-text
//! table, and a metadata sidecar.
//!
//! `report.jsonl` and `report.txt` are pure functions of the rows, so
//! re-running a job reproduces them byte for byte. The metadata sidecar
//! carries run provenance (checkpoint, corpus, band parameter, averaging,
//! timestamp); the timestamp is supplied by the caller, which keeps this
//! module deterministic.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One table row. Metrics are None when every pair in the group was
/// undefined (both masks empty).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub iou: Option<f64>,
    pub biou: Option<f64>,
    pub n: u64,
    pub skipped: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub checkpoint: String,
    pub corpus: String,
    pub band_d: usize,
    pub averaging: String,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<ReportRow>,
    pub meta: ReportMeta,
}

fn fmt_metric(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.4}"),
        None => "-".into(),
    }
}

impl MetricsReport {
    /// Aligned table in the published layout: a Model/Dataset column and
    /// 4-decimal IOU / BIOU columns. Exactly one header line plus one line
    /// per row.
    pub fn text_table(&self) -> String {
        let label_w =
            self.rows.iter().map(|r| r.label.len()).chain([13]).max().expect("nonempty iterator");
        let mut out = format!("{:<label_w$}  {:>6}  {:>6}\n", "Model/Dataset", "IOU", "BIOU");
        for row in &self.rows {
            out.push_str(&format!(
                "{:<label_w$}  {:>6}  {:>6}\n",
                row.label,
                fmt_metric(row.iou),
                fmt_metric(row.biou)
            ));
        }
        out
    }

    /// Write `<stem>.jsonl`, `<stem>.txt` and `<stem>.meta.json` under `dir`.
    pub fn emit(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        if self.rows.is_empty() {
            return Err(Error::Eval("refusing to emit a report with no rows".into()));
        }
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let jsonl = dir.join(format!("{stem}.jsonl"));
        let mut lines = String::new();
        for row in &self.rows {
            lines.push_str(
                &serde_json::to_string(row).map_err(|e| Error::Eval(format!("row: {e}")))?,
            );
            lines.push('\n');
        }
        std::fs::write(&jsonl, lines).map_err(|e| Error::io(&jsonl, e))?;

        let txt = dir.join(format!("{stem}.txt"));
        std::fs::write(&txt, self.text_table()).map_err(|e| Error::io(&txt, e))?;

        let meta = dir.join(format!("{stem}.meta.json"));
        let meta_text = serde_json::to_string_pretty(&self.meta)
            .map_err(|e| Error::Eval(format!("meta: {e}")))?;
        std::fs::write(&meta, meta_text).map_err(|e| Error::io(&meta, e))?;
        Ok(vec![jsonl, txt, meta])
    }

    /// Read back what `emit` wrote.
    pub fn parse(dir: &Path, stem: &str) -> Result<MetricsReport> {
        let jsonl = dir.join(format!("{stem}.jsonl"));
        let text = std::fs::read_to_string(&jsonl).map_err(|e| Error::io(&jsonl, e))?;
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            rows.push(
                serde_json::from_str(line)
                    .map_err(|e| Error::format(&jsonl, format!("line {}: {e}", i + 1)))?,
            );
        }
        let meta_path = dir.join(format!("{stem}.meta.json"));
        let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta = serde_json::from_str(&meta_text)
            .map_err(|e| Error::format(&meta_path, e.to_string()))?;
        Ok(MetricsReport { rows, meta })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo() -> MetricsReport {
        MetricsReport {
            rows: vec![
                ReportRow {
                    label: "synthetic".into(),
                    iou: Some(0.8012),
                    biou: Some(0.6213),
                    n: 40,
                    skipped: 1,
                },
                ReportRow {
                    label: "floodnet".into(),
                    iou: Some(0.5031),
                    biou: Some(0.4012),
                    n: 12,
                    skipped: 0,
                },
            ],
            meta: ReportMeta {
                checkpoint: "ck_final.ckpt".into(),
                corpus: "storeA".into(),
                band_d: 7,
                averaging: "micro".into(),
                timestamp: "2026-01-01T00:00:00Z".into(),
            },
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let dir = std::env::temp_dir().join("buildseg_report_tests/rt");
        let _ = std::fs::remove_dir_all(&dir);
        let report = demo();
        report.emit(&dir, "report").unwrap();
        let back = MetricsReport::parse(&dir, "report").unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn emit_is_byte_deterministic() {
        let base = std::env::temp_dir().join("buildseg_report_tests/bytes");
        let _ = std::fs::remove_dir_all(&base);
        let report = demo();
        report.emit(&base.join("one"), "report").unwrap();
        report.emit(&base.join("two"), "report").unwrap();
        for name in ["report.jsonl", "report.txt", "report.meta.json"] {
            assert_eq!(
                std::fs::read(base.join("one").join(name)).unwrap(),
                std::fs::read(base.join("two").join(name)).unwrap(),
                "{name}"
            );
        }
    }

    #[test]
    fn table_has_header_plus_one_line_per_row() {
        let report = demo();
        let table = report.text_table();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 1 + report.rows.len());
        assert!(lines[0].starts_with("Model/Dataset"));
        assert!(lines[0].contains("IOU") && lines[0].contains("BIOU"));
    }

    #[test]
    fn metrics_print_with_four_decimals() {
        let table = demo().text_table();
        assert!(table.contains("0.8012"), "{table}");
        assert!(table.contains("0.6213"), "{table}");
        assert!(table.contains("0.5031"), "{table}");
        // Full-precision score renders as 1.0000.
        let mut r = demo();
        r.rows[0].iou = Some(1.0);
        assert!(r.text_table().contains("1.0000"));
    }

    #[test]
    fn undefined_metrics_render_as_dash() {
        let mut r = demo();
        r.rows[0].iou = None;
        r.rows[0].biou = None;
        let table = r.text_table();
        let line = table.lines().nth(1).unwrap();
        assert!(line.contains('-'), "{line}");
        // And they survive serialization as null.
        let dir = std::env::temp_dir().join("buildseg_report_tests/undef");
        let _ = std::fs::remove_dir_all(&dir);
        r.emit(&dir, "report").unwrap();
        assert_eq!(MetricsReport::parse(&dir, "report").unwrap(), r);
    }

    #[test]
    fn labels_wider_than_header_keep_alignment() {
        let mut r = demo();
        r.rows[0].label = "a-very-long-dataset-label".into();
        let table = r.text_table();
        let lines: Vec<&str> = table.lines().collect();
        let iou_col = lines[0].find("IOU").unwrap();
        for line in &lines[1..] {
            assert!(line.len() >= iou_col + 3, "{line}");
        }
    }

    #[test]
    fn empty_report_is_rejected() {
        let mut r = demo();
        r.rows.clear();
        let dir = std::env::temp_dir().join("buildseg_report_tests/empty");
        assert!(r.emit(&dir, "report").is_err());
    }
}
