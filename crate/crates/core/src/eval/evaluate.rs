//! Dataset evaluation: run a predictor over a split, crop to valid regions,
//! accumulate confusion counts per dataset, and shape the result into a
//! report.
//!
//! Accumulation is commutative: micro-averaging pools exact integer counts,
//! and per-image averaging sorts the collected scores before summing, so
//! shuffling the manifest cannot change the report.

use std::collections::BTreeMap;

use crate::data::{ManifestEntry, PatchPair, PatchStore, Split};
use crate::error::{Error, Result};
use crate::eval::predictor::Predictor;
use crate::eval::report::{MetricsReport, ReportMeta, ReportRow};
use crate::metrics::{default_band_width, mask_iou, ConfusionCounts, Mask};

/// Dataset-level metric composition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    /// Pool pixel counts, then divide once (exact integer accumulation).
    Micro,
    /// Mean of per-patch scores, undefined pairs skipped.
    PerImage,
}

impl Averaging {
    pub fn as_str(self) -> &'static str {
        match self {
            Averaging::Micro => "micro",
            Averaging::PerImage => "per-image",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "micro" => Ok(Averaging::Micro),
            "per-image" => Ok(Averaging::PerImage),
            other => Err(Error::Eval(format!("unknown averaging mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Boundary band parameter; None picks the patch-size default (7 for
    /// 256x256).
    pub band_d: Option<usize>,
    pub averaging: Averaging,
    /// Recorded in report metadata; supplied by the caller so evaluation
    /// itself stays deterministic.
    pub timestamp: String,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { band_d: None, averaging: Averaging::Micro, timestamp: String::new() }
    }
}

/// Per-patch hook for overlay writing or any other side channel. Receives
/// the manifest entry, the loaded patch, and the (uncropped) prediction.
pub type PatchSink<'a> = &'a mut dyn FnMut(&ManifestEntry, &PatchPair, &Mask) -> Result<()>;

#[derive(Debug, Default)]
struct GroupAcc {
    counts: ConfusionCounts,
    iou_scores: Vec<f64>,
    biou_scores: Vec<f64>,
    n: u64,
    skipped: u64,
}

/// Sum after sorting, so accumulation order cannot perturb low bits.
fn stable_mean(scores: &mut Vec<f64>) -> Option<f64> {
    if scores.is_empty() {
        return None;
    }
    scores.sort_by(f64::total_cmp);
    Some(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Evaluate `predictor` on the `split` patches of the given stores. One
/// report row per dataset tag, rows sorted by tag.
pub fn evaluate(
    predictor: &dyn Predictor,
    stores: &[&PatchStore],
    split: Split,
    opts: &EvalOptions,
    mut sink: Option<PatchSink<'_>>,
) -> Result<MetricsReport> {
    if stores.is_empty() {
        return Err(Error::Eval("no stores to evaluate".into()));
    }
    let mut groups: BTreeMap<String, GroupAcc> = BTreeMap::new();
    let mut evaluated = 0usize;
    for store in stores {
        for entry in store.entries_for_split(split) {
            let patch = store.load_entry(entry)?;
            let prediction = predictor.predict(&patch)?;
            if !prediction.same_dims(&patch.mask) {
                return Err(Error::Eval(format!(
                    "predictor returned {}x{} for a {}x{} patch",
                    prediction.width(),
                    prediction.height(),
                    patch.mask.width(),
                    patch.mask.height()
                )));
            }
            let valid = patch.provenance.valid;
            let pred = prediction.crop(valid)?;
            let truth = patch.mask.crop(valid)?;
            let d = opts.band_d.unwrap_or_else(|| default_band_width(valid.w, valid.h));
            let acc = groups.entry(entry.dataset.to_string()).or_default();
            acc.n += 1;
            match opts.averaging {
                Averaging::Micro => {
                    acc.counts.accumulate(&pred, &truth, d)?;
                }
                Averaging::PerImage => {
                    let mut pair = ConfusionCounts::default();
                    pair.accumulate(&pred, &truth, d)?;
                    match (pair.iou(), pair.biou()) {
                        (Some(iou), Some(biou)) => {
                            acc.iou_scores.push(iou);
                            acc.biou_scores.push(biou);
                        }
                        _ => acc.skipped += 1,
                    }
                }
            }
            if let Some(sink) = sink.as_mut() {
                sink(entry, &patch, &prediction)?;
            }
            evaluated += 1;
        }
    }
    if evaluated == 0 {
        return Err(Error::Eval(format!("no patches in the {split} split")));
    }

    let band_d = opts.band_d.unwrap_or_else(|| {
        default_band_width(crate::data::PATCH_SIZE, crate::data::PATCH_SIZE)
    });
    let rows = groups
        .into_iter()
        .map(|(label, mut acc)| match opts.averaging {
            Averaging::Micro => ReportRow {
                label,
                iou: acc.counts.iou(),
                biou: acc.counts.biou(),
                n: acc.n,
                skipped: acc.counts.skipped,
            },
            Averaging::PerImage => ReportRow {
                label,
                iou: stable_mean(&mut acc.iou_scores),
                biou: stable_mean(&mut acc.biou_scores),
                n: acc.n,
                skipped: acc.skipped,
            },
        })
        .collect();

    let corpus = stores
        .iter()
        .map(|s| s.root().display().to_string())
        .collect::<Vec<_>>()
        .join(",");
    Ok(MetricsReport {
        rows,
        meta: ReportMeta {
            checkpoint: predictor.label(),
            corpus,
            band_d,
            averaging: opts.averaging.as_str().into(),
            timestamp: opts.timestamp.clone(),
        },
    })
}

/// Convenience for tests and the sanity oracle: mask-level IoU of two
/// in-memory masks (proxied here so callers need one import).
pub fn pair_iou(a: &Mask, b: &Mask) -> Result<Option<f64>> {
    mask_iou(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{
        generate_synthetic, fuse_corpora, CorpusSource, SynthDomain,
    };
    use crate::eval::predictor::{ConstantPredictor, EchoPredictor, InvertedPredictor};
    use std::path::PathBuf;

    fn temp_root(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("buildseg_eval_tests").join(name);
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn store_with(n: usize, seed: u64, name: &str) -> PatchStore {
        let base = temp_root(name);
        let corpus = base.join("corpus");
        generate_synthetic(&corpus, seed, n, SynthDomain::A).unwrap();
        let src = CorpusSource::discover(&corpus).unwrap();
        fuse_corpora(&[src], &base.join("store"), 7).unwrap();
        PatchStore::open(&base.join("store")).unwrap()
    }

    #[test]
    fn echo_scores_one_and_inverted_scores_zero() {
        let store = store_with(6, 3, "echo");
        let opts = EvalOptions::default();
        let report = evaluate(&EchoPredictor, &[&store], Split::Train, &opts, None).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.rows[0].label, "synthetic");
        assert_eq!(report.rows[0].iou, Some(1.0));
        assert_eq!(report.rows[0].biou, Some(1.0));

        let inv = evaluate(&InvertedPredictor, &[&store], Split::Train, &opts, None).unwrap();
        assert_eq!(inv.rows[0].iou, Some(0.0));
    }

    #[test]
    fn all_background_scores_zero_iou() {
        let store = store_with(6, 4, "allbg");
        let report = evaluate(
            &ConstantPredictor(0),
            &[&store],
            Split::Train,
            &EvalOptions::default(),
            None,
        )
        .unwrap();
        // Synthetic scenes contain buildings, so the union is nonzero.
        assert_eq!(report.rows[0].iou, Some(0.0));
        assert_eq!(report.rows[0].biou, Some(0.0));
    }

    #[test]
    fn per_image_averaging_also_scores_one_for_echo() {
        let store = store_with(5, 5, "perimage");
        let opts = EvalOptions {
            averaging: Averaging::PerImage,
            ..EvalOptions::default()
        };
        let report = evaluate(&EchoPredictor, &[&store], Split::Train, &opts, None).unwrap();
        assert_eq!(report.rows[0].iou, Some(1.0));
        assert_eq!(report.meta.averaging, "per-image");
    }

    #[test]
    fn sink_sees_every_patch() {
        let store = store_with(4, 6, "sink");
        let mut seen = 0usize;
        let mut sink = |entry: &ManifestEntry, patch: &PatchPair, pred: &Mask| {
            assert_eq!(entry.id, patch.provenance.record_id);
            assert_eq!(pred.width(), patch.mask.width());
            seen += 1;
            Ok(())
        };
        let n = store.entries_for_split(Split::Train).len();
        evaluate(
            &EchoPredictor,
            &[&store],
            Split::Train,
            &EvalOptions::default(),
            Some(&mut sink),
        )
        .unwrap();
        assert_eq!(seen, n);
    }

    #[test]
    fn empty_split_is_an_error() {
        let store = store_with(1, 8, "empty_split");
        // One scene lands in exactly one split; at least one of the others
        // is empty.
        let empty = Split::ALL
            .into_iter()
            .find(|s| store.entries_for_split(*s).is_empty())
            .expect("single scene cannot populate all splits");
        assert!(evaluate(&EchoPredictor, &[&store], empty, &EvalOptions::default(), None).is_err());
    }

    #[test]
    fn report_is_order_independent() {
        // Same patches, two stores listed in either order: identical rows.
        let a = store_with(3, 9, "order_a");
        let b = store_with(3, 10, "order_b");
        let opts = EvalOptions::default();
        let ab = evaluate(&EchoPredictor, &[&a, &b], Split::Train, &opts, None).unwrap();
        let ba = evaluate(&EchoPredictor, &[&b, &a], Split::Train, &opts, None).unwrap();
        assert_eq!(ab.rows, ba.rows);
    }
}
