//! Self-vs-fusion ablation: train twin models from identical seeds, one on
//! corpus A alone and one on A plus B, then evaluate both on A's held-out
//! test split and report the delta.

use crate::data::{PatchStore, Split};
use crate::error::{Error, Result};
use crate::eval::evaluate::{evaluate, EvalOptions};
use crate::eval::predictor::ModelPredictor;
use crate::eval::report::{MetricsReport, ReportRow};
use crate::model::{Checkpoint, Model, ModelConfig};
use crate::scalar::Scalar;
use crate::train::{train_loop, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    /// Exactly two rows, labeled `self` and `fusion`, evaluated on the same
    /// test manifest.
    pub report: MetricsReport,
    pub iou_delta: Option<f64>,
    pub biou_delta: Option<f64>,
}

impl AblationReport {
    pub fn self_row(&self) -> &ReportRow {
        &self.report.rows[0]
    }

    pub fn fusion_row(&self) -> &ReportRow {
        &self.report.rows[1]
    }
}

#[derive(Debug)]
pub struct AblationOutcome {
    pub report: AblationReport,
    pub self_checkpoint: Checkpoint,
    pub fusion_checkpoint: Checkpoint,
}

fn check_disjoint_splits(store: &PatchStore) -> Result<()> {
    let ids = |split: Split| -> std::collections::BTreeSet<&str> {
        store.entries_for_split(split).iter().map(|e| e.id.as_str()).collect()
    };
    let train = ids(Split::Train);
    let test = ids(Split::Test);
    if let Some(id) = train.intersection(&test).next() {
        return Err(Error::Eval(format!(
            "record {id:?} appears in both train and test splits of {}",
            store.root().display()
        )));
    }
    Ok(())
}

fn single_row(report: &MetricsReport, label: &str) -> Result<ReportRow> {
    // A's test split carries a single dataset tag, so evaluation produced
    // exactly one row; anything else means a malformed corpus.
    if report.rows.len() != 1 {
        return Err(Error::Eval(format!(
            "expected one dataset in the ablation test split, found {}",
            report.rows.len()
        )));
    }
    Ok(ReportRow { label: label.to_string(), ..report.rows[0].clone() })
}

/// Train self (A) and fusion (A union B) models with identical seeds and
/// budgets, evaluate both on A's test split, and report rows plus deltas.
pub fn run_ablation<S: Scalar>(
    store_a: &PatchStore,
    store_b: &PatchStore,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    init_seed: u64,
    eval_opts: &EvalOptions,
) -> Result<AblationOutcome> {
    check_disjoint_splits(store_a)?;
    check_disjoint_splits(store_b)?;

    let mut self_model = Model::<S>::init(model_cfg.clone(), init_seed)?;
    let self_out = train_loop(&mut self_model, &[store_a], train_cfg, None)?;

    let mut fusion_model = Model::<S>::init(model_cfg.clone(), init_seed)?;
    let fusion_out = train_loop(&mut fusion_model, &[store_a, store_b], train_cfg, None)?;

    let self_report = evaluate(
        &ModelPredictor::new(self_model, "self"),
        &[store_a],
        Split::Test,
        eval_opts,
        None,
    )?;
    let fusion_report = evaluate(
        &ModelPredictor::new(fusion_model, "fusion"),
        &[store_a],
        Split::Test,
        eval_opts,
        None,
    )?;

    let self_row = single_row(&self_report, "self")?;
    let fusion_row = single_row(&fusion_report, "fusion")?;
    let delta = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => Some(b - a),
        _ => None,
    };
    let iou_delta = delta(self_row.iou, fusion_row.iou);
    let biou_delta = delta(self_row.biou, fusion_row.biou);

    let mut meta = self_report.meta.clone();
    meta.checkpoint = "self,fusion".into();
    let report = AblationReport {
        report: MetricsReport { rows: vec![self_row, fusion_row], meta },
        iou_delta,
        biou_delta,
    };
    Ok(AblationOutcome {
        report,
        self_checkpoint: self_out.checkpoint,
        fusion_checkpoint: fusion_out.checkpoint,
    })
}
