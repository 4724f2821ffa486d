//! Evaluation and reporting: predictors, dataset metrics, result tables,
//! overlays, and the self-vs-fusion ablation.

mod ablate;
mod evaluate;
mod overlay;
mod predictor;
mod report;

pub use ablate::{run_ablation, AblationOutcome, AblationReport};
pub use evaluate::{evaluate, pair_iou, Averaging, EvalOptions, PatchSink};
pub use overlay::{read_ppm, render_overlay, write_ppm};
pub use predictor::{ConstantPredictor, EchoPredictor, InvertedPredictor, ModelPredictor, Predictor};
pub use report::{MetricsReport, ReportMeta, ReportRow};
