//! Prediction sources for evaluation.
//!
//! The trait decouples metric plumbing from the model so the report path can
//! be exercised with oracle predictors: `echo` reproduces the ground truth
//! (must score exactly 1.0), `inverted` complements it (0.0 on any corpus
//! with both classes), `constant` paints one class everywhere.

use crate::data::{image_to_tensor, PatchPair};
use crate::error::Result;
use crate::metrics::Mask;
use crate::model::Model;
use crate::scalar::Scalar;

pub trait Predictor {
    /// Predict a full-patch mask; evaluation crops to the valid region.
    fn predict(&self, patch: &PatchPair) -> Result<Mask>;

    /// Identifier for report metadata.
    fn label(&self) -> String;
}

/// Argmax over a trained model's logits.
pub struct ModelPredictor<S: Scalar> {
    model: Model<S>,
    label: String,
}

impl<S: Scalar> ModelPredictor<S> {
    pub fn new(model: Model<S>, label: impl Into<String>) -> Self {
        Self { model, label: label.into() }
    }

    pub fn model(&self) -> &Model<S> {
        &self.model
    }
}

impl<S: Scalar> Predictor for ModelPredictor<S> {
    fn predict(&self, patch: &PatchPair) -> Result<Mask> {
        self.model.predict(&image_to_tensor::<S>(&patch.image))
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

/// Ground truth echoed back; the fidelity oracle.
pub struct EchoPredictor;

impl Predictor for EchoPredictor {
    fn predict(&self, patch: &PatchPair) -> Result<Mask> {
        Ok(patch.mask.clone())
    }

    fn label(&self) -> String {
        "echo".into()
    }
}

/// Ground truth complemented.
pub struct InvertedPredictor;

impl Predictor for InvertedPredictor {
    fn predict(&self, patch: &PatchPair) -> Result<Mask> {
        Ok(patch.mask.inverted())
    }

    fn label(&self) -> String {
        "inverted".into()
    }
}

/// The same class everywhere.
pub struct ConstantPredictor(pub u8);

impl Predictor for ConstantPredictor {
    fn predict(&self, patch: &PatchPair) -> Result<Mask> {
        Ok(Mask::from_fn(patch.mask.width(), patch.mask.height(), |_, _| self.0))
    }

    fn label(&self) -> String {
        format!("constant{}", self.0)
    }
}
