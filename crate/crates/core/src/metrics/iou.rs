//! IoU and boundary IoU. Per-pair scores are `None` when both masks are
//! empty; corpus-level scores come from integer confusion counts so
//! accumulation order and merging cannot change the result.

use super::boundary::boundary_band;
use super::mask::Mask;
use crate::error::{Error, Result};

fn check_dims(a: &Mask, b: &Mask, op: &'static str) -> Result<()> {
    if !a.same_dims(b) {
        return Err(Error::ShapeMismatch {
            op,
            lhs: vec![a.height(), a.width()],
            rhs: vec![b.height(), b.width()],
        });
    }
    Ok(())
}

fn counts(a: &Mask, b: &Mask) -> (u64, u64) {
    let mut inter = 0u64;
    let mut union = 0u64;
    for (&x, &y) in a.data().iter().zip(b.data()) {
        inter += (x & y) as u64;
        union += (x | y) as u64;
    }
    (inter, union)
}

/// Intersection over union; `None` when both masks are empty.
pub fn mask_iou(a: &Mask, b: &Mask) -> Result<Option<f64>> {
    check_dims(a, b, "iou")?;
    let (i, u) = counts(a, b);
    Ok((u > 0).then(|| i as f64 / u as f64))
}

/// IoU restricted to the d-wide boundary bands of the two masks.
pub fn boundary_iou(a: &Mask, b: &Mask, d: usize) -> Result<Option<f64>> {
    check_dims(a, b, "boundary_iou")?;
    let ba = boundary_band(a, d)?.band;
    let bb = boundary_band(b, d)?.band;
    let (i, u) = counts(&ba, &bb);
    Ok((u > 0).then(|| i as f64 / u as f64))
}

/// Default band width: 2% of the image diagonal, at least one pixel.
pub fn default_band_width(height: usize, width: usize) -> usize {
    let diag = ((height * height + width * width) as f64).sqrt();
    ((0.02 * diag).round() as usize).max(1)
}

/// Integer accumulator for corpus-level IoU and boundary IoU.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub intersection: u64,
    pub union: u64,
    pub band_intersection: u64,
    pub band_union: u64,
    pub defined: u64,
    pub skipped: u64,
}

impl ConfusionCounts {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one prediction/reference pair. A pair with two empty masks is
    /// undefined and only bumps the skip counter.
    pub fn accumulate(&mut self, pred: &Mask, reference: &Mask, d: usize) -> Result<()> {
        check_dims(pred, reference, "confusion")?;
        let (i, u) = counts(pred, reference);
        if u == 0 {
            self.skipped += 1;
            return Ok(());
        }
        let bp = boundary_band(pred, d)?.band;
        let br = boundary_band(reference, d)?.band;
        let (bi, bu) = counts(&bp, &br);
        self.intersection += i;
        self.union += u;
        self.band_intersection += bi;
        self.band_union += bu;
        self.defined += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        self.intersection += other.intersection;
        self.union += other.union;
        self.band_intersection += other.band_intersection;
        self.band_union += other.band_union;
        self.defined += other.defined;
        self.skipped += other.skipped;
    }

    /// Micro-averaged IoU over everything accumulated so far.
    pub fn iou(&self) -> Option<f64> {
        (self.union > 0).then(|| self.intersection as f64 / self.union as f64)
    }

    pub fn biou(&self) -> Option<f64> {
        (self.band_union > 0).then(|| self.band_intersection as f64 / self.band_union as f64)
    }
}
