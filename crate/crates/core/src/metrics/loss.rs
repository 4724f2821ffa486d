//! Segmentation loss: mean softmax cross-entropy of [2, h, w] logits against
//! a binary mask, optionally restricted to the valid region of a padded
//! patch so reflected filler pixels never contribute gradient.

use super::mask::{Mask, Rect};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{NodeId, Tape};

fn check_logits<S: Scalar>(tape: &Tape<S>, logits: NodeId, target: &Mask) -> Result<()> {
    let shape = tape.shape(logits);
    if shape != [2, target.height(), target.width()] {
        return Err(Error::ShapeMismatch {
            op: "cross_entropy",
            lhs: shape.to_vec(),
            rhs: vec![2, target.height(), target.width()],
        });
    }
    Ok(())
}

/// Mean cross-entropy over every pixel.
pub fn cross_entropy<S: Scalar>(
    tape: &mut Tape<S>,
    logits: NodeId,
    target: &Mask,
) -> Result<NodeId> {
    check_logits(tape, logits, target)?;
    tape.softmax_cross_entropy(logits, target.data(), None)
}

/// Mean cross-entropy over the pixels inside `region` only.
pub fn cross_entropy_in_region<S: Scalar>(
    tape: &mut Tape<S>,
    logits: NodeId,
    target: &Mask,
    region: Rect,
) -> Result<NodeId> {
    check_logits(tape, logits, target)?;
    region.check_within(target.width(), target.height(), "cross_entropy")?;
    if region.w == target.width() && region.h == target.height() {
        return tape.softmax_cross_entropy(logits, target.data(), None);
    }
    let mut weights = vec![S::zero(); target.width() * target.height()];
    for y in region.y..region.y + region.h {
        let row = y * target.width();
        for w in weights[row + region.x..row + region.x + region.w].iter_mut() {
            *w = S::one();
        }
    }
    tape.softmax_cross_entropy(logits, target.data(), Some(&weights))
}
