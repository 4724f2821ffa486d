//! Binary masks, region-of-interest rectangles, IoU and boundary IoU with
//! streaming accumulation, and the segmentation cross-entropy loss.

mod boundary;
mod iou;
mod loss;
mod mask;

pub use boundary::{boundary_band, erode4, BoundaryBand};
pub use iou::{boundary_iou, default_band_width, mask_iou, ConfusionCounts};
pub use loss::{cross_entropy, cross_entropy_in_region};
pub use mask::{Mask, Rect};
