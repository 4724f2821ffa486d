//! The pipeline's atomic unit: a 256x256 image crop with its aligned binary
//! mask and enough provenance to reassemble the source.

use serde::{Deserialize, Serialize};

use crate::data::image_buf::ImageBuf;
use crate::error::{Error, Result};
use crate::metrics::{Mask, Rect};
use crate::scalar::{from_f64, Scalar};
use crate::tensor::Tensor;

/// Side length of every stored patch, in pixels.
pub const PATCH_SIZE: usize = 256;

/// Where a patch came from: its source record and grid position, plus the
/// rectangle of pixels that existed before padding. Only the valid region
/// contributes to loss and metrics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub record_id: String,
    pub tile_row: usize,
    pub tile_col: usize,
    pub valid: Rect,
}

/// One aligned image/mask patch.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchPair {
    pub image: ImageBuf,
    pub mask: Mask,
    pub provenance: Provenance,
}

impl PatchPair {
    pub fn new(image: ImageBuf, mask: Mask, provenance: Provenance) -> Result<Self> {
        let side = image.width() == PATCH_SIZE
            && image.height() == PATCH_SIZE
            && mask.width() == PATCH_SIZE
            && mask.height() == PATCH_SIZE;
        if !side {
            return Err(Error::Data(format!(
                "patch must be {PATCH_SIZE}x{PATCH_SIZE}, got image {}x{} mask {}x{}",
                image.width(),
                image.height(),
                mask.width(),
                mask.height()
            )));
        }
        provenance.valid.check_within(PATCH_SIZE, PATCH_SIZE, "patch valid region")?;
        if provenance.valid.area() == 0 {
            return Err(Error::Data(format!(
                "patch {} ({},{}) has an empty valid region",
                provenance.record_id, provenance.tile_row, provenance.tile_col
            )));
        }
        Ok(Self { image, mask, provenance })
    }

    pub fn is_fully_valid(&self) -> bool {
        self.provenance.valid == Rect::full(PATCH_SIZE, PATCH_SIZE)
    }

    /// Building pixels inside the valid region.
    pub fn building_pixels(&self) -> u64 {
        let v = self.provenance.valid;
        let mut n = 0u64;
        for y in v.y..v.y + v.h {
            for x in v.x..v.x + v.w {
                n += u64::from(self.mask.get(x, y));
            }
        }
        n
    }

    /// Mirror left-right. Valid regions hug the left edge for freshly tiled
    /// patches; after a flip they hug the right edge instead, so the
    /// rectangle moves with the pixels.
    pub fn flipped_horizontal(&self) -> PatchPair {
        let w = PATCH_SIZE;
        let mut image = ImageBuf::zeros(w, w);
        let mut mask = Mask::zeros(w, w);
        for y in 0..w {
            for x in 0..w {
                image.set_pixel(w - 1 - x, y, self.image.pixel(x, y));
                mask.set(w - 1 - x, y, self.mask.get(x, y));
            }
        }
        let v = self.provenance.valid;
        let valid = Rect::new(w - v.x - v.w, v.y, v.w, v.h);
        PatchPair { image, mask, provenance: Provenance { valid, ..self.provenance.clone() } }
    }
}

/// Convert interleaved RGB bytes to a `[3, h, w]` tensor scaled to [0,1].
pub fn image_to_tensor<S: Scalar>(image: &ImageBuf) -> Tensor<S> {
    let (w, h) = (image.width(), image.height());
    let n = w * h;
    let mut data = vec![S::zero(); 3 * n];
    for (i, px) in image.data().chunks_exact(3).enumerate() {
        for c in 0..3 {
            data[c * n + i] = from_f64::<S>(f64::from(px[c]) / 255.0);
        }
    }
    Tensor::new(vec![3, h, w], data).expect("image tensor shape is consistent")
}

/// Mask values as 0/1 targets in row-major order.
pub fn mask_to_targets(mask: &Mask) -> Vec<u8> {
    mask.data().to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_patch() -> PatchPair {
        let mut image = ImageBuf::zeros(PATCH_SIZE, PATCH_SIZE);
        image.set_pixel(3, 2, [255, 0, 51]);
        let mut mask = Mask::zeros(PATCH_SIZE, PATCH_SIZE);
        mask.set(3, 2, 1);
        PatchPair::new(
            image,
            mask,
            Provenance {
                record_id: "synthetic_s".into(),
                tile_row: 0,
                tile_col: 0,
                valid: Rect::full(PATCH_SIZE, PATCH_SIZE),
            },
        )
        .unwrap()
    }

    #[test]
    fn dimensions_are_enforced() {
        let image = ImageBuf::zeros(128, 128);
        let mask = Mask::zeros(128, 128);
        let prov = Provenance {
            record_id: "x".into(),
            tile_row: 0,
            tile_col: 0,
            valid: Rect::full(128, 128),
        };
        assert!(PatchPair::new(image, mask, prov).is_err());
    }

    #[test]
    fn empty_valid_region_is_rejected() {
        let prov = Provenance {
            record_id: "x".into(),
            tile_row: 0,
            tile_col: 0,
            valid: Rect::new(0, 0, 0, 10),
        };
        assert!(PatchPair::new(
            ImageBuf::zeros(PATCH_SIZE, PATCH_SIZE),
            Mask::zeros(PATCH_SIZE, PATCH_SIZE),
            prov
        )
        .is_err());
    }

    #[test]
    fn tensor_is_channel_major_and_unit_scaled() {
        let patch = full_patch();
        let t = image_to_tensor::<f64>(&patch.image);
        assert_eq!(t.shape(), &[3, PATCH_SIZE, PATCH_SIZE]);
        let n = PATCH_SIZE * PATCH_SIZE;
        let i = 2 * PATCH_SIZE + 3;
        assert_eq!(t.data()[i], 1.0);
        assert_eq!(t.data()[n + i], 0.0);
        assert_eq!(t.data()[2 * n + i], 51.0 / 255.0);
    }

    #[test]
    fn horizontal_flip_moves_pixels_and_valid_region() {
        let mut patch = full_patch();
        patch.provenance.valid = Rect::new(0, 0, 100, 256);
        let flipped = patch.flipped_horizontal();
        assert_eq!(flipped.image.pixel(PATCH_SIZE - 1 - 3, 2), [255, 0, 51]);
        assert_eq!(flipped.mask.get(PATCH_SIZE - 1 - 3, 2), 1);
        assert_eq!(flipped.provenance.valid, Rect::new(156, 0, 100, 256));
        // Flipping twice is the identity.
        assert_eq!(flipped.flipped_horizontal(), patch);
    }

    #[test]
    fn building_pixels_counts_only_valid_region() {
        let mut patch = full_patch();
        patch.mask.set(200, 200, 1);
        patch.provenance.valid = Rect::new(0, 0, 100, 100);
        assert_eq!(patch.building_pixels(), 1);
    }
}
