//! Tiling sources into the uniform patch grid.
//!
//! Sources rarely divide evenly by 256, so the image is reflect-padded on the
//! right and bottom up to the next multiple (the mask is padded with
//! background instead, padding must never invent buildings). Each patch
//! remembers its valid region; reassembling those regions reproduces the
//! source mask exactly.

use crate::data::image_buf::ImageBuf;
use crate::data::patch::{PatchPair, Provenance, PATCH_SIZE};
use crate::error::{Error, Result};
use crate::metrics::{Mask, Rect};

/// Tiles needed to cover `len` source pixels.
pub fn tiles_along(len: usize) -> usize {
    len.div_ceil(PATCH_SIZE)
}

/// Patch count for an H x W source.
pub fn patch_count(width: usize, height: usize) -> usize {
    tiles_along(width) * tiles_along(height)
}

/// Reflection index without edge repetition: for a row `abcd`, padding reads
/// `abcd cb a b...`. Sources narrower than the pad length keep folding.
fn reflect_index(i: usize, len: usize) -> usize {
    debug_assert!(len > 0);
    if len == 1 {
        return 0;
    }
    let period = 2 * len - 2;
    let m = i % period;
    if m < len {
        m
    } else {
        period - m
    }
}

/// Cut one source into PatchPairs, reflect-padding the image and
/// zero-padding the mask to the tile grid.
pub fn tile_to_patches(record_id: &str, image: &ImageBuf, mask: &Mask) -> Result<Vec<PatchPair>> {
    let (w, h) = (image.width(), image.height());
    if mask.width() != w || mask.height() != h {
        return Err(Error::Data(format!(
            "image {w}x{h} and mask {}x{} differ for record {record_id}",
            mask.width(),
            mask.height()
        )));
    }
    if w == 0 || h == 0 {
        return Err(Error::Data(format!("record {record_id} has an empty image")));
    }

    let rows = tiles_along(h);
    let cols = tiles_along(w);
    let mut patches = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let x0 = c * PATCH_SIZE;
            let y0 = r * PATCH_SIZE;
            let mut img = ImageBuf::zeros(PATCH_SIZE, PATCH_SIZE);
            let mut msk = Mask::zeros(PATCH_SIZE, PATCH_SIZE);
            for y in 0..PATCH_SIZE {
                let sy = reflect_index(y0 + y, h);
                let my = y0 + y;
                for x in 0..PATCH_SIZE {
                    let sx = reflect_index(x0 + x, w);
                    img.set_pixel(x, y, image.pixel(sx, sy));
                    let mx = x0 + x;
                    if mx < w && my < h {
                        msk.set(x, y, mask.get(mx, my));
                    }
                }
            }
            let valid = Rect::new(0, 0, PATCH_SIZE.min(w - x0), PATCH_SIZE.min(h - y0));
            patches.push(PatchPair::new(
                img,
                msk,
                Provenance { record_id: record_id.to_string(), tile_row: r, tile_col: c, valid },
            )?);
        }
    }
    Ok(patches)
}

/// Stitch the valid regions of a source's patches back into the original
/// mask. Used by tests and store verification; the inverse of tiling.
pub fn reassemble_mask(width: usize, height: usize, patches: &[PatchPair]) -> Result<Mask> {
    let mut out = Mask::zeros(width, height);
    let mut covered = vec![false; width * height];
    for p in patches {
        let v = p.provenance.valid;
        let x0 = p.provenance.tile_col * PATCH_SIZE;
        let y0 = p.provenance.tile_row * PATCH_SIZE;
        for y in v.y..v.y + v.h {
            for x in v.x..v.x + v.w {
                let (gx, gy) = (x0 + x, y0 + y);
                if gx >= width || gy >= height {
                    return Err(Error::Data(format!(
                        "patch ({},{}) valid region exceeds source {width}x{height}",
                        p.provenance.tile_row, p.provenance.tile_col
                    )));
                }
                out.set(gx, gy, p.mask.get(x, y));
                covered[gy * width + gx] = true;
            }
        }
    }
    if covered.iter().any(|c| !c) {
        return Err(Error::Data("patches do not cover the source extent".into()));
    }
    Ok(out)
}
