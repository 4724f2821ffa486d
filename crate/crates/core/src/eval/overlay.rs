//! Red prediction overlays and their dependency-free image format.
//!
//! An overlay blends pure red into the source wherever the mask predicts
//! building: `out = (1-alpha)*src + alpha*(255,0,0)`, rounded half-up.
//! Overlays are written as binary PPM (P6), readable by any image viewer
//! without pulling in a codec.

use std::path::Path;

use crate::data::ImageBuf;
use crate::error::{Error, Result};
use crate::metrics::Mask;

/// Blend red into masked pixels. `alpha` = 0 returns the source unchanged;
/// `alpha` = 1 paints masked pixels pure red.
pub fn render_overlay(image: &ImageBuf, mask: &Mask, alpha: f64) -> Result<ImageBuf> {
    if image.width() != mask.width() || image.height() != mask.height() {
        return Err(Error::Eval(format!(
            "overlay dimensions differ: image {}x{}, mask {}x{}",
            image.width(),
            image.height(),
            mask.width(),
            mask.height()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Eval(format!("alpha {alpha} outside [0, 1]")));
    }
    let blend = |src: u8, target: f64| -> u8 {
        // Round half up; operands are nonnegative so this is floor(x + 0.5).
        ((1.0 - alpha) * f64::from(src) + alpha * target + 0.5).floor() as u8
    };
    let mut out = image.clone();
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) == 1 {
                let [r, g, b] = image.pixel(x, y);
                out.set_pixel(x, y, [blend(r, 255.0), blend(g, 0.0), blend(b, 0.0)]);
            }
        }
    }
    Ok(out)
}

/// Write binary PPM: `P6\n<w> <h>\n255\n` followed by raw RGB bytes.
pub fn write_ppm(image: &ImageBuf, path: &Path) -> Result<()> {
    let mut bytes = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    bytes.extend_from_slice(image.data());
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Read the PPM subset `write_ppm` produces (binary, maxval 255, `#`
/// comments allowed in the header).
pub fn read_ppm(path: &Path) -> Result<ImageBuf> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::format(path, msg.to_string());

    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<String> {
        // Skip whitespace and # comments.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(path, "truncated header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    if token(&bytes)? != "P6" {
        return Err(bad("not a binary PPM (P6)"));
    }
    let w: usize = token(&bytes)?.parse().map_err(|_| bad("bad width"))?;
    let h: usize = token(&bytes)?.parse().map_err(|_| bad("bad height"))?;
    let maxval: usize = token(&bytes)?.parse().map_err(|_| bad("bad maxval"))?;
    if maxval != 255 {
        return Err(bad("only maxval 255 is supported"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(bad("missing raster separator"));
    }
    pos += 1;
    let need = w * h * 3;
    if bytes.len() - pos != need {
        return Err(Error::format(
            path,
            format!("raster has {} bytes, expected {need}", bytes.len() - pos),
        ));
    }
    ImageBuf::new(w, h, bytes[pos..].to_vec())
}
