//! Byte image buffers and resampling.
//!
//! [`ImageBuf`] is row-major interleaved RGB, the exact layout of `.img`
//! patch files. [`LabelBuf`] is a single-channel grid of raw dataset labels
//! before class mapping. PNG is the only codec: sources and synthetic scenes
//! are PNG, patches are raw bytes.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{bilinear_forward, ResizeGeom};

/// Row-major interleaved RGB bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuf {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl ImageBuf {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::Data(format!(
                "rgb buffer for {width}x{height} needs {} bytes, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0; width * height * 3] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::format(path, format!("png decode: {e}")))?;
        let rgb = img.to_rgb8();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        Self::new(w, h, rgb.into_raw())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        image::save_buffer(
            path,
            &self.data,
            self.width as u32,
            self.height as u32,
            image::ColorType::Rgb8,
        )
        .map_err(|e| Error::format(path, format!("png encode: {e}")))
    }

    /// Bilinear resample to `out_w` x `out_h` (half-pixel centers). Channels
    /// are interpolated in f64 and rounded once, so the result is
    /// deterministic and identical across runs.
    pub fn rescale_bilinear(&self, out_w: usize, out_h: usize) -> Result<ImageBuf> {
        if out_w == 0 || out_h == 0 {
            return Err(Error::Data("rescale target must be nonzero".into()));
        }
        if out_w == self.width && out_h == self.height {
            return Ok(self.clone());
        }
        let geom = ResizeGeom {
            channels: 3,
            in_h: self.height,
            in_w: self.width,
            out_h,
            out_w,
            align_corners: false,
        };
        // Planes, because the resize kernel works channel-major.
        let n_in = self.width * self.height;
        let mut planes = vec![0f64; n_in * 3];
        for (i, px) in self.data.chunks_exact(3).enumerate() {
            planes[i] = f64::from(px[0]);
            planes[n_in + i] = f64::from(px[1]);
            planes[2 * n_in + i] = f64::from(px[2]);
        }
        let n_out = out_w * out_h;
        let mut out_planes = vec![0f64; n_out * 3];
        bilinear_forward(&planes, &geom, &mut out_planes);
        let mut data = vec![0u8; n_out * 3];
        for i in 0..n_out {
            for c in 0..3 {
                data[i * 3 + c] = out_planes[c * n_out + i].round().clamp(0.0, 255.0) as u8;
            }
        }
        ImageBuf::new(out_w, out_h, data)
    }
}

/// Single-channel grid of raw label values (pre class-mapping).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelBuf {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl LabelBuf {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Data(format!(
                "label buffer for {width}x{height} needs {} bytes, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::format(path, format!("png decode: {e}")))?;
        let gray = img.to_luma8();
        let (w, h) = (gray.width() as usize, gray.height() as usize);
        Self::new(w, h, gray.into_raw())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        image::save_buffer(
            path,
            &self.data,
            self.width as u32,
            self.height as u32,
            image::ColorType::L8,
        )
        .map_err(|e| Error::format(path, format!("png encode: {e}")))
    }

    /// Nearest-neighbour resample (half-pixel centers), the only rule that
    /// keeps label values closed under resampling.
    pub fn rescale_nearest(&self, out_w: usize, out_h: usize) -> Result<LabelBuf> {
        if out_w == 0 || out_h == 0 {
            return Err(Error::Data("rescale target must be nonzero".into()));
        }
        if out_w == self.width && out_h == self.height {
            return Ok(self.clone());
        }
        let pick = |i: usize, out_len: usize, in_len: usize| -> usize {
            let src = (i as f64 + 0.5) * in_len as f64 / out_len as f64;
            (src.floor() as usize).min(in_len - 1)
        };
        let mut data = vec![0u8; out_w * out_h];
        for y in 0..out_h {
            let sy = pick(y, out_h, self.height);
            for x in 0..out_w {
                let sx = pick(x, out_w, self.width);
                data[y * out_w + x] = self.data[sy * self.width + sx];
            }
        }
        LabelBuf::new(out_w, out_h, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient_image(w: usize, h: usize) -> ImageBuf {
        let mut img = ImageBuf::zeros(w, h);
        for y in 0..h {
            for x in 0..w {
                img.set_pixel(x, y, [(x * 7 % 256) as u8, (y * 13 % 256) as u8, 128]);
            }
        }
        img
    }

    #[test]
    fn buffer_length_is_validated() {
        assert!(ImageBuf::new(4, 4, vec![0; 48]).is_ok());
        assert!(ImageBuf::new(4, 4, vec![0; 47]).is_err());
        assert!(LabelBuf::new(4, 4, vec![0; 16]).is_ok());
        assert!(LabelBuf::new(4, 4, vec![0; 15]).is_err());
    }

    #[test]
    fn png_round_trip_is_lossless() {
        let dir = std::env::temp_dir().join("buildseg_imgbuf_test");
        std::fs::create_dir_all(&dir).unwrap();
        let img = gradient_image(20, 11);
        let p = dir.join("rt.png");
        img.save_png(&p).unwrap();
        assert_eq!(ImageBuf::load_png(&p).unwrap(), img);

        let labels = LabelBuf::new(9, 5, (0..45).map(|i| (i * 5 % 256) as u8).collect()).unwrap();
        let q = dir.join("rt_labels.png");
        labels.save_png(&q).unwrap();
        assert_eq!(LabelBuf::load_png(&q).unwrap(), labels);
    }

    #[test]
    fn bilinear_rescale_of_constant_is_constant() {
        let mut img = ImageBuf::zeros(8, 6);
        for y in 0..6 {
            for x in 0..8 {
                img.set_pixel(x, y, [40, 90, 200]);
            }
        }
        let up = img.rescale_bilinear(13, 9).unwrap();
        assert_eq!(up.width(), 13);
        assert_eq!(up.height(), 9);
        assert!(up.data().chunks_exact(3).all(|p| p == [40, 90, 200]));
    }

    #[test]
    fn bilinear_2x_upscale_known_values() {
        // One channel carries 0/100 in a 2x1 image; half-pixel sampling puts
        // the four output columns at fractions 0, 0.25, 0.75, 1.
        let img = ImageBuf::new(2, 1, vec![0, 0, 0, 100, 0, 0]).unwrap();
        let up = img.rescale_bilinear(4, 1).unwrap();
        let red: Vec<u8> = up.data().chunks_exact(3).map(|p| p[0]).collect();
        assert_eq!(red, vec![0, 25, 75, 100]);
    }

    #[test]
    fn nearest_rescale_preserves_label_set() {
        let labels = LabelBuf::new(10, 10, (0..100).map(|i| [0u8, 9, 17][i % 3]).collect()).unwrap();
        let down = labels.rescale_nearest(3, 7).unwrap();
        assert!(down.data().iter().all(|v| [0u8, 9, 17].contains(v)));
        let up = labels.rescale_nearest(23, 23).unwrap();
        assert!(up.data().iter().all(|v| [0u8, 9, 17].contains(v)));
    }

    #[test]
    fn nearest_identity_when_dims_match() {
        let labels = LabelBuf::new(6, 4, (0..24).collect()).unwrap();
        assert_eq!(labels.rescale_nearest(6, 4).unwrap(), labels);
    }

    #[test]
    fn nearest_2x_replicates_pixels() {
        let labels = LabelBuf::new(2, 2, vec![1, 2, 3, 4]).unwrap();
        let up = labels.rescale_nearest(4, 4).unwrap();
        assert_eq!(up.data(), &[1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4]);
    }
}
