//! Binary label grid with 1 = building, 0 = background, plus the rectangle
//! type used to mark the valid (non-padded) region of a patch.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidShape {
                op: "mask",
                shape: vec![height, width],
                reason: format!("wants {} values, got {}", width * height, data.len()),
            });
        }
        if let Some(&bad) = data.iter().find(|&&v| v > 1) {
            return Err(Error::Data(format!(
                "mask value {} outside {{0, 1}}; class mapping must run first",
                bad
            )));
        }
        Ok(Mask {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(if f(x, y) != 0 { 1 } else { 0 });
            }
        }
        Mask {
            width,
            height,
            data,
        }
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

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = if v != 0 { 1 } else { 0 };
    }

    pub fn count_ones(&self) -> u64 {
        self.data.iter().map(|&v| v as u64).sum()
    }

    pub fn is_empty_mask(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn same_dims(&self, other: &Mask) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Inverts labels; handy for worst-case predictors in tests.
    pub fn inverted(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| 1 - v).collect(),
        }
    }

    pub fn crop(&self, r: Rect) -> Result<Mask> {
        r.check_within(self.width, self.height, "mask crop")?;
        let mut data = Vec::with_capacity(r.w * r.h);
        for y in r.y..r.y + r.h {
            data.extend_from_slice(&self.data[y * self.width + r.x..y * self.width + r.x + r.w]);
        }
        Ok(Mask {
            width: r.w,
            height: r.h,
            data,
        })
    }
}

/// Axis-aligned pixel rectangle, origin top-left, end-exclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Rect { x, y, w, h }
    }

    pub fn full(w: usize, h: usize) -> Self {
        Rect { x: 0, y: 0, w, h }
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }

    pub fn check_within(&self, width: usize, height: usize, op: &'static str) -> Result<()> {
        if self.w == 0 || self.h == 0 || self.x + self.w > width || self.y + self.h > height {
            return Err(Error::InvalidShape {
                op: "rect",
                shape: vec![self.x, self.y, self.w, self.h],
                reason: format!("{}: rectangle outside {}x{} grid", op, width, height),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_multiclass_values() {
        let err = Mask::new(2, 1, vec![0, 5]).unwrap_err().to_string();
        assert!(err.contains("class mapping"), "{err}");
    }

    #[test]
    fn crop_extracts_subgrid() {
        let m = Mask::from_fn(4, 3, |x, y| u8::from(x == 2 && y == 1));
        let c = m.crop(Rect::new(1, 1, 3, 2)).unwrap();
        assert_eq!(c.width(), 3);
        assert_eq!(c.height(), 2);
        assert_eq!(c.get(1, 0), 1);
        assert_eq!(c.count_ones(), 1);
    }

    #[test]
    fn crop_outside_grid_fails() {
        let m = Mask::zeros(4, 4);
        assert!(m.crop(Rect::new(2, 2, 3, 1)).is_err());
        assert!(m.crop(Rect::new(0, 0, 0, 1)).is_err());
    }

    #[test]
    fn inverted_flips_every_pixel() {
        let m = Mask::from_fn(3, 2, |x, _| u8::from(x == 0));
        let inv = m.inverted();
        assert_eq!(inv.count_ones(), 4);
        assert_eq!(m.count_ones() + inv.count_ones(), 6);
    }
}
