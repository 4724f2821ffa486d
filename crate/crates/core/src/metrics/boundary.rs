//! Boundary bands by iterated 4-connected erosion. Off-grid pixels count as
//! background, so bands hug the image border as well as interior edges.

use super::mask::Mask;
use crate::error::{Error, Result};

/// One erosion step: a pixel survives when it and all four L1 neighbors are
/// foreground.
pub fn erode4(m: &Mask) -> Mask {
    let (w, h) = (m.width(), m.height());
    Mask::from_fn(w, h, |x, y| {
        let on = |xx: isize, yy: isize| {
            xx >= 0 && yy >= 0 && (xx as usize) < w && (yy as usize) < h
                && m.get(xx as usize, yy as usize) == 1
        };
        let (xi, yi) = (x as isize, y as isize);
        u8::from(
            m.get(x, y) == 1
                && on(xi - 1, yi)
                && on(xi + 1, yi)
                && on(xi, yi - 1)
                && on(xi, yi + 1),
        )
    })
}

/// Pixels of `m` within L1 distance `d` of the background.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryBand {
    pub d: usize,
    pub band: Mask,
}

pub fn boundary_band(m: &Mask, d: usize) -> Result<BoundaryBand> {
    if d == 0 {
        return Err(Error::Config("boundary band width must be at least 1".into()));
    }
    let mut core = m.clone();
    for _ in 0..d {
        if core.is_empty_mask() {
            break;
        }
        core = erode4(&core);
    }
    let band = Mask::from_fn(m.width(), m.height(), |x, y| {
        u8::from(m.get(x, y) == 1 && core.get(x, y) == 0)
    });
    Ok(BoundaryBand { d, band })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(side: usize, grid: usize) -> Mask {
        let off = (grid - side) / 2;
        Mask::from_fn(grid, grid, |x, y| {
            u8::from(x >= off && x < off + side && y >= off && y < off + side)
        })
    }

    #[test]
    fn band_of_solid_square() {
        // 6x6 square: one-pixel ring has 20 pixels, two rings 32, and at
        // d = 3 the erosion empties so the band is the whole square.
        let m = square(6, 8);
        assert_eq!(boundary_band(&m, 1).unwrap().band.count_ones(), 20);
        assert_eq!(boundary_band(&m, 2).unwrap().band.count_ones(), 32);
        assert_eq!(boundary_band(&m, 3).unwrap().band.count_ones(), 36);
        assert_eq!(boundary_band(&m, 4).unwrap().band.count_ones(), 36);
    }

    #[test]
    fn band_is_subset_of_source() {
        let m = Mask::from_fn(9, 7, |x, y| u8::from((x * 31 + y * 17) % 3 != 0));
        for d in 1..4 {
            let b = boundary_band(&m, d).unwrap().band;
            for y in 0..7 {
                for x in 0..9 {
                    assert!(b.get(x, y) <= m.get(x, y));
                }
            }
        }
    }

    #[test]
    fn image_border_counts_as_background() {
        // A full-grid mask still has a band: the outer ring touches the
        // virtual background beyond the border.
        let m = Mask::from_fn(5, 5, |_, _| 1);
        let b = boundary_band(&m, 1).unwrap().band;
        assert_eq!(b.count_ones(), 16);
        assert_eq!(b.get(2, 2), 0);
    }

    #[test]
    fn empty_mask_has_empty_band() {
        let m = Mask::zeros(6, 6);
        assert!(boundary_band(&m, 2).unwrap().band.is_empty_mask());
    }

    #[test]
    fn zero_width_band_is_rejected() {
        assert!(boundary_band(&Mask::zeros(3, 3), 0).is_err());
    }

    /// Independent characterization: the band is exactly the foreground
    /// pixels whose L1 distance to the nearest background (or off-grid)
    /// pixel is at most d.
    fn brute_force_band(m: &Mask, d: usize) -> Mask {
        let (w, h) = (m.width(), m.height());
        Mask::from_fn(w, h, |x, y| {
            if m.get(x, y) == 0 {
                return 0;
            }
            let mut dist = usize::MAX;
            // nearest off-grid position
            dist = dist
                .min(x + 1)
                .min(y + 1)
                .min(w - x)
                .min(h - y);
            for yy in 0..h {
                for xx in 0..w {
                    if m.get(xx, yy) == 0 {
                        let dd = x.abs_diff(xx) + y.abs_diff(yy);
                        dist = dist.min(dd);
                    }
                }
            }
            u8::from(dist <= d)
        })
    }

    #[test]
    fn erosion_band_equals_distance_band() {
        let m = Mask::from_fn(12, 10, |x, y| {
            u8::from(((x / 3) + (y / 2)) % 2 == 0 && x != 7)
        });
        for d in 1..=4 {
            let fast = boundary_band(&m, d).unwrap().band;
            let slow = brute_force_band(&m, d);
            assert_eq!(fast, slow, "d = {d}");
        }
    }
}
