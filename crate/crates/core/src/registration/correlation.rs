//! Feature-windowed Pearson correlation over a grid of integer translations.
//!
//! For a shift `delta = origin + d`, the feature `p` of image A is compared with
//! the point `p - delta` of image B (tile B sits at `delta` relative to tile A).
//! Each window is mean-removed and variance-normalized independently and the
//! per-window coefficients are averaged over the windows that fit inside B and
//! have non-zero variance in both images.

use crate::error::{Result, StitchError};
use crate::geometry::Vec2;
use crate::image::{GrayImage, IntegralImage};

use super::features::FeatureSet;

/// Windows whose per-pixel variance is at or below this are treated as flat.
pub const FLAT_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSurface {
    /// Search center, integer-valued.
    pub origin: Vec2,
    pub search_radius: usize,
    /// Row-major `(2R+1)^2` grid indexed by `(dy + R, dx + R)`; NaN marks undefined.
    pub values: Vec<f64>,
    /// Windows contributing at each shift.
    pub counts: Vec<usize>,
    pub n_features: usize,
}

impl CorrelationSurface {
    pub fn side(&self) -> usize {
        2 * self.search_radius + 1
    }

    fn index(&self, dx: isize, dy: isize) -> Option<usize> {
        let r = self.search_radius as isize;
        if dx.abs() > r || dy.abs() > r {
            return None;
        }
        Some(((dy + r) as usize) * self.side() + (dx + r) as usize)
    }

    /// Value at integer deviation `(dx, dy)`; `None` outside the grid or where undefined.
    pub fn get(&self, dx: isize, dy: isize) -> Option<f64> {
        self.index(dx, dy)
            .map(|i| self.values[i])
            .filter(|v| !v.is_nan())
    }

    pub fn count(&self, dx: isize, dy: isize) -> usize {
        self.index(dx, dy).map_or(0, |i| self.counts[i])
    }

    /// Largest defined value.
    pub fn max_value(&self) -> Option<f64> {
        self.values
            .iter()
            .copied()
            .filter(|v| !v.is_nan())
            .reduce(f64::max)
    }

    /// Iterates `(dx, dy)` over the grid.
    pub fn shifts(&self) -> impl Iterator<Item = (isize, isize)> {
        let r = self.search_radius as isize;
        (-r..=r).flat_map(move |dy| (-r..=r).map(move |dx| (dx, dy)))
    }
}

struct Window {
    values: Vec<f64>,
    energy: f64,
}

fn centered_window(img: &GrayImage, cx: usize, cy: usize, r: usize) -> Window {
    let side = 2 * r + 1;
    let mut values = Vec::with_capacity(side * side);
    for y in cy - r..=cy + r {
        values.extend_from_slice(&img.row(y)[cx - r..=cx + r]);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter_mut().for_each(|v| *v -= mean);
    let energy = values.iter().map(|v| v * v).sum();
    Window { values, energy }
}

/// Computes the correlation surface around `delta0` (rounded to whole pixels).
pub fn correlation_surface(
    img_a: &GrayImage,
    img_b: &GrayImage,
    features: &FeatureSet,
    delta0: Vec2,
    search_radius: usize,
) -> Result<CorrelationSurface> {
    if features.is_empty() {
        return Err(StitchError::NoFeatures);
    }
    let origin = delta0.round();
    let (ox, oy) = (origin.x as isize, origin.y as isize);
    let r = features.window_radius;
    let side = 2 * r + 1;
    let n = (side * side) as f64;
    let big_r = search_radius as isize;
    let grid = 2 * search_radius + 1;
    let (wb, hb) = (img_b.width() as isize, img_b.height() as isize);
    let integral = IntegralImage::new(img_b);

    let mut sums = vec![0.0; grid * grid];
    let mut counts = vec![0usize; grid * grid];
    let mut any_fit = false;
    let mut acc = vec![0.0; grid];

    for p in &features.points {
        let (px, py) = (p.x as isize, p.y as isize);
        // B window center for deviation d is p - origin - d; its full extent must lie in B.
        let fit_range = |pc: isize, oc: isize, extent: isize| -> Option<(isize, isize)> {
            // need r <= pc - oc - d <= extent - 1 - r
            let lo = (pc - oc - (extent - 1 - r as isize)).max(-big_r);
            let hi = (pc - oc - r as isize).min(big_r);
            (lo <= hi).then_some((lo, hi))
        };
        let (Some((dx_lo, dx_hi)), Some((dy_lo, dy_hi))) =
            (fit_range(px, ox, wb), fit_range(py, oy, hb))
        else {
            continue;
        };
        if p.x < r || p.y < r || p.x + r >= img_a.width() || p.y + r >= img_a.height() {
            continue;
        }
        any_fit = true;
        let win = centered_window(img_a, p.x, p.y, r);
        if win.energy <= FLAT_VARIANCE * n {
            continue;
        }
        let len = (dx_hi - dx_lo + 1) as usize;
        // Column of the B window's left edge at d = dx_hi; it grows as d decreases.
        let col_base = (px - ox - dx_hi - r as isize) as usize;
        for dy in dy_lo..=dy_hi {
            let row_top = (py - oy - dy - r as isize) as usize;
            let acc = &mut acc[..len];
            acc.iter_mut().for_each(|v| *v = 0.0);
            for v in 0..side {
                let b_row = img_b.row(row_top + v);
                let a_row = &win.values[v * side..(v + 1) * side];
                for (u, &a) in a_row.iter().enumerate() {
                    let b = &b_row[col_base + u..col_base + u + len];
                    for (s, &bv) in acc.iter_mut().zip(b) {
                        *s += a * bv;
                    }
                }
            }
            for (t, &num) in acc.iter().enumerate() {
                let dx = dx_hi - t as isize;
                let x0 = col_base + t;
                let (sb, sbb) = integral.window(x0, row_top, x0 + side, row_top + side);
                let energy_b = sbb - sb * sb / n;
                if energy_b <= FLAT_VARIANCE * n {
                    continue;
                }
                let rho = (num / (win.energy * energy_b).sqrt()).clamp(-1.0, 1.0);
                let idx = ((dy + big_r) as usize) * grid + (dx + big_r) as usize;
                sums[idx] += rho;
                counts[idx] += 1;
            }
        }
    }

    if !any_fit {
        return Err(StitchError::NoOverlap);
    }
    let values = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
        .collect();
    Ok(CorrelationSurface {
        origin,
        search_radius,
        values,
        counts,
        n_features: features.len(),
    })
}
