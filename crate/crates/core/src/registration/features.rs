//! Harris corner detection with greedy minimum-distance suppression.

use crate::image::GrayImage;

/// Integer pixel position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pixel {
    pub x: usize,
    pub y: usize,
}

impl Pixel {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSet {
    pub points: Vec<Pixel>,
    pub window_radius: usize,
}

impl FeatureSet {
    pub fn new(points: Vec<Pixel>, window_radius: usize) -> Self {
        Self {
            points,
            window_radius,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureParams {
    pub max_count: usize,
    pub min_distance: f64,
    /// Minimum response as a fraction of the strongest response in the search area.
    pub quality: f64,
    pub window_radius: usize,
    /// Half-size of the box over which the structure tensor is summed.
    pub block_radius: usize,
    pub harris_k: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            max_count: 64,
            min_distance: 10.0,
            quality: 0.01,
            window_radius: 16,
            block_radius: 2,
            harris_k: 0.04,
        }
    }
}

/// Harris response `det(M) - k tr(M)^2` per pixel, with Sobel gradients and a
/// box-summed structure tensor. Pixels whose support leaves the image get 0.
pub fn harris_response(img: &GrayImage, block_radius: usize, k: f64) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let mut ixx = vec![0.0; w * h];
    let mut iyy = vec![0.0; w * h];
    let mut ixy = vec![0.0; w * h];
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let p = |dx: isize, dy: isize| {
                img.get((x as isize + dx) as usize, (y as isize + dy) as usize)
            };
            let gx =
                (p(1, -1) + 2.0 * p(1, 0) + p(1, 1) - p(-1, -1) - 2.0 * p(-1, 0) - p(-1, 1)) / 8.0;
            let gy =
                (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1) - p(-1, -1) - 2.0 * p(0, -1) - p(1, -1)) / 8.0;
            let idx = y * w + x;
            ixx[idx] = gx * gx;
            iyy[idx] = gy * gy;
            ixy[idx] = gx * gy;
        }
    }
    let sxx = box_sum(&ixx, w, h, block_radius);
    let syy = box_sum(&iyy, w, h, block_radius);
    let sxy = box_sum(&ixy, w, h, block_radius);
    let margin = block_radius + 1;
    let mut response = vec![0.0; w * h];
    for y in margin..h.saturating_sub(margin) {
        for x in margin..w.saturating_sub(margin) {
            let idx = y * w + x;
            let (a, b, c) = (sxx[idx], syy[idx], sxy[idx]);
            let tr = a + b;
            response[idx] = a * b - c * c - k * tr * tr;
        }
    }
    response
}

/// Separable box sum with radius `r`; windows are truncated at the borders.
fn box_sum(src: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r + 1).min(w);
            tmp[y * w + x] = row[lo..hi].iter().sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let lo = y.saturating_sub(r);
        let hi = (y + r + 1).min(h);
        for x in 0..w {
            out[y * w + x] = (lo..hi).map(|yy| tmp[yy * w + x]).sum();
        }
    }
    out
}

/// Detects corners anywhere in the image, at least `window_radius` from the border.
pub fn detect_features(img: &GrayImage, params: &FeatureParams) -> FeatureSet {
    detect_features_in(img, None, params)
}

/// Detects corners inside `roi = (x0, y0, x1, y1)` (half-open), intersected with
/// the area `window_radius` away from the image border. The quality threshold
/// is relative to the strongest response inside that area.
pub fn detect_features_in(
    img: &GrayImage,
    roi: Option<(usize, usize, usize, usize)>,
    params: &FeatureParams,
) -> FeatureSet {
    let response = harris_response(img, params.block_radius, params.harris_k);
    select_features(&response, img.width(), img.height(), roi, params)
}

/// Feature selection on a precomputed response map (see [`harris_response`]).
pub fn select_features(
    response: &[f64],
    w: usize,
    h: usize,
    roi: Option<(usize, usize, usize, usize)>,
    params: &FeatureParams,
) -> FeatureSet {
    let r = params.window_radius;
    let margin = r.max(params.block_radius + 1);
    let (mut x0, mut y0) = (margin, margin);
    let (mut x1, mut y1) = (w.saturating_sub(margin), h.saturating_sub(margin));
    if let Some((rx0, ry0, rx1, ry1)) = roi {
        x0 = x0.max(rx0);
        y0 = y0.max(ry0);
        x1 = x1.min(rx1);
        y1 = y1.min(ry1);
    }
    if x0 >= x1 || y0 >= y1 || params.max_count == 0 {
        return FeatureSet::new(Vec::new(), r);
    }

    let mut max_r = 0.0f64;
    for y in y0..y1 {
        for x in x0..x1 {
            max_r = max_r.max(response[y * w + x]);
        }
    }
    if max_r <= 0.0 {
        return FeatureSet::new(Vec::new(), r);
    }
    let threshold = params.quality * max_r;

    let mut peaks: Vec<(f64, Pixel)> = Vec::new();
    for y in y0..y1 {
        for x in x0..x1 {
            let v = response[y * w + x];
            if v <= 0.0 || v < threshold {
                continue;
            }
            let mut is_max = true;
            'nb: for ny in y - 1..=y + 1 {
                for nx in x - 1..=x + 1 {
                    if (nx, ny) != (x, y) && response[ny * w + nx] > v {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                peaks.push((v, Pixel::new(x, y)));
            }
        }
    }
    peaks.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then((a.1.y, a.1.x).cmp(&(b.1.y, b.1.x)))
    });

    let min_d2 = params.min_distance * params.min_distance;
    let mut accepted: Vec<Pixel> = Vec::new();
    for (_, p) in peaks {
        if accepted.len() >= params.max_count {
            break;
        }
        let far = accepted.iter().all(|q| {
            let dx = p.x as f64 - q.x as f64;
            let dy = p.y as f64 - q.y as f64;
            dx * dx + dy * dy >= min_d2
        });
        if far {
            accepted.push(p);
        }
    }
    FeatureSet::new(accepted, r)
}
