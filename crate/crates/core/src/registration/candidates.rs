//! Multi-peak extraction from a correlation surface.

use crate::geometry::Vec2;
use crate::graph::CandidateTransform;

use super::correlation::CorrelationSurface;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateParams {
    pub abs_threshold: f64,
    /// Fraction of the global surface maximum a peak must reach.
    pub rel_threshold: f64,
    pub nms_radius: f64,
    pub max_candidates: usize,
}

impl Default for CandidateParams {
    fn default() -> Self {
        Self {
            abs_threshold: 0.5,
            rel_threshold: 0.7,
            nms_radius: 3.0,
            max_candidates: 8,
        }
    }
}

/// Vertex of the parabola through `(-1, lo), (0, mid), (1, hi)`: (offset, value gain).
fn parabola_peak(lo: f64, mid: f64, hi: f64) -> (f64, f64) {
    let curvature = lo - 2.0 * mid + hi;
    if curvature >= 0.0 {
        return (0.0, 0.0);
    }
    let offset = (0.5 * (lo - hi) / curvature).clamp(-0.5, 0.5);
    let gain = -0.25 * (lo - hi) * offset;
    (offset, gain.max(0.0))
}

/// Strict local maxima above both thresholds, suppressed within `nms_radius`,
/// strongest first, refined to sub-pixel precision with a separable quadratic fit.
pub fn extract_candidates(
    surface: &CorrelationSurface,
    params: &CandidateParams,
) -> Vec<CandidateTransform> {
    let Some(global_max) = surface.max_value() else {
        return Vec::new();
    };
    let threshold = params.abs_threshold.max(params.rel_threshold * global_max);
    let r = surface.search_radius as isize;

    let mut peaks: Vec<(f64, isize, isize)> = Vec::new();
    for (dx, dy) in surface.shifts() {
        if dx.abs() == r || dy.abs() == r {
            continue;
        }
        let Some(v) = surface.get(dx, dy) else {
            continue;
        };
        if v < threshold {
            continue;
        }
        let strict = (-1..=1).all(|ny| {
            (-1..=1).all(|nx| {
                (nx, ny) == (0, 0) || surface.get(dx + nx, dy + ny).is_some_and(|n| n < v)
            })
        });
        if strict {
            peaks.push((v, dx, dy));
        }
    }
    peaks.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.2, a.1).cmp(&(b.2, b.1))));

    let nms2 = params.nms_radius * params.nms_radius;
    let mut kept: Vec<(f64, isize, isize)> = Vec::new();
    for peak in peaks {
        if kept.len() >= params.max_candidates {
            break;
        }
        let clear = kept.iter().all(|k| {
            let ddx = (k.1 - peak.1) as f64;
            let ddy = (k.2 - peak.2) as f64;
            ddx * ddx + ddy * ddy > nms2
        });
        if clear {
            kept.push(peak);
        }
    }

    kept.into_iter()
        .map(|(v, dx, dy)| {
            // Neighbors exist: strict maxima are interior with all neighbors defined.
            let at = |x: isize, y: isize| surface.get(x, y).unwrap_or(v);
            let (ox, gx) = parabola_peak(at(dx - 1, dy), v, at(dx + 1, dy));
            let (oy, gy) = parabola_peak(at(dx, dy - 1), v, at(dx, dy + 1));
            let delta = surface.origin + Vec2::new(dx as f64 + ox, dy as f64 + oy);
            let score = (v + gx + gy).min(1.0);
            CandidateTransform::new(delta, score, surface.count(dx, dy).max(1))
        })
        .collect()
}
