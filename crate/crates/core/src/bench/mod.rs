//! Synthetic scenes with ground truth and the comparison of the multigraph
//! method against top-1 baselines.

mod eval;
mod scene;

pub use eval::{evaluate, run_baseline, run_ours, top_candidate, truth_rms, MethodResult, Metrics};
pub use scene::{
    cut_tiles, generate_scene, GroundTruth, Region, RegionKind, SceneSpec, TileGrid, TileSet,
};

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Result, StitchError};
use crate::geometry::Rect;
use crate::graph::AlignmentMultigraph;
use crate::registration::pair::{register_tiles, RegistrationParams};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    /// Textured islands separated by a blank band, joined by one textured bridge.
    Tissue,
    /// Repetitive grid lines everywhere.
    Grid,
    /// A repetitive island and a blob island joined only by faint low-contrast detail.
    Sparse,
}

impl Archetype {
    pub const ALL: [Archetype; 3] = [Archetype::Tissue, Archetype::Grid, Archetype::Sparse];

    pub fn default_size(self) -> usize {
        match self {
            Archetype::Grid => 7,
            Archetype::Tissue | Archetype::Sparse => 4,
        }
    }
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Archetype::Tissue => "tissue",
            Archetype::Grid => "grid",
            Archetype::Sparse => "sparse",
        })
    }
}

impl FromStr for Archetype {
    type Err = StitchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tissue" => Ok(Archetype::Tissue),
            "grid" => Ok(Archetype::Grid),
            "sparse" => Ok(Archetype::Sparse),
            other => Err(StitchError::Config(format!(
                "unknown archetype {other:?} (expected tissue, grid or sparse)"
            ))),
        }
    }
}

pub const PERIOD: usize = 20;
pub const HQ_THRESHOLD: f64 = 0.8;

const TILE: usize = 256;
const OVERLAP: usize = 64;
const MARGIN: f64 = 16.0;
const JITTER: f64 = 2.0;
const TAU: f64 = 5.0;
/// Distance kept between a blank band and the overlap it hides.
const BAND_PAD: f64 = 24.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub archetype: Archetype,
    pub scene: SceneSpec,
    pub grid: TileGrid,
    pub registration: RegistrationParams,
    pub solver: SolverConfig,
    pub tau: f64,
    pub hq_threshold: f64,
    /// Pair registration threads; 0 uses the global pool.
    pub threads: usize,
}

fn region(kind: RegionKind, x0: f64, y0: f64, x1: f64, y1: f64) -> Region {
    Region {
        kind,
        bounds: Rect::new(x0, y0, x1, y1),
    }
}

/// Scene x range hiding the overlap between tile columns `c` and `c + 1`.
fn column_band(grid: &TileGrid, c: usize) -> (f64, f64) {
    let step = grid.step() as f64;
    let start = grid.margin + (c + 1) as f64 * step;
    let end = grid.margin + c as f64 * step + grid.tile_size as f64;
    (start - BAND_PAD, end + BAND_PAD)
}

/// Desk-scale defaults for each archetype on a `size` x `size` tile grid.
pub fn preset(archetype: Archetype, size: usize, seed: u64) -> Result<BenchConfig> {
    if size < 2 {
        return Err(StitchError::Config("bench size must be >= 2".into()));
    }
    let mut grid = TileGrid {
        rows: size,
        cols: size,
        tile_size: TILE,
        overlap: OVERLAP,
        margin: MARGIN,
        jitter_sigma: JITTER,
        noise_sigma: 0.02,
        seed: seed.wrapping_add(1),
    };
    let (w, h) = grid.scene_size();
    let (wf, hf) = (w as f64, h as f64);
    let mut registration = RegistrationParams::default();
    let blobs = RegionKind::BlobNoise {
        density: 0.5,
        contrast: 0.5,
        scale: 6.0,
    };
    let lattice = RegionKind::Periodic {
        period: PERIOD,
        contrast: 0.5,
    };
    let mid = size / 2 - 1;
    let regions = match archetype {
        Archetype::Grid => {
            // every lattice peak in the search range must survive truncation
            registration.candidates.max_candidates = 12;
            vec![region(lattice, 0.0, 0.0, wf, hf)]
        }
        Archetype::Tissue => {
            let (b0, b1) = column_band(&grid, mid);
            let r = (size - 1) / 2;
            let step = grid.step() as f64;
            let y0 = grid.margin + r as f64 * step + grid.overlap as f64 + 8.0;
            let y1 = grid.margin + (r + 1) as f64 * step - 8.0;
            vec![
                region(blobs, 0.0, 0.0, wf, hf),
                region(RegionKind::Blank, b0, 0.0, b1, hf),
                region(blobs, b0, y0, b1, y1),
            ]
        }
        Archetype::Sparse => {
            registration.candidates.max_candidates = 12;
            grid.noise_sigma = 0.03;
            let (b0, b1) = column_band(&grid, mid);
            let faint = RegionKind::BlobNoise {
                density: 0.5,
                contrast: 0.1,
                scale: 4.0,
            };
            vec![
                region(faint, 0.0, 0.0, wf, hf),
                region(lattice, 0.0, 0.0, b0, hf),
                region(blobs, b1, 0.0, wf, hf),
            ]
        }
    };
    Ok(BenchConfig {
        archetype,
        scene: SceneSpec {
            width: w,
            height: h,
            background: 0.25,
            regions,
            seed,
        },
        grid,
        registration,
        solver: SolverConfig::default(),
        tau: TAU,
        hq_threshold: HQ_THRESHOLD,
        threads: 0,
    })
}

/// Everything produced by one bench run.
#[derive(Debug, Clone)]
pub struct BenchRun {
    pub tiles: TileSet,
    pub truth: GroundTruth,
    /// Registered, unsolved multigraph shared by all methods.
    pub graph: AlignmentMultigraph,
    pub results: Vec<MethodResult>,
    pub metrics: Vec<Metrics>,
    pub registration_ms: f64,
}

impl BenchRun {
    pub fn result(&self, method: &str) -> Option<(&MethodResult, &Metrics)> {
        let idx = self.results.iter().position(|r| r.method == method)?;
        Some((&self.results[idx], &self.metrics[idx]))
    }
}

/// Scene, tiles, shared registration, then ours, baseline-LQ and baseline-HQ.
pub fn run_bench(config: &BenchConfig) -> Result<BenchRun> {
    let scene = generate_scene(&config.scene)?;
    let (tiles, truth) = cut_tiles(
        &scene,
        &config.grid,
        config.registration.min_overlap_px as i64,
    )?;
    let start = Instant::now();
    let graph = register_tiles(
        &tiles.nodes(),
        &tiles.images,
        &config.registration,
        config.tau,
        config.threads,
    )?;
    let registration_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut results = vec![
        run_ours(&graph, &config.solver)?,
        run_baseline(
            &graph,
            "baseline-lq",
            config.registration.candidates.abs_threshold,
        ),
        run_baseline(&graph, "baseline-hq", config.hq_threshold),
    ];
    for r in &mut results {
        r.runtime_ms += registration_ms;
    }
    let metrics = results
        .iter()
        .map(|r| evaluate(r, &truth))
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchRun {
        tiles,
        truth,
        graph,
        results,
        metrics,
        registration_ms,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub archetype: Archetype,
    pub size: usize,
    pub seed: u64,
    pub rows: Vec<Metrics>,
}

pub const CSV_HEADER: &str =
    "archetype,method,rms_internal,rms_truth,edges,dropped,components,runtime_ms";

impl BenchReport {
    pub fn new(config: &BenchConfig, run: &BenchRun, seed: u64) -> Self {
        Self {
            archetype: config.archetype,
            size: config.grid.rows,
            seed,
            rows: run.metrics.clone(),
        }
    }

    /// CSV rows without header. `timing = false` leaves `runtime_ms` empty so
    /// output is byte-identical across runs.
    pub fn csv_rows(&self, timing: bool) -> String {
        let mut out = String::new();
        for m in &self.rows {
            let rms_internal = m.rms_internal.map_or(String::new(), |v| format!("{v:.4}"));
            let runtime = if timing {
                format!("{:.1}", m.runtime_ms)
            } else {
                String::new()
            };
            out.push_str(&format!(
                "{},{},{},{:.4},{},{},{},{}\n",
                self.archetype,
                m.method,
                rms_internal,
                m.rms_truth,
                m.edges,
                m.dropped,
                m.components,
                runtime
            ));
        }
        out
    }

    pub fn to_csv(&self, timing: bool) -> String {
        format!("{CSV_HEADER}\n{}", self.csv_rows(timing))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
