use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use multistitch::align::{align, multigraph_dot, prune, simple_graph_dot, AlignmentReport};
use multistitch::bench::{preset, run_bench, Archetype, BenchReport, CSV_HEADER};
use multistitch::graph::{read_graph, write_graph};
use multistitch::registration::manifest::TileManifest;
use multistitch::registration::pair::{register_tiles, RegistrationParams};
use multistitch::render::{render, Blend};
use multistitch::solver::{solve_in_place, SolverConfig, SolverMode};
use multistitch::{AlignmentMultigraph, Result, StitchError};

use crate::{BlendArg, Command, ModeArg, RegistrationArgs, SolverArgs};

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| StitchError::io(path, e))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn manifest_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn registration_params(args: &RegistrationArgs, manifest: &TileManifest) -> RegistrationParams {
    let mut p = RegistrationParams {
        min_overlap_px: args.min_overlap.unwrap_or(manifest.min_overlap_px as f64),
        include_diagonal: args.include_diagonal,
        ..RegistrationParams::default()
    };
    if let Some(v) = args.abs_threshold {
        p.candidates.abs_threshold = v;
    }
    if let Some(v) = args.rel_threshold {
        p.candidates.rel_threshold = v;
    }
    if let Some(v) = args.max_candidates {
        p.candidates.max_candidates = v;
    }
    if let Some(v) = args.search_radius {
        p.search_radius = v;
    }
    if let Some(v) = args.window_radius {
        p.features.window_radius = v;
    }
    p
}

fn solver_config(args: &SolverArgs) -> SolverConfig {
    let mut c = SolverConfig {
        mode: match args.mode {
            ModeArg::Lm => SolverMode::LevenbergMarquardt,
            ModeArg::Gd => SolverMode::GradientDescent,
        },
        ..SolverConfig::default()
    };
    if let Some(n) = args.max_iterations {
        c.max_iterations = n;
    }
    c
}

fn blend(arg: BlendArg, margin: f64) -> Blend {
    match arg {
        BlendArg::Overwrite => Blend::Overwrite,
        BlendArg::Feather => Blend::Feather { margin },
    }
}

fn check_tau(tau: f64) -> Result<f64> {
    if tau > 0.0 && tau.is_finite() {
        Ok(tau)
    } else {
        Err(StitchError::Config(format!(
            "tau must be positive, got {tau}"
        )))
    }
}

fn register(
    manifest_path: &Path,
    args: &RegistrationArgs,
    tau: f64,
) -> Result<AlignmentMultigraph> {
    let manifest = TileManifest::read(manifest_path)?;
    let images = manifest.load_images(&manifest_dir(manifest_path))?;
    let params = registration_params(args, &manifest);
    let graph = register_tiles(
        &manifest.nodes(),
        &images,
        &params,
        check_tau(tau)?,
        args.threads,
    )?;
    info!(
        "{} tiles, {} bundles",
        graph.nodes.len(),
        graph.bundles.len()
    );
    Ok(graph)
}

fn solve(graph: &mut AlignmentMultigraph, args: &SolverArgs) -> Result<String> {
    if let Some(tau) = args.tau {
        graph.tau = check_tau(tau)?;
    }
    let report = solve_in_place(graph, &solver_config(args))?;
    info!(
        "loss {:.6e} after {} iterations (converged: {})",
        report.loss, report.iterations, report.converged
    );
    Ok(report.to_json())
}

fn render_to(
    manifest_path: &Path,
    alignment: &AlignmentReport,
    arg: BlendArg,
    margin: f64,
    out: &Path,
) -> Result<()> {
    let manifest = TileManifest::read(manifest_path)?;
    let images = manifest.load_images(&manifest_dir(manifest_path))?;
    let (img, layout) = render(&images, &alignment.offsets, blend(arg, margin))?;
    info!("composite {}x{}", layout.width, layout.height);
    img.save_png(out)
}

struct BenchOptions<'a> {
    archetype: &'a str,
    size: Option<usize>,
    seed: u64,
    threads: usize,
    tau: Option<f64>,
    no_timing: bool,
    json: Option<&'a Path>,
    export: Option<&'a Path>,
}

fn bench(opts: BenchOptions) -> Result<()> {
    let BenchOptions {
        archetype,
        size,
        seed,
        threads,
        tau,
        no_timing,
        json,
        export,
    } = opts;
    let archetypes = if archetype == "all" {
        Archetype::ALL.to_vec()
    } else {
        vec![archetype.parse()?]
    };
    let mut csv = format!("{CSV_HEADER}\n");
    let mut reports = Vec::new();
    for a in archetypes {
        let mut config = preset(a, size.unwrap_or(a.default_size()), seed)?;
        config.threads = threads;
        if let Some(t) = tau {
            config.tau = check_tau(t)?;
        }
        let run = run_bench(&config)?;
        let report = BenchReport::new(&config, &run, seed);
        csv.push_str(&report.csv_rows(!no_timing));
        if let Some(dir) = export {
            let dir = dir.join(a.to_string());
            fs::create_dir_all(&dir).map_err(|e| StitchError::io(&dir, e))?;
            for (tile, img) in run.tiles.manifest.tiles.iter().zip(&run.tiles.images) {
                img.save_png(dir.join(&tile.path))?;
            }
            run.tiles.manifest.write(dir.join("manifest.json"))?;
            let truth = serde_json::to_string_pretty(&run.truth)?;
            write_text(&dir.join("truth.json"), &truth)?;
        }
        reports.push(report);
    }
    if let Some(path) = json {
        let text = serde_json::to_string_pretty(&reports)?;
        write_text(path, &text)?;
    }
    print!("{csv}");
    Ok(())
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Register {
            manifest,
            out,
            reg,
            tau,
        } => write_graph(&register(&manifest, &reg, tau)?, out),
        Command::Solve {
            graph,
            out,
            report,
            solver,
        } => {
            let mut g = read_graph(&graph)?;
            let text = solve(&mut g, &solver)?;
            write_graph(&g, out)?;
            emit(report.as_deref(), &text)
        }
        Command::Align { graph, out } => {
            let (_, report) = align(&read_graph(&graph)?)?;
            emit(out.as_deref(), &report.to_json())
        }
        Command::Render {
            manifest,
            alignment,
            out,
            blend,
            margin,
        } => {
            let path = alignment;
            let text = fs::read_to_string(&path).map_err(|e| StitchError::io(&path, e))?;
            render_to(
                &manifest,
                &AlignmentReport::from_json(&text)?,
                blend,
                margin,
                &out,
            )
        }
        Command::Graphviz { graph, pruned, out } => {
            let g = read_graph(&graph)?;
            let dot = if pruned {
                simple_graph_dot(&prune(&g)?)
            } else {
                multigraph_dot(&g)
            };
            emit(out.as_deref(), &dot)
        }
        Command::Bench {
            archetype,
            size,
            seed,
            threads,
            tau,
            no_timing,
            json,
            export,
        } => bench(BenchOptions {
            archetype: &archetype,
            size,
            seed,
            threads,
            tau,
            no_timing,
            json: json.as_deref(),
            export: export.as_deref(),
        }),
        Command::Pipeline {
            manifest,
            out_dir,
            reg,
            solver,
            blend,
            margin,
            no_render,
        } => {
            fs::create_dir_all(&out_dir).map_err(|e| StitchError::io(&out_dir, e))?;
            let mut graph = register(&manifest, &reg, solver.tau.unwrap_or(5.0))?;
            write_graph(&graph, out_dir.join("graph.json"))?;
            write_text(&out_dir.join("multigraph.dot"), &multigraph_dot(&graph))?;
            let report = solve(&mut graph, &solver)?;
            write_graph(&graph, out_dir.join("solved.json"))?;
            write_text(&out_dir.join("report.json"), &report)?;
            let (simple, alignment) = align(&graph)?;
            write_text(&out_dir.join("pruned.dot"), &simple_graph_dot(&simple))?;
            write_text(&out_dir.join("alignment.json"), &alignment.to_json())?;
            if !no_render {
                render_to(
                    &manifest,
                    &alignment,
                    blend,
                    margin,
                    &out_dir.join("composite.png"),
                )?;
            }
            info!(
                "{} edges retained, {} dropped, {} component(s)",
                alignment.edges_retained,
                alignment.edges_dropped,
                alignment.components.len()
            );
            Ok(())
        }
    }
}
