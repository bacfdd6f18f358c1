//! `gngwt` command line: reconstruct a watertight mesh from a point
//! cloud, search for better training parameters, validate meshes, and
//! generate the synthetic test cloud.
//!
//! Exit status: 0 when the produced/checked mesh is watertight, 1 when it
//! is not, 2 on any error. Logging goes to stderr; set `GNGWT_LOG` to
//! `error`, `info`, or `debug` (default `warn`).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use gngwt::pipeline::{
    check_report_text, load_param_file, run_check, run_optimize, run_pipeline, run_synth,
    PipelineConfig,
};

#[derive(Parser)]
#[command(name = "gngwt", version, about = "Watertight mesh reconstruction from point clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a repaired triangle mesh from a PLY point cloud.
    Reconstruct {
        /// Input point cloud (PLY, ASCII or binary little-endian).
        #[arg(long)]
        input: PathBuf,
        /// Output mesh path; `.obj` selects Wavefront, anything else PLY.
        #[arg(long)]
        output: PathBuf,
        /// TOML parameter file; explicit flags below override it.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Close-edge pruning threshold in meters.
        #[arg(long)]
        tp: Option<f64>,
        /// Vertex weld radius in meters.
        #[arg(long)]
        weld_eps: Option<f64>,
        /// Decimate to at most this many faces.
        #[arg(long)]
        simplify: Option<usize>,
        /// Leave the mesh uncolored even if the cloud has colors.
        #[arg(long)]
        skip_color: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the per-epoch training trace as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Particle-swarm search for GNG parameters on a cloud.
    Optimize {
        #[arg(long)]
        input: PathBuf,
        /// Where to write the winning parameters (TOML).
        #[arg(long)]
        params: PathBuf,
        /// Where to write the evaluation history CSV
        /// (default: params path with a .history.csv extension).
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        iterations: u32,
        #[arg(long, default_value_t = 20)]
        swarm_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Report watertightness of a PLY mesh.
    Check {
        #[arg(long)]
        input: PathBuf,
    },
    /// Generate the synthetic prototype cloud (box, sphere, torus).
    Synth {
        #[arg(long)]
        output: PathBuf,
        /// Surface sample density in points per square meter.
        #[arg(long, default_value_t = gngwt::synth::DEFAULT_DENSITY)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GNGWT_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Reconstruct {
            input,
            output,
            params,
            tp,
            weld_eps,
            simplify,
            skip_color,
            seed,
            csv,
        } => {
            let mut config = PipelineConfig::default();
            if let Some(path) = &params {
                load_param_file(path)
                    .with_context(|| format!("loading parameters from {}", path.display()))?
                    .apply(&mut config);
            }
            if let Some(v) = tp {
                config.t_p = v;
            }
            if let Some(v) = weld_eps {
                config.weld_eps = v;
            }
            if simplify.is_some() {
                config.simplify_target = simplify;
            }
            config.skip_color = skip_color;
            config.seed = seed;

            let summary = run_pipeline(&config, &input, &output)
                .with_context(|| format!("reconstructing {}", input.display()))?;
            if let Some(csv_path) = &csv {
                fs::write(csv_path, summary.trace.to_csv())
                    .with_context(|| format!("writing {}", csv_path.display()))?;
            }
            print!("{summary}");
            print!("{}", summary.repair_log);
            Ok(watertight_exit(summary.is_watertight()))
        }
        Command::Optimize {
            input,
            params,
            csv,
            iterations,
            swarm_size,
            seed,
        } => {
            let csv = csv.unwrap_or_else(|| params.with_extension("history.csv"));
            let best = run_optimize(&input, iterations, swarm_size, seed, &params, &csv)
                .with_context(|| format!("optimizing on {}", input.display()))?;
            println!("params: {}", params.display());
            println!("history: {}", csv.display());
            println!(
                "eps_b: {}\neps_n: {}\nt_gamma: {}\na_max: {}\nalpha: {}\nd: {}",
                best.eps_b, best.eps_n, best.t_gamma, best.a_max, best.alpha, best.d
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { input } => {
            let report = run_check(&input)
                .with_context(|| format!("checking {}", input.display()))?;
            print!("{}", check_report_text(&report));
            Ok(watertight_exit(report.is_watertight()))
        }
        Command::Synth {
            output,
            density,
            seed,
        } => {
            let points = run_synth(density, seed, &output)
                .with_context(|| format!("writing {}", output.display()))?;
            println!("output: {}", output.display());
            println!("points: {points}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn watertight_exit(watertight: bool) -> ExitCode {
    if watertight {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
