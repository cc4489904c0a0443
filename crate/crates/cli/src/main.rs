use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lame_cli::commands::{self, Status};
use lame_cli::config::ModelConfig;
use lame_cli::json::{read_json, to_json, write_atomic, ChebotarevDocument, PredictDocument, SolveDocument};
use lame_cli::svg;

#[derive(Parser)]
#[command(name = "lame", version, about = "Heine-Stieltjes and Van Vleck polynomials, trajectories and asymptotics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Model file (key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config's certificate tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Overrides the config's random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Solutions,
    Chebotarev,
    Trajectories,
    LatticeOverlay,
}

#[derive(Subcommand)]
enum Command {
    /// All Heine-Stieltjes/Van Vleck pairs for each requested degree.
    Solve,
    /// Predicted Van Vleck lattice (three poles).
    Predict,
    /// Chebotarev center, masses and star arcs (three poles).
    Chebotarev,
    /// One trajectory through the config's start point, as CSV.
    Trace,
    /// Matches exact Van Vleck zeros against a predicted lattice.
    Compare {
        #[arg(long)]
        exact: PathBuf,
        #[arg(long)]
        lattice: PathBuf,
    },
    /// SVG figure from report files.
    Figure {
        #[arg(long, value_enum)]
        which: Which,
        /// Data files: a solve, chebotarev or predict report, or trajectory CSVs.
        #[arg(long, num_args = 1..)]
        data: Vec<PathBuf>,
        /// Solve report drawn under a lattice overlay.
        #[arg(long)]
        exact: Option<PathBuf>,
        /// Draw only this pair.
        #[arg(long)]
        pair: Option<usize>,
        /// Degree to draw when a report holds several.
        #[arg(long)]
        n: Option<usize>,
    },
}

fn load_config(common: &Common) -> Result<ModelConfig> {
    let path = common.config.as_ref().ok_or_else(|| anyhow!("--config is required"))?;
    let mut cfg = ModelConfig::from_file(path)?;
    if let Some(t) = common.tol {
        cfg.tol = t;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_path(common: &Common) -> Result<&PathBuf> {
    common.out.as_ref().ok_or_else(|| anyhow!("--out is required"))
}

fn run(cli: Cli) -> Result<Status> {
    let common = &cli.common;
    if let Some(j) = common.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global().context("configuring worker threads")?;
    }
    let out = out_path(common)?;
    match cli.command {
        Command::Solve => {
            let (doc, status) = commands::solve_document(&load_config(common)?)?;
            write_atomic(out, to_json(&doc)?.as_bytes())?;
            for r in &doc.runs {
                if (r.report.found_count as u64) < r.report.expected_count {
                    eprintln!("n = {}: found {} of {} pairs", r.n, r.report.found_count, r.report.expected_count);
                }
            }
            Ok(status)
        }
        Command::Predict => {
            let doc = commands::predict_document(&load_config(common)?)?;
            write_atomic(out, to_json(&doc)?.as_bytes())?;
            Ok(Status::Complete)
        }
        Command::Chebotarev => {
            let doc = commands::chebotarev_document(&load_config(common)?)?;
            write_atomic(out, to_json(&doc)?.as_bytes())?;
            Ok(Status::Complete)
        }
        Command::Trace => {
            let csv = commands::trace_csv(&load_config(common)?)?;
            write_atomic(out, csv.as_bytes())?;
            Ok(Status::Complete)
        }
        Command::Compare { exact, lattice } => {
            let cfg = load_config(common)?;
            let exact: SolveDocument = read_json(&exact)?;
            let lattice: PredictDocument = read_json(&lattice)?;
            let doc = commands::compare_document(&cfg, &exact, &lattice)?;
            write_atomic(out, to_json(&doc)?.as_bytes())?;
            Ok(Status::Complete)
        }
        Command::Figure { which, data, exact, pair, n } => {
            let panels = match which {
                Which::Solutions => {
                    let [path] = data.as_slice() else { bail!("solutions figures take one solve report") };
                    commands::solution_panels(&read_json(path)?, n, pair)?
                }
                Which::Chebotarev => {
                    let [path] = data.as_slice() else { bail!("chebotarev figures take one chebotarev report") };
                    let doc: ChebotarevDocument = read_json(path)?;
                    vec![commands::chebotarev_panel(&doc)]
                }
                Which::Trajectories => {
                    let poles = match &common.config {
                        Some(_) => load_config(common)?.poles,
                        None => Vec::new(),
                    };
                    let lines = data
                        .iter()
                        .map(|p| {
                            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                            commands::read_trajectory_csv(&text).with_context(|| format!("in {}", p.display()))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    vec![commands::trajectory_panel(&poles, lines)]
                }
                Which::LatticeOverlay => {
                    let [path] = data.as_slice() else { bail!("lattice overlays take one predict report") };
                    let lattice: PredictDocument = read_json(path)?;
                    let exact: Option<SolveDocument> = exact.as_ref().map(|p| read_json(p)).transpose()?;
                    vec![commands::lattice_panel(&lattice, exact.as_ref(), n)?]
                }
            };
            write_atomic(out, svg::render(&panels).as_bytes())?;
            Ok(Status::Complete)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(status) => ExitCode::from(status.exit_code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
