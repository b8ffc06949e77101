// SPDX-License-Identifier: Apache-2.0

//! Command-line front end for the routability-aware placer.

mod commands;
pub mod io;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Domain(#[from] routeplace::error::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) | CliError::Domain(_) => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "routeplace", version, about = "Routability-aware global placement with a congestion GNN")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a seeded synthetic netlist.
    Gen(GenArgs),
    /// Route a placement and write its congestion map.
    Route(RouteArgs),
    /// Run the baseline placer and save routed snapshots as a dataset.
    Collect(CollectArgs),
    /// Train the congestion model on collected datasets.
    Train(TrainArgs),
    /// Predict per-cell congestion for a placement.
    Predict(PredictArgs),
    /// Compare predictions with router labels.
    Eval(EvalArgs),
    /// Run global placement.
    Place(PlaceArgs),
    /// Compare congestion maps and emit heatmaps.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Synthetic spec (key = value lines); defaults are used when absent.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct RouteArgs {
    #[arg(long)]
    netlist: PathBuf,
    #[arg(long)]
    placement: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Also write per-cell congestion labels here.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CollectArgs {
    #[arg(long)]
    netlist: PathBuf,
    /// Placer config (key = value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Netlist id recorded in the dataset; defaults to the file stem.
    #[arg(long)]
    id: Option<String>,
    #[arg(long)]
    seed: u64,
    /// Output dataset directory.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Dataset directory, or a directory of dataset directories. Repeatable.
    #[arg(long, required = true)]
    data: Vec<PathBuf>,
    /// Training config (key = value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
    /// Per-epoch loss history as CSV.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    netlist: PathBuf,
    #[arg(long)]
    placement: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Prediction file written by `predict`.
    #[arg(long)]
    pred: PathBuf,
    /// Label file written by `route --labels`.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args, Debug)]
struct PlaceArgs {
    #[arg(long)]
    netlist: PathBuf,
    /// Placer config (key = value lines); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trained congestion model checkpoint.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Congestion penalty weight.
    #[arg(long)]
    eta: Option<f64>,
    /// Enable the congestion term once electric overflow drops below this.
    #[arg(long)]
    eta_start_eo: Option<f64>,
    /// Enable cell inflation.
    #[arg(long)]
    inflate: bool,
    #[arg(long)]
    exponent: Option<f64>,
    #[arg(long)]
    num_adjust: Option<usize>,
    /// Congestion source for inflation: router or gnn.
    #[arg(long)]
    feedback: Option<routeplace::placer::Feedback>,
    #[arg(long)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
    /// Per-iteration trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Congestion map as NAME=PATH. The first one is the reference. Repeatable.
    #[arg(long = "map", required = true, value_parser = parse_named)]
    maps: Vec<(String, PathBuf)>,
    /// Placement trace as NAME=PATH. Repeatable.
    #[arg(long = "trace", value_parser = parse_named)]
    traces: Vec<(String, PathBuf)>,
    #[arg(short, long)]
    output: PathBuf,
    /// Directory for one PPM heatmap per map.
    #[arg(long)]
    heatmap: Option<PathBuf>,
}

fn parse_named(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        _ => Err(format!("expected NAME=PATH, got `{s}`")),
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code: 0 on success, 1 on usage errors, 2 on failures.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let res = match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Route(a) => commands::route(a),
        Command::Collect(a) => commands::collect(a),
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Eval(a) => commands::eval(a),
        Command::Place(a) => commands::place(a),
        Command::Report(a) => commands::report(a),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Installs the logger, filtered by `ROUTEPLACE_LOG` (default `warn`).
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("ROUTEPLACE_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}
