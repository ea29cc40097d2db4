//! `rosar`: simulate, calibrate, synthesize, image, evaluate, benchmark.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 solver failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod runconfig;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "rosar", version, about = "Rotating-SAR simulation, sparse filter synthesis and imaging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Run configuration file (`key = value`, angles in degrees).
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Worker threads (0 = all cores); overrides `image.threads`.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the effective run configuration (defaults plus overrides).
    Config {
        #[command(flatten)]
        common: Common,
    },
    /// Simulate one revolution of IF data and write it as RIF1.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Targets `az_deg:range_m[:amplitude]` separated by `;`; overrides the config scene.
        #[arg(long)]
        scene: Option<String>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Calibrate the steering-error radius for every imageable bin.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Bin span `a-b` (default: every imageable bin).
        #[arg(long)]
        bins: Option<String>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Synthesize sparse weight vectors and write them as WGT1.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Per-bin radii from `calibrate`.
        #[arg(long, conflicts_with = "delta")]
        deltas: Option<PathBuf>,
        /// One radius for every bin.
        #[arg(long)]
        delta: Option<f64>,
        /// Bin span `a-b` (default: every imageable bin).
        #[arg(long)]
        bins: Option<String>,
        /// Keep entries already present in the output table and rewrite it
        /// after every finished bin.
        #[arg(long)]
        resume: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Form an image and write it as IMG1 plus a graymap.
    Image {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        /// BPA, FFT_BPA, SAS, FFT_SAS, RBPA or FFT_RBPA.
        #[arg(short, long)]
        backend: String,
        #[arg(long)]
        table: Option<PathBuf>,
        /// Refuse unverified weight-table entries.
        #[arg(long)]
        strict: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Metrics over IMG1 files, or a pattern trace for one table entry.
    Eval {
        #[command(flatten)]
        common: Common,
        images: Vec<PathBuf>,
        /// Main-lobe half width for PISR, degrees (default: the config value).
        #[arg(long)]
        mainlobe_deg: Option<f64>,
        /// Export the array pattern of this table's entry for `--bin`.
        #[arg(long, requires = "bin")]
        pattern_table: Option<PathBuf>,
        #[arg(long)]
        bin: Option<usize>,
        /// Output prefix (writes `.txt` and `.csv`).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run every backend on one dataset and report time, entropy and speedup.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        table: Option<PathBuf>,
        /// Output prefix (writes `.txt` and `.csv`).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rosar: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
