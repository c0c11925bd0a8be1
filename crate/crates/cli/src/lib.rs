//! Command-line front end: configuration, pipelines and file export.

pub mod commands;
pub mod config;
pub mod format;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "mcms", version, about = "Multi-component model sets and their invariant densities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transition-window table and its area matrix.
    Windows(CommonArgs),
    /// Point list of every component within radius s.
    Points(CommonArgs),
    /// Weight matrix and its Perron-Frobenius data.
    Nu(CommonArgs),
    /// Invariant densities on the windows.
    Solve(CommonArgs),
    /// Physical-side checks; exits with status 1 on any FAIL.
    Verify(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Built-in preset: penrose-example1 or penrose-example2.
    #[arg(long)]
    pub preset: Option<String>,
    /// Physical radius.
    #[arg(long)]
    pub s: Option<f64>,
    /// Grid spacing.
    #[arg(long)]
    pub h: Option<f64>,
    /// Fixed-point tolerance (L1, summed over channels).
    #[arg(long)]
    pub tol: Option<f64>,
}

impl CommonArgs {
    fn load(&self) -> Result<RunConfig> {
        let text = match &self.config {
            Some(p) => Some(std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?),
            None => None,
        };
        let ov = Overrides { preset: self.preset.clone(), s: self.s, h: self.h, tol: self.tol };
        RunConfig::resolve(text.as_deref(), &ov)
    }
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    let (args, cmd) = match &cli.command {
        Command::Windows(a) => (a, "windows"),
        Command::Points(a) => (a, "points"),
        Command::Nu(a) => (a, "nu"),
        Command::Solve(a) => (a, "solve"),
        Command::Verify(a) => (a, "verify"),
    };
    let cfg = args.load()?;
    let (files, status) = match cmd {
        "windows" => (commands::windows(&cfg)?, ExitCode::SUCCESS),
        "points" => (commands::points(&cfg)?, ExitCode::SUCCESS),
        "nu" => (commands::nu(&cfg)?, ExitCode::SUCCESS),
        "solve" => (commands::solve(&cfg)?, ExitCode::SUCCESS),
        _ => {
            let (report, files) = commands::verify(&cfg)?;
            print!("{report}");
            (files, if report.all_pass() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    };
    commands::write_artifacts(&args.out, &files)?;
    for f in &files {
        eprintln!("wrote {}", args.out.join(&f.name).display());
    }
    Ok(status)
}
