//! `spde-lab`: run an experiment ensemble, print its checks and write the
//! run directory; or render a run directory as SVG plots.
//!
//! Exit status: 0 when every check passes, 1 when a check fails or the run
//! itself fails, 2 on a configuration or input error.

mod plot;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use spde_lab::harness::{persist, Overrides, Scheme};
use spde_lab::{run_ensemble, Error, ExperimentConfig, ExperimentKind, RunOptions};

#[derive(Parser, Debug)]
#[command(name = "spde-lab", version, about = "Monte Carlo laboratory for u_t = u_xx/2 + u^gamma xi on the circle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rescaled terminal law of the SODE against the asymptotic densities.
    SodeAsymptotic(RunArgs),
    /// Hitting bound and sup-moment sandwich of the SODE.
    SodeBounds(RunArgs),
    /// Drift and quadratic variation of the total mass.
    SpdeMartingale(RunArgs),
    /// Distance ladder of coupled truncation levels.
    SpdeConverge(RunArgs),
    /// Exceedance fractions of sup_x u across a gamma grid.
    BlowupScan(RunArgs),
    /// Fourier drift residuals and the coefficient covariation relation.
    FourierCheck(RunArgs),
    /// Time integrals of spatial L^p norms.
    LpNorms(RunArgs),
    /// Render a run directory as SVG plots.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML configuration; keys not given keep the experiment's defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "SPDE_LAB_WORKERS")]
    workers: Option<usize>,
    /// Run directory (default `runs/<experiment>`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write every cell of the sampled fields to the series.
    #[arg(long)]
    retain_fields: bool,
    #[arg(long)]
    gamma: Option<f64>,
    /// Truncation level; `inf` runs untruncated.
    #[arg(long, value_parser = parse_level)]
    trunc: Option<f64>,
    /// Number of lattice cells.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Moment exponents, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    alpha: Option<Vec<f64>>,
    /// Norm or distance exponents, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    p: Option<Vec<f64>>,
    /// euler, exact-bessel, explicit or semi-implicit.
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<Scheme>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// Run directory written by an experiment subcommand.
    run: PathBuf,
    /// Output directory for the SVG files (default `<run>/plots`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Most paths drawn per line plot.
    #[arg(long, default_value_t = 50)]
    max_paths: usize,
}

fn parse_level(s: &str) -> Result<f64, String> {
    match s {
        "inf" | "infinity" | "none" => Ok(f64::INFINITY),
        _ => s.parse().map_err(|e| format!("{e}")),
    }
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// A failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Io { .. } | Error::Format { .. } => 2,
            Error::Domain(_) | Error::Unavailable(_) => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            paths: self.paths,
            gamma: self.gamma,
            trunc: self.trunc,
            grid: self.grid,
            dt: self.dt,
            horizon: self.horizon,
            alpha: self.alpha.clone(),
            p: self.p.clone(),
            scheme: self.scheme,
            retain_fields: self.retain_fields,
        }
    }

    fn config(&self, kind: ExperimentKind) -> Result<ExperimentConfig, Error> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_toml_file(path, Some(kind))?,
            None => ExperimentConfig::defaults(kind),
        };
        config.apply(&self.overrides());
        config.validate()?;
        Ok(config)
    }
}

fn run(kind: ExperimentKind, args: &RunArgs) -> Result<bool, Failure> {
    let config = args.config(kind)?;
    let options = match args.workers {
        Some(0) => return Err(Error::Config("workers must be at least 1".into()).into()),
        Some(n) => RunOptions::workers(n),
        None => RunOptions::default(),
    };
    let start = Instant::now();
    let summary = run_ensemble(&config, &options)?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(kind.name()));
    persist(&summary, &out)?;
    print!("{}", report::render(&summary));
    eprintln!(
        "{} paths on {} workers in {:.2}s; wrote {}",
        summary.paths,
        options.workers,
        start.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(summary.passed)
}

fn dispatch(cli: &Cli) -> Result<bool, Failure> {
    let (kind, args) = match &cli.command {
        Command::SodeAsymptotic(a) => (ExperimentKind::SodeAsymptotic, a),
        Command::SodeBounds(a) => (ExperimentKind::SodeBounds, a),
        Command::SpdeMartingale(a) => (ExperimentKind::SpdeMartingale, a),
        Command::SpdeConverge(a) => (ExperimentKind::SpdeConverge, a),
        Command::BlowupScan(a) => (ExperimentKind::BlowupScan, a),
        Command::FourierCheck(a) => (ExperimentKind::FourierCheck, a),
        Command::LpNorms(a) => (ExperimentKind::LpNorms, a),
        Command::Plot(p) => {
            let out = p.out.clone().unwrap_or_else(|| p.run.join("plots"));
            let written = plot::render_run(&p.run, &out, p.max_paths)?;
            for f in written {
                println!("{}", f.display());
            }
            return Ok(true);
        }
    };
    run(kind, args)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("spde-lab: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
