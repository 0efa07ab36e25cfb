//! Command-line front end: parses flags, merges them over an optional TOML
//! config file, configures the thread pool, and dispatches to the harness.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kpz_exactlab::harness::{
    cmd_compare, cmd_converge, cmd_exact, cmd_selftest, cmd_simulate, Artifact, RunConfig,
};
use kpz_exactlab::Result;

#[derive(Parser)]
#[command(name = "kpz-exactlab", version, about = "Exact formulas, simulators, \
and scaling experiments for a discrete growth model and its limit process")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate exact probabilities (Fredholm determinants)
    Exact(CommonArgs),
    /// Draw Monte-Carlo samples from the dynamics
    Simulate(CommonArgs),
    /// Compare exact probabilities against simulation (z-scores)
    Compare(CommonArgs),
    /// Run a convergence experiment toward the limit process
    Converge(CommonArgs),
    /// Run the built-in identity and invariant checks
    Selftest(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// model: tasep, png, or airy1
    model: Option<String>,
    /// config file (TOML, or a manifest written by a previous run)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// stability tolerance override
    #[arg(long)]
    tol: Option<f64>,
    /// output CSV path (manifest written alongside); stdout if omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// observation time
    #[arg(long)]
    t: Option<f64>,
    /// particle label
    #[arg(long)]
    n: Option<i64>,
    /// observation position
    #[arg(long)]
    x: Option<f64>,
    /// height cut
    #[arg(long = "h-cut")]
    h: Option<i64>,
    #[arg(long)]
    cut_min: Option<i64>,
    #[arg(long)]
    cut_max: Option<i64>,
    /// limit-process observation times (comma separated)
    #[arg(long, value_delimiter = ',')]
    taus: Option<Vec<f64>>,
    /// cut grid for limit-process tables (comma separated)
    #[arg(long, value_delimiter = ',')]
    s_grid: Option<Vec<f64>>,
    /// scales T for convergence experiments (comma separated)
    #[arg(long, value_delimiter = ',')]
    t_list: Option<Vec<f64>>,
    /// transversal offsets u (comma separated)
    #[arg(long, value_delimiter = ',')]
    u_list: Option<Vec<f64>>,
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            model: self.model.clone(),
            q: self.q,
            seed: self.seed,
            samples: self.samples,
            tol: self.tol,
            out: self.out.clone(),
            threads: self.threads,
            t: self.t,
            n: self.n,
            x: self.x,
            h: self.h,
            cut_min: self.cut_min,
            cut_max: self.cut_max,
            taus: self.taus.clone(),
            s_grid: self.s_grid.clone(),
            t_list: self.t_list.clone(),
            u_list: self.u_list.clone(),
            ..Default::default()
        };
        Ok(base.overlay(flags))
    }
}

fn run(cli: &Cli) -> Result<Artifact> {
    let args = match &cli.command {
        Command::Exact(a)
        | Command::Simulate(a)
        | Command::Compare(a)
        | Command::Converge(a)
        | Command::Selftest(a) => a,
    };
    let cfg = args.resolve()?;
    if let Some(threads) = cfg.threads {
        // ignore failure: the global pool may already be initialized
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let artifact = match &cli.command {
        Command::Exact(_) => cmd_exact(&cfg)?,
        Command::Simulate(_) => cmd_simulate(&cfg)?,
        Command::Compare(_) => cmd_compare(&cfg)?,
        Command::Converge(_) => cmd_converge(&cfg)?,
        Command::Selftest(_) => cmd_selftest(&cfg)?,
    };
    artifact.write(cfg.out.as_deref())?;
    Ok(artifact)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(artifact) if artifact.flagged => {
            eprintln!("comparison flags raised; see output");
            ExitCode::FAILURE
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
