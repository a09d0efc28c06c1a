//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::harness::config::ScenarioConfig;
use crate::harness::experiments::{
    run_convergence, run_gain_vs_frequency, run_optimize_layout, run_rate_vs_bandwidth, run_rate_vs_snr, Summary,
};
use crate::pipeline::Scheme;

pub const THREADS_ENV: &str = "SQUINTLAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "squintlab", version, about = "Wideband near-field hybrid beamforming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Layout-optimization trace (normalized gains per iteration).
    Convergence(CommonArgs),
    /// Per-subcarrier normalized gain of FPA, FPA+TTD and the optimized layout.
    GainVsFreq(CommonArgs),
    /// Monte-Carlo sum rate over the SNR sweep.
    RateVsSnr(CommonArgs),
    /// Monte-Carlo sum rate over the bandwidth sweep.
    RateVsBw(CommonArgs),
    /// Parse and check a config without running anything.
    ValidateConfig(CommonArgs),
    /// Optimize the layout for one user drop and save it as JSON.
    OptimizeLayout(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Scenario file (TOML, or JSON with a .json extension).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Base seed, overriding `seeds.base`.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of hsc_hbf, fpa, fpa_ttd.
    #[arg(long)]
    schemes: Option<String>,
    /// Worker threads (overridden by SQUINTLAB_THREADS).
    #[arg(long)]
    threads: Option<usize>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Convergence(_) => "convergence",
            Command::GainVsFreq(_) => "gain-vs-freq",
            Command::RateVsSnr(_) => "rate-vs-snr",
            Command::RateVsBw(_) => "rate-vs-bw",
            Command::ValidateConfig(_) => "validate-config",
            Command::OptimizeLayout(_) => "optimize-layout",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Convergence(a)
            | Command::GainVsFreq(a)
            | Command::RateVsSnr(a)
            | Command::RateVsBw(a)
            | Command::ValidateConfig(a)
            | Command::OptimizeLayout(a) => a,
        }
    }
}

fn resolve_config(args: &CommonArgs) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seeds.base = seed;
    }
    if let Some(list) = &args.schemes {
        cfg.schemes = list.split(',').map(Scheme::parse).collect::<Result<_>>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn thread_count(args: &CommonArgs) -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        Err(_) => Ok(args.threads),
    }
}

fn run(command: &Command) -> Result<Summary> {
    let args = command.args();
    let cfg = resolve_config(args)?;
    if let Command::ValidateConfig(_) = command {
        return Ok(Summary {
            command: command.name().into(),
            outputs: Vec::new(),
            metrics: serde_json::json!({
                "config": args.config.display().to_string(),
                "users": cfg.num_users(),
                "elements": cfg.layout()?.num_elements(),
                "subcarriers": cfg.band.subcarriers,
            }),
        });
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    match thread_count(args)? {
        Some(0) => return Err(Error::Config("thread count must be positive".into())),
        Some(n) => builder = builder.num_threads(n),
        None => {}
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    create_dir(&args.out)?;
    pool.install(|| match command {
        Command::Convergence(_) => run_convergence(&cfg, &args.out).map(|(_, s)| s),
        Command::GainVsFreq(_) => run_gain_vs_frequency(&cfg, &args.out).map(|(_, s)| s),
        Command::RateVsSnr(_) => run_rate_vs_snr(&cfg, &args.out).map(|(_, s)| s),
        Command::RateVsBw(_) => run_rate_vs_bandwidth(&cfg, &args.out).map(|(_, s)| s),
        Command::OptimizeLayout(_) => run_optimize_layout(&cfg, &args.out),
        Command::ValidateConfig(_) => unreachable!("handled above"),
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Parse `argv`, run the subcommand and print a one-line JSON summary.
/// Returns 0 on success, 2 on a usage or config error and 1 otherwise.
pub fn cli_entry<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let name = cli.command.name();
    match run(&cli.command) {
        Ok(summary) => {
            let line = serde_json::json!({
                "status": "ok",
                "command": name,
                "outputs": summary.outputs,
                "metrics": summary.metrics,
            });
            println!("{line}");
            0
        }
        Err(e) => {
            let kind = if e.is_config() { "config" } else { "runtime" };
            eprintln!("error: {e}");
            println!(
                "{}",
                serde_json::json!({ "status": "error", "command": name, "kind": kind, "message": e.to_string() })
            );
            if e.is_config() {
                2
            } else {
                1
            }
        }
    }
}
