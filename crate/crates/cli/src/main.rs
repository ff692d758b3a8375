use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fogcache::config::{ConfigError, ExperimentConfig};
use fogcache::experiment::{self, RunError, WriteOptions};

#[derive(Parser)]
#[command(name = "fogcache", version, about = "Fog distributed cache simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its CSVs and manifest.
    Run(RunArgs),
    /// Run every point of the config's sweep list.
    Sweep(RunArgs),
    /// Run with the fog cache disabled.
    Baseline(RunArgs),
    /// Write gnuplot scripts for the CSVs found in a results directory.
    Plot {
        /// Directory holding the CSVs.
        dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML config, or a run manifest (.json) to reproduce.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Set a config field, e.g. `fog.n_nodes=10`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Skip writing the event log.
    #[arg(long)]
    no_event_log: bool,
}

impl RunArgs {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf), ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        for o in &self.overrides {
            cfg = cfg.with_override(o)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        let out = self.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
        Ok((cfg, out))
    }

    fn write_options(&self) -> WriteOptions {
        WriteOptions { event_log: !self.no_event_log }
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn summary(r: &experiment::RunResult) -> String {
    let s = &r.report;
    format!(
        "n_nodes={} cache={} miss_ratio={:.4} backing_fraction={:.4} wan_B/s={:.1} lan_B/s={:.1}",
        r.config.fog.n_nodes, r.config.fog.cache_capacity, s.miss_ratio, s.backing_fraction, s.wan_bytes_per_sec,
        s.lan_bytes_per_sec
    )
}

const PLOTS: &[(&str, &str, &str, &[&str])] = &[
    ("rtt", "fog size (nodes)", "round-trip time (s)", &["rtt_fog_s", "rtt_store_s"]),
    ("bandwidth", "cache size (lines)", "bytes per second", &["wan_bytes_per_s", "lan_bytes_per_s"]),
    ("missratio", "fog size (nodes)", "fraction", &["miss_ratio", "backing_fraction"]),
    ("txsize", "cache size (lines)", "bytes per transaction", &["mean_wan_tx_bytes", "mean_local_tx_bytes"]),
];

fn plot(dir: &Path) -> Result<(), Failure> {
    let mut written = 0;
    for (name, xlabel, ylabel, columns) in PLOTS {
        for prefix in ["", "baseline_"] {
            let csv = format!("{prefix}{name}.csv");
            if !dir.join(&csv).exists() {
                continue;
            }
            let series: Vec<String> = columns
                .iter()
                .enumerate()
                .map(|(i, c)| format!("'{csv}' using 1:{} with linespoints title '{c}'", i + 2))
                .collect();
            let script = format!(
                "set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 800,600\n\
                 set output '{prefix}{name}.png'\nset xlabel '{xlabel}'\nset ylabel '{ylabel}'\nplot {}\n",
                series.join(", \\\n     ")
            );
            let path = dir.join(format!("{prefix}{name}.gp"));
            fs::write(&path, script).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))?;
            println!("wrote {}", path.display());
            written += 1;
        }
    }
    if written == 0 {
        return Err(Failure::Runtime(format!("no experiment CSVs in {}", dir.display())));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(args) => {
            let (cfg, out) = args.load()?;
            let r = experiment::run(&cfg, &out, args.write_options())?;
            println!("{}", summary(&r));
        }
        Command::Baseline(args) => {
            let (cfg, out) = args.load()?;
            let r = experiment::baseline(&cfg, &out, args.write_options())?;
            println!("baseline {}", summary(&r));
        }
        Command::Sweep(args) => {
            let (cfg, out) = args.load()?;
            for r in experiment::sweep(&cfg, &out, args.write_options())? {
                println!("{}", summary(&r));
            }
        }
        Command::Plot { dir } => plot(&dir)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
