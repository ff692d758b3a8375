//! Runs, sweeps and baseline runs, and the files they leave on disk.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::backing::SheetStore;
use crate::config::{ConfigError, ExperimentConfig};
use crate::fog::{Mode, RunOptions, RunOutput, SimError, Simulation};
use crate::metrics::{
    export_csv, report, steady_state_window, BandwidthRow, MetricsError, MetricsReport, MissRatioRow, RttRow,
    RttStats, TxSizeRow,
};
use crate::time::SimTime;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{failed} of {total} sweep points failed; see the error manifest")]
    SweepFailed { failed: usize, total: usize },
}

impl RunError {
    /// True when the failure is the config's fault rather than the run's.
    pub fn is_config_error(&self) -> bool {
        matches!(self, RunError::Config(_) | RunError::Sim(SimError::Config(_)))
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

/// One finished run and its reports.
pub struct RunResult {
    pub config: ExperimentConfig,
    pub mode: Mode,
    /// Steady-state window, warm-up excluded.
    pub report: MetricsReport,
    /// Whole run.
    pub totals: MetricsReport,
    pub rtt: Option<RttStats>,
    pub rtt_store_s: f64,
    pub output: RunOutput,
}

impl RunResult {
    pub fn event_digest_hex(&self) -> String {
        format!("{:032x}", self.output.log.digest())
    }

    pub fn rtt_row(&self) -> Option<RttRow> {
        self.rtt.as_ref().map(|r| RttRow { n_nodes: self.config.fog.n_nodes, rtt_fog_s: r.mean_s, rtt_store_s: self.rtt_store_s })
    }

    pub fn bandwidth_row(&self) -> BandwidthRow {
        BandwidthRow {
            cache_size: self.config.fog.cache_capacity,
            wan_bytes_per_s: self.report.wan_bytes_per_sec,
            lan_bytes_per_s: self.report.lan_bytes_per_sec,
        }
    }

    pub fn missratio_row(&self) -> MissRatioRow {
        MissRatioRow {
            n_nodes: self.config.fog.n_nodes,
            miss_ratio: self.report.miss_ratio,
            backing_fraction: self.report.backing_fraction,
        }
    }

    pub fn txsize_row(&self) -> TxSizeRow {
        TxSizeRow {
            cache_size: self.config.fog.cache_capacity,
            mean_wan_tx_bytes: self.report.mean_wan_transaction_bytes,
            mean_local_tx_bytes: self.report.mean_local_transaction_bytes,
        }
    }
}

/// Latency of a full-table read against an empty store: the fixed read
/// latency plus the transfer time of the call header.
pub fn store_rtt_s(cfg: &ExperimentConfig) -> f64 {
    let mut store = SheetStore::new(cfg.store.clone());
    let read = store.read_all(SimTime::ZERO).expect("a fresh store admits a call");
    (read.complete_at - read.issued_at).as_secs_f64()
}

/// Runs one config in memory. Nothing is written to disk.
pub fn execute(cfg: &ExperimentConfig, mode: Mode) -> Result<RunResult, RunError> {
    execute_with(cfg, RunOptions { mode, trace_reads: false })
}

pub fn execute_with(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RunResult, RunError> {
    cfg.validate()?;
    let output = Simulation::new(cfg, opts)?.run()?;
    let duration = SimTime::from_secs_f64(cfg.workload.duration_s);
    let report = report(&output.log, Some(steady_state_window(duration, cfg.warmup_fraction)))?;
    let totals = whole_run_report(&output)?;
    let rtt = if cfg.fog.rtt_rounds > 0 && cfg.fog.n_nodes >= 2 {
        let probe = Simulation::rtt_probe(cfg)?.run()?;
        crate::metrics::report(&probe.log, None)?.rtt
    } else {
        None
    };
    Ok(RunResult { config: cfg.clone(), mode: opts.mode, report, totals, rtt, rtt_store_s: store_rtt_s(cfg), output })
}

fn whole_run_report(output: &RunOutput) -> Result<MetricsReport, MetricsError> {
    report(&output.log, Some((SimTime::ZERO, output.end)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WriteOptions {
    /// Write the full event log next to the CSVs.
    pub event_log: bool,
}

impl Default for WriteOptions {
    fn default() -> Self {
        WriteOptions { event_log: true }
    }
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Cached => "cached",
        Mode::Baseline => "baseline",
    }
}

fn prefix(mode: Mode) -> &'static str {
    match mode {
        Mode::Cached => "",
        Mode::Baseline => "baseline_",
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value).expect("manifest serializes");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn write_csvs(dir: &Path, mode: Mode, results: &[&RunResult]) -> Result<Vec<String>, RunError> {
    let p = prefix(mode);
    let mut files = Vec::new();
    let mut emit = |name: &str| {
        let file = format!("{p}{name}");
        files.push(file.clone());
        dir.join(file)
    };
    export_csv(&results.iter().map(|r| r.missratio_row()).collect::<Vec<_>>(), &emit("missratio.csv"))?;
    export_csv(&results.iter().map(|r| r.bandwidth_row()).collect::<Vec<_>>(), &emit("bandwidth.csv"))?;
    export_csv(&results.iter().map(|r| r.txsize_row()).collect::<Vec<_>>(), &emit("txsize.csv"))?;
    let rtt: Vec<RttRow> = results.iter().filter_map(|r| r.rtt_row()).collect();
    if !rtt.is_empty() {
        export_csv(&rtt, &emit("rtt.csv"))?;
    }
    Ok(files)
}

fn write_event_log(path: &Path, result: &RunResult) -> Result<(), RunError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    result.output.log.write_to(&mut w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

fn run_manifest(result: &RunResult, files: &[String]) -> serde_json::Value {
    let stats = result.output.router_stats();
    json!({
        "status": "ok",
        "mode": mode_name(result.mode),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": result.config.seed,
        "config_hash": result.config.hash_hex(),
        "config": result.config,
        "event_log_digest": result.event_digest_hex(),
        "events": result.output.log.len(),
        "reads_scheduled": result.output.reads_scheduled,
        "store_rows": result.output.store.len(),
        "router": {
            "write_calls": stats.write_calls,
            "read_calls": stats.read_calls,
            "rate_limited": stats.rate_limited,
            "max_queue_depth": stats.max_queue_depth,
            "queue_drops": result.output.router.queue().dropped(),
            "max_calls_in_any_window": result.output.store.max_accepted_in_any_window(),
        },
        "rtt_store_s": result.rtt_store_s,
        "rtt": result.rtt,
        "steady_state": result.report,
        "totals": result.totals,
        "files": files,
    })
}

fn write_single(dir: &Path, result: &RunResult, opts: WriteOptions) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let p = prefix(result.mode);
    let mut files = write_csvs(dir, result.mode, &[result])?;
    let store_csv = dir.join(format!("{p}store.csv"));
    result.output.store.export_csv(&store_csv).map_err(io_err(&store_csv))?;
    files.push(format!("{p}store.csv"));
    if opts.event_log {
        write_event_log(&dir.join(format!("{p}events.log")), result)?;
        files.push(format!("{p}events.log"));
    }
    write_json(&dir.join(format!("{p}manifest.json")), &run_manifest(result, &files))
}

/// Runs one config and writes its CSVs, store snapshot, event log and
/// manifest into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path, opts: WriteOptions) -> Result<RunResult, RunError> {
    let result = execute(cfg, Mode::Cached)?;
    write_single(out, &result, opts)?;
    Ok(result)
}

/// As [`run`], with caching disabled. Files carry a `baseline_` prefix.
pub fn baseline(cfg: &ExperimentConfig, out: &Path, opts: WriteOptions) -> Result<RunResult, RunError> {
    let result = execute(cfg, Mode::Baseline)?;
    write_single(out, &result, opts)?;
    Ok(result)
}

/// Runs every sweep point in parallel. Each point's files go to
/// `out/point_NNN/`; the combined CSVs and the sweep manifest go to `out`.
/// If any point fails, the others' files are still written and the
/// manifest records the failures.
pub fn sweep(cfg: &ExperimentConfig, out: &Path, opts: WriteOptions) -> Result<Vec<RunResult>, RunError> {
    cfg.validate()?;
    let points = cfg.sweep_points()?;
    fs::create_dir_all(out).map_err(io_err(out))?;

    let outcomes: Vec<Result<RunResult, RunError>> = points
        .par_iter()
        .map(|point| {
            let result = execute(&point.config, Mode::Cached)?;
            write_single(&out.join(format!("point_{:03}", point.index)), &result, opts)?;
            Ok(result)
        })
        .collect();

    let ok: Vec<&RunResult> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let files = write_csvs(out, Mode::Cached, &ok)?;
    let entries: Vec<_> = points
        .iter()
        .zip(&outcomes)
        .map(|(point, outcome)| {
            let assignments: serde_json::Map<String, serde_json::Value> = point
                .assignments
                .iter()
                .map(|(k, v)| (k.clone(), serde_json::to_value(v).expect("toml value serializes")))
                .collect();
            let mut entry = json!({
                "index": point.index,
                "dir": format!("point_{:03}", point.index),
                "seed": point.config.seed,
                "config_hash": point.config.hash_hex(),
                "assignments": assignments,
            });
            match outcome {
                Ok(r) => {
                    entry["status"] = json!("ok");
                    entry["event_log_digest"] = json!(r.event_digest_hex());
                }
                Err(e) => {
                    entry["status"] = json!("failed");
                    entry["error"] = json!(e.to_string());
                }
            }
            entry
        })
        .collect();
    let failed = outcomes.iter().filter(|o| o.is_err()).count();
    let manifest = json!({
        "status": if failed == 0 { "ok" } else { "failed" },
        "mode": "sweep",
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "config_hash": cfg.hash_hex(),
        "config": cfg,
        "points": entries,
        "files": files,
    });
    write_json(&out.join("manifest.json"), &manifest)?;
    if failed > 0 {
        return Err(RunError::SweepFailed { failed, total: points.len() });
    }
    Ok(outcomes.into_iter().map(|o| o.expect("no failures")).collect())
}
