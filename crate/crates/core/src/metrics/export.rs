use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use super::MetricsError;

/// Fixed-precision float formatting shared by every CSV.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.6}")
}

/// A row of one experiment's CSV.
pub trait CsvRow {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RttRow {
    pub n_nodes: u32,
    pub rtt_fog_s: f64,
    pub rtt_store_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandwidthRow {
    pub cache_size: usize,
    pub wan_bytes_per_s: f64,
    pub lan_bytes_per_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MissRatioRow {
    pub n_nodes: u32,
    pub miss_ratio: f64,
    pub backing_fraction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TxSizeRow {
    pub cache_size: usize,
    pub mean_wan_tx_bytes: f64,
    pub mean_local_tx_bytes: f64,
}

impl CsvRow for RttRow {
    const HEADER: &'static [&'static str] = &["n_nodes", "rtt_fog_s", "rtt_store_s"];
    fn fields(&self) -> Vec<String> {
        vec![self.n_nodes.to_string(), fmt_f64(self.rtt_fog_s), fmt_f64(self.rtt_store_s)]
    }
}

impl CsvRow for BandwidthRow {
    const HEADER: &'static [&'static str] = &["cache_size", "wan_bytes_per_s", "lan_bytes_per_s"];
    fn fields(&self) -> Vec<String> {
        vec![self.cache_size.to_string(), fmt_f64(self.wan_bytes_per_s), fmt_f64(self.lan_bytes_per_s)]
    }
}

impl CsvRow for MissRatioRow {
    const HEADER: &'static [&'static str] = &["n_nodes", "miss_ratio", "backing_fraction"];
    fn fields(&self) -> Vec<String> {
        vec![self.n_nodes.to_string(), fmt_f64(self.miss_ratio), fmt_f64(self.backing_fraction)]
    }
}

impl CsvRow for TxSizeRow {
    const HEADER: &'static [&'static str] = &["cache_size", "mean_wan_tx_bytes", "mean_local_tx_bytes"];
    fn fields(&self) -> Vec<String> {
        vec![self.cache_size.to_string(), fmt_f64(self.mean_wan_tx_bytes), fmt_f64(self.mean_local_tx_bytes)]
    }
}

fn write_rows<R: CsvRow, W: Write>(w: W, rows: &[R]) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    w.write_record(R::HEADER)?;
    for row in rows {
        w.write_record(row.fields())?;
    }
    w.flush()?;
    Ok(())
}

/// Renders rows to a CSV string, header first.
pub fn to_csv_string<R: CsvRow>(rows: &[R]) -> String {
    let mut buf = Vec::new();
    write_rows(&mut buf, rows).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is utf-8")
}

pub fn export_csv<R: CsvRow>(rows: &[R], path: &Path) -> Result<(), MetricsError> {
    let io_err = |source: io::Error| MetricsError::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(io_err)?;
    write_rows(BufWriter::new(file), rows).map_err(|e| io_err(e.into()))
}
