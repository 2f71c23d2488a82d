//! Metric records, the long-format CSV and the run manifest.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const CSV_HEADER: &str = "scheme,modulation,N,P,alpha,snr_db,metric,value,ci_lo,ci_hi,trials,source,cfo,sic";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Montecarlo,
    Analytic,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Montecarlo => "montecarlo",
            Source::Analytic => "analytic",
        }
    }
}

/// Identifies a sweep cell in output rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellKey {
    pub scheme: String,
    pub modulation: String,
    pub n: usize,
    pub p: usize,
    pub alpha: f64,
    pub snr_db: f64,
    /// `off`, the injected offset, or the offset followed by `+comp`.
    pub cfo: String,
    pub sic: String,
}

impl CellKey {
    /// Stable text used to derive the cell's random streams.
    pub fn stream_key(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}|{}|{}|{}",
            self.scheme, self.modulation, self.n, self.p, self.alpha, self.snr_db, self.cfo, self.sic
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRecord {
    pub key: CellKey,
    pub metric: String,
    pub value: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub trials: u64,
    pub source: Source,
    /// Not written to the CSV, which must be byte-reproducible.
    pub wall_time_ms: u64,
}

impl MetricRecord {
    pub fn analytic(key: &CellKey, metric: &str, value: f64) -> Self {
        Self {
            key: key.clone(),
            metric: metric.into(),
            value,
            ci_lo: value,
            ci_hi: value,
            trials: 0,
            source: Source::Analytic,
            wall_time_ms: 0,
        }
    }

    pub fn csv_row(&self) -> String {
        let k = &self.key;
        let mut s = String::new();
        write!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            k.scheme,
            k.modulation,
            k.n,
            k.p,
            k.alpha,
            k.snr_db,
            self.metric,
            self.value,
            self.ci_lo,
            self.ci_hi,
            self.trials,
            self.source.as_str(),
            k.cfo,
            k.sic
        )
        .expect("writing to a String cannot fail");
        s
    }
}

pub fn to_csv(records: &[MetricRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub preset: Option<String>,
    pub config_hash: String,
    pub seed: u64,
    pub build_id: String,
    pub cells: usize,
    pub records: usize,
    pub threads: usize,
    pub wall_time_ms: u64,
    pub config: serde_json::Value,
}

pub fn config_hash(config: &serde_json::Value) -> String {
    let digest = Sha256::digest(config.to_string().as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn build_id() -> String {
    format!("{}-{}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

/// Writes `metrics.csv` and `manifest.json` into `dir`. Both are staged under
/// temporary names and renamed, so a failure leaves no partial artifact.
pub fn write_artifacts(dir: &Path, records: &[MetricRecord], manifest: &Manifest) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let csv_tmp = dir.join(".metrics.csv.tmp");
    let man_tmp = dir.join(".manifest.json.tmp");
    std::fs::File::create(&csv_tmp)?.write_all(to_csv(records).as_bytes())?;
    let json = serde_json::to_string_pretty(manifest).map_err(|e| crate::Error::Parse(e.to_string()))?;
    std::fs::File::create(&man_tmp)?.write_all(json.as_bytes())?;
    std::fs::rename(csv_tmp, dir.join("metrics.csv"))?;
    std::fs::rename(man_tmp, dir.join("manifest.json"))?;
    Ok(())
}
