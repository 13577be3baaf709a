//! CSV files and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use lbe_core::lbe::{HorizonReport, LbeSeries, PrecisionSeries};
use lbe_core::simulator::PseudoOrbit;

use crate::CliError;

/// Shortest text that reads back to the same double. Non-finite values
/// print as `inf`, `-inf` and `NaN`, which `f64::from_str` accepts.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

pub fn orbit_csv(orbit: &PseudoOrbit) -> String {
    let mut s = String::from("n,value\n");
    for (n, v) in orbit.values.iter().enumerate() {
        let _ = writeln!(s, "{n},{}", fmt_f64(*v));
    }
    s
}

/// `n,lbe,log2_lbe,epsilon,guard`. `epsilon` is the relative precision of
/// the pair with the largest magnitude among unguarded pairs; `guard` is 1
/// when any pair hit the denominator guard.
pub fn lbe_csv(lbe: &LbeSeries, pairs: &[PrecisionSeries]) -> String {
    let mut s = String::from("n,lbe,log2_lbe,epsilon,guard\n");
    for n in 0..lbe.len() {
        let guarded = pairs.iter().any(|p| p.is_guarded(n));
        let eps = pairs
            .iter()
            .filter(|p| !p.is_guarded(n))
            .map(|p| p.values[n])
            .fold(None, |best: Option<f64>, v| match best {
                Some(b) if b.abs() >= v.abs() => Some(b),
                _ => Some(v),
            })
            .unwrap_or(pairs[0].values[n]);
        let v = lbe.values[n];
        let _ = writeln!(
            s,
            "{n},{},{},{},{}",
            fmt_f64(v),
            fmt_f64(v.log2()),
            fmt_f64(eps),
            u8::from(guarded)
        );
    }
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Collects files written into one output directory.
#[derive(Debug)]
pub struct OutputDir {
    pub dir: PathBuf,
    pub entries: Vec<OutputEntry>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        write_atomic(&self.dir.join(name), contents.as_bytes())?;
        self.entries.retain(|e| e.file != name);
        self.entries.push(OutputEntry {
            file: name.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
            bytes: contents.len(),
        });
        Ok(())
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_default()
    ));
    let io = |e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    fs::write(&tmp, bytes).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

#[derive(Debug, Clone, Serialize)]
pub struct FpContract {
    pub format: &'static str,
    pub rounding: &'static str,
    pub fma_contraction: bool,
    pub evaluation_order: &'static str,
    pub cosine: &'static str,
    pub reference: &'static str,
}

pub const FP_CONTRACT: FpContract = FpContract {
    format: "IEEE-754 binary64",
    rounding: "round-to-nearest-even",
    fma_contraction: false,
    evaluation_order: "fixed per evaluation plan; binary multiplication trees, left-to-right term sum",
    cosine: "libm::cos",
    reference: "astro-float, round-to-nearest-even, canonical plan",
};

#[derive(Debug, Clone, Serialize)]
pub struct PlanSnapshot {
    pub id: String,
    /// Term numbers (1-based) in summation order.
    pub order: Vec<usize>,
    pub trees: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpecSnapshot {
    pub name: String,
    pub path: String,
    pub text: String,
    pub sha256: String,
    pub model_path: String,
    pub model_sha256: String,
    pub iterations: usize,
    pub epsilon: f64,
    pub ref_bits: usize,
    pub seed: Vec<f64>,
    pub input: String,
    pub plans: Vec<PlanSnapshot>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HorizonSummary {
    pub report: HorizonReport,
    pub line: String,
    pub growth_rate_bits_per_iter: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairVerification {
    pub a: String,
    pub b: String,
    pub violations: usize,
    pub min_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub window: usize,
    pub trusted_len: usize,
    pub pairs: Vec<PairVerification>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingSummary {
    pub task: String,
    pub reps: usize,
    pub mean_s: f64,
    pub std_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: &'static str,
    pub fp_contract: FpContract,
    pub specs: Vec<SpecSnapshot>,
    pub outputs: Vec<OutputEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<HorizonSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerifySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Vec<TimingSummary>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup: Option<bool>,
}

impl Manifest {
    pub fn new(command: &str, specs: Vec<SpecSnapshot>, outputs: &OutputDir) -> Self {
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION"),
            fp_contract: FP_CONTRACT,
            specs,
            outputs: outputs.entries.clone(),
            horizon: None,
            verification: None,
            timing: None,
            warmup: None,
        }
    }

    /// Writes `<command>.manifest.json` via a temporary file and rename.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(format!("{}.manifest.json", self.command));
        let json = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        write_atomic(&path, json.as_bytes())?;
        Ok(path)
    }
}
