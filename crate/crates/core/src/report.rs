//! Deterministic report emission: flat CSV bodies, JSON summaries, atomic
//! file writes, and the run manifest.
//!
//! All floating-point fields are printed with Rust's shortest
//! round-tripping decimal form, which always uses '.' as the decimal
//! separator, so identical runs emit byte-identical bodies.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::resolvent::{RateSweep, ResolventDiffReport};
use crate::spectral::{SpectrumReport, TrajectoryReport, WeakCouplingReport};

/// Write bytes via a sibling temp file renamed into place, so a crashed
/// run never leaves a half-written report.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}

/// CSV body for a resolvent sweep: one row per layer width.
pub fn resolvent_csv(reports: &[ResolventDiffReport]) -> String {
    let mut s = String::from(
        "epsilon,norm_L2,bound_L2,norm_W1_corrected,norm_W1_uncorrected,\
         bound_W1,lemma21_ratio,lemma21_bound,all_converged\n",
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.epsilon,
            r.norm_l2,
            r.bound_l2,
            r.norm_w1_corrected,
            r.norm_w1_uncorrected,
            r.bound_w1,
            r.lemma21_ratio,
            r.lemma21_bound,
            r.all_converged
        );
    }
    s
}

/// JSON summary for a resolvent sweep, including the fitted rates.
pub fn rate_sweep_json(sweep: &RateSweep) -> Result<String> {
    Ok(serde_json::to_string_pretty(sweep)?)
}

/// CSV body for a spectrum report: one row per eigenvalue.
pub fn spectrum_csv(report: &SpectrumReport) -> String {
    let mut s = String::from("re,im,residual,below_threshold\n");
    for e in &report.eigenvalues {
        let below = report
            .below_threshold
            .iter()
            .any(|b| b.re == e.re && b.im == e.im);
        let _ = writeln!(s, "{},{},{},{}", e.re, e.im, e.residual, below);
    }
    s
}

/// CSV body for a weak-coupling sweep: one row per coupling strength.
pub fn weak_coupling_csv(report: &WeakCouplingReport) -> String {
    let mut s = String::from("c,mu,prediction,residual_over_c3,present\n");
    for i in 0..report.c_values.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            report.c_values[i],
            fmt_opt(report.mu[i]),
            report.prediction[i],
            fmt_opt(report.residual_over_c3[i]),
            report.mu[i].is_some()
        );
    }
    s
}

/// CSV body for a trajectory sweep: one row per coupling strength.
pub fn trajectory_csv(report: &TrajectoryReport) -> String {
    let mut s = String::from("c,mu,present\n");
    for (c, m) in report.c_values.iter().zip(&report.mu) {
        let _ = writeln!(s, "{},{},{}", c, fmt_opt(*m), m.is_some());
    }
    s
}

/// SHA-256 of the canonical (serialized) configuration, hex encoded.
pub fn config_hash(config_json: &str) -> String {
    let mut h = Sha256::new();
    h.update(config_json.as_bytes());
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Run manifest written after every artifact; refers to each output file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        atomic_write(&path, serde_json::to_string_pretty(self)?.as_bytes())?;
        Ok(path)
    }
}

/// Machine-readable failure record for nonzero exits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorReport {
    pub error: String,
    pub exit_code: i32,
}
