//! Experiment configuration: JSON schema, validation diagnostics, and the
//! solver-option mapping used by the batch front end.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::LateralBc;
use crate::linalg::{SolverMethod, SolverOptions};
use crate::model::BoundaryCoupling;
use crate::resolvent::GridPolicy;

/// What a run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Assemble,
    ResolventSweep,
    Spectrum,
    WeakCoupling,
    Trajectory,
    EnclosureCheck,
    Selftest,
}

/// Lateral grid plus transverse policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub l: f64,
    pub n_lat: usize,
    pub lateral_bc: LateralBc,
    /// Explicit transverse node count; when absent the policy floor below
    /// applies together with the lateral-spacing rule.
    #[serde(default)]
    pub n_trans: Option<usize>,
    #[serde(default = "default_n_trans_min")]
    pub n_trans_min: usize,
}

fn default_n_trans_min() -> usize {
    6
}

impl GridSpec {
    pub fn policy(&self) -> GridPolicy {
        GridPolicy {
            d: self.d,
            l: self.l,
            n_lat: self.n_lat,
            lateral_bc: self.lateral_bc,
            n_trans_min: self.n_trans.unwrap_or(self.n_trans_min),
        }
    }

    pub fn grid_for(&self, epsilon: f64) -> Result<crate::grid::LayerGrid> {
        match self.n_trans {
            Some(nt) => crate::grid::LayerGrid::new(
                self.d,
                self.l,
                self.n_lat,
                epsilon,
                nt,
                self.lateral_bc,
            ),
            None => self.policy().grid_for(epsilon),
        }
    }
}

/// Sweep values; which list applies depends on the command.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub c_values: Vec<f64>,
}

/// Linear-solver selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum SolverSpec {
    SparseLu,
    Gmres {
        #[serde(default = "default_restart")]
        restart: usize,
    },
}

fn default_restart() -> usize {
    60
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec::SparseLu
    }
}

/// Spectrum-specific knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumSpec {
    #[serde(default)]
    pub near_re: f64,
    #[serde(default)]
    pub near_im: f64,
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_k() -> usize {
    6
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        SpectrumSpec {
            near_re: 0.0,
            near_im: 0.0,
            k: default_k(),
        }
    }
}

/// Output destinations; command-line flags override these.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct OutputSpec {
    #[serde(default)]
    pub directory: Option<String>,
    /// Subset of {"csv", "json"}; empty means both.
    #[serde(default)]
    pub formats: Vec<String>,
}

/// A full experiment description; serializable and round-trippable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub coupling: BoundaryCoupling,
    pub grid: GridSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub spectrum: SpectrumSpec,
    /// Single layer width for non-sweep commands.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Probe count for randomized norm checks.
    #[serde(default = "default_probes")]
    pub probes: usize,
    /// Mandatory: every randomized estimate derives from this.
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_probes() -> usize {
    20
}

/// Severity of a validation diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

/// One validation finding.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

fn err(msgs: &mut Vec<Diagnostic>, message: impl Into<String>) {
    msgs.push(Diagnostic {
        severity: Severity::Error,
        message: message.into(),
    });
}

fn warn(msgs: &mut Vec<Diagnostic>, message: impl Into<String>) {
    msgs.push(Diagnostic {
        severity: Severity::Warning,
        message: message.into(),
    });
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn solver_options(&self) -> SolverOptions {
        let method = match self.solver {
            SolverSpec::SparseLu => SolverMethod::SparseLu,
            SolverSpec::Gmres { restart } => SolverMethod::Gmres { restart },
        };
        SolverOptions {
            method,
            ..SolverOptions::default()
        }
    }

    /// Schema and hypothesis checks; an empty list means the config can
    /// run.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.grid.d != 2 && self.grid.d != 3 {
            err(&mut out, format!("grid.d must be 2 or 3, got {}", self.grid.d));
        }
        if !(self.grid.l > 0.0) {
            err(&mut out, "grid.l must be positive");
        }
        if self.grid.n_lat < 3 {
            err(&mut out, "grid.n_lat must be at least 3");
        }
        if let Some(nt) = self.grid.n_trans {
            if nt < 2 {
                err(&mut out, "grid.n_trans must be at least 2");
            }
        }
        if let Err(e) = self.coupling.validate() {
            err(&mut out, format!("coupling: {e}"));
        }

        let needs_epsilon = matches!(
            self.command,
            Command::Assemble | Command::Spectrum | Command::WeakCoupling | Command::Trajectory
        );
        if needs_epsilon && self.epsilon.is_none() {
            err(&mut out, "this command needs a single `epsilon`");
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                err(&mut out, "epsilon must be positive");
            }
        }

        match self.command {
            Command::ResolventSweep => {
                if self.sweep.epsilons.len() < 2 {
                    err(&mut out, "resolvent-sweep needs at least two epsilons");
                } else if self.sweep.epsilons.len() < 4 {
                    warn(
                        &mut out,
                        "rate fits are fragile with fewer than four epsilons",
                    );
                }
                if self.sweep.epsilons.iter().any(|&e| !(e > 0.0)) {
                    err(&mut out, "all sweep epsilons must be positive");
                }
                // the resolvent estimates assume a bounded lateral gradient
                let norms = self.coupling.sup_norms();
                if !norms.grad.is_finite() {
                    err(
                        &mut out,
                        "resolvent-sweep needs a coupling with bounded lateral \
                         gradient; a sharp step (smoothing = 0) violates the \
                         estimate hypothesis",
                    );
                }
            }
            Command::EnclosureCheck => {
                if self.sweep.epsilons.is_empty() && self.epsilon.is_none() {
                    err(
                        &mut out,
                        "enclosure-check needs `epsilon` or `sweep.epsilons`",
                    );
                }
            }
            Command::WeakCoupling | Command::Trajectory => {
                if self.sweep.c_values.is_empty() {
                    err(&mut out, "coupling sweeps need `sweep.c_values`");
                }
                if !matches!(self.coupling, BoundaryCoupling::Step { .. }) {
                    err(
                        &mut out,
                        "coupling sweeps need a step coupling (alpha0 + c * profile)",
                    );
                }
            }
            Command::Spectrum => {
                if self.spectrum.k == 0 {
                    err(&mut out, "spectrum.k must be positive");
                }
            }
            Command::Assemble | Command::Selftest => {}
        }
        out
    }

    /// Validation as a hard gate.
    pub fn ensure_valid(&self) -> Result<()> {
        let diags = self.validate();
        let errors: Vec<&Diagnostic> = diags
            .iter()
            .filter(|d| d.severity == Severity::Error)
            .collect();
        if errors.is_empty() {
            return Ok(());
        }
        let joined = errors
            .iter()
            .map(|d| d.message.as_str())
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::Config(joined))
    }
}
