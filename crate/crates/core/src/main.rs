//! Batch front door: parses a JSON experiment configuration, runs the
//! requested study, and emits CSV/JSON artifacts plus a manifest.
//!
//! Exit codes: 0 success, 2 configuration/schema violation, 3 numerical
//! non-convergence (partial artifacts are kept).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;

use robin_layer::assembly::OperatorSet;
use robin_layer::config::{Command, ExperimentConfig, Severity};
use robin_layer::error::Error;
use robin_layer::linalg::SolverOptions;
use robin_layer::model::{theorem_constants_from_norms, lemma22_kernels};
use robin_layer::report::{
    atomic_write, config_hash, rate_sweep_json, resolvent_csv, spectrum_csv, trajectory_csv,
    weak_coupling_csv, ErrorReport, Manifest,
};
use robin_layer::resolvent::{
    estimate_theorem_norms, fit_rate, richardson_margin, RateSweep, ResolventDiffReport,
};
use robin_layer::spectral::{
    compute_spectrum, coupling_trajectory, weak_coupling_sweep, SpectrumReport, WhichOperator,
};

#[derive(Parser)]
#[command(name = "robin-layer", version, about = "Thin-layer Robin coupling studies")]
struct Cli {
    #[command(subcommand)]
    cmd: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Run the experiment described by a JSON configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's output block.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for sweep points (1 = fully serial).
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Comma-separated subset of {csv,json}.
        #[arg(long)]
        format: Option<String>,
    },
    /// Check a configuration and print diagnostics without running.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        CliCommand::Run {
            config,
            out,
            seed,
            threads,
            format,
        } => run(&config, out, seed, threads, format),
        CliCommand::Validate { config } => validate(&config),
    }
}

fn validate(path: &Path) -> ExitCode {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{{\"error\":\"cannot read {}: {e}\",\"exit_code\":2}}", path.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match ExperimentConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => {
            let msg = serde_json::to_string(&ErrorReport {
                error: format!("schema: {e}"),
                exit_code: 2,
            })
            .unwrap();
            eprintln!("{msg}");
            return ExitCode::from(2);
        }
    };
    let diags = cfg.validate();
    println!("{}", serde_json::to_string_pretty(&diags).unwrap());
    if diags.iter().any(|d| d.severity == Severity::Error) {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn run(
    config_path: &Path,
    out: Option<PathBuf>,
    seed_override: Option<u64>,
    threads: usize,
    format: Option<String>,
) -> ExitCode {
    let text = match std::fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => return fail(None, 2, &format!("cannot read {}: {e}", config_path.display())),
    };
    let mut cfg = match ExperimentConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => return fail(None, 2, &format!("schema: {e}")),
    };
    if let Some(s) = seed_override {
        cfg.seed = s;
    }
    let out_dir = out
        .or_else(|| cfg.output.directory.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    if let Err(e) = cfg.ensure_valid() {
        return fail(Some(&out_dir), 2, &e.to_string());
    }
    let formats = format
        .map(|f| f.split(',').map(|s| s.trim().to_string()).collect::<Vec<_>>())
        .or_else(|| {
            if cfg.output.formats.is_empty() {
                None
            } else {
                Some(cfg.output.formats.clone())
            }
        })
        .unwrap_or_else(|| vec!["csv".into(), "json".into()]);
    let want = |f: &str| formats.iter().any(|s| s == f);

    if threads > 1 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            return fail(Some(&out_dir), 2, &format!("thread pool: {e}"));
        }
    }

    let started_at = chrono::Utc::now().to_rfc3339();
    let canonical = cfg.to_json().unwrap();
    let mut outputs: Vec<String> = Vec::new();

    let result = dispatch(&cfg, threads, &out_dir, &mut outputs, &want);

    let finished_at = chrono::Utc::now().to_rfc3339();
    let manifest = Manifest {
        config_hash: config_hash(&canonical),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at,
        finished_at,
        outputs: outputs.clone(),
    };
    if let Err(e) = manifest.write(&out_dir) {
        return fail(Some(&out_dir), 2, &format!("manifest: {e}"));
    }
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = match e {
                Error::Config(_) | Error::Parse(_) | Error::Io(_) | Error::Json(_) => 2,
                _ => 3,
            };
            fail(Some(&out_dir), code, &e.to_string())
        }
    }
}

fn fail(out_dir: Option<&Path>, code: i32, msg: &str) -> ExitCode {
    let report = ErrorReport {
        error: msg.to_string(),
        exit_code: code,
    };
    let body = serde_json::to_string_pretty(&report).unwrap();
    eprintln!("{body}");
    if let Some(dir) = out_dir {
        let _ = atomic_write(&dir.join("error.json"), body.as_bytes());
    }
    ExitCode::from(code as u8)
}

fn emit(
    out_dir: &Path,
    outputs: &mut Vec<String>,
    name: &str,
    body: &str,
) -> robin_layer::Result<()> {
    atomic_write(&out_dir.join(name), body.as_bytes())?;
    outputs.push(name.to_string());
    Ok(())
}

fn dispatch(
    cfg: &ExperimentConfig,
    threads: usize,
    out_dir: &Path,
    outputs: &mut Vec<String>,
    want: &dyn Fn(&str) -> bool,
) -> robin_layer::Result<()> {
    let opts = cfg.solver_options();
    match cfg.command {
        Command::Assemble => {
            let grid = cfg.grid.grid_for(cfg.epsilon.unwrap())?;
            let ops = OperatorSet::build(&grid, &cfg.coupling)?;
            for (m, name) in [
                (&ops.stiffness, "stiffness.mtx"),
                (&ops.mass, "mass.mtx"),
                (&ops.h0, "h0.mtx"),
            ] {
                let mut buf: Vec<u8> = Vec::new();
                m.write_matrix_market(&mut buf)?;
                atomic_write(&out_dir.join(name), &buf)?;
                outputs.push(name.into());
            }
            if want("json") {
                let summary = serde_json::json!({
                    "grid": grid,
                    "layer_nodes": grid.n_nodes(),
                    "lateral_nodes": grid.n_lateral_nodes(),
                    "stiffness_nnz": ops.stiffness.nnz(),
                    "h0_nnz": ops.h0.nnz(),
                });
                emit(out_dir, outputs, "assemble.json", &serde_json::to_string_pretty(&summary)?)?;
            }
            Ok(())
        }
        Command::ResolventSweep => {
            let policy = cfg.grid.policy();
            let eps = &cfg.sweep.epsilons;
            let runs: Vec<robin_layer::Result<ResolventDiffReport>> = if threads > 1 {
                eps.par_iter()
                    .enumerate()
                    .map(|(i, &e)| {
                        let grid = policy.grid_for(e)?;
                        estimate_theorem_norms(
                            &grid,
                            &cfg.coupling,
                            opts,
                            cfg.probes,
                            cfg.seed.wrapping_add(17 * i as u64),
                        )
                    })
                    .collect()
            } else {
                eps.iter()
                    .enumerate()
                    .map(|(i, &e)| {
                        let grid = policy.grid_for(e)?;
                        estimate_theorem_norms(
                            &grid,
                            &cfg.coupling,
                            opts,
                            cfg.probes,
                            cfg.seed.wrapping_add(17 * i as u64),
                        )
                    })
                    .collect()
            };
            let mut reports = Vec::with_capacity(runs.len());
            for r in runs {
                reports.push(r?);
            }
            let mut kept_eps = Vec::new();
            let mut kept_l2 = Vec::new();
            let mut kept_w1 = Vec::new();
            let mut excluded = Vec::new();
            for r in &reports {
                if r.all_converged {
                    kept_eps.push(r.epsilon);
                    kept_l2.push(r.norm_l2);
                    kept_w1.push(r.norm_w1_corrected);
                } else {
                    excluded.push(r.epsilon);
                }
            }
            let sweep = RateSweep {
                fit_l2: fit_rate(&kept_eps, &kept_l2)?,
                fit_w1: fit_rate(&kept_eps, &kept_w1)?,
                reports,
                excluded,
            };
            let margin = richardson_margin(&cfg.coupling, eps[0], &policy, opts, cfg.seed)?;
            if want("csv") {
                emit(out_dir, outputs, "resolvent.csv", &resolvent_csv(&sweep.reports))?;
            }
            if want("json") {
                let mut v: serde_json::Value = serde_json::from_str(&rate_sweep_json(&sweep)?)?;
                v["richardson_margin"] = serde_json::json!(margin);
                emit(out_dir, outputs, "resolvent.json", &serde_json::to_string_pretty(&v)?)?;
            }
            Ok(())
        }
        Command::Spectrum => {
            let grid = cfg.grid.grid_for(cfg.epsilon.unwrap())?;
            let ops = OperatorSet::build(&grid, &cfg.coupling)?;
            let near = Complex64::new(cfg.spectrum.near_re, cfg.spectrum.near_im);
            let mut summary = Vec::new();
            for (which, stem) in [(WhichOperator::HEps, "heps"), (WhichOperator::H0, "h0")] {
                let rep = compute_spectrum(&ops, which, near, cfg.spectrum.k, opts, cfg.seed)?;
                if want("csv") {
                    emit(out_dir, outputs, &format!("spectrum_{stem}.csv"), &spectrum_csv(&rep))?;
                }
                summary.push(rep);
            }
            if want("json") {
                emit(out_dir, outputs, "spectrum.json", &serde_json::to_string_pretty(&summary)?)?;
            }
            Ok(())
        }
        Command::WeakCoupling | Command::Trajectory => {
            let grid = cfg.grid.grid_for(cfg.epsilon.unwrap())?;
            let (alpha0, half_width, smoothing) = match cfg.coupling {
                robin_layer::model::BoundaryCoupling::Step {
                    alpha0,
                    half_width,
                    smoothing,
                    ..
                } => (alpha0, half_width, smoothing),
                _ => unreachable!("validated: coupling sweeps need a step coupling"),
            };
            if cfg.command == Command::WeakCoupling {
                let rep = weak_coupling_sweep(
                    &grid,
                    alpha0,
                    half_width,
                    smoothing,
                    &cfg.sweep.c_values,
                    opts,
                    cfg.seed,
                )?;
                if want("csv") {
                    emit(out_dir, outputs, "weak_coupling.csv", &weak_coupling_csv(&rep))?;
                }
                if want("json") {
                    emit(
                        out_dir,
                        outputs,
                        "weak_coupling.json",
                        &serde_json::to_string_pretty(&rep)?,
                    )?;
                }
            } else {
                let rep = coupling_trajectory(
                    &grid,
                    alpha0,
                    half_width,
                    smoothing,
                    &cfg.sweep.c_values,
                    opts,
                    cfg.seed,
                )?;
                if want("csv") {
                    emit(out_dir, outputs, "trajectory.csv", &trajectory_csv(&rep))?;
                }
                if want("json") {
                    emit(
                        out_dir,
                        outputs,
                        "trajectory.json",
                        &serde_json::to_string_pretty(&rep)?,
                    )?;
                }
            }
            Ok(())
        }
        Command::EnclosureCheck => {
            let mut eps = cfg.sweep.epsilons.clone();
            if eps.is_empty() {
                eps.push(cfg.epsilon.unwrap());
            }
            let reports: Vec<robin_layer::Result<SpectrumReport>> = eps
                .iter()
                .enumerate()
                .map(|(i, &e)| {
                    let grid = cfg.grid.grid_for(e)?;
                    let ops = OperatorSet::build(&grid, &cfg.coupling)?;
                    let near = Complex64::new(cfg.spectrum.near_re, cfg.spectrum.near_im);
                    compute_spectrum(
                        &ops,
                        WhichOperator::HEps,
                        near,
                        cfg.spectrum.k,
                        opts,
                        cfg.seed.wrapping_add(i as u64),
                    )
                })
                .collect();
            let mut all = Vec::new();
            let mut violations = Vec::new();
            for r in reports {
                let rep = r?;
                violations.extend(rep.enclosure_violations.clone());
                all.push(rep);
            }
            if want("json") {
                let body = serde_json::json!({
                    "violations": violations,
                    "reports": all,
                });
                emit(out_dir, outputs, "enclosure.json", &serde_json::to_string_pretty(&body)?)?;
            }
            Ok(())
        }
        Command::Selftest => {
            let summary = selftest(cfg.seed)?;
            emit(out_dir, outputs, "selftest.json", &summary)?;
            Ok(())
        }
    }
}

/// Deterministic smoke suite: pointwise kernel bounds, constant formulas,
/// and the factorized solvers on small random instances.
fn selftest(seed: u64) -> robin_layer::Result<String> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    let mut violations = 0usize;
    for _ in 0..100_000 {
        let a = 10.0 * (rng.gen::<f64>() - 0.5);
        let g = 5.0 * rng.gen::<f64>();
        let xd = rng.gen::<f64>();
        let k = lemma22_kernels(a, g, xd);
        let slack = 1e-14 * (1.0 + g);
        if k.lhs1 > k.rhs1 * (1.0 + 1e-12) + slack
            || k.lhs2 > k.rhs2 * (1.0 + 1e-12) + slack
            || k.lhs3 > k.rhs3 * (1.0 + 1e-12) + slack
        {
            violations += 1;
        }
    }
    checks.push(serde_json::json!({
        "name": "pointwise_kernel_bounds",
        "samples": 100_000,
        "violations": violations,
        "pass": violations == 0,
    }));

    let t = theorem_constants_from_norms(1.0, 0.0, 0.1);
    let c_ok = (t.c - 1.197770644562501834).abs() < 1e-14;
    let ceps_ok = (t.c_eps - 1.219744024318708756).abs() < 1e-14;
    checks.push(serde_json::json!({
        "name": "closed_form_constants",
        "pass": c_ok && ceps_ok,
    }));

    // solver round trip on a random banded system
    let n = 40;
    let mut trip = Vec::new();
    for i in 0..n {
        trip.push((i, i, Complex64::new(4.0 + rng.gen::<f64>(), 0.3)));
        if i + 1 < n {
            trip.push((i, i + 1, Complex64::new(rng.gen::<f64>() - 0.5, 0.1)));
            trip.push((i + 1, i, Complex64::new(rng.gen::<f64>() - 0.5, -0.2)));
        }
    }
    let a = robin_layer::sparse::ComplexSparseMatrix::from_triplets(n, n, &trip)?;
    let solver = robin_layer::linalg::LinearSolver::from_matrix(&a, SolverOptions::default())?;
    let b: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    let x = solver.solve(&b)?;
    let ax = a.matvec(&x);
    let res: f64 = b
        .iter()
        .zip(&ax)
        .map(|(p, q)| (p - q).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let bn: f64 = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let solve_ok = res / bn < 1e-10;
    checks.push(serde_json::json!({
        "name": "factorized_solve",
        "relative_residual": res / bn,
        "pass": solve_ok,
    }));

    let all_pass = violations == 0 && c_ok && ceps_ok && solve_ok;
    if !all_pass {
        return Err(Error::NoConvergence {
            context: "selftest failed".into(),
            iterations: 0,
        });
    }
    Ok(serde_json::to_string_pretty(&serde_json::json!({
        "checks": checks,
        "pass": all_pass,
    }))?)
}
