//! End-to-end experiments: assemble a problem, run the selected methods and
//! write one convergence CSV per method plus a JSON manifest.

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dense::solve_dense_are;
use crate::error::{Error, Result};
use crate::integrate::integrate_adjoint;
use crate::krylov::{self, KrylovOptions, Observation, Projection};
use crate::metrics::{full_gain, gain_error, lift_gain, relative_residual, ConvergenceHistory, H2Reference, HistoryRecord};
use crate::problems::{assemble_system, PdeConfig, StateSpaceSystem};
use crate::reduction::{BalancedTruncation, PodBasis, ReducedModel};

pub use config::{parse_list, ExperimentConfig, Method, Preset, ProblemSpec, SnapshotOptions};

/// Dense full-order quantities used for `E_K` and `E_G`.
#[derive(Debug, Clone)]
pub struct Reference {
    pub p: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    pub h2: Option<H2Reference>,
}

impl Reference {
    pub fn new(sys: &StateSpaceSystem) -> Result<Self> {
        let p = solve_dense_are(&sys.dense_a(), &sys.b, &sys.c, &sys.r_weight)?;
        let gain = full_gain(sys, &p)?;
        let h2 = match H2Reference::new(sys) {
            Ok(h) => Some(h),
            Err(Error::Unstable) => None,
            Err(e) => return Err(e),
        };
        Ok(Self { p, gain, h2 })
    }

    /// Gain and H2 errors of a surrogate; failures become a note.
    pub fn observe(&self, red: &ReducedModel, p_r: &DMatrix<f64>, r_weight: &DMatrix<f64>) -> Observation {
        let mut notes = Vec::new();
        let gain_error = match lift_gain(red, p_r, r_weight).and_then(|k| gain_error(&k, &self.gain)) {
            Ok(e) => Some(e),
            Err(e) => {
                notes.push(format!("E_K unavailable: {e}"));
                None
            }
        };
        let h2_error = match self.h2.as_ref().map(|h| h.relative_error(red)) {
            Some(Ok(e)) => Some(e),
            Some(Err(e)) => {
                notes.push(format!("E_G unavailable: {e}"));
                None
            }
            None => None,
        };
        Observation {
            gain_error,
            h2_error,
            note: (!notes.is_empty()).then(|| notes.join("; ")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MethodStatus {
    /// Reached the tolerance at dimension `r`.
    Converged { r: usize },
    /// Ran out of sweep values or `r_max` above tolerance.
    NotConverged { best_residual: Option<f64> },
    Failed { error: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub status: MethodStatus,
    #[serde(skip)]
    pub history: ConvergenceHistory,
    pub events: Vec<String>,
    pub final_r: Option<usize>,
    pub final_residual: Option<f64>,
    /// Poles used by GARK/PGARK as `[re, im]`.
    pub shifts: Vec<[f64; 2]>,
    /// CSV file name inside the output directory.
    pub csv: String,
    pub elapsed_s: f64,
}

impl MethodOutcome {
    pub fn converged(&self) -> bool {
        matches!(self.status, MethodStatus::Converged { .. })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceSummary {
    pub computed: bool,
    pub h2_norm: Option<f64>,
    pub elapsed_s: Option<f64>,
    pub skipped_reason: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub problem: PdeConfig,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub reference: ReferenceSummary,
    pub methods: Vec<MethodOutcome>,
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl ExperimentReport {
    pub fn all_converged(&self) -> bool {
        self.methods.iter().all(MethodOutcome::converged)
    }

    pub fn outcome(&self, method: Method) -> Option<&MethodOutcome> {
        self.methods.iter().find(|o| o.method == method)
    }
}

/// Runs every configured method; solver failures are recorded, not returned.
/// Errors are reserved for configuration, assembly and I/O problems.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let problem = cfg.problem.resolve()?;
    let sys = assemble_system(&problem)?;
    fs::create_dir_all(&cfg.out)?;

    let (reference, summary) = if sys.n() <= cfg.reference_limit {
        let start = Instant::now();
        match Reference::new(&sys) {
            Ok(r) => {
                let summary = ReferenceSummary {
                    computed: true,
                    h2_norm: r.h2.as_ref().map(H2Reference::norm),
                    elapsed_s: Some(start.elapsed().as_secs_f64()),
                    skipped_reason: None,
                };
                (Some(r), summary)
            }
            Err(e) => {
                log::warn!("dense reference failed: {e}");
                (None, skipped(format!("dense reference failed: {e}")))
            }
        }
    } else {
        (None, skipped(format!("n = {} exceeds reference_limit", sys.n())))
    };

    let mut methods = Vec::new();
    for &method in &cfg.methods {
        log::info!("running {method} on n = {}", sys.n());
        let outcome = run_method(&sys, method, cfg, reference.as_ref());
        let path = cfg.out.join(&outcome.csv);
        fs::write(&path, outcome.history.to_csv(cfg.timings))?;
        methods.push(outcome);
    }

    let report = ExperimentReport {
        version: env!("CARGO_PKG_VERSION"),
        config: cfg.clone(),
        problem,
        n: sys.n(),
        m: sys.m(),
        p: sys.p(),
        reference: summary,
        methods,
        out_dir: cfg.out.clone(),
    };
    let manifest = serde_json::to_string_pretty(&report).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(cfg.out.join("manifest.json"), manifest + "\n")?;
    Ok(report)
}

fn skipped(reason: String) -> ReferenceSummary {
    ReferenceSummary {
        computed: false,
        h2_norm: None,
        elapsed_s: None,
        skipped_reason: Some(reason),
    }
}

/// One method on an assembled system.
pub fn run_method(
    sys: &StateSpaceSystem,
    method: Method,
    cfg: &ExperimentConfig,
    reference: Option<&Reference>,
) -> MethodOutcome {
    let start = Instant::now();
    let (status, history, shifts) = match method {
        Method::Gark | Method::Pgark => {
            let kind = if method == Method::Gark {
                Projection::Galerkin
            } else {
                Projection::PetrovGalerkin
            };
            let opts = KrylovOptions {
                tol: cfg.tol,
                r_max: cfg.r_max,
                use_b_variant: cfg.use_b_variant,
            };
            let mut observer = |red: &ReducedModel, p_r: &DMatrix<f64>| match reference {
                Some(r) => r.observe(red, p_r, &sys.r_weight),
                None => Observation::default(),
            };
            match krylov::run(sys, &opts, kind, &mut observer) {
                Ok(run) => (
                    MethodStatus::Converged { r: run.model.r() },
                    run.history,
                    run.shifts,
                ),
                Err(fail) => {
                    let status = match fail.error {
                        Error::NotConverged { residual } => MethodStatus::NotConverged {
                            best_residual: Some(residual),
                        },
                        ref e => MethodStatus::Failed { error: e.to_string() },
                    };
                    (status, fail.history, fail.shifts)
                }
            }
        }
        Method::Pod | Method::Bt => {
            let mut history = ConvergenceHistory::new();
            let status = match sweep_method(sys, method, cfg, reference, &mut history) {
                Ok(Some(r)) => MethodStatus::Converged { r },
                Ok(None) => MethodStatus::NotConverged {
                    best_residual: history.residuals().into_iter().reduce(f64::min),
                },
                Err(e) => {
                    history.note(format!("terminated: {e}"));
                    MethodStatus::Failed { error: e.to_string() }
                }
            };
            (status, history, Vec::new())
        }
    };
    MethodOutcome {
        method,
        final_r: history.last().map(|r| r.r),
        final_residual: history.last().map(|r| r.residual),
        events: history.events.clone(),
        shifts: shifts.iter().map(|s| [s.re, s.im]).collect(),
        csv: format!("{}.csv", method.name()),
        elapsed_s: start.elapsed().as_secs_f64(),
        status,
        history,
    }
}

/// Sweeps `cfg.sweep` for POD or BT; returns the first `r` meeting `cfg.tol`.
fn sweep_method(
    sys: &StateSpaceSystem,
    method: Method,
    cfg: &ExperimentConfig,
    reference: Option<&Reference>,
    history: &mut ConvergenceHistory,
) -> Result<Option<usize>> {
    enum Basis {
        Pod(PodBasis),
        Bt(BalancedTruncation),
    }
    let setup_start = Instant::now();
    let basis = match method {
        Method::Pod => {
            let snaps = integrate_adjoint(sys, cfg.snapshots.horizon, cfg.snapshots.steps)?;
            Basis::Pod(PodBasis::new(&snaps)?)
        }
        Method::Bt => Basis::Bt(BalancedTruncation::new(sys)?),
        _ => unreachable!("sweep_method only handles pod and bt"),
    };
    let setup = setup_start.elapsed().as_secs_f64();
    let rank = match &basis {
        Basis::Pod(b) => b.rank(),
        Basis::Bt(b) => b.rank(),
    };

    let mut first = None;
    for &r in &cfg.sweep {
        if r > rank {
            history.note(format!("sweep stopped at r = {r}: numerical rank is {rank}"));
            break;
        }
        let t = Instant::now();
        let red = match &basis {
            Basis::Pod(b) => b.reduce(sys, r)?,
            Basis::Bt(b) => b.reduce(sys, r)?,
        };
        let p_r = match red.solve_are(&sys.r_weight) {
            Ok(rep) => rep.p,
            Err(e) => {
                history.note(format!("r = {r}: reduced ARE failed: {e}"));
                continue;
            }
        };
        let elapsed = setup + t.elapsed().as_secs_f64();
        let residual = relative_residual(sys, &red.w, &p_r)?;
        let obs = reference.map(|rf| rf.observe(&red, &p_r, &sys.r_weight)).unwrap_or_default();
        if let Some(note) = obs.note {
            history.note(format!("r = {r}: {note}"));
        }
        history.push(HistoryRecord {
            r,
            residual,
            gain_error: obs.gain_error,
            h2_error: obs.h2_error,
            elapsed,
        });
        if first.is_none() && residual <= cfg.tol {
            first = Some(r);
        }
    }
    Ok(first)
}

pub const SCALING_HEADER: &str = "dx,n,method,r,iterations,R_P,elapsed_s,status";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub dx: f64,
    pub n: usize,
    pub method: Method,
    pub r: Option<usize>,
    pub iterations: usize,
    pub residual: Option<f64>,
    pub elapsed_s: f64,
    pub status: String,
}

impl ScalingRow {
    pub fn converged(&self) -> bool {
        self.status == "converged"
    }
}

/// Runs GARK and PGARK (whichever `cfg.methods` lists; GARK if neither) for
/// each grid spacing and writes `scaling.csv`. Per-size failures are recorded.
pub fn scaling_sweep(cfg: &ExperimentConfig, dx_list: &[f64]) -> Result<Vec<ScalingRow>> {
    cfg.validate()?;
    if dx_list.is_empty() {
        return Err(Error::Config("dx list is empty".into()));
    }
    let mut methods: Vec<Method> = cfg.methods.iter().copied().filter(|m| !m.is_sweep()).collect();
    if methods.is_empty() {
        methods.push(Method::Gark);
    }
    let base = cfg.problem.resolve()?;
    let mut problems = Vec::with_capacity(dx_list.len());
    for &dx in dx_list {
        let problem = base.clone().with_dx(dx);
        problem.validate().map_err(|e| Error::Config(format!("dx = {dx}: {e}")))?;
        problems.push(problem);
    }
    fs::create_dir_all(&cfg.out)?;

    let mut rows = Vec::new();
    for problem in &problems {
        let sys = assemble_system(problem)?;
        for &method in &methods {
            log::info!("scaling: {method} at dx = {}, n = {}", problem.dx, sys.n());
            let outcome = run_method(&sys, method, cfg, None);
            let status = match &outcome.status {
                MethodStatus::Converged { .. } => "converged".to_string(),
                MethodStatus::NotConverged { .. } => "not_converged".to_string(),
                MethodStatus::Failed { error } => format!("failed: {}", error.replace(',', ";")),
            };
            rows.push(ScalingRow {
                dx: problem.dx,
                n: sys.n(),
                method,
                r: outcome.final_r,
                iterations: outcome.history.len(),
                residual: outcome.final_residual,
                elapsed_s: outcome.elapsed_s,
                status,
            });
        }
    }
    write_scaling_csv(&cfg.out.join("scaling.csv"), &rows)?;
    Ok(rows)
}

fn write_scaling_csv(path: &Path, rows: &[ScalingRow]) -> Result<()> {
    let mut text = String::from(SCALING_HEADER);
    text.push('\n');
    for row in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{:.9e},{}\n",
            row.dx,
            row.n,
            row.method,
            row.r.map_or(String::new(), |r| r.to_string()),
            row.iterations,
            row.residual.map_or(String::new(), |v| format!("{v:.9e}")),
            row.elapsed_s,
            row.status
        ));
    }
    fs::write(path, text)?;
    Ok(())
}

/// Least-squares slope of `log t` against `log n`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, t)| *n > 0.0 && *t > 0.0)
        .map(|(n, t)| (n.ln(), t.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
