//! Error sweeps over `(ε, Δt)` grids.
//!
//! Cells are independent tasks run on a bounded rayon pool. Results are
//! collected in grid order (ε ascending, then Δt ascending, then variable
//! set), so the table does not depend on the worker count. A failing cell is
//! recorded in the table and never aborts the sweep.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{gc_transform, per_step_errors, Comparand, ErrorReport, SlowVars, VariableSet};
use crate::error::{Error, Result};
use crate::fields::FieldModel;
use crate::harness::config::{SweepConfig, SweepMode};
use crate::reference::{reference_solve_limit, reference_solve_stiff, LimitState, PhaseState};
use crate::scheme_ap::{ap_solve, max_fp_residual, AugmentedState, SchemeParams, StepDiagnostics};
use crate::scheme_limit::{limit_solve, LimitSchemeState};
use crate::trajectory::Trajectory;

/// Largest shared sample count for stiff references; beyond it each cell
/// integrates its own reference.
const MAX_SHARED_SAMPLES: usize = 1 << 22;

/// Which branch of the piecewise error bound is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `Δt ≤ ε³`
    #[serde(rename = "stiff-resolved")]
    StiffResolved,
    /// `ε³ < Δt ≤ ε^{1/2}`
    #[serde(rename = "ap-plateau")]
    ApPlateau,
    /// `Δt > ε^{1/2}`
    #[serde(rename = "coarse")]
    Coarse,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::StiffResolved => "stiff-resolved",
            Regime::ApPlateau => "ap-plateau",
            Regime::Coarse => "coarse",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stiff-resolved" => Ok(Regime::StiffResolved),
            "ap-plateau" => Ok(Regime::ApPlateau),
            "coarse" => Ok(Regime::Coarse),
            other => Err(Error::Config(format!("unknown regime {other:?}"))),
        }
    }
}

pub fn classify_regime(eps: f64, dt: f64) -> Regime {
    if dt <= eps * eps * eps {
        Regime::StiffResolved
    } else if dt <= eps.sqrt() {
        Regime::ApPlateau
    } else {
        Regime::Coarse
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed,
    /// The reference needed more steps than the budget allows.
    Skipped,
}

impl CellStatus {
    pub fn label(&self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::Failed => "failed",
            CellStatus::Skipped => "skipped",
        }
    }

    fn for_error(err: &Error) -> Self {
        match err.root() {
            Error::StepBudgetExceeded { .. } => CellStatus::Skipped,
            _ => CellStatus::Failed,
        }
    }
}

impl FromStr for CellStatus {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(CellStatus::Ok),
            "failed" => Ok(CellStatus::Failed),
            "skipped" => Ok(CellStatus::Skipped),
            other => Err(Error::Config(format!("unknown status {other:?}"))),
        }
    }
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub eps: f64,
    pub dt: f64,
    pub lambda: f64,
    pub regime: Regime,
    pub variable_set: VariableSet,
    pub comparand: Comparand,
    pub l1_error: f64,
    pub max_fp_residual: f64,
    pub max_fp_iterations: usize,
    pub status: CellStatus,
    pub message: Option<String>,
    /// Errors at steps `1..=N`; empty unless the cell succeeded.
    pub per_step_errors: Vec<f64>,
}

impl CellResult {
    fn pending(eps: f64, dt: f64, variable_set: VariableSet, comparand: Comparand) -> Self {
        Self {
            eps,
            dt,
            lambda: dt / (eps * eps),
            regime: classify_regime(eps, dt),
            variable_set,
            comparand,
            l1_error: f64::NAN,
            max_fp_residual: f64::NAN,
            max_fp_iterations: 0,
            status: CellStatus::Failed,
            message: None,
            per_step_errors: Vec::new(),
        }
    }

    fn with_error(mut self, err: &Error) -> Self {
        self.status = CellStatus::for_error(err);
        self.message = Some(err.to_string());
        self
    }

    fn with_errors(mut self, errors: Result<Vec<f64>>, fp_residual: f64, fp_iterations: usize) -> Self {
        self.max_fp_residual = fp_residual;
        self.max_fp_iterations = fp_iterations;
        match errors {
            Ok(errors) => {
                let report =
                    ErrorReport::new(errors, self.eps, self.dt, self.comparand, self.variable_set);
                self.l1_error = report.l1_norm;
                self.per_step_errors = report.per_step_errors;
                self.status = CellStatus::Ok;
                self
            }
            Err(e) => self.with_error(&e),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub mode: SweepMode,
    pub rows: Vec<CellResult>,
}

impl SweepTable {
    pub fn any_failed(&self) -> bool {
        self.rows.iter().any(|r| r.status == CellStatus::Failed)
    }
}

fn sorted_unique(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn variables_for(cfg: &SweepConfig, mode: SweepMode) -> Vec<VariableSet> {
    let mut vars: Vec<VariableSet> = cfg
        .variables
        .iter()
        .copied()
        .filter(|v| mode == SweepMode::Convergence || *v != VariableSet::Velocity)
        .collect();
    vars.sort();
    vars.dedup();
    vars
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Smallest sample count every step count divides, if not too large.
fn shared_sample_count(steps: &[usize]) -> Option<usize> {
    steps.iter().try_fold(1usize, |acc, &n| {
        let l = acc.checked_mul(n / gcd(acc, n))?;
        (l <= MAX_SHARED_SAMPLES).then_some(l)
    })
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))
}

type ApTrajectory = Trajectory<AugmentedState, StepDiagnostics>;

fn ap_effort(traj: &ApTrajectory) -> (f64, usize) {
    let iters = traj.steps.iter().map(|d| d.fp_iterations).max().unwrap_or(0);
    (max_fp_residual(traj), iters)
}

fn slow_series(traj: &ApTrajectory) -> Vec<SlowVars> {
    traj.states.iter().map(|s| SlowVars::new(s.x, s.e)).collect()
}

fn gc_series<M: FieldModel + ?Sized>(
    traj: &ApTrajectory,
    eps: f64,
    model: &M,
) -> Result<Vec<SlowVars>> {
    traj.states
        .iter()
        .map(|s| gc_transform(s.x, s.e, s.w, eps, model).map(|g| g.slow()))
        .collect()
}

/// Runs whichever sweep `mode` names.
pub fn run_sweep(cfg: &SweepConfig, mode: SweepMode) -> Result<SweepTable> {
    match mode {
        SweepMode::Convergence => run_convergence_sweep(cfg),
        SweepMode::AsymptoticDiscrete | SweepMode::AsymptoticContinuous => {
            run_asymptotic_sweep(cfg, mode)
        }
    }
}

/// Scheme against the resolved stiff characteristics, sampled at `nΔt`.
pub fn run_convergence_sweep(cfg: &SweepConfig) -> Result<SweepTable> {
    cfg.validate()?;
    let mode = SweepMode::Convergence;
    let vars = variables_for(cfg, mode);
    if !cfg.comparisons.contains(&mode) || vars.is_empty() {
        return Ok(SweepTable { mode, rows: Vec::new() });
    }
    let model = cfg.field.build()?;
    let model = model.as_ref();
    let eps_grid = sorted_unique(&cfg.eps_grid);
    let dt_grid = sorted_unique(&cfg.dt_grid);
    let steps: Vec<usize> = dt_grid.iter().map(|&dt| cfg.steps_for(dt)).collect();
    let shared = shared_sample_count(&steps);
    let init = PhaseState {
        x: cfg.x0,
        v: cfg.v0,
        t: 0.0,
    };

    let rows = build_pool(cfg.parallel_workers)?.install(|| {
        let references: Vec<Option<Result<Trajectory<PhaseState>>>> = eps_grid
            .par_iter()
            .map(|&eps| {
                shared.map(|n| reference_solve_stiff(init, eps, cfg.horizon, n, model, &cfg.reference))
            })
            .collect();

        let cells: Vec<(usize, usize)> = (0..eps_grid.len())
            .flat_map(|i| (0..dt_grid.len()).map(move |j| (i, j)))
            .collect();
        cells
            .par_iter()
            .map(|&(i, j)| {
                let (eps, dt, n) = (eps_grid[i], dt_grid[j], steps[j]);
                let own;
                let (reference, stride) = match (&references[i], shared) {
                    (Some(r), Some(total)) => (r.as_ref(), total / n),
                    _ => {
                        own = reference_solve_stiff(init, eps, cfg.horizon, n, model, &cfg.reference);
                        (own.as_ref(), 1)
                    }
                };
                convergence_cell(cfg, model, &vars, eps, dt, reference, stride)
            })
            .collect::<Vec<_>>()
    });
    Ok(SweepTable {
        mode,
        rows: rows.into_iter().flatten().collect(),
    })
}

fn convergence_cell(
    cfg: &SweepConfig,
    model: &dyn FieldModel,
    vars: &[VariableSet],
    eps: f64,
    dt: f64,
    reference: std::result::Result<&Trajectory<PhaseState>, &Error>,
    stride: usize,
) -> Vec<CellResult> {
    let pending = |v| CellResult::pending(eps, dt, v, Comparand::ReferenceStiff);
    let reference = match reference {
        Ok(r) => r,
        Err(e) => return vars.iter().map(|&v| pending(v).with_error(e)).collect(),
    };
    let params = SchemeParams {
        fp: cfg.fixed_point,
        ..SchemeParams::new(eps, dt, cfg.horizon)
    };
    let traj = match ap_solve(AugmentedState::from_phase(cfg.x0, cfg.v0), &params, model) {
        Ok(t) => t,
        Err(e) => return vars.iter().map(|&v| pending(v).with_error(&e)).collect(),
    };
    let (residual, iterations) = ap_effort(&traj);
    let n = traj.num_steps();
    let sampled: Vec<PhaseState> = reference.states.iter().step_by(stride).copied().collect();

    vars.iter()
        .map(|&v| {
            let errors = match v {
                VariableSet::Slow => {
                    let exact: Vec<SlowVars> = sampled
                        .iter()
                        .map(|s| SlowVars::new(s.x, s.kinetic_energy()))
                        .collect();
                    per_step_errors(&slow_series(&traj), &exact, n)
                }
                VariableSet::GuidingCenter => (|| {
                    let exact: Vec<SlowVars> = sampled
                        .iter()
                        .map(|s| gc_transform(s.x, s.kinetic_energy(), s.v, eps, model).map(|g| g.slow()))
                        .collect::<Result<_>>()?;
                    per_step_errors(&gc_series(&traj, eps, model)?, &exact, n)
                })(),
                VariableSet::Velocity => {
                    // gyration phases differ by design; compare speeds
                    let w: Vec<f64> = traj.states.iter().map(|s| s.w.norm()).collect();
                    let v: Vec<f64> = sampled.iter().map(|s| s.v.norm()).collect();
                    per_step_errors(&w, &v, n)
                }
            };
            pending(v).with_errors(errors, residual, iterations)
        })
        .collect()
}

/// Scheme against the limit model: the limit scheme at the same Δt
/// (`AsymptoticDiscrete`) or the resolved limit system
/// (`AsymptoticContinuous`). `(x, e)` errors use the limit solution seeded at
/// `(x⁰, e⁰)`; guiding-center errors use the one seeded at `(x_gc⁰, e_gc⁰)`.
pub fn run_asymptotic_sweep(cfg: &SweepConfig, mode: SweepMode) -> Result<SweepTable> {
    cfg.validate()?;
    if mode == SweepMode::Convergence {
        return Err(Error::Config("asymptotic sweep needs an asymptotic mode".into()));
    }
    let vars = variables_for(cfg, mode);
    if !cfg.comparisons.contains(&mode) || vars.is_empty() {
        return Ok(SweepTable { mode, rows: Vec::new() });
    }
    let model = cfg.field.build()?;
    let model = model.as_ref();
    let eps_grid = sorted_unique(&cfg.eps_grid);
    let dt_grid = sorted_unique(&cfg.dt_grid);

    let rows = build_pool(cfg.parallel_workers)?.install(|| {
        let cells: Vec<(f64, f64)> = eps_grid
            .iter()
            .flat_map(|&eps| dt_grid.iter().map(move |&dt| (eps, dt)))
            .collect();
        cells
            .par_iter()
            .map(|&(eps, dt)| asymptotic_cell(cfg, model, &vars, mode, eps, dt))
            .collect::<Vec<_>>()
    });
    Ok(SweepTable {
        mode,
        rows: rows.into_iter().flatten().collect(),
    })
}

/// Limit-model trajectory as `(y, g)` pairs plus its solver effort.
fn limit_series(
    cfg: &SweepConfig,
    model: &dyn FieldModel,
    mode: SweepMode,
    seed: SlowVars,
    dt: f64,
) -> Result<(Vec<SlowVars>, f64, usize)> {
    let n = cfg.steps_for(dt);
    if mode == SweepMode::AsymptoticDiscrete {
        let init = LimitSchemeState {
            y: seed.x,
            g: seed.e,
            t: 0.0,
        };
        let traj = limit_solve(init, dt, cfg.horizon, model, &cfg.fixed_point)?;
        let residual = traj.steps.iter().map(|d| d.fp_residual).fold(0.0, f64::max);
        let iters = traj.steps.iter().map(|d| d.fp_iterations).max().unwrap_or(0);
        let series = traj.states.iter().map(|s| SlowVars::new(s.y, s.g)).collect();
        Ok((series, residual, iters))
    } else {
        let init = LimitState {
            y: seed.x,
            g: seed.e,
            t: 0.0,
        };
        let traj = reference_solve_limit(init, cfg.horizon, n, model, &cfg.reference)?;
        let series = traj.states.iter().map(|s| SlowVars::new(s.y, s.g)).collect();
        Ok((series, 0.0, 0))
    }
}

fn asymptotic_cell(
    cfg: &SweepConfig,
    model: &dyn FieldModel,
    vars: &[VariableSet],
    mode: SweepMode,
    eps: f64,
    dt: f64,
) -> Vec<CellResult> {
    let comparand = match mode {
        SweepMode::AsymptoticDiscrete => Comparand::LimitScheme,
        _ => Comparand::LimitReference,
    };
    let pending = |v| CellResult::pending(eps, dt, v, comparand);
    let params = SchemeParams {
        fp: cfg.fixed_point,
        ..SchemeParams::new(eps, dt, cfg.horizon)
    };
    let init = AugmentedState::from_phase(cfg.x0, cfg.v0);
    let traj = match ap_solve(init, &params, model) {
        Ok(t) => t,
        Err(e) => return vars.iter().map(|&v| pending(v).with_error(&e)).collect(),
    };
    let (ap_residual, ap_iterations) = ap_effort(&traj);
    let n = traj.num_steps();

    vars.iter()
        .map(|&v| {
            let outcome = (|| {
                let (scheme, seed) = match v {
                    VariableSet::Slow => (slow_series(&traj), SlowVars::new(init.x, init.e)),
                    _ => {
                        let seed = gc_transform(init.x, init.e, init.w, eps, model)?.slow();
                        (gc_series(&traj, eps, model)?, seed)
                    }
                };
                let (limit, residual, iters) = limit_series(cfg, model, mode, seed, dt)?;
                Ok((per_step_errors(&scheme, &limit, n)?, residual, iters))
            })();
            match outcome {
                Ok((errors, residual, iters)) => pending(v).with_errors(
                    Ok(errors),
                    ap_residual.max(residual),
                    ap_iterations.max(iters),
                ),
                Err(e) => pending(v).with_error(&e),
            }
        })
        .collect()
}
