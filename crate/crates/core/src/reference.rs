//! Fine-step ground truth for the stiff characteristics and for the limit
//! drift system.
//!
//! Both solvers use the classical fourth-order Runge–Kutta method at a fixed
//! internal step chosen so that an integer number of steps fits between
//! consecutive output samples; outputs land exactly on `t_n = n T / N`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::FieldModel;
use crate::geometry::{perp, Vec2};
use crate::trajectory::Trajectory;

/// State of the stiff system: position, velocity, time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub x: Vec2,
    pub v: Vec2,
    pub t: f64,
}

impl PhaseState {
    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.v.norm_sq()
    }
}

/// State of the limit system: position and limit kinetic energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitState {
    pub y: Vec2,
    pub g: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefSolverConfig {
    /// Internal RK4 steps per gyroperiod `2πε²/b_ceiling`.
    pub points_per_gyroperiod: usize,
    /// Hard cap on internal steps of a stiff solve.
    pub max_steps: u64,
    /// Allowed relative energy drift `|H_n - H_0| / (1 + |H_0|)`.
    pub energy_drift_tol: f64,
    /// Internal steps over `[0, T]` for the limit solver (rounded up to a
    /// multiple of the sample count).
    pub limit_steps: usize,
}

impl Default for RefSolverConfig {
    fn default() -> Self {
        Self {
            points_per_gyroperiod: 160,
            max_steps: 100_000_000,
            energy_drift_tol: 1e-8,
            limit_steps: 1 << 14,
        }
    }
}

impl RefSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.points_per_gyroperiod < 8 {
            return Err(Error::InvalidParams(format!(
                "points_per_gyroperiod must be at least 8, got {}",
                self.points_per_gyroperiod
            )));
        }
        if !(self.energy_drift_tol > 0.0) || self.limit_steps == 0 {
            return Err(Error::InvalidParams(
                "energy_drift_tol and limit_steps must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn check_horizon(t_final: f64, samples: usize) -> Result<()> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidParams(format!("horizon must be positive, got {t_final}")));
    }
    if samples == 0 {
        return Err(Error::InvalidParams("need at least one output sample".into()));
    }
    Ok(())
}

/// Number of internal stiff steps per output interval for the given setup.
pub fn stiff_substeps(
    eps: f64,
    t_final: f64,
    samples: usize,
    b_ceiling: f64,
    cfg: &RefSolverConfig,
) -> u64 {
    let h_target = 2.0 * PI * eps * eps / (cfg.points_per_gyroperiod as f64 * b_ceiling);
    let interval = t_final / samples as f64;
    ((interval / h_target).ceil() as u64).max(1)
}

/// Integrates `ε ẋ = v`, `ε v̇ = E(x) - b(x) v⊥/ε` and returns `samples + 1`
/// states at `t_n = n T / samples`.
pub fn reference_solve_stiff<M: FieldModel + ?Sized>(
    init: PhaseState,
    eps: f64,
    t_final: f64,
    samples: usize,
    model: &M,
    cfg: &RefSolverConfig,
) -> Result<Trajectory<PhaseState>> {
    cfg.validate()?;
    check_horizon(t_final, samples)?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParams(format!("eps must be positive, got {eps}")));
    }
    model.check(init.x)?;

    let substeps = stiff_substeps(eps, t_final, samples, model.b_ceiling_estimate(), cfg);
    let needed = substeps.saturating_mul(samples as u64);
    if needed > cfg.max_steps {
        return Err(Error::StepBudgetExceeded {
            needed,
            budget: cfg.max_steps,
        });
    }

    let interval = t_final / samples as f64;
    let h = interval / substeps as f64;
    let inv_eps = 1.0 / eps;
    let inv_eps2 = inv_eps * inv_eps;

    let rhs = |x: Vec2, v: Vec2| -> Result<(Vec2, Vec2)> {
        model.check(x)?;
        let dv = model.electric(x) * inv_eps - perp(v) * (model.b(x) * inv_eps2);
        Ok((v * inv_eps, dv))
    };

    let energy = |x: Vec2, v: Vec2| 0.5 * v.norm_sq() + model.phi(x);
    let h0 = energy(init.x, init.v);

    let mut traj = Trajectory::new(PhaseState { t: 0.0, ..init });
    traj.states.reserve(samples);
    let (mut x, mut v) = (init.x, init.v);
    for n in 1..=samples {
        for _ in 0..substeps {
            let (k1x, k1v) = rhs(x, v)?;
            let (k2x, k2v) = rhs(x + k1x * (0.5 * h), v + k1v * (0.5 * h))?;
            let (k3x, k3v) = rhs(x + k2x * (0.5 * h), v + k2v * (0.5 * h))?;
            let (k4x, k4v) = rhs(x + k3x * h, v + k3v * h)?;
            x += (k1x + (k2x + k3x) * 2.0 + k4x) * (h / 6.0);
            v += (k1v + (k2v + k3v) * 2.0 + k4v) * (h / 6.0);
        }
        model.check(x)?;
        let t = n as f64 * interval;
        let drift = (energy(x, v) - h0).abs() / (1.0 + h0.abs());
        if !(drift <= cfg.energy_drift_tol) {
            return Err(Error::EnergyDriftExceeded {
                drift,
                tol: cfg.energy_drift_tol,
                t,
            });
        }
        traj.states.push(PhaseState { x, v, t });
    }
    Ok(traj)
}

/// Integrates `ẏ = -(E⊥/b)(y) - g ∇⊥(1/b)(y)` with `g = g⁰ - (φ(y) - φ(y⁰))`
/// enforced algebraically, returning `samples + 1` states on `[0, T]`.
pub fn reference_solve_limit<M: FieldModel + ?Sized>(
    init: LimitState,
    t_final: f64,
    samples: usize,
    model: &M,
    cfg: &RefSolverConfig,
) -> Result<Trajectory<LimitState>> {
    cfg.validate()?;
    check_horizon(t_final, samples)?;
    model.check(init.y)?;

    let substeps = cfg.limit_steps.div_ceil(samples).max(1);
    let interval = t_final / samples as f64;
    let h = interval / substeps as f64;

    let invariant = init.g + model.phi(init.y);
    let rhs = |y: Vec2| -> Result<Vec2> {
        model.check(y)?;
        let g = invariant - model.phi(y);
        let drift = -perp(model.electric(y)) / model.b(y);
        Ok(drift - perp(model.grad_inv_b(y)) * g)
    };

    let mut traj = Trajectory::new(LimitState { t: 0.0, ..init });
    traj.states.reserve(samples);
    let mut y = init.y;
    for n in 1..=samples {
        for _ in 0..substeps {
            let k1 = rhs(y)?;
            let k2 = rhs(y + k1 * (0.5 * h))?;
            let k3 = rhs(y + k2 * (0.5 * h))?;
            let k4 = rhs(y + k3 * h)?;
            y += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
        }
        model.check(y)?;
        let g = init.g - (model.phi(y) - model.phi(init.y));
        traj.states.push(LimitState {
            y,
            g,
            t: n as f64 * interval,
        });
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{PaperTestField, Potential, UniformField};

    #[test]
    fn pure_gyration_closes_after_one_period() {
        let m = UniformField::new(1.0, Potential::Zero);
        let init = PhaseState {
            x: Vec2::ZERO,
            v: Vec2::new(1.0, 0.0),
            t: 0.0,
        };
        // with ε = 1, b = 1 the gyration period is 2π
        let traj =
            reference_solve_stiff(init, 1.0, 2.0 * PI, 1, &m, &RefSolverConfig::default()).unwrap();
        let end = traj.last();
        assert!((end.v - Vec2::new(1.0, 0.0)).norm() < 1e-6);
        assert!(end.x.norm() < 1e-6);
        // circle of radius 1 centered at x_gc = x - v⊥ = (0, -1)
        let mid = reference_solve_stiff(init, 1.0, PI, 1, &m, &RefSolverConfig::default()).unwrap();
        assert!((mid.last().x - Vec2::new(0.0, -2.0)).norm() < 1e-6);
    }

    #[test]
    fn escaping_start_is_rejected() {
        let m = PaperTestField::default();
        let init = PhaseState {
            x: Vec2::new(8.0, 8.0),
            v: Vec2::ZERO,
            t: 0.0,
        };
        let err = reference_solve_stiff(init, 0.5, 1.0, 4, &m, &RefSolverConfig::default());
        assert!(matches!(err, Err(Error::DomainEscape(_))));
        let err = reference_solve_limit(
            LimitState { y: init.x, g: 1.0, t: 0.0 },
            1.0,
            4,
            &m,
            &RefSolverConfig::default(),
        );
        assert!(matches!(err, Err(Error::DomainEscape(_))));
    }

    #[test]
    fn step_budget_is_enforced() {
        let m = PaperTestField::default();
        let init = PhaseState {
            x: Vec2::new(2.0, 2.0),
            v: Vec2::new(3.0, 3.0),
            t: 0.0,
        };
        let cfg = RefSolverConfig {
            max_steps: 1000,
            ..Default::default()
        };
        let err = reference_solve_stiff(init, 1e-3, 1.0, 4, &m, &cfg);
        assert!(matches!(err, Err(Error::StepBudgetExceeded { .. })));
    }

    #[test]
    fn energy_drift_is_reported() {
        let m = PaperTestField::default();
        let init = PhaseState {
            x: Vec2::new(2.0, 2.0),
            v: Vec2::new(3.0, 3.0),
            t: 0.0,
        };
        let cfg = RefSolverConfig {
            points_per_gyroperiod: 8,
            energy_drift_tol: 1e-15,
            ..Default::default()
        };
        let err = reference_solve_stiff(init, 0.5, 1.0, 4, &m, &cfg);
        assert!(matches!(err, Err(Error::EnergyDriftExceeded { .. })));
    }

    #[test]
    fn limit_reference_is_static_without_drifts() {
        let m = UniformField::new(1.0, Potential::Zero);
        let init = LimitState {
            y: Vec2::new(0.3, -1.2),
            g: 4.0,
            t: 0.0,
        };
        let traj = reference_solve_limit(init, 1.0, 8, &m, &RefSolverConfig::default()).unwrap();
        assert!(traj.states.iter().all(|s| s.y == init.y && s.g == init.g));

        let p = PaperTestField::default();
        let origin = LimitState {
            y: Vec2::ZERO,
            g: 0.0,
            t: 0.0,
        };
        let traj = reference_solve_limit(origin, 1.0, 8, &p, &RefSolverConfig::default()).unwrap();
        assert!(traj.states.iter().all(|s| s.y == Vec2::ZERO));
    }

    #[test]
    fn limit_reference_g_invariant_is_exact() {
        let m = PaperTestField::default();
        let init = LimitState {
            y: Vec2::new(2.0, 2.0),
            g: 9.0,
            t: 0.0,
        };
        let traj = reference_solve_limit(init, 1.0, 64, &m, &RefSolverConfig::default()).unwrap();
        let c0 = init.g + m.phi(init.y);
        for s in &traj.states {
            assert!((s.g + m.phi(s.y) - c0).abs() <= 1e-12 * c0.abs());
        }
    }
}
