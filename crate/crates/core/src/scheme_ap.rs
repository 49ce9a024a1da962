//! Implicit midpoint scheme on the augmented `(x, e, w)` system.
//!
//! One step solves
//!
//! ```text
//! (x' - x)/Δt = w̄/ε - (ē - ½‖w̄‖²) ∇⊥(1/b)(x̄)
//! (e' - e)/Δt = (φ(x) - φ(x'))/Δt
//! (w' - w)/Δt = E(x̄)/ε - b(x̄) w̄⊥/ε²
//! ```
//!
//! with bars denoting half-step averages. The energy equation is eliminated
//! algebraically and the remaining system is solved by two nested fixed
//! points: positions for a frozen `w̄` (inner), then
//! `w̄ = (I + ½λ b(x̄) J)⁻¹ (w + ½ελ E(x̄))` with `λ = Δt/ε²` (outer).
//! Both maps contract at a rate `O(Δt)` independent of `ε`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, FixedPointStage, Result};
use crate::fields::FieldModel;
use crate::geometry::{cayley_solve, perp, Vec2};
use crate::trajectory::Trajectory;

/// One discrete state of the augmented scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentedState {
    pub x: Vec2,
    /// Augmented kinetic energy. Equal to `½‖w‖²` only initially.
    pub e: f64,
    pub w: Vec2,
    pub t: f64,
}

impl AugmentedState {
    /// Initialization `x⁰ = x₀, w⁰ = v₀, e⁰ = ½‖v₀‖²`.
    pub fn from_phase(x: Vec2, v: Vec2) -> Self {
        Self {
            x,
            e: 0.5 * v.norm_sq(),
            w: v,
            t: 0.0,
        }
    }
}

/// Tolerances and iteration caps shared by both implicit schemes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedPointControls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iter: usize,
    pub inner_max_iter: usize,
}

impl Default for FixedPointControls {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            max_iter: 200,
            inner_max_iter: 50,
        }
    }
}

impl FixedPointControls {
    /// Scaled residual `‖Δ‖ / max(‖z‖, abs_tol/rel_tol)`; converged when it
    /// drops to `rel_tol`.
    #[inline]
    pub(crate) fn scaled(&self, delta: f64, magnitude: f64) -> f64 {
        delta / magnitude.max(self.abs_tol / self.rel_tol)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) || self.max_iter == 0 || self.inner_max_iter == 0 {
            return Err(Error::InvalidParams(
                "fixed-point tolerances and caps must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    pub eps: f64,
    pub dt: f64,
    pub t_final: f64,
    pub fp: FixedPointControls,
}

impl SchemeParams {
    pub fn new(eps: f64, dt: f64, t_final: f64) -> Self {
        Self {
            eps,
            dt,
            t_final,
            fp: FixedPointControls::default(),
        }
    }

    /// Stiffness ratio `λ = Δt/ε²`.
    pub fn lambda(&self) -> f64 {
        self.dt / (self.eps * self.eps)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidParams(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParams(format!("dt must be positive, got {}", self.dt)));
        }
        if !self.lambda().is_finite() {
            return Err(Error::InvalidParams("dt/eps² overflows".into()));
        }
        self.fp.validate()
    }

    /// `N = T/Δt`, which must be an integer to within one part in 10¹².
    pub fn num_steps(&self) -> Result<usize> {
        num_steps(self.t_final, self.dt)
    }
}

pub(crate) fn num_steps(t_final: f64, dt: f64) -> Result<usize> {
    if !(t_final >= 0.0 && t_final.is_finite()) || !(dt > 0.0) {
        return Err(Error::InvalidParams(format!("bad horizon T = {t_final}, dt = {dt}")));
    }
    let ratio = t_final / dt;
    let n = ratio.round();
    if (ratio - n).abs() > 1e-12 * n.max(1.0) {
        return Err(Error::InvalidParams(format!(
            "T = {t_final} is not an integer multiple of dt = {dt}"
        )));
    }
    Ok(n as usize)
}

/// Converged half-step quantities and solver effort for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    /// Outer iterations.
    pub fp_iterations: usize,
    /// Inner iterations summed over all outer iterations.
    pub inner_iterations: usize,
    pub fp_residual: f64,
    pub w_bar: Vec2,
    pub x_bar: Vec2,
    pub e_bar: f64,
}

fn diverged(stage: FixedPointStage, iterations: usize, residual: f64) -> Error {
    Error::FixedPointDiverged {
        stage,
        iterations,
        residual,
    }
}

/// Solves the position equation for a frozen `w̄`; returns `(x', iterations)`.
fn solve_position<M: FieldModel + ?Sized>(
    s: &AugmentedState,
    phi_n: f64,
    w_bar: Vec2,
    p: &SchemeParams,
    model: &M,
) -> Result<(Vec2, usize)> {
    let tol = p.fp.rel_tol * s.x.norm().max(1.0);
    let drift = w_bar / p.eps;
    let half_w2 = 0.5 * w_bar.norm_sq();
    let mut xp = s.x + drift * p.dt;
    let mut delta = f64::INFINITY;
    for it in 1..=p.fp.inner_max_iter {
        let xb = s.x.midpoint(xp);
        if !(xp.is_finite() && model.in_domain(xp) && model.in_domain(xb)) {
            return Err(diverged(FixedPointStage::Inner, it, delta));
        }
        let e_bar = s.e - 0.5 * (model.phi(xp) - phi_n);
        let ghost = e_bar - half_w2;
        let next = s.x + (drift - perp(model.grad_inv_b(xb)) * ghost) * p.dt;
        delta = (next - xp).norm();
        xp = next;
        if delta <= tol {
            return Ok((xp, it));
        }
    }
    Err(diverged(FixedPointStage::Inner, p.fp.inner_max_iter, delta / s.x.norm().max(1.0)))
}

/// `w̄ = (I + ½λ b(x̄) J)⁻¹ (w + ½ελ E(x̄))`.
#[inline]
fn half_step_velocity<M: FieldModel + ?Sized>(
    w: Vec2,
    x_bar: Vec2,
    p: &SchemeParams,
    model: &M,
) -> Vec2 {
    let lambda = p.lambda();
    cayley_solve(
        0.5 * lambda * model.b(x_bar),
        w + model.electric(x_bar) * (0.5 * p.eps * lambda),
    )
}

/// Advances one step of the augmented scheme.
pub fn ap_step<M: FieldModel + ?Sized>(
    s: &AugmentedState,
    p: &SchemeParams,
    model: &M,
) -> Result<(AugmentedState, StepDiagnostics)> {
    model.check(s.x)?;
    let phi_n = model.phi(s.x);

    // frozen-coefficient guess, exact when b and E are constant
    let mut w_bar = half_step_velocity(s.w, s.x, p, model);
    let mut inner_total = 0;
    let mut residual = f64::INFINITY;

    for it in 1..=p.fp.max_iter {
        let (xp, inner) = solve_position(s, phi_n, w_bar, p, model)?;
        inner_total += inner;
        let x_bar = s.x.midpoint(xp);
        let next = half_step_velocity(s.w, x_bar, p, model);
        residual = p.fp.scaled((next - w_bar).norm(), next.norm());
        if !residual.is_finite() {
            return Err(diverged(FixedPointStage::Outer, it, residual));
        }
        w_bar = next;
        if residual <= p.fp.rel_tol {
            model.check(xp)?;
            let phi_p = model.phi(xp);
            let e_new = s.e - (phi_p - phi_n);
            let w_new = w_bar * 2.0 - s.w;
            let state = AugmentedState {
                x: xp,
                e: e_new,
                w: w_new,
                t: s.t + p.dt,
            };
            let diag = StepDiagnostics {
                fp_iterations: it,
                inner_iterations: inner_total,
                fp_residual: residual,
                w_bar,
                x_bar,
                e_bar: 0.5 * (s.e + e_new),
            };
            return Ok((state, diag));
        }
    }
    Err(diverged(FixedPointStage::Outer, p.fp.max_iter, residual))
}

/// Runs `N = T/Δt` steps from `init`. Step errors carry their step index.
pub fn ap_solve<M: FieldModel + ?Sized>(
    init: AugmentedState,
    p: &SchemeParams,
    model: &M,
) -> Result<Trajectory<AugmentedState, StepDiagnostics>> {
    p.validate()?;
    let n_steps = p.num_steps()?;
    model.check(init.x)?;
    let mut traj = Trajectory::new(init);
    traj.states.reserve(n_steps);
    traj.steps.reserve(n_steps);
    let mut s = init;
    for n in 0..n_steps {
        let (mut next, diag) = ap_step(&s, p, model).map_err(|e| e.at_step(n + 1))?;
        next.t = (n + 1) as f64 * p.dt;
        traj.states.push(next);
        traj.steps.push(diag);
        s = next;
    }
    Ok(traj)
}

/// Largest per-step fixed-point residual of a trajectory (0 when empty).
pub fn max_fp_residual(traj: &Trajectory<AugmentedState, StepDiagnostics>) -> f64 {
    traj.steps.iter().map(|d| d.fp_residual).fold(0.0, f64::max)
}

/// Per-step `|ē^{n+1/2} - ½‖w̄^{n+1/2}‖²|`, the distance of the augmented
/// energy from the kinetic energy of the averaged velocity.
pub fn ap_limit_probe(traj: &Trajectory<AugmentedState, StepDiagnostics>) -> Vec<f64> {
    traj.states
        .windows(2)
        .map(|pair| {
            let e_bar = 0.5 * (pair[0].e + pair[1].e);
            let w_bar = pair[0].w.midpoint(pair[1].w);
            (e_bar - 0.5 * w_bar.norm_sq()).abs()
        })
        .collect()
}

/// Normalized residuals of the three raw scheme equations for a transition
/// `s → next`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeResidual {
    pub x: f64,
    pub e: f64,
    pub w: f64,
}

impl SchemeResidual {
    pub fn max(&self) -> f64 {
        self.x.max(self.e).max(self.w)
    }
}

/// Evaluates the unsolved (midpoint) form of the scheme at a candidate
/// transition. Each residual is scaled by the magnitude of the terms in its
/// equation.
pub fn scheme_residual<M: FieldModel + ?Sized>(
    s: &AugmentedState,
    next: &AugmentedState,
    p: &SchemeParams,
    model: &M,
) -> Result<SchemeResidual> {
    let x_bar = s.x.midpoint(next.x);
    model.check(x_bar)?;
    model.check(next.x)?;
    let w_bar = s.w.midpoint(next.w);
    let e_bar = 0.5 * (s.e + next.e);
    let (dt, eps) = (p.dt, p.eps);

    let dx = next.x - s.x;
    let ghost = (e_bar - 0.5 * w_bar.norm_sq()) * dt;
    let rhs_x = w_bar * (dt / eps) - perp(model.grad_inv_b(x_bar)) * ghost;
    let rx = (dx - rhs_x).norm() / s.x.norm().max(1.0);

    let dphi = model.phi(next.x) - model.phi(s.x);
    let re = ((next.e - s.e) + dphi).abs() / (s.e.abs() + model.phi(s.x).abs()).max(1.0);

    let lambda = p.lambda();
    let b = model.b(x_bar);
    let forcing = model.electric(x_bar) * (dt / eps);
    let rotation = perp(w_bar) * (lambda * b);
    let dw = next.w - s.w;
    let scale = dw.norm().max(forcing.norm()).max(rotation.norm()).max(s.w.norm()).max(1e-300);
    let rw = (dw - forcing + rotation).norm() / scale;

    Ok(SchemeResidual { x: rx, e: re, w: rw })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{PaperTestField, Potential, UniformField};

    fn paper_init() -> AugmentedState {
        AugmentedState::from_phase(Vec2::new(2.0, 2.0), Vec2::new(3.0, 3.0))
    }

    #[test]
    fn uniform_step_is_a_cayley_rotation() {
        let m = UniformField::new(1.0, Potential::Zero);
        let s = AugmentedState {
            x: Vec2::ZERO,
            e: 0.5,
            w: Vec2::new(1.0, 0.0),
            t: 0.0,
        };
        let p = SchemeParams::new(0.1, 0.02, 0.02);
        assert!((p.lambda() - 2.0).abs() < 1e-14);
        let (next, d) = ap_step(&s, &p, &m).unwrap();
        assert_eq!(d.fp_iterations, 1);
        assert!((d.w_bar - Vec2::new(0.5, -0.5)).norm() < 1e-15);
        assert!((next.w - Vec2::new(0.0, -1.0)).norm() < 1e-15);
        assert!((next.x - Vec2::new(0.1, -0.1)).norm() < 1e-15);
        assert_eq!(next.e, 0.5);
    }

    #[test]
    fn huge_step_fails_to_contract() {
        let m = PaperTestField::default();
        let p = SchemeParams::new(1.0, 10.0, 10.0);
        let err = ap_step(&paper_init(), &p, &m).unwrap_err();
        assert!(matches!(err, Error::FixedPointDiverged { .. }), "{err}");
    }

    #[test]
    fn start_outside_domain_is_rejected() {
        let m = PaperTestField::default();
        let s = AugmentedState::from_phase(Vec2::new(6.0, 8.0), Vec2::ZERO);
        let p = SchemeParams::new(0.5, 0.01, 1.0);
        assert!(matches!(ap_step(&s, &p, &m), Err(Error::DomainEscape(_))));
    }

    #[test]
    fn zero_steps_returns_init() {
        let m = PaperTestField::default();
        let p = SchemeParams::new(0.5, 0.01, 0.0);
        let traj = ap_solve(paper_init(), &p, &m).unwrap();
        assert_eq!(traj.states, vec![paper_init()]);
        assert!(traj.steps.is_empty());
        assert!(ap_limit_probe(&traj).is_empty());
    }

    #[test]
    fn horizon_must_be_a_multiple_of_dt() {
        let m = PaperTestField::default();
        let p = SchemeParams::new(0.5, 0.3, 1.0);
        assert!(matches!(ap_solve(paper_init(), &p, &m), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn uniform_field_preserves_velocity_norm() {
        let m = UniformField::new(1.0, Potential::Zero);
        let p = SchemeParams::new(0.05, 1.0 / 64.0, 1.0);
        let init = AugmentedState::from_phase(Vec2::new(1.0, -2.0), Vec2::new(0.6, 0.8));
        let traj = ap_solve(init, &p, &m).unwrap();
        assert_eq!(traj.num_steps(), 64);
        for s in &traj.states {
            assert!((s.w.norm() - 1.0).abs() < 1e-14);
        }
        // e stays ½‖w‖² exactly, so the probe reduces to ⅛‖wⁿ⁺¹ - wⁿ‖²
        for s in &traj.states {
            assert!((s.e - 0.5 * s.w.norm_sq()).abs() < 1e-14);
        }
        let probe = ap_limit_probe(&traj);
        assert_eq!(probe.len(), 64);
        for (pair, q) in traj.states.windows(2).zip(&probe) {
            let expected = 0.125 * (pair[1].w - pair[0].w).norm_sq();
            assert!((q - expected).abs() <= 1e-14, "{q} vs {expected}");
        }
    }

    #[test]
    fn energy_invariant_and_kinetic_identity_hold_each_step() {
        let m = PaperTestField::default();
        for eps in [1.0, 0.3, 0.05] {
            let p = SchemeParams::new(eps, 1.0 / 128.0, 1.0);
            let traj = ap_solve(paper_init(), &p, &m).unwrap();
            let c0 = traj.states[0].e + m.phi(traj.states[0].x);
            for (n, pair) in traj.states.windows(2).enumerate() {
                let (s, next) = (pair[0], pair[1]);
                let c = next.e + m.phi(next.x);
                assert!((c - c0).abs() <= 10.0 * p.fp.rel_tol * (n + 1) as f64);

                let d = &traj.steps[n];
                let lhs = eps * (next.w.norm_sq() - s.w.norm_sq());
                let rhs = 2.0 * p.dt * m.electric(d.x_bar).dot(d.w_bar);
                let scale = eps * s.w.norm_sq().max(1.0);
                assert!((lhs - rhs).abs() <= 10.0 * p.fp.rel_tol * scale);

                let r = scheme_residual(&s, &next, &p, &m).unwrap();
                assert!(r.max() <= 10.0 * p.fp.rel_tol, "step {n}: {r:?}");
            }
        }
    }
}
