//! Implicit midpoint scheme for the limit drift system
//!
//! ```text
//! (y' - y)/Δt = -(E⊥/b)(ȳ) - ḡ ∇⊥(1/b)(ȳ)
//! (g' - g)/Δt = -(φ(y') - φ(y))/Δt
//! ```
//!
//! The energy equation gives `g'` from `y'`; `y'` is found by a fixed point.
//! No stiffness parameter enters anywhere in this module.

use crate::error::{Error, FixedPointStage, Result};
use crate::fields::FieldModel;
use crate::geometry::{perp, Vec2};
use crate::scheme_ap::{num_steps, FixedPointControls};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitSchemeState {
    pub y: Vec2,
    pub g: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitStepDiagnostics {
    pub fp_iterations: usize,
    pub fp_residual: f64,
}

pub fn limit_step<M: FieldModel + ?Sized>(
    s: &LimitSchemeState,
    dt: f64,
    model: &M,
    fp: &FixedPointControls,
) -> Result<(LimitSchemeState, LimitStepDiagnostics)> {
    model.check(s.y)?;
    let phi_n = model.phi(s.y);
    let mut yp = s.y;
    let mut residual = f64::INFINITY;
    for it in 1..=fp.max_iter {
        let yb = s.y.midpoint(yp);
        if !(yp.is_finite() && model.in_domain(yp) && model.in_domain(yb)) {
            return Err(Error::FixedPointDiverged {
                stage: FixedPointStage::Limit,
                iterations: it,
                residual,
            });
        }
        let g_bar = s.g - 0.5 * (model.phi(yp) - phi_n);
        let drift = -perp(model.electric(yb)) / model.b(yb);
        let next = s.y + (drift - perp(model.grad_inv_b(yb)) * g_bar) * dt;
        residual = fp.scaled((next - yp).norm(), s.y.norm().max(1.0));
        yp = next;
        if residual <= fp.rel_tol {
            model.check(yp)?;
            let g_new = s.g - (model.phi(yp) - phi_n);
            let state = LimitSchemeState {
                y: yp,
                g: g_new,
                t: s.t + dt,
            };
            return Ok((
                state,
                LimitStepDiagnostics {
                    fp_iterations: it,
                    fp_residual: residual,
                },
            ));
        }
    }
    Err(Error::FixedPointDiverged {
        stage: FixedPointStage::Limit,
        iterations: fp.max_iter,
        residual,
    })
}

pub fn limit_solve<M: FieldModel + ?Sized>(
    init: LimitSchemeState,
    dt: f64,
    t_final: f64,
    model: &M,
    fp: &FixedPointControls,
) -> Result<Trajectory<LimitSchemeState, LimitStepDiagnostics>> {
    fp.validate()?;
    let n_steps = num_steps(t_final, dt)?;
    model.check(init.y)?;
    let mut traj = Trajectory::new(init);
    traj.states.reserve(n_steps);
    traj.steps.reserve(n_steps);
    let mut s = init;
    for n in 0..n_steps {
        let (mut next, diag) = limit_step(&s, dt, model, fp).map_err(|e| e.at_step(n + 1))?;
        next.t = (n + 1) as f64 * dt;
        traj.states.push(next);
        traj.steps.push(diag);
        s = next;
    }
    Ok(traj)
}
