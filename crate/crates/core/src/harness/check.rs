//! Invariant suite behind the `check` subcommand.

use crate::error::Result;
use crate::fields::FieldModel;
use crate::geometry::{cayley_rotate, cayley_solve, Vec2};
use crate::harness::config::SweepConfig;
use crate::reference::{reference_solve_stiff, PhaseState};
use crate::scheme_ap::{ap_solve, scheme_residual, AugmentedState, SchemeParams};
use crate::scheme_limit::{limit_solve, LimitSchemeState};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, worst: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: worst <= tolerance,
            worst,
            tolerance,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: worst {:.3e} (tol {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tolerance
        )
    }
}

const CHECK_EPS: [f64; 3] = [0.5, 0.1, 0.01];
const CHECK_DT: f64 = 1.0 / 64.0;

fn sample_vectors() -> Vec<Vec2> {
    let vals = [-3.0, -0.7, 0.0, 0.25, 1.5, 4.0];
    vals.iter()
        .flat_map(|&a| vals.iter().map(move |&b| Vec2::new(a, b)))
        .collect()
}

fn cayley_checks() -> Vec<CheckOutcome> {
    let mut isometry: f64 = 0.0;
    let mut norm_identity: f64 = 0.0;
    let mut unitary: f64 = 0.0;
    for alpha in [-50.0, -1.0, 0.0, 0.3, 2.0, 1e3] {
        for z in sample_vectors() {
            let scale = z.norm().max(1.0);
            let r = cayley_rotate(alpha, z);
            isometry = isometry.max((r.norm() - z.norm()).abs() / scale);
            let s = cayley_solve(alpha, z);
            let expected = z.norm_sq() / (1.0 + alpha * alpha);
            norm_identity = norm_identity.max((s.norm_sq() - expected).abs() / scale.powi(2));
            let back = cayley_rotate(-alpha, r);
            unitary = unitary.max((back - z).norm() / scale);
        }
    }
    vec![
        CheckOutcome::new("cayley rotation preserves norms", isometry, 1e-14),
        CheckOutcome::new("cayley resolvent norm identity", norm_identity, 1e-14),
        CheckOutcome::new("cayley rotation inverse", unitary, 1e-13),
    ]
}

/// Compares analytic derivatives against centered differences at points
/// inside the field's bounding box (or a default window).
fn field_checks(model: &dyn FieldModel) -> CheckOutcome {
    let h = 1e-5;
    let (lo, hi) = model
        .bounding_box()
        .unwrap_or((Vec2::new(-5.0, -5.0), Vec2::new(5.0, 5.0)));
    let mut worst: f64 = 0.0;
    for i in 1..8 {
        for j in 1..8 {
            let x = Vec2::new(
                lo.x1 + (hi.x1 - lo.x1) * i as f64 / 8.0,
                lo.x2 + (hi.x2 - lo.x2) * j as f64 / 8.0,
            );
            let probe = [x, x + Vec2::new(h, 0.0), x - Vec2::new(h, 0.0), x + Vec2::new(0.0, h), x - Vec2::new(0.0, h)];
            if !probe.iter().all(|p| model.in_domain(*p)) {
                continue;
            }
            let grad = |f: &dyn Fn(Vec2) -> f64| {
                Vec2::new(
                    (f(probe[1]) - f(probe[2])) / (2.0 * h),
                    (f(probe[3]) - f(probe[4])) / (2.0 * h),
                )
            };
            let minus_grad_phi = -grad(&|p| model.phi(p));
            let grad_inv_b = grad(&|p| 1.0 / model.b(p));
            let e = model.electric(x);
            let g = model.grad_inv_b(x);
            worst = worst
                .max((minus_grad_phi - e).norm() / e.norm().max(1.0))
                .max((grad_inv_b - g).norm() / g.norm().max(1.0));
        }
    }
    CheckOutcome::new("field derivatives match finite differences", worst, 1e-6)
}

/// Runs the suite on the configured field and initial data.
pub fn run_checks(cfg: &SweepConfig) -> Result<Vec<CheckOutcome>> {
    let model = cfg.field.build()?;
    let model = model.as_ref();
    let mut out = cayley_checks();
    out.push(field_checks(model));

    let init = AugmentedState::from_phase(cfg.x0, cfg.v0);
    let c0 = init.e + model.phi(init.x);
    let tol = cfg.fixed_point.rel_tol;
    for eps in CHECK_EPS {
        let p = SchemeParams {
            fp: cfg.fixed_point,
            ..SchemeParams::new(eps, CHECK_DT, cfg.horizon)
        };
        let traj = ap_solve(init, &p, model)?;
        let invariant = traj
            .states
            .iter()
            .map(|s| (s.e + model.phi(s.x) - c0).abs())
            .fold(0.0, f64::max);
        out.push(CheckOutcome::new(
            format!("discrete e + phi invariant (eps = {eps})"),
            invariant,
            1e-10,
        ));
        let mut kinetic: f64 = 0.0;
        let mut residual: f64 = 0.0;
        for (pair, d) in traj.states.windows(2).zip(&traj.steps) {
            let lhs = eps * (pair[1].w.norm_sq() - pair[0].w.norm_sq());
            let rhs = 2.0 * p.dt * model.electric(d.x_bar).dot(d.w_bar);
            let scale = (eps * pair[0].w.norm_sq()).max(rhs.abs()).max(1.0);
            kinetic = kinetic.max((lhs - rhs).abs() / scale);
            residual = residual.max(scheme_residual(&pair[0], &pair[1], &p, model)?.max());
        }
        out.push(CheckOutcome::new(
            format!("kinetic energy identity (eps = {eps})"),
            kinetic,
            1e-12,
        ));
        out.push(CheckOutcome::new(
            format!("raw scheme residual (eps = {eps})"),
            residual,
            10.0 * tol,
        ));
    }

    let limit_init = LimitSchemeState {
        y: init.x,
        g: init.e,
        t: 0.0,
    };
    let limit = limit_solve(limit_init, CHECK_DT, cfg.horizon, model, &cfg.fixed_point)?;
    let g_drift = limit
        .states
        .iter()
        .map(|s| (s.g + model.phi(s.y) - c0).abs())
        .fold(0.0, f64::max);
    out.push(CheckOutcome::new("limit scheme g + phi invariant", g_drift, 1e-10));

    let reference = reference_solve_stiff(
        PhaseState {
            x: cfg.x0,
            v: cfg.v0,
            t: 0.0,
        },
        0.5,
        cfg.horizon,
        16,
        model,
        &cfg.reference,
    )?;
    let drift = reference
        .states
        .iter()
        .map(|s| (s.kinetic_energy() + model.phi(s.x) - c0).abs() / (1.0 + c0.abs()))
        .fold(0.0, f64::max);
    out.push(CheckOutcome::new(
        "reference energy drift (eps = 0.5)",
        drift,
        cfg.reference.energy_drift_tol,
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let cfg = SweepConfig::default();
        let outcomes = run_checks(&cfg).unwrap();
        for o in &outcomes {
            assert!(o.passed, "{}", o.line());
        }
        assert!(outcomes.len() >= 14);
    }
}
