//! Log-log rate fits over sweep tables and their pass/fail targets.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::diagnostics::VariableSet;
use crate::error::{Error, Result};
use crate::harness::config::SweepMode;
use crate::harness::sweep::{CellResult, Regime, SweepTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateAxis {
    Eps,
    Dt,
}

impl RateAxis {
    pub fn label(&self) -> &'static str {
        match self {
            RateAxis::Eps => "eps",
            RateAxis::Dt => "dt",
        }
    }
}

impl fmt::Display for RateAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Least-squares line `log error = slope · log param + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: Range<usize>,
    pub axis: RateAxis,
}

/// Fits `points[window]`; points with a non-positive or non-finite
/// coordinate are dropped before counting.
pub fn fit_rate(points: &[(f64, f64)], window: Range<usize>, axis: RateAxis) -> Result<RateFit> {
    let slice = points.get(window.clone()).ok_or_else(|| {
        Error::DegenerateFit(format!("window {window:?} exceeds {} points", points.len()))
    })?;
    let logs: Vec<(f64, f64)> = slice
        .iter()
        .filter(|(p, e)| *p > 0.0 && *e > 0.0 && p.is_finite() && e.is_finite())
        .map(|(p, e)| (p.ln(), e.ln()))
        .collect();
    if logs.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least 3 usable points, got {}",
            logs.len()
        )));
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if !(sxx > 1e-300) {
        return Err(Error::DegenerateFit("parameter has zero variance".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = logs
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        window,
        axis,
    })
}

/// Which cells of a table enter a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellWindow {
    /// `Δt ≤ ε³`.
    StiffResolved,
    /// `Δt ≤ ε³` and `ε < 1`.
    StiffResolvedSmallEps,
    /// `ε ≤ 1/4`.
    SmallEps,
    /// `ε ≤ 1/4` and `Δt² ≤ ε/8`, so the `ε` term of `ε + Δt²` dominates.
    SmallEpsLinearFloor,
    /// `ε ≤ 1/4` and `Δt ≤ ε/2`, so the `ε²` term of `ε² + Δt²` dominates.
    SmallEpsQuadraticFloor,
}

impl CellWindow {
    pub fn label(&self) -> &'static str {
        match self {
            CellWindow::StiffResolved => "dt <= eps^3",
            CellWindow::StiffResolvedSmallEps => "dt <= eps^3, eps < 1",
            CellWindow::SmallEps => "eps <= 1/4",
            CellWindow::SmallEpsLinearFloor => "eps <= 1/4, dt^2 <= eps/8",
            CellWindow::SmallEpsQuadraticFloor => "eps <= 1/4, dt <= eps/2",
        }
    }

    pub fn contains(&self, eps: f64, dt: f64) -> bool {
        let resolved = classify_is_resolved(eps, dt);
        match self {
            CellWindow::StiffResolved => resolved,
            CellWindow::StiffResolvedSmallEps => resolved && eps < 1.0,
            CellWindow::SmallEps => eps <= 0.25,
            CellWindow::SmallEpsLinearFloor => eps <= 0.25 && dt * dt <= eps / 8.0,
            CellWindow::SmallEpsQuadraticFloor => eps <= 0.25 && dt <= eps / 2.0,
        }
    }
}

fn classify_is_resolved(eps: f64, dt: f64) -> bool {
    crate::harness::sweep::classify_regime(eps, dt) == Regime::StiffResolved
}

/// A theoretical slope with its accepted interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateTarget {
    pub variable_set: VariableSet,
    pub axis: RateAxis,
    pub target: f64,
    pub lo: f64,
    pub hi: f64,
    pub cells: CellWindow,
}

/// Targets checked for each sweep mode.
pub fn rate_targets(mode: SweepMode) -> Vec<RateTarget> {
    use VariableSet::{GuidingCenter, Slow};
    let t = |variable_set, axis, target: f64, lo, hi, cells| RateTarget {
        variable_set,
        axis,
        target,
        lo,
        hi,
        cells,
    };
    match mode {
        SweepMode::Convergence => vec![
            t(Slow, RateAxis::Dt, 2.0, 1.75, 2.25, CellWindow::StiffResolved),
            t(GuidingCenter, RateAxis::Dt, 2.0, 1.75, 2.25, CellWindow::StiffResolved),
            t(Slow, RateAxis::Eps, -5.0, -5.7, -4.3, CellWindow::StiffResolvedSmallEps),
            t(GuidingCenter, RateAxis::Eps, -4.0, -4.5, -3.0, CellWindow::StiffResolvedSmallEps),
        ],
        SweepMode::AsymptoticDiscrete => vec![
            t(Slow, RateAxis::Eps, 1.0, 0.75, 1.25, CellWindow::SmallEps),
            t(GuidingCenter, RateAxis::Eps, 2.0, 1.75, 2.25, CellWindow::SmallEps),
        ],
        SweepMode::AsymptoticContinuous => vec![
            t(Slow, RateAxis::Eps, 1.0, 0.75, 1.25, CellWindow::SmallEpsLinearFloor),
            t(GuidingCenter, RateAxis::Eps, 2.0, 1.75, 2.25, CellWindow::SmallEpsQuadraticFloor),
        ],
    }
}

/// One fitted slope against its target. `fixed` is the parameter held
/// constant along the fitted line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCheck {
    pub mode: SweepMode,
    pub target: RateTarget,
    pub fixed: f64,
    pub points: Vec<(f64, f64)>,
    pub fit: RateFit,
    pub passed: bool,
}

impl RateCheck {
    pub fn summary(&self) -> String {
        let held = match self.target.axis {
            RateAxis::Eps => "dt",
            RateAxis::Dt => "eps",
        };
        format!(
            "{} {} vs {} at {held}={:e} [{}]: slope {:.3} (target {}, accept [{}, {}], r^2 {:.4}, {} points) {}",
            self.mode,
            self.target.variable_set,
            self.target.axis,
            self.fixed,
            self.target.cells.label(),
            self.fit.slope,
            self.target.target,
            self.target.lo,
            self.target.hi,
            self.fit.r_squared,
            self.points.len(),
            if self.passed { "PASS" } else { "FAIL" },
        )
    }
}

fn group_key(x: f64) -> u64 {
    x.to_bits()
}

/// Fits every target of `table.mode` along every line of the grid that has
/// at least three usable cells in the target's window.
pub fn rate_checks(table: &SweepTable) -> Vec<RateCheck> {
    let mut checks = Vec::new();
    for target in rate_targets(table.mode) {
        let mut lines: BTreeMap<u64, Line> = BTreeMap::new();
        for row in table.rows.iter().filter(|r| usable(r, &target)) {
            let (fixed, param) = match target.axis {
                RateAxis::Eps => (row.dt, row.eps),
                RateAxis::Dt => (row.eps, row.dt),
            };
            lines
                .entry(group_key(fixed))
                .or_insert_with(|| (fixed, Vec::new()))
                .1
                .push((param, row.l1_error));
        }
        for (_, (fixed, mut points)) in lines {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            let Ok(fit) = fit_rate(&points, 0..points.len(), target.axis) else {
                continue;
            };
            let passed = fit.slope >= target.lo && fit.slope <= target.hi;
            checks.push(RateCheck {
                mode: table.mode,
                target,
                fixed,
                points,
                fit,
                passed,
            });
        }
    }
    checks
}

fn usable(row: &CellResult, target: &RateTarget) -> bool {
    row.is_ok()
        && row.variable_set == target.variable_set
        && row.l1_error > 0.0
        && row.l1_error.is_finite()
        && target.cells.contains(row.eps, row.dt)
}

/// Within the stiff-resolved regime at fixed Δt the convergence error should
/// not increase with ε beyond a 20% allowance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCheck {
    pub variable_set: VariableSet,
    pub dt: f64,
    /// Largest `error(ε_{k+1}) / error(ε_k)` over consecutive ε.
    pub worst_ratio: f64,
    pub passed: bool,
}

pub const MONOTONE_ALLOWANCE: f64 = 1.2;

/// Held parameter value and the `(param, error)` points along it.
type Line = (f64, Vec<(f64, f64)>);

pub fn monotone_checks(table: &SweepTable) -> Vec<MonotoneCheck> {
    if table.mode != SweepMode::Convergence {
        return Vec::new();
    }
    let mut lines: BTreeMap<(VariableSet, u64), Line> = BTreeMap::new();
    for row in &table.rows {
        if row.is_ok() && row.regime == Regime::StiffResolved && row.variable_set != VariableSet::Velocity {
            lines
                .entry((row.variable_set, group_key(row.dt)))
                .or_insert_with(|| (row.dt, Vec::new()))
                .1
                .push((row.eps, row.l1_error));
        }
    }
    lines
        .into_iter()
        .filter(|(_, (_, pts))| pts.len() >= 2)
        .map(|((variable_set, _), (dt, mut pts))| {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let worst_ratio = pts
                .windows(2)
                .map(|w| w[1].1 / w[0].1)
                .fold(0.0, f64::max);
            MonotoneCheck {
                variable_set,
                dt,
                worst_ratio,
                passed: worst_ratio <= MONOTONE_ALLOWANCE,
            }
        })
        .collect()
}
