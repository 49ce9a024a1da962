use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diagnostics::VariableSet;
use crate::error::{Error, Result};
use crate::fields::FieldSelector;
use crate::geometry::Vec2;
use crate::reference::RefSolverConfig;
use crate::scheme_ap::FixedPointControls;

/// Which pair of solutions a sweep compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SweepMode {
    /// Scheme against the resolved stiff characteristics.
    #[serde(rename = "convergence")]
    Convergence,
    /// Scheme against the limit scheme at the same Δt.
    #[serde(rename = "asymptotic-discrete", alias = "asymp-discrete")]
    AsymptoticDiscrete,
    /// Scheme against the resolved limit system.
    #[serde(rename = "asymptotic-continuous", alias = "asymp-continuous")]
    AsymptoticContinuous,
}

impl SweepMode {
    pub const ALL: [SweepMode; 3] = [
        SweepMode::Convergence,
        SweepMode::AsymptoticDiscrete,
        SweepMode::AsymptoticContinuous,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            SweepMode::Convergence => "convergence",
            SweepMode::AsymptoticDiscrete => "asymptotic-discrete",
            SweepMode::AsymptoticContinuous => "asymptotic-continuous",
        }
    }
}

impl fmt::Display for SweepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convergence" => Ok(SweepMode::Convergence),
            "asymptotic-discrete" | "asymp-discrete" => Ok(SweepMode::AsymptoticDiscrete),
            "asymptotic-continuous" | "asymp-continuous" => Ok(SweepMode::AsymptoticContinuous),
            other => Err(Error::Config(format!("unknown sweep mode {other:?}"))),
        }
    }
}

fn dyadic(k: std::ops::RangeInclusive<i32>) -> Vec<f64> {
    k.map(|k| 2f64.powi(-k)).collect()
}

fn default_eps_grid() -> Vec<f64> {
    dyadic(0..=10)
}

fn default_dt_grid() -> Vec<f64> {
    dyadic(4..=14)
}

fn default_horizon() -> f64 {
    1.0
}

fn default_x0() -> Vec2 {
    Vec2::new(2.0, 2.0)
}

fn default_v0() -> Vec2 {
    Vec2::new(3.0, 3.0)
}

fn default_comparisons() -> Vec<SweepMode> {
    SweepMode::ALL.to_vec()
}

fn default_variables() -> Vec<VariableSet> {
    vec![VariableSet::Slow, VariableSet::GuidingCenter, VariableSet::Velocity]
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Sweep description; the JSON config file mirrors these field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_eps_grid")]
    pub eps_grid: Vec<f64>,
    #[serde(default = "default_dt_grid")]
    pub dt_grid: Vec<f64>,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_x0")]
    pub x0: Vec2,
    #[serde(default = "default_v0")]
    pub v0: Vec2,
    #[serde(default)]
    pub field: FieldSelector,
    #[serde(default = "default_comparisons")]
    pub comparisons: Vec<SweepMode>,
    #[serde(default = "default_variables")]
    pub variables: Vec<VariableSet>,
    #[serde(default = "default_workers")]
    pub parallel_workers: usize,
    #[serde(default)]
    pub reference: RefSolverConfig,
    #[serde(default)]
    pub fixed_point: FixedPointControls,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let mut cfg = Self {
            eps_grid: default_eps_grid(),
            dt_grid: default_dt_grid(),
            horizon: default_horizon(),
            x0: default_x0(),
            v0: default_v0(),
            field: FieldSelector::default(),
            comparisons: default_comparisons(),
            variables: default_variables(),
            parallel_workers: default_workers(),
            reference: RefSolverConfig::default(),
            fixed_point: FixedPointControls::default(),
        };
        cfg.adjust_dt_grid();
        cfg
    }
}

impl SweepConfig {
    /// Parses and validates a JSON config. An omitted `dt_grid` gets the
    /// dyadic default adjusted to the configured `T`.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let explicit_grid = value.get("dt_grid").is_some();
        let mut cfg: SweepConfig =
            serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        if !explicit_grid {
            cfg.adjust_dt_grid();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Replaces each Δt by `T / round(T/Δt)` so that it divides the horizon.
    pub fn adjust_dt_grid(&mut self) {
        let t = self.horizon;
        for dt in &mut self.dt_grid {
            let n = (t / *dt).round().max(1.0);
            *dt = t / n;
        }
    }

    /// Number of steps `T/Δt` for a grid value.
    pub fn steps_for(&self, dt: f64) -> usize {
        (self.horizon / dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_grid.is_empty() || self.dt_grid.is_empty() {
            return Err(Error::Config("eps_grid and dt_grid must be nonempty".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("T must be positive, got {}", self.horizon)));
        }
        for &eps in &self.eps_grid {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::Config(format!("eps_grid entry {eps} is not positive")));
            }
        }
        for &dt in &self.dt_grid {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Config(format!("dt_grid entry {dt} is not positive")));
            }
            let ratio = self.horizon / dt;
            if (ratio - ratio.round()).abs() > 1e-12 * ratio.round().max(1.0) || ratio.round() < 1.0 {
                return Err(Error::Config(format!(
                    "dt = {dt} does not divide T = {}",
                    self.horizon
                )));
            }
        }
        if !(self.x0.is_finite() && self.v0.is_finite()) {
            return Err(Error::Config("x0 and v0 must be finite".into()));
        }
        if self.parallel_workers == 0 {
            return Err(Error::Config("parallel_workers must be at least 1".into()));
        }
        self.reference
            .validate()
            .and_then(|_| self.fixed_point.validate())
            .map_err(|e| Error::Config(e.to_string()))?;
        self.field.build()?;
        Ok(())
    }
}
