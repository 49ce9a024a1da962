use std::path::PathBuf;

use crate::geometry::Vec2;

/// Which loop of the nested implicit solve failed to contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPointStage {
    /// Position solve for a frozen half-step velocity.
    Inner,
    /// Half-step velocity update.
    Outer,
    /// Single-loop solve of the limit scheme.
    Limit,
}

impl std::fmt::Display for FixedPointStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FixedPointStage::Inner => "inner",
            FixedPointStage::Outer => "outer",
            FixedPointStage::Limit => "limit",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("position ({}, {}) is outside the field model's valid domain", .0.x1, .0.x2)]
    DomainEscape(Vec2),

    #[error("{stage} fixed point did not converge after {iterations} iterations (residual {residual:.3e})")]
    FixedPointDiverged {
        stage: FixedPointStage,
        iterations: usize,
        residual: f64,
    },

    #[error("reference solve needs {needed} steps, budget is {budget}")]
    StepBudgetExceeded { needed: u64, budget: u64 },

    #[error("relative energy drift {drift:.3e} exceeds tolerance {tol:.3e} at t = {t}")]
    EnergyDriftExceeded { drift: f64, tol: f64, t: f64 },

    #[error("cannot reconstruct a velocity from negative energy {0}")]
    NegativeEnergy(f64),

    #[error("cannot reconstruct a velocity from a vanishing direction")]
    ZeroDirection,

    #[error("series too short: need {needed} entries, got {got}")]
    LengthMismatch { needed: usize, got: usize },

    #[error("degenerate rate fit: {0}")]
    DegenerateFit(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Error {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }

    /// The underlying error with any step annotation removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
