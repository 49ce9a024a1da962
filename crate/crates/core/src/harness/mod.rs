//! Sweeps over `(ε, Δt)` grids, rate fits and report files.

pub mod check;
pub mod config;
pub mod rates;
pub mod report;
pub mod sweep;

pub use config::{SweepConfig, SweepMode};
pub use rates::{fit_rate, monotone_checks, rate_checks, MonotoneCheck, RateAxis, RateCheck, RateFit};
pub use report::{emit_reports, read_sweep_csv, tables_from_rows, ReportPaths};
pub use sweep::{
    classify_regime, run_asymptotic_sweep, run_convergence_sweep, run_sweep, CellResult, CellStatus,
    Regime, SweepTable,
};
