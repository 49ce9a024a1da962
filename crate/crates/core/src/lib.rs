//! Asymptotic-preserving particle pusher for the transverse characteristics
//! of a strongly magnetized Vlasov equation.
//!
//! The crate provides the implicit augmented scheme ([`scheme_ap`]), its
//! fixed-Δt limit scheme ([`scheme_limit`]), fine-step ground-truth
//! integrators ([`reference`]), guiding-center and error diagnostics
//! ([`diagnostics`]) and a sweep harness measuring empirical error rates
//! ([`harness`]).

// `!(a > b)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod harness;
pub mod reference;
pub mod scheme_ap;
pub mod scheme_limit;
pub mod trajectory;

pub use error::{Error, Result};
pub use fields::{FieldModel, FieldSelector, PaperTestField, Potential, UniformField};
pub use geometry::{cayley_rotate, cayley_solve, perp, Vec2};
pub use trajectory::Trajectory;
