//! Guiding-center transforms, velocity reconstruction, energies and the
//! discrete ℓ¹ error norm.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::FieldModel;
use crate::geometry::{perp, Vec2};

/// A position paired with a scalar energy; compared as the concatenated
/// 3-vector `(x1, x2, e)` under the Euclidean norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlowVars {
    pub x: Vec2,
    pub e: f64,
}

impl SlowVars {
    pub fn new(x: Vec2, e: f64) -> Self {
        Self { x, e }
    }
}

/// Pointwise distance used by [`l1_error`].
pub trait Distance {
    fn distance(&self, other: &Self) -> f64;
}

impl Distance for f64 {
    fn distance(&self, other: &Self) -> f64 {
        (self - other).abs()
    }
}

impl Distance for Vec2 {
    fn distance(&self, other: &Self) -> f64 {
        (*self - *other).norm()
    }
}

impl Distance for SlowVars {
    fn distance(&self, other: &Self) -> f64 {
        let dx = self.x - other.x;
        let de = self.e - other.e;
        (dx.norm_sq() + de * de).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidingCenterState {
    pub x_gc: Vec2,
    pub e_gc: f64,
    pub t: f64,
}

impl GuidingCenterState {
    pub fn slow(&self) -> SlowVars {
        SlowVars::new(self.x_gc, self.e_gc)
    }
}

/// `x_gc = x - ε w⊥/b(x)`, `e_gc = e + (ε/b(x)) E⊥(x)·w`.
pub fn gc_transform<M: FieldModel + ?Sized>(
    x: Vec2,
    e: f64,
    w: Vec2,
    eps: f64,
    model: &M,
) -> Result<GuidingCenterState> {
    let b = model.eval_b(x)?;
    let scale = eps / b;
    Ok(GuidingCenterState {
        x_gc: x - perp(w) * scale,
        e_gc: e + scale * perp(model.electric(x)).dot(w),
        t: 0.0,
    })
}

/// Smallest direction norm accepted by [`reconstruct_velocity`].
pub const MIN_DIRECTION_NORM: f64 = 1e-300;

/// `v = √(2e) w/‖w‖`, so that `½‖v‖² = e`.
pub fn reconstruct_velocity(e: f64, w: Vec2) -> Result<Vec2> {
    if e < 0.0 {
        return Err(Error::NegativeEnergy(e));
    }
    let norm = w.norm();
    if !(norm > MIN_DIRECTION_NORM) {
        return Err(Error::ZeroDirection);
    }
    Ok(w * ((2.0 * e).sqrt() / norm))
}

/// `½‖v‖² + φ(x)`.
pub fn total_energy<M: FieldModel + ?Sized>(x: Vec2, v: Vec2, model: &M) -> Result<f64> {
    Ok(0.5 * v.norm_sq() + model.eval_phi(x)?)
}

/// `‖a_n - b_n‖` for `n = 1..=N`.
pub fn per_step_errors<T: Distance>(a: &[T], b: &[T], n: usize) -> Result<Vec<f64>> {
    for series in [a, b] {
        if series.len() < n + 1 {
            return Err(Error::LengthMismatch {
                needed: n + 1,
                got: series.len(),
            });
        }
    }
    Ok((1..=n).map(|i| a[i].distance(&b[i])).collect())
}

/// Mean of a per-step error series (the discrete ℓ¹ norm). Zero when empty.
pub fn mean_error(errors: &[f64]) -> f64 {
    if errors.is_empty() {
        0.0
    } else {
        errors.iter().sum::<f64>() / errors.len() as f64
    }
}

/// `(1/N) Σ_{n=1}^{N} ‖a_n - b_n‖`. Index 0 is skipped.
pub fn l1_error<T: Distance>(a: &[T], b: &[T], n: usize) -> Result<f64> {
    Ok(mean_error(&per_step_errors(a, b, n)?))
}

/// What the scheme output is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Comparand {
    #[serde(rename = "reference-stiff")]
    ReferenceStiff,
    #[serde(rename = "limit-scheme")]
    LimitScheme,
    #[serde(rename = "limit-reference")]
    LimitReference,
}

/// Which variables enter the error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VariableSet {
    /// `(x, e)`, with `e = ½‖v‖²` on the stiff side.
    #[serde(rename = "x-e")]
    Slow,
    /// `(x_gc, e_gc)`.
    #[serde(rename = "xgc-egc")]
    GuidingCenter,
    /// Speed `‖w‖` against the true speed `‖v‖`.
    #[serde(rename = "w")]
    Velocity,
}

macro_rules! label_impls {
    ($ty:ty { $($variant:path => $label:literal),+ $(,)? }) => {
        impl $ty {
            pub fn label(&self) -> &'static str {
                match self { $($variant => $label),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }

        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($label => Ok($variant),)+
                    other => Err(Error::Config(format!(
                        "unknown {} label {other:?}", stringify!($ty)
                    ))),
                }
            }
        }
    };
}

label_impls!(Comparand {
    Comparand::ReferenceStiff => "reference-stiff",
    Comparand::LimitScheme => "limit-scheme",
    Comparand::LimitReference => "limit-reference",
});

label_impls!(VariableSet {
    VariableSet::Slow => "x-e",
    VariableSet::GuidingCenter => "xgc-egc",
    VariableSet::Velocity => "w",
});

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub per_step_errors: Vec<f64>,
    pub l1_norm: f64,
    pub eps: f64,
    pub dt: f64,
    pub comparand: Comparand,
    pub variable_set: VariableSet,
}

impl ErrorReport {
    pub fn new(
        per_step_errors: Vec<f64>,
        eps: f64,
        dt: f64,
        comparand: Comparand,
        variable_set: VariableSet,
    ) -> Self {
        let l1_norm = mean_error(&per_step_errors);
        Self {
            per_step_errors,
            l1_norm,
            eps,
            dt,
            comparand,
            variable_set,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{PaperTestField, Potential, UniformField};
    use proptest::prelude::*;

    #[test]
    fn gc_transform_is_identity_at_zero_eps() {
        let m = PaperTestField::default();
        let x = Vec2::new(2.0, 2.0);
        let gc = gc_transform(x, 9.0, Vec2::new(3.0, 3.0), 0.0, &m).unwrap();
        assert_eq!((gc.x_gc, gc.e_gc), (x, 9.0));
    }

    #[test]
    fn gc_transform_uniform_example() {
        let m = UniformField::new(1.0, Potential::Zero);
        let gc = gc_transform(Vec2::ZERO, 0.5, Vec2::new(1.0, 0.0), 0.1, &m).unwrap();
        assert!((gc.x_gc - Vec2::new(0.0, -0.1)).norm() < 1e-16);
        assert_eq!(gc.e_gc, 0.5);
    }

    #[test]
    fn gc_transform_paper_seed() {
        // b(2,2) = 10/√92, E⊥ = (2,-2), E⊥·w = 0 for w = (3,3)
        let m = PaperTestField::default();
        let eps = 0.5;
        let gc = gc_transform(Vec2::new(2.0, 2.0), 9.0, Vec2::new(3.0, 3.0), eps, &m).unwrap();
        let b = 10.0 / 92f64.sqrt();
        let hand = Vec2::new(2.0 + eps * 3.0 / b, 2.0 - eps * 3.0 / b);
        assert!((gc.x_gc - hand).norm() < 1e-14);
        assert!((gc.e_gc - 9.0).abs() < 1e-14);
        assert!(gc_transform(Vec2::new(6.0, 8.0), 1.0, Vec2::ZERO, eps, &m).is_err());
    }

    #[test]
    fn reconstruct_velocity_cases() {
        assert_eq!(reconstruct_velocity(0.5, Vec2::new(3.0, 0.0)).unwrap(), Vec2::new(1.0, 0.0));
        assert_eq!(reconstruct_velocity(0.0, Vec2::new(-2.0, 5.0)).unwrap(), Vec2::ZERO);
        assert!(matches!(reconstruct_velocity(-1.0, Vec2::new(1.0, 0.0)), Err(Error::NegativeEnergy(_))));
        assert!(matches!(reconstruct_velocity(1.0, Vec2::ZERO), Err(Error::ZeroDirection)));
    }

    #[test]
    fn total_energy_values() {
        let m = PaperTestField::default();
        assert_eq!(total_energy(Vec2::new(2.0, 2.0), Vec2::new(3.0, 3.0), &m).unwrap(), 13.0);
        assert_eq!(total_energy(Vec2::ZERO, Vec2::new(1.0, 0.0), &m).unwrap(), 0.5);
        let u = UniformField::new(1.0, Potential::Zero);
        assert_eq!(total_energy(Vec2::new(4.0, 1.0), Vec2::ZERO, &u).unwrap(), 0.0);
    }

    #[test]
    fn l1_error_definition() {
        let a: Vec<Vec2> = (0..5).map(|i| Vec2::new(i as f64, 0.0)).collect();
        assert_eq!(l1_error(&a, &a, 4).unwrap(), 0.0);

        let mut b = a.clone();
        b[2] += Vec2::new(0.0, 3.0);
        assert_eq!(l1_error(&a, &b, 4).unwrap(), 0.75);

        let shifted: Vec<Vec2> = a.iter().map(|v| *v + Vec2::new(1.0, 0.0)).collect();
        assert_eq!(l1_error(&shifted, &a, 4).unwrap(), 1.0);

        // index 0 never counts
        let mut c = a.clone();
        c[0] = Vec2::new(100.0, 100.0);
        assert_eq!(l1_error(&a, &c, 4).unwrap(), 0.0);

        assert!(matches!(l1_error(&a, &a[..3], 4), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn slow_vars_use_concatenated_norm() {
        let a = SlowVars::new(Vec2::new(1.0, 2.0), 3.0);
        let b = SlowVars::new(Vec2::new(1.0, 0.0), 4.0);
        assert!((a.distance(&b) - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn labels_round_trip() {
        for v in [VariableSet::Slow, VariableSet::GuidingCenter, VariableSet::Velocity] {
            assert_eq!(v.label().parse::<VariableSet>().unwrap(), v);
            assert_eq!(serde_json::to_string(&v).unwrap(), format!("\"{}\"", v.label()));
        }
        for c in [Comparand::ReferenceStiff, Comparand::LimitScheme, Comparand::LimitReference] {
            assert_eq!(c.label().parse::<Comparand>().unwrap(), c);
        }
    }

    fn series(n: usize) -> impl Strategy<Value = Vec<SlowVars>> {
        proptest::collection::vec(
            (-10f64..10.0, -10f64..10.0, -10f64..10.0)
                .prop_map(|(a, b, e)| SlowVars::new(Vec2::new(a, b), e)),
            n,
        )
    }

    proptest! {
        #[test]
        fn l1_is_a_pseudometric((a, b, c) in (series(9), series(9), series(9))) {
            let n = 8;
            let ab = l1_error(&a, &b, n).unwrap();
            let ba = l1_error(&b, &a, n).unwrap();
            let bc = l1_error(&b, &c, n).unwrap();
            let ac = l1_error(&a, &c, n).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert_eq!(l1_error(&a, &a, n).unwrap(), 0.0);
            prop_assert!(ac <= ab + bc + 1e-12);
            prop_assert!(ab >= 0.0);
        }

        #[test]
        fn reconstruction_recovers_energy(e in 0f64..1e3, w1 in -10f64..10.0, w2 in -10f64..10.0) {
            let w = Vec2::new(w1, w2);
            prop_assume!(w.norm() > 1e-6);
            let v = reconstruct_velocity(e, w).unwrap();
            prop_assert!((0.5 * v.norm_sq() - e).abs() <= 1e-13 * e.max(1e-300));
        }
    }
}
