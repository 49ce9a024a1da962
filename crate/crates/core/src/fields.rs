//! Static field models: magnetic amplitude `b`, electric potential `φ`, and
//! the derived quantities the schemes evaluate.
//!
//! Models supply analytic derivatives. The unchecked accessors (`b`, `phi`,
//! ...) assume the caller already validated the position; the `eval_*`
//! accessors apply the domain guard and return [`Error::DomainEscape`].

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{perp, Vec2};

/// Grid resolution used by the default `b_ceiling_estimate`.
pub const CEILING_GRID: usize = 64;

pub trait FieldModel: Send + Sync + Debug {
    /// Magnetic amplitude. Unchecked.
    fn b(&self, x: Vec2) -> f64;
    /// Electric potential. Unchecked.
    fn phi(&self, x: Vec2) -> f64;
    /// `E = -∇φ`. Unchecked.
    fn electric(&self, x: Vec2) -> Vec2;
    /// `∇(1/b)`. Unchecked.
    fn grad_inv_b(&self, x: Vec2) -> Vec2;
    /// True where the model is valid.
    fn in_domain(&self, x: Vec2) -> bool;
    /// Asserted lower bound `b₀ > 0` on the guarded domain.
    fn b_floor(&self) -> f64;
    /// Axis-aligned box `(lo, hi)` enclosing the guarded domain, if bounded.
    fn bounding_box(&self) -> Option<(Vec2, Vec2)>;
    /// Short label recorded in run metadata.
    fn label(&self) -> String;

    /// Maximum of `b` over a 64×64 grid spanning the bounding box (guarded
    /// points only). Unbounded models fall back to `b` at the origin.
    fn b_ceiling_estimate(&self) -> f64 {
        let Some((lo, hi)) = self.bounding_box() else {
            return self.b(Vec2::ZERO);
        };
        let n = CEILING_GRID;
        let mut best = self.b_floor();
        for i in 0..n {
            for j in 0..n {
                let s = i as f64 / (n - 1) as f64;
                let r = j as f64 / (n - 1) as f64;
                let x = Vec2::new(lo.x1 + s * (hi.x1 - lo.x1), lo.x2 + r * (hi.x2 - lo.x2));
                if self.in_domain(x) {
                    best = best.max(self.b(x));
                }
            }
        }
        best
    }

    fn check(&self, x: Vec2) -> Result<()> {
        if x.is_finite() && self.in_domain(x) {
            Ok(())
        } else {
            Err(Error::DomainEscape(x))
        }
    }

    fn eval_b(&self, x: Vec2) -> Result<f64> {
        self.check(x)?;
        let b = self.b(x);
        debug_assert!(b >= self.b_floor(), "b = {b} below floor {}", self.b_floor());
        Ok(b)
    }

    fn eval_phi(&self, x: Vec2) -> Result<f64> {
        self.check(x)?;
        Ok(self.phi(x))
    }

    fn eval_e(&self, x: Vec2) -> Result<Vec2> {
        self.check(x)?;
        Ok(self.electric(x))
    }

    fn eval_grad_inv_b(&self, x: Vec2) -> Result<Vec2> {
        self.check(x)?;
        Ok(self.grad_inv_b(x))
    }

    /// Drift velocity `F = -b⁻¹ J E = -E⊥/b`.
    fn eval_f(&self, x: Vec2) -> Result<Vec2> {
        let b = self.eval_b(x)?;
        Ok(-perp(self.electric(x)) / b)
    }
}

/// `b(x) = 10 / √(100 - ‖x‖²)`, `φ(x) = ½‖x‖²`, guarded to
/// `‖x‖² < 100 (1 - margin)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaperTestField {
    pub margin: f64,
}

impl Default for PaperTestField {
    fn default() -> Self {
        Self { margin: 1e-6 }
    }
}

impl PaperTestField {
    const RADIUS_SQ: f64 = 100.0;
}

impl FieldModel for PaperTestField {
    #[inline]
    fn b(&self, x: Vec2) -> f64 {
        10.0 / (Self::RADIUS_SQ - x.norm_sq()).sqrt()
    }

    #[inline]
    fn phi(&self, x: Vec2) -> f64 {
        0.5 * x.norm_sq()
    }

    #[inline]
    fn electric(&self, x: Vec2) -> Vec2 {
        -x
    }

    #[inline]
    fn grad_inv_b(&self, x: Vec2) -> Vec2 {
        // 1/b = √(100 - r²)/10
        -x / (10.0 * (Self::RADIUS_SQ - x.norm_sq()).sqrt())
    }

    #[inline]
    fn in_domain(&self, x: Vec2) -> bool {
        x.norm_sq() < Self::RADIUS_SQ * (1.0 - self.margin)
    }

    fn b_floor(&self) -> f64 {
        1.0
    }

    fn bounding_box(&self) -> Option<(Vec2, Vec2)> {
        let r = (Self::RADIUS_SQ * (1.0 - self.margin)).sqrt();
        Some((Vec2::new(-r, -r), Vec2::new(r, r)))
    }

    fn label(&self) -> String {
        format!("paper(margin={:e})", self.margin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Potential {
    /// `φ ≡ 0`
    #[default]
    Zero,
    /// `φ = ½‖x‖²`
    Quadratic,
}

/// Constant `b ≡ b0` with either a vanishing or a quadratic potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformField {
    pub b0: f64,
    pub phi: Potential,
}

impl UniformField {
    pub fn new(b0: f64, phi: Potential) -> Self {
        assert!(b0 > 0.0 && b0.is_finite(), "uniform field needs b0 > 0");
        Self { b0, phi }
    }
}

impl FieldModel for UniformField {
    fn b(&self, _x: Vec2) -> f64 {
        self.b0
    }

    fn phi(&self, x: Vec2) -> f64 {
        match self.phi {
            Potential::Zero => 0.0,
            Potential::Quadratic => 0.5 * x.norm_sq(),
        }
    }

    fn electric(&self, x: Vec2) -> Vec2 {
        match self.phi {
            Potential::Zero => Vec2::ZERO,
            Potential::Quadratic => -x,
        }
    }

    fn grad_inv_b(&self, _x: Vec2) -> Vec2 {
        Vec2::ZERO
    }

    fn in_domain(&self, _x: Vec2) -> bool {
        true
    }

    fn b_floor(&self) -> f64 {
        self.b0
    }

    fn bounding_box(&self) -> Option<(Vec2, Vec2)> {
        None
    }

    fn label(&self) -> String {
        let phi = match self.phi {
            Potential::Zero => "zero",
            Potential::Quadratic => "quadratic",
        };
        format!("uniform(b0={:e},phi={phi})", self.b0)
    }
}

fn default_b0() -> f64 {
    1.0
}

/// Config-level field selection: `"paper"` or
/// `{"uniform": {"b0": 1.0, "phi": "zero"}}`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum FieldSelector {
    #[default]
    Paper,
    Uniform {
        #[serde(default = "default_b0")]
        b0: f64,
        #[serde(default)]
        phi: Potential,
    },
}

impl FieldSelector {
    pub fn build(&self) -> Result<Arc<dyn FieldModel>> {
        Ok(match *self {
            FieldSelector::Paper => Arc::new(PaperTestField::default()),
            FieldSelector::Uniform { b0, phi } => {
                if !(b0 > 0.0 && b0.is_finite()) {
                    return Err(Error::Config(format!("uniform field needs b0 > 0, got {b0}")));
                }
                Arc::new(UniformField::new(b0, phi))
            }
        })
    }
}
