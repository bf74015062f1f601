use std::fmt;

use serde::{Deserialize, Serialize};

use super::{check_positive, garrote_penalty, mc_penalty, FirmParams, GroupStructure};
use crate::error::Result;

/// An extended-real penalty value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PenaltyValue {
    Finite(f64),
    PlusInfinity,
}

impl PenaltyValue {
    pub fn is_finite(&self) -> bool {
        matches!(self, PenaltyValue::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            PenaltyValue::Finite(v) => Some(v),
            PenaltyValue::PlusInfinity => None,
        }
    }

    /// Collapses to `f64`, mapping the infinity marker to `+inf` for
    /// comparisons inside minimizers.
    pub(crate) fn as_f64(&self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

/// The base function a [`Penalty`] scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PenaltyShape {
    Zero,
    /// `Σ|x_i|`
    Abs,
    /// `Σ φ^MC_{λ₂}(x_i)`
    Mc {
        lambda2: f64,
    },
    /// `Σ` garrote penalty with threshold `λ`
    Garrote {
        lambda: f64,
    },
    /// `φ^MC_{λ₂}(|x|)`
    NormMc {
        lambda2: f64,
    },
    /// `Σ_g φ^MC_{λ₂}(|x_g|)`
    GroupMc {
        lambda2: f64,
        groups: GroupStructure,
    },
    /// Indicator of the nonnegative orthant.
    NonnegIndicator,
}

impl PenaltyShape {
    /// Weak-convexity modulus of the unit-weight shape.
    fn weak_convexity(&self) -> f64 {
        match self {
            PenaltyShape::Zero | PenaltyShape::Abs | PenaltyShape::NonnegIndicator => 0.0,
            PenaltyShape::Mc { lambda2 }
            | PenaltyShape::NormMc { lambda2 }
            | PenaltyShape::GroupMc { lambda2, .. } => 1.0 / lambda2,
            PenaltyShape::Garrote { .. } => 0.5,
        }
    }

    fn eval(&self, x: &[f64]) -> PenaltyValue {
        use PenaltyValue::Finite;
        let norm = |s: &[f64]| s.iter().map(|v| v * v).sum::<f64>().sqrt();
        match self {
            PenaltyShape::Zero => Finite(0.0),
            PenaltyShape::Abs => Finite(x.iter().map(|v| v.abs()).sum()),
            PenaltyShape::Mc { lambda2 } => {
                Finite(x.iter().map(|&v| mc_penalty(v, *lambda2)).sum())
            }
            PenaltyShape::Garrote { lambda } => {
                Finite(x.iter().map(|&v| garrote_penalty(v, *lambda)).sum())
            }
            PenaltyShape::NormMc { lambda2 } => Finite(mc_penalty(norm(x), *lambda2)),
            PenaltyShape::GroupMc { lambda2, groups } => Finite(
                groups
                    .ranges()
                    .iter()
                    .map(|r| mc_penalty(norm(&x[r.clone()]), *lambda2))
                    .sum(),
            ),
            PenaltyShape::NonnegIndicator => {
                if x.iter().all(|&v| v >= 0.0) {
                    Finite(0.0)
                } else {
                    PenaltyValue::PlusInfinity
                }
            }
        }
    }
}

/// `scale · shape(x) + (quadratic/2)|x|^2`.
///
/// `quadratic` is how convexified forms `φ̌ = φ + (ρ/2)|·|^2` are built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Penalty {
    shape: PenaltyShape,
    scale: f64,
    quadratic: f64,
    name: String,
}

impl Penalty {
    pub fn new(shape: PenaltyShape, scale: f64, name: impl Into<String>) -> Self {
        Self {
            shape,
            scale,
            quadratic: 0.0,
            name: name.into(),
        }
    }

    pub fn zero() -> Self {
        Self::new(PenaltyShape::Zero, 1.0, "zero")
    }

    /// `λ|·|`, the penalty of soft shrinkage.
    pub fn abs(lambda: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        Ok(Self::new(PenaltyShape::Abs, lambda, "soft"))
    }

    /// `λ₁ φ^MC_{λ₂}`, the penalty of firm shrinkage.
    pub fn firm(p: &FirmParams) -> Self {
        Self::new(
            PenaltyShape::Mc {
                lambda2: p.lambda2(),
            },
            p.lambda1(),
            "firm",
        )
    }

    /// The garrote penalty.
    pub fn garrote(lambda: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        Ok(Self::new(PenaltyShape::Garrote { lambda }, 1.0, "garrote"))
    }

    /// `λ₁ φ^MC_{λ₂}(|·|)`, the penalty of vector firm shrinkage.
    pub fn vector_firm(p: &FirmParams) -> Self {
        Self::new(
            PenaltyShape::NormMc {
                lambda2: p.lambda2(),
            },
            p.lambda1(),
            "vector-firm",
        )
    }

    pub fn group_firm(p: &FirmParams, groups: GroupStructure) -> Self {
        Self::new(
            PenaltyShape::GroupMc {
                lambda2: p.lambda2(),
                groups,
            },
            p.lambda1(),
            "group-firm",
        )
    }

    /// `ι_{R₊}`, whose proximity operator is ReLU.
    pub fn nonneg_indicator() -> Self {
        Self::new(PenaltyShape::NonnegIndicator, 1.0, "nonneg-indicator")
    }

    /// `½|·|^2`
    pub fn half_square() -> Self {
        Self::zero().plus_quadratic(1.0).renamed("half-square")
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// `c · self`, for `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            shape: self.shape.clone(),
            scale: self.scale * c,
            quadratic: self.quadratic * c,
            name: format!("{c}*{}", self.name),
        }
    }

    /// `self + (rho/2)|·|^2`
    pub fn plus_quadratic(&self, rho: f64) -> Self {
        Self {
            shape: self.shape.clone(),
            scale: self.scale,
            quadratic: self.quadratic + rho,
            name: format!("{}+q{rho}", self.name),
        }
    }

    /// The convex function `self + (weak_convexity/2)|·|^2`.
    pub fn convexified(&self) -> Self {
        self.plus_quadratic(self.weak_convexity())
    }

    pub fn shape(&self) -> &PenaltyShape {
        &self.shape
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Smallest `ρ ≥ 0` making `self + (ρ/2)|·|^2` convex.
    pub fn weak_convexity(&self) -> f64 {
        (self.scale * self.shape.weak_convexity() - self.quadratic).max(0.0)
    }

    pub fn value(&self, x: &[f64]) -> PenaltyValue {
        match self.shape.eval(x) {
            PenaltyValue::Finite(v) => {
                let q = if self.quadratic == 0.0 {
                    0.0
                } else {
                    0.5 * self.quadratic * x.iter().map(|v| v * v).sum::<f64>()
                };
                let s = if self.scale == 0.0 {
                    0.0
                } else {
                    self.scale * v
                };
                PenaltyValue::Finite(s + q)
            }
            PenaltyValue::PlusInfinity => PenaltyValue::PlusInfinity,
        }
    }

    pub fn value_scalar(&self, x: f64) -> PenaltyValue {
        self.value(&[x])
    }

    /// Whether the penalty acts independently on each coordinate.
    pub fn is_separable(&self) -> bool {
        !matches!(
            self.shape,
            PenaltyShape::NormMc { .. } | PenaltyShape::GroupMc { .. }
        )
    }
}

impl fmt::Display for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}
