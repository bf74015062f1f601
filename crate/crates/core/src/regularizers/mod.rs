//! Closed-form shrinkage operators, the weakly convex penalties they are
//! proximity operators of, and Moreau envelopes of the absolute value.
//!
//! Every operator here is continuous. Hard thresholding is left out on
//! purpose: it is not the proximity operator of any weakly convex function.

mod oracle;
mod penalty;

pub use oracle::{
    convex_conjugate_1d, minimize_scalar, prox_of_scaled_conjugate_1d, sprox_oracle_1d,
    sprox_oracle_nd, GridSpec, SearchSpec,
};
pub use penalty::{Penalty, PenaltyShape, PenaltyValue};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseVector;

/// Thresholds `0 < λ₁ < λ₂` of the firm family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirmParams {
    lambda1: f64,
    lambda2: f64,
}

impl FirmParams {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        if !(lambda1.is_finite() && lambda2.is_finite()) || lambda1 <= 0.0 || lambda1 >= lambda2 {
            return Err(Error::InvalidParameter(format!(
                "firm thresholds need 0 < lambda1 < lambda2, got lambda1={lambda1}, lambda2={lambda2}"
            )));
        }
        Ok(Self { lambda1, lambda2 })
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    /// Weak-convexity modulus `λ₁/λ₂` of the induced penalty.
    pub fn weak_convexity(&self) -> f64 {
        self.lambda1 / self.lambda2
    }

    /// Cocoercivity constant `1 - λ₁/λ₂`.
    pub fn beta(&self) -> f64 {
        1.0 - self.weak_convexity()
    }

    /// Largest slope `λ₂/(λ₂-λ₁)` of the firm operator.
    pub fn max_slope(&self) -> f64 {
        self.lambda2 / (self.lambda2 - self.lambda1)
    }
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "{name} must be positive, got {v}"
        )));
    }
    Ok(())
}

/// Soft shrinkage, the proximity operator of `λ|·|`.
pub fn soft(x: f64, lambda: f64) -> f64 {
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        0.0
    }
}

/// Firm shrinkage: zero on `|x| ≤ λ₁`, identity beyond `λ₂`, linear in between.
pub fn firm(x: f64, p: &FirmParams) -> f64 {
    let ax = x.abs();
    if ax <= p.lambda1 {
        0.0
    } else if ax <= p.lambda2 {
        x.signum() * p.lambda2 * (ax - p.lambda1) / (p.lambda2 - p.lambda1)
    } else {
        x
    }
}

/// Nonnegative garrote: `x - λ²/x` outside the dead zone.
pub fn garrote(x: f64, lambda: f64) -> f64 {
    if x.abs() <= lambda {
        0.0
    } else {
        x - lambda * lambda / x
    }
}

/// Minimax concave penalty with index `λ₂` (unit weight).
pub fn mc_penalty(x: f64, lambda2: f64) -> f64 {
    let ax = x.abs();
    if ax <= lambda2 {
        ax - x * x / (2.0 * lambda2)
    } else {
        0.5 * lambda2
    }
}

/// The ½-weakly convex penalty whose proximity operator is [`garrote`].
pub fn garrote_penalty(x: f64, lambda: f64) -> f64 {
    let ax = x.abs();
    let root = (x * x + 4.0 * lambda * lambda).sqrt();
    // log(|x| + root) - log(2λ) == asinh(|x| / 2λ), which stays accurate near 0
    0.25 * (ax * root - x * x) + lambda * lambda * (ax / (2.0 * lambda)).asinh()
}

/// Moreau envelope of `|·|` with parameter `γ`, and its gradient.
pub fn moreau_envelope_abs(x: f64, gamma: f64) -> (f64, f64) {
    let ax = x.abs();
    let value = if ax <= gamma {
        x * x / (2.0 * gamma)
    } else {
        ax - 0.5 * gamma
    };
    (value, (x - soft(x, gamma)) / gamma)
}

/// Componentwise sum of [`moreau_envelope_abs`], with gradient
/// `(z - soft(z, γ)) / γ`.
pub fn moreau_envelope_l1(z: &DenseVector, gamma: f64) -> (f64, DenseVector) {
    let (values, grad): (Vec<f64>, Vec<f64>) =
        z.iter().map(|&zi| moreau_envelope_abs(zi, gamma)).unzip();
    (values.iter().sum(), DenseVector::from_vec_unchecked(grad))
}

/// Radial firm shrinkage `x/|x| · firm(|x|)`, with `0 ↦ 0`.
pub fn vector_firm(x: &DenseVector, p: &FirmParams) -> DenseVector {
    vector_firm_slice(x.as_slice(), p)
        .map(DenseVector::from_vec_unchecked)
        .unwrap_or_else(|| DenseVector::zeros(x.len()))
}

fn vector_firm_slice(x: &[f64], p: &FirmParams) -> Option<Vec<f64>> {
    let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nrm == 0.0 {
        return None;
    }
    let c = firm(nrm, p) / nrm;
    Some(x.iter().map(|v| c * v).collect())
}

/// A partition of `0..n` into contiguous, disjoint, nonempty ranges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupStructure {
    ranges: Vec<std::ops::Range<usize>>,
}

impl GroupStructure {
    pub fn new(ranges: Vec<std::ops::Range<usize>>) -> Result<Self> {
        if ranges.is_empty() {
            return Err(Error::InvalidInput("group structure has no groups".into()));
        }
        let mut sorted = ranges.clone();
        sorted.sort_by_key(|r| r.start);
        let mut next = 0;
        for r in &sorted {
            if r.is_empty() {
                return Err(Error::InvalidInput(format!("empty group {r:?}")));
            }
            if r.start != next {
                return Err(Error::InvalidInput(format!(
                    "groups overlap or leave a gap at index {next}"
                )));
            }
            next = r.end;
        }
        Ok(Self { ranges })
    }

    /// Consecutive blocks of `size` (the last block may be shorter).
    pub fn uniform(n: usize, size: usize) -> Result<Self> {
        if n == 0 || size == 0 {
            return Err(Error::InvalidInput("group sizes must be positive".into()));
        }
        Self::new((0..n).step_by(size).map(|s| s..(s + size).min(n)).collect())
    }

    pub fn dim(&self) -> usize {
        self.ranges.iter().map(|r| r.end).max().unwrap_or(0)
    }

    pub fn ranges(&self) -> &[std::ops::Range<usize>] {
        &self.ranges
    }
}

/// [`vector_firm`] applied independently on each group block.
pub fn group_firm(x: &DenseVector, groups: &GroupStructure, p: &FirmParams) -> Result<DenseVector> {
    if groups.dim() != x.len() {
        return Err(Error::InvalidInput(format!(
            "group structure covers {} indices but vector has length {}",
            groups.dim(),
            x.len()
        )));
    }
    let mut out = vec![0.0; x.len()];
    for r in groups.ranges() {
        if let Some(block) = vector_firm_slice(&x.as_slice()[r.clone()], p) {
            out[r.clone()].copy_from_slice(&block);
        }
    }
    Ok(DenseVector::from_vec_unchecked(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fp(l1: f64, l2: f64) -> FirmParams {
        FirmParams::new(l1, l2).unwrap()
    }

    #[test]
    fn soft_branches() {
        assert_eq!(soft(2.0, 1.0), 1.0);
        assert_eq!(soft(0.5, 1.0), 0.0);
        assert_eq!(soft(-3.0, 1.0), -2.0);
    }

    #[test]
    fn firm_branches() {
        let p = fp(1.0, 2.0);
        assert_eq!(firm(0.9, &p), 0.0);
        assert_eq!(firm(1.5, &p), 1.0);
        assert_eq!(firm(3.0, &p), 3.0);
        assert_eq!(firm(-1.5, &p), -1.0);
        assert_eq!(p.max_slope(), 2.0);
    }

    #[test]
    fn firm_params_validated() {
        assert!(FirmParams::new(2.0, 1.0).is_err());
        assert!(FirmParams::new(1.0, 1.0).is_err());
        assert!(FirmParams::new(0.0, 1.0).is_err());
        assert!(FirmParams::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn firm_is_odd_continuous_monotone() {
        for p in [fp(1.0, 2.0), fp(2.5, 5.0), fp(1.0, 10.0)] {
            let mut prev = f64::NEG_INFINITY;
            let mut prev_x = -20.0;
            for i in 0..=40_000 {
                let x = -20.0 + i as f64 * 1e-3;
                let fx = firm(x, &p);
                assert_eq!(fx, -firm(-x, &p));
                assert!(fx >= prev);
                if i > 0 {
                    // continuity: the jump is bounded by the slope
                    assert!((fx - prev).abs() <= p.max_slope() * (x - prev_x) + 1e-12);
                }
                prev = fx;
                prev_x = x;
            }
        }
    }

    #[test]
    fn no_catalog_operator_jumps() {
        // hard thresholding would jump by λ at |x| = λ
        let ops: Vec<Box<dyn Fn(f64) -> f64>> = vec![
            Box::new(|x| soft(x, 1.0)),
            Box::new(|x| firm(x, &fp(1.0, 2.0))),
            Box::new(|x| garrote(x, 1.0)),
        ];
        for op in &ops {
            for i in 0..20_000 {
                let x = -10.0 + i as f64 * 1e-3;
                assert!((op(x + 1e-6) - op(x)).abs() < 1e-5, "jump near {x}");
            }
        }
    }

    #[test]
    fn garrote_branches() {
        assert_eq!(garrote(0.8, 1.0), 0.0);
        assert_eq!(garrote(2.0, 1.0), 1.5);
        assert_eq!(garrote(-2.0, 1.0), -1.5);
    }

    #[test]
    fn mc_penalty_branches() {
        assert_eq!(mc_penalty(0.0, 2.0), 0.0);
        assert_eq!(mc_penalty(1.0, 2.0), 0.75);
        assert_eq!(mc_penalty(3.0, 2.0), 1.0);
        assert_eq!(mc_penalty(-3.0, 2.0), 1.0);
    }

    #[test]
    fn garrote_penalty_values() {
        assert_eq!(garrote_penalty(0.0, 1.0), 0.0);
        let s5 = 5f64.sqrt();
        let expected = 0.25 * (s5 - 1.0) + ((1.0 + s5) / 2.0).ln();
        assert!((garrote_penalty(1.0, 1.0) - expected).abs() < 1e-15);
        assert!((expected - 0.790_228_8).abs() < 1e-6);
        for i in 0..100 {
            let x = 0.173 * i as f64;
            assert_eq!(garrote_penalty(x, 1.3), garrote_penalty(-x, 1.3));
        }
    }

    #[test]
    fn garrote_penalty_small_x_is_accurate() {
        // leading-order expansion: λ|x|/2 + λ|x|/2 = λ|x| for tiny |x|
        let x = 1e-12;
        assert!((garrote_penalty(x, 1.0) - x).abs() < 1e-20);
    }

    #[test]
    fn envelope_abs_values() {
        assert_eq!(moreau_envelope_abs(0.5, 1.0), (0.125, 0.5));
        assert_eq!(moreau_envelope_abs(3.0, 1.0), (2.5, 1.0));
        assert_eq!(moreau_envelope_abs(0.0, 0.3), (0.0, 0.0));
    }

    #[test]
    fn envelope_l1_values() {
        let (v, g) = moreau_envelope_l1(&DenseVector::zeros(3), 1.0);
        assert_eq!(v, 0.0);
        assert_eq!(g, DenseVector::zeros(3));
        let z = DenseVector::new(vec![0.5, 3.0]).unwrap();
        let (v, g) = moreau_envelope_l1(&z, 1.0);
        assert_eq!(v, 2.625);
        assert_eq!(g.as_slice(), &[0.5, 1.0]);
    }

    #[test]
    fn vector_firm_examples() {
        let p = fp(1.0, 2.0);
        let x = DenseVector::new(vec![3.0, 4.0]).unwrap();
        assert_eq!(vector_firm(&x, &p), x);
        let small = DenseVector::new(vec![0.6, 0.7]).unwrap();
        assert_eq!(vector_firm(&small, &p), DenseVector::zeros(2));
        let mid = DenseVector::new(vec![0.9, 1.2]).unwrap();
        let out = vector_firm(&mid, &p);
        assert!((out[0] - 0.6).abs() < 1e-15 && (out[1] - 0.8).abs() < 1e-15);
        assert_eq!(
            vector_firm(&DenseVector::zeros(2), &p),
            DenseVector::zeros(2)
        );
    }

    #[test]
    fn vector_firm_rotation_equivariant() {
        let p = fp(1.0, 2.0);
        for k in 0..50 {
            let t = 0.37 * k as f64;
            let (c, s) = (t.cos(), t.sin());
            let r = 0.05 * k as f64;
            let x = DenseVector::new(vec![r * (1.3 * t).cos(), r * (0.7 * t).sin()]).unwrap();
            let rot = |v: &DenseVector| {
                DenseVector::new(vec![c * v[0] - s * v[1], s * v[0] + c * v[1]]).unwrap()
            };
            let lhs = vector_firm(&rot(&x), &p);
            let rhs = rot(&vector_firm(&x, &p));
            assert!(lhs.distance_sq(&rhs).sqrt() <= 1e-10);
        }
    }

    #[test]
    fn group_firm_cases() {
        let p = fp(1.0, 2.0);
        let x = DenseVector::new(vec![0.3, -0.4, 3.0, 4.0, 1.5]).unwrap();

        let single = GroupStructure::new(std::iter::once(0..5).collect()).unwrap();
        assert_eq!(group_firm(&x, &single, &p).unwrap(), vector_firm(&x, &p));

        let singletons = GroupStructure::uniform(5, 1).unwrap();
        let out = group_firm(&x, &singletons, &p).unwrap();
        for i in 0..5 {
            assert_eq!(out[i], firm(x[i], &p));
        }

        let two = GroupStructure::new(vec![0..2, 2..5]).unwrap();
        let out = group_firm(&x, &two, &p).unwrap();
        assert_eq!(&out.as_slice()[..2], &[0.0, 0.0]);
        assert_eq!(&out.as_slice()[2..], &x.as_slice()[2..]);
    }

    #[test]
    fn group_firm_equals_blockwise_vector_firm() {
        let p = fp(0.7, 3.0);
        let x = DenseVector::from_fn(9, |i| (i as f64 * 1.7).sin() * 2.0);
        let g = GroupStructure::new(vec![4..9, 0..1, 1..4]).unwrap();
        let out = group_firm(&x, &g, &p).unwrap();
        for r in g.ranges() {
            let block = DenseVector::new(x.as_slice()[r.clone()].to_vec()).unwrap();
            assert_eq!(
                &out.as_slice()[r.clone()],
                vector_firm(&block, &p).as_slice()
            );
        }
    }

    #[test]
    fn invalid_partitions_rejected() {
        assert!(GroupStructure::new(vec![0..2, 1..3]).is_err());
        assert!(GroupStructure::new(vec![0..2, 3..4]).is_err());
        assert!(GroupStructure::new(vec![0..0, 0..2]).is_err());
        assert!(GroupStructure::new(vec![]).is_err());
        let g = GroupStructure::new(vec![0..2, 2..3]).unwrap();
        let x = DenseVector::zeros(4);
        assert!(group_firm(&x, &g, &fp(1.0, 2.0)).is_err());
    }
}
