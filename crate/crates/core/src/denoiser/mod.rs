//! MoL-Grad denoisers: operators `T = ∇ψ` for a convex `ψ` whose gradient
//! is `1/β`-Lipschitz. Each one declares its `β` and, where known in closed
//! form, the weakly convex penalty it is the s-prox of.

mod certify;

pub use certify::{
    averagedness_relation_check, certify, check_cocoercivity, check_jacobian_symmetry,
    check_monotonicity, estimate_lipschitz, AveragednessCheck, CertificationReport, CertifyOptions,
    DomainBox, Verdict, ViolationReport,
};

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{DenseVector, Matrix};
use crate::regularizers::{
    firm, garrote, group_firm, soft, vector_firm, FirmParams, GroupStructure, Penalty,
};

/// `β` assumed for soft shrinkage when the caller does not pick one.
pub const SOFT_DEFAULT_BETA: f64 = 1.0 - 1e-9;

pub trait Denoiser: Send + Sync {
    fn name(&self) -> &str;

    /// Declared cocoercivity constant; the Lipschitz bound is `1/β`.
    fn beta(&self) -> f64;

    /// `φ = ψ* - ½|·|^2` when available in closed form.
    fn induced_penalty(&self) -> Option<Penalty>;

    /// Fixed input dimension, if the operator has one.
    fn dim(&self) -> Option<usize> {
        None
    }

    fn apply(&self, x: &DenseVector) -> DenseVector;
}

#[derive(Clone, Debug)]
pub struct SoftShrinkage {
    lambda: f64,
    beta: f64,
}

impl SoftShrinkage {
    pub fn new(lambda: f64) -> Result<Self> {
        Self::with_beta(lambda, SOFT_DEFAULT_BETA)
    }

    /// Soft shrinkage is firmly nonexpansive, so any `β ∈ (0, 1]` is valid.
    pub fn with_beta(lambda: f64, beta: f64) -> Result<Self> {
        crate::regularizers::check_positive("lambda", lambda)?;
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must be in (0,1], got {beta}"
            )));
        }
        Ok(Self { lambda, beta })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl Denoiser for SoftShrinkage {
    fn name(&self) -> &str {
        "soft"
    }
    fn beta(&self) -> f64 {
        self.beta
    }
    fn induced_penalty(&self) -> Option<Penalty> {
        Penalty::abs(self.lambda).ok()
    }
    fn apply(&self, x: &DenseVector) -> DenseVector {
        x.map(|v| soft(v, self.lambda))
    }
}

#[derive(Clone, Debug)]
pub struct FirmShrinkage {
    params: FirmParams,
}

impl FirmShrinkage {
    pub fn new(params: FirmParams) -> Self {
        Self { params }
    }

    pub fn params(&self) -> &FirmParams {
        &self.params
    }
}

impl Denoiser for FirmShrinkage {
    fn name(&self) -> &str {
        "firm"
    }
    fn beta(&self) -> f64 {
        self.params.beta()
    }
    fn induced_penalty(&self) -> Option<Penalty> {
        Some(Penalty::firm(&self.params))
    }
    fn apply(&self, x: &DenseVector) -> DenseVector {
        x.map(|v| firm(v, &self.params))
    }
}

#[derive(Clone, Debug)]
pub struct GarroteShrinkage {
    lambda: f64,
}

impl GarroteShrinkage {
    pub fn new(lambda: f64) -> Result<Self> {
        crate::regularizers::check_positive("lambda", lambda)?;
        Ok(Self { lambda })
    }
}

impl Denoiser for GarroteShrinkage {
    fn name(&self) -> &str {
        "garrote"
    }
    fn beta(&self) -> f64 {
        0.5
    }
    fn induced_penalty(&self) -> Option<Penalty> {
        Penalty::garrote(self.lambda).ok()
    }
    fn apply(&self, x: &DenseVector) -> DenseVector {
        x.map(|v| garrote(v, self.lambda))
    }
}

#[derive(Clone, Debug)]
pub struct VectorFirm {
    params: FirmParams,
}

impl VectorFirm {
    pub fn new(params: FirmParams) -> Self {
        Self { params }
    }
}

impl Denoiser for VectorFirm {
    fn name(&self) -> &str {
        "vector-firm"
    }
    fn beta(&self) -> f64 {
        self.params.beta()
    }
    fn induced_penalty(&self) -> Option<Penalty> {
        Some(Penalty::vector_firm(&self.params))
    }
    fn apply(&self, x: &DenseVector) -> DenseVector {
        vector_firm(x, &self.params)
    }
}

#[derive(Clone, Debug)]
pub struct GroupFirm {
    params: FirmParams,
    groups: GroupStructure,
}

impl GroupFirm {
    pub fn new(params: FirmParams, groups: GroupStructure) -> Self {
        Self { params, groups }
    }
}

impl Denoiser for GroupFirm {
    fn name(&self) -> &str {
        "group-firm"
    }
    fn beta(&self) -> f64 {
        self.params.beta()
    }
    fn induced_penalty(&self) -> Option<Penalty> {
        Some(Penalty::group_firm(&self.params, self.groups.clone()))
    }
    fn dim(&self) -> Option<usize> {
        Some(self.groups.dim())
    }
    fn apply(&self, x: &DenseVector) -> DenseVector {
        group_firm(x, &self.groups, &self.params)
            .expect("group-firm applied to a vector of the wrong length")
    }
}

/// `T = W^T ∘ ReLU ∘ W`, the gradient of `ψ ∘ W` with `ψ` the convex
/// potential of ReLU.
#[derive(Clone, Debug)]
pub struct TiedReluNetwork {
    w: Matrix,
    gram_norm: f64,
    beta: f64,
    classically_nonexpansive: bool,
}

impl TiedReluNetwork {
    /// Margin added above 1 when `|W^T W| <= 1`, so that `β < 1` still holds.
    pub const BETA_GUARD: f64 = 1e-9;

    pub fn new(w: Matrix) -> Result<Self> {
        if w.is_zero() {
            return Err(Error::InvalidInput(
                "tied-weight network needs a nonzero W".into(),
            ));
        }
        let eig = w.gram().symmetric_eigenvalues()?;
        let gram_norm = *eig.last().unwrap();
        let classically_nonexpansive = gram_norm <= 1.0;
        let beta = 1.0 / gram_norm.max(1.0 + Self::BETA_GUARD);
        Ok(Self {
            w,
            gram_norm,
            beta,
            classically_nonexpansive,
        })
    }

    pub fn weights(&self) -> &Matrix {
        &self.w
    }

    /// `|W^T W|`
    pub fn gram_norm(&self) -> f64 {
        self.gram_norm
    }

    /// True when `|W^T W| <= 1`, in which case `T` is the classical
    /// proximity operator of a convex function.
    pub fn classically_nonexpansive(&self) -> bool {
        self.classically_nonexpansive
    }

    /// Uniform points in `domain` at which no coordinate of `W x` is within
    /// `margin` of the ReLU kink.
    pub fn generic_probes(
        &self,
        domain: &DomainBox,
        count: usize,
        margin: f64,
        seed: u64,
    ) -> Vec<DenseVector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let x = DenseVector::from_fn(self.w.cols(), |_| rng.random_range(domain.lo..domain.hi));
            let wx = self.w.mul_vec(&x).expect("probe dimension");
            if wx.iter().all(|v| v.abs() > margin) {
                out.push(x);
            }
        }
        out
    }
}

impl Denoiser for TiedReluNetwork {
    fn name(&self) -> &str {
        "tied-relu"
    }
    fn beta(&self) -> f64 {
        self.beta
    }
    fn induced_penalty(&self) -> Option<Penalty> {
        None
    }
    fn dim(&self) -> Option<usize> {
        Some(self.w.cols())
    }
    fn apply(&self, x: &DenseVector) -> DenseVector {
        let h = self.w.mul_vec(x).expect("tied-relu input dimension");
        self.w
            .tr_mul_vec(&h.map(|v| v.max(0.0)))
            .expect("tied-relu hidden dimension")
    }
}

/// Wraps an arbitrary map, mostly for certification tests.
#[derive(Clone)]
pub struct FnDenoiser {
    name: String,
    beta: f64,
    op: Arc<dyn Fn(&DenseVector) -> DenseVector + Send + Sync>,
}

impl FnDenoiser {
    pub fn new(
        name: impl Into<String>,
        beta: f64,
        op: impl Fn(&DenseVector) -> DenseVector + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            beta,
            op: Arc::new(op),
        }
    }

    /// `x ↦ S x`.
    pub fn linear(name: impl Into<String>, beta: f64, s: Matrix) -> Self {
        Self::new(name, beta, move |x| {
            s.mul_vec(x).expect("linear map dimension")
        })
    }
}

impl Denoiser for FnDenoiser {
    fn name(&self) -> &str {
        &self.name
    }
    fn beta(&self) -> f64 {
        self.beta
    }
    fn induced_penalty(&self) -> Option<Penalty> {
        None
    }
    fn apply(&self, x: &DenseVector) -> DenseVector {
        (self.op)(x)
    }
}

/// Names accepted by [`catalog_denoiser`].
pub const CATALOG: [&str; 5] = ["soft", "firm", "garrote", "vector-firm", "group-firm"];

fn param(params: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    params
        .get(key)
        .copied()
        .ok_or_else(|| Error::InvalidParameter(format!("missing parameter '{key}'")))
}

/// Builds a catalog denoiser from its name and a parameter map.
///
/// | name | parameters |
/// |------|------------|
/// | `soft` | `lambda`, optional `beta` |
/// | `firm`, `vector-firm` | `lambda1`, `lambda2` |
/// | `garrote` | `lambda` |
/// | `group-firm` | `lambda1`, `lambda2`, `dim`, `group_size` |
pub fn catalog_denoiser(name: &str, params: &BTreeMap<String, f64>) -> Result<Box<dyn Denoiser>> {
    let firm_params = || FirmParams::new(param(params, "lambda1")?, param(params, "lambda2")?);
    Ok(match name {
        "soft" => Box::new(SoftShrinkage::with_beta(
            param(params, "lambda")?,
            params.get("beta").copied().unwrap_or(SOFT_DEFAULT_BETA),
        )?),
        "firm" => Box::new(FirmShrinkage::new(firm_params()?)),
        "garrote" => Box::new(GarroteShrinkage::new(param(params, "lambda")?)?),
        "vector-firm" => Box::new(VectorFirm::new(firm_params()?)),
        "group-firm" => {
            let as_count = |key: &str| -> Result<usize> {
                let v = param(params, key)?;
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "{key} must be a positive integer"
                    )));
                }
                Ok(v as usize)
            };
            let groups = GroupStructure::uniform(as_count("dim")?, as_count("group_size")?)?;
            Box::new(GroupFirm::new(firm_params()?, groups))
        }
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown denoiser '{other}', expected one of {CATALOG:?}"
            )))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DenseVector {
        DenseVector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn tied_relu_example() {
        let t = TiedReluNetwork::new(Matrix::diagonal(&[1.0, 2.0])).unwrap();
        assert_eq!(t.apply(&v(&[1.0, 1.0])), v(&[1.0, 4.0]));
        assert_eq!(t.apply(&v(&[-1.0, -0.5])), DenseVector::zeros(2));
        assert!((t.gram_norm() - 4.0).abs() < 1e-12);
        assert!((t.beta() - 0.25).abs() < 1e-12);
        assert!(!t.classically_nonexpansive());
    }

    #[test]
    fn tied_relu_guards_small_weights() {
        let t = TiedReluNetwork::new(Matrix::diagonal(&[0.5, 0.9])).unwrap();
        assert!(t.classically_nonexpansive());
        assert!(t.beta() < 1.0 && t.beta() > 1.0 - 1e-8);
        assert!(TiedReluNetwork::new(Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn catalog_lookup() {
        let mut p = BTreeMap::new();
        p.insert("lambda1".to_string(), 1.0);
        p.insert("lambda2".to_string(), 2.0);
        let d = catalog_denoiser("firm", &p).unwrap();
        assert_eq!(d.beta(), 0.5);
        assert_eq!(d.apply(&v(&[1.5])), v(&[1.0]));
        assert!(catalog_denoiser("hard", &p).is_err());
        p.insert("lambda1".to_string(), 3.0);
        assert!(matches!(
            catalog_denoiser("firm", &p),
            Err(Error::InvalidParameter(_))
        ));
        let mut g = BTreeMap::new();
        for (k, val) in [
            ("lambda1", 1.0),
            ("lambda2", 2.0),
            ("dim", 6.0),
            ("group_size", 2.0),
        ] {
            g.insert(k.to_string(), val);
        }
        assert_eq!(catalog_denoiser("group-firm", &g).unwrap().dim(), Some(6));
    }

    #[test]
    fn induced_penalties_match_operators() {
        let fp = FirmParams::new(1.0, 2.0).unwrap();
        assert_eq!(
            FirmShrinkage::new(fp)
                .induced_penalty()
                .unwrap()
                .weak_convexity(),
            0.5
        );
        assert_eq!(
            GarroteShrinkage::new(1.0)
                .unwrap()
                .induced_penalty()
                .unwrap()
                .weak_convexity(),
            0.5
        );
        assert_eq!(
            SoftShrinkage::new(1.0)
                .unwrap()
                .induced_penalty()
                .unwrap()
                .weak_convexity(),
            0.0
        );
    }
}
