use std::sync::Arc;

use super::{implicit_objective, is_runaway, Recorder, RunOptions, SolverTrace};
use crate::denoiser::Denoiser;
use crate::error::{Error, Result, StepCondition};
use crate::linalg::{
    fhat_smoothness, norm_sq_upper_bound, DenseVector, LinearMap, QuadraticFidelity,
};

/// Relative slack on the dual step-size bound, so that parameters produced by
/// [`derive_pd_params`] with `δ = 1` are accepted despite rounding.
const SIGMA_SLACK: f64 = 1e-12;

/// Step sizes from the dual-step fraction `δ ∈ (0, 1]` and the primal
/// fraction `γ ∈ (0, 1)`:
/// `σ = δρβ / (|L|^2 (1-β))`, `τ = γ / (σ|L|^2 + κ/2)`.
pub fn derive_pd_params(
    rho: f64,
    kappa: f64,
    l_norm_sq: f64,
    beta: f64,
    delta: f64,
    gamma: f64,
) -> Result<(f64, f64)> {
    for (name, v) in [("rho", rho), ("kappa", kappa), ("|L|^2", l_norm_sq)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "beta must lie in (0, 1), got {beta}"
        )));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1], got {delta}"
        )));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must lie in (0, 1), got {gamma}"
        )));
    }
    let sigma = delta * rho * beta / (l_norm_sq * (1.0 - beta));
    let tau = gamma / (sigma * l_norm_sq + kappa / 2.0);
    Ok((sigma, tau))
}

/// Parameters of the modified primal-dual iteration
///
/// ```text
/// ũ   = u + σ L x
/// u⁺  = ũ - σ T(ũ / (σ + c))
/// x⁺  = x + τ c LᵀL x - τ ∇f(x) - τ Lᵀ(2u⁺ - u)
/// ```
///
/// with `c = ρ / |L|^2`.
#[derive(Clone)]
pub struct PdConfig {
    sigma: f64,
    tau: f64,
    l: LinearMap,
    fidelity: Arc<QuadraticFidelity>,
    denoiser: Arc<dyn Denoiser>,
    l_norm_sq: f64,
    kappa: f64,
    pub options: RunOptions,
}

impl PdConfig {
    /// Fails when either step-size condition is violated. The dual bound is
    /// skipped for `β ≥ 1`.
    pub fn new(
        sigma: f64,
        tau: f64,
        l: LinearMap,
        fidelity: Arc<QuadraticFidelity>,
        denoiser: Arc<dyn Denoiser>,
        options: RunOptions,
    ) -> Result<Self> {
        if l.input_dim() != fidelity.dim() {
            return Err(Error::DimensionMismatch {
                expected: fidelity.dim(),
                found: l.input_dim(),
            });
        }
        if let Some(d) = denoiser.dim() {
            if d != l.output_dim() {
                return Err(Error::DimensionMismatch {
                    expected: l.output_dim(),
                    found: d,
                });
            }
        }
        if !(sigma > 0.0 && tau > 0.0 && sigma.is_finite() && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step sizes must be positive, got sigma={sigma}, tau={tau}"
            )));
        }
        let l_norm_sq = norm_sq_upper_bound(&l);
        let rho = fidelity.rho;
        let kappa = fidelity
            .kappa_fhat
            .unwrap_or_else(|| fhat_smoothness(fidelity.gram(), &l, rho / l_norm_sq));
        let beta = denoiser.beta();
        if beta < 1.0 {
            let bound = rho * beta / (l_norm_sq * (1.0 - beta));
            if sigma > bound * (1.0 + SIGMA_SLACK) {
                return Err(Error::StepSize {
                    condition: StepCondition::PrimalDualSigma,
                    detail: format!("sigma={sigma} exceeds rho*beta/(|L|^2(1-beta))={bound}"),
                });
            }
        }
        let lhs = tau * (sigma * l_norm_sq + kappa / 2.0);
        if lhs >= 1.0 || lhs.is_nan() {
            return Err(Error::StepSize {
                condition: StepCondition::PrimalDualTau,
                detail: format!("tau*(sigma*|L|^2 + kappa/2) = {lhs} is not below 1"),
            });
        }
        Ok(Self {
            sigma,
            tau,
            l,
            fidelity,
            denoiser,
            l_norm_sq,
            kappa,
            options,
        })
    }

    /// Builds the configuration from [`derive_pd_params`].
    pub fn derived(
        delta: f64,
        gamma: f64,
        l: LinearMap,
        fidelity: Arc<QuadraticFidelity>,
        denoiser: Arc<dyn Denoiser>,
        options: RunOptions,
    ) -> Result<Self> {
        let l_norm_sq = norm_sq_upper_bound(&l);
        let kappa = fidelity
            .kappa_fhat
            .unwrap_or_else(|| fhat_smoothness(fidelity.gram(), &l, fidelity.rho / l_norm_sq));
        let (sigma, tau) = derive_pd_params(
            fidelity.rho,
            kappa,
            l_norm_sq,
            denoiser.beta(),
            delta,
            gamma,
        )?;
        Self::new(sigma, tau, l, fidelity, denoiser, options)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn l(&self) -> &LinearMap {
        &self.l
    }

    pub fn fidelity(&self) -> &QuadraticFidelity {
        &self.fidelity
    }

    pub fn denoiser(&self) -> &dyn Denoiser {
        self.denoiser.as_ref()
    }

    pub fn l_norm_sq(&self) -> f64 {
        self.l_norm_sq
    }

    /// Smoothness of `f̂` used in the primal condition.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `c = ρ / |L|^2`
    pub fn c(&self) -> f64 {
        self.fidelity.rho / self.l_norm_sq
    }

    /// Weight of the regularizer the iteration minimizes: `σ + c`.
    pub fn regularizer_weight(&self) -> f64 {
        self.sigma + self.c()
    }

    /// `f(x) + (σ + c) φ(Lx)` when the denoiser's penalty is known.
    pub fn objective(&self, x: &DenseVector) -> Option<f64> {
        let phi = self.denoiser.induced_penalty()?;
        implicit_objective(x, &self.fidelity, &self.l, &phi, self.regularizer_weight()).ok()
    }
}

impl std::fmt::Debug for PdConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PdConfig")
            .field("sigma", &self.sigma)
            .field("tau", &self.tau)
            .field("denoiser", &self.denoiser.name())
            .field("l_norm_sq", &self.l_norm_sq)
            .field("kappa", &self.kappa)
            .field("options", &self.options)
            .finish_non_exhaustive()
    }
}

/// Iteration state, advanced one step at a time.
pub struct PrimalDualMolGrad<'a> {
    cfg: &'a PdConfig,
    x: DenseVector,
    u: DenseVector,
}

impl<'a> PrimalDualMolGrad<'a> {
    pub fn new(cfg: &'a PdConfig, x0: DenseVector, u0: DenseVector) -> Result<Self> {
        x0.check_len(cfg.l.input_dim())?;
        u0.check_len(cfg.l.output_dim())?;
        Ok(Self { cfg, x: x0, u: u0 })
    }

    pub fn x(&self) -> &DenseVector {
        &self.x
    }

    pub fn u(&self) -> &DenseVector {
        &self.u
    }

    pub fn into_parts(self) -> (DenseVector, DenseVector) {
        (self.x, self.u)
    }

    /// Advances one step and returns `|(x⁺, u⁺) - (x, u)|`.
    pub fn step(&mut self) -> f64 {
        let cfg = self.cfg;
        let (sigma, tau, c) = (cfg.sigma, cfg.tau, cfg.c());
        let lx = cfg.l.apply_unchecked(&self.x);
        let u_tilde = self.u.add_scaled(sigma, &lx);
        let t = cfg.denoiser.apply(&u_tilde.scaled(1.0 / (sigma + c)));
        let u_next = u_tilde.add_scaled(-sigma, &t);
        // Lᵀ(c L x - (2u⁺ - u)) with one adjoint application
        let dual_dir =
            DenseVector::from_fn(lx.len(), |i| c * lx[i] - (2.0 * u_next[i] - self.u[i]));
        let back = cfg.l.adjoint_unchecked(&dual_dir);
        let grad = cfg.fidelity.gradient_unchecked(&self.x);
        let x_next = DenseVector::from_fn(self.x.len(), |i| self.x[i] + tau * (back[i] - grad[i]));
        let residual = (x_next.distance_sq(&self.x) + u_next.distance_sq(&self.u)).sqrt();
        self.x = x_next;
        self.u = u_next;
        residual
    }

    pub fn is_runaway(&self) -> bool {
        is_runaway(&self.x) || is_runaway(&self.u)
    }
}

/// Runs the modified primal-dual iteration from `(x0, u0)`.
pub fn run_pd_molgrad(
    cfg: &PdConfig,
    x0: &DenseVector,
    u0: &DenseVector,
) -> Result<(DenseVector, DenseVector, SolverTrace)> {
    let mut it = PrimalDualMolGrad::new(cfg, x0.clone(), u0.clone())?;
    let mut rec = Recorder::new(cfg.options);
    for k in 0..cfg.options.max_iter {
        let scale = (it.x.norm_sq() + it.u.norm_sq()).sqrt();
        let residual = it.step();
        if it.is_runaway() {
            return Err(rec.diverged(k));
        }
        let objective = if rec.wants_objective(k) {
            cfg.objective(&it.x)
        } else {
            None
        };
        if rec.record(k, residual, scale, objective, &it.x) {
            break;
        }
    }
    let (x, u) = it.into_parts();
    Ok((x, u, rec.finish()))
}
