use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{is_runaway, Recorder, RunOptions, SolverTrace};
use crate::error::{Error, Result, StepCondition};
use crate::linalg::{DenseVector, LinearMap, QuadraticFidelity};
use crate::regularizers::{firm, soft, FirmParams};

/// `prox_{σ g*}` for `g = λ_g |·|_1`, i.e. `v - σ soft(v/σ, λ_g/σ)`.
pub fn l1_dual_prox(lambda_g: f64, sigma: f64) -> impl Fn(&DenseVector) -> DenseVector {
    move |v| v.map(|t| t - sigma * soft(t / sigma, lambda_g / sigma))
}

/// Condat–Vũ iteration for `min h(x) + g(Lx)`:
///
/// ```text
/// u⁺ = prox_{σg*}(u + σ L x)
/// x⁺ = x - τ ∇h(x) - τ Lᵀ(2u⁺ - u)
/// ```
pub struct CondatVu<'a, G, P> {
    l: &'a LinearMap,
    grad_h: G,
    dual_prox: P,
    sigma: f64,
    tau: f64,
    x: DenseVector,
    u: DenseVector,
}

impl<'a, G, P> CondatVu<'a, G, P>
where
    G: Fn(&DenseVector) -> DenseVector,
    P: Fn(&DenseVector) -> DenseVector,
{
    pub fn new(
        l: &'a LinearMap,
        sigma: f64,
        tau: f64,
        grad_h: G,
        dual_prox: P,
        x0: DenseVector,
        u0: DenseVector,
    ) -> Result<Self> {
        x0.check_len(l.input_dim())?;
        u0.check_len(l.output_dim())?;
        if !(sigma > 0.0 && tau > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "step sizes must be positive, got sigma={sigma}, tau={tau}"
            )));
        }
        Ok(Self {
            l,
            grad_h,
            dual_prox,
            sigma,
            tau,
            x: x0,
            u: u0,
        })
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
        let lx = self.l.apply_unchecked(&self.x);
        let u_next = (self.dual_prox)(&self.u.add_scaled(self.sigma, &lx));
        let w = DenseVector::from_fn(u_next.len(), |i| 2.0 * u_next[i] - self.u[i]);
        let back = self.l.adjoint_unchecked(&w);
        let grad = (self.grad_h)(&self.x);
        let x_next =
            DenseVector::from_fn(self.x.len(), |i| self.x[i] - self.tau * (grad[i] + back[i]));
        let residual = (x_next.distance_sq(&self.x) + u_next.distance_sq(&self.u)).sqrt();
        self.x = x_next;
        self.u = u_next;
        residual
    }

    pub fn is_runaway(&self) -> bool {
        is_runaway(&self.x) || is_runaway(&self.u)
    }
}

/// Runs [`CondatVu`] from `(x0, u0)`. Convergence requires
/// `τ(σ|L|^2 + κ_h/2) < 1`, which the caller is responsible for.
#[allow(clippy::too_many_arguments)]
pub fn run_condat_vu_form2<G, P>(
    l: &LinearMap,
    sigma: f64,
    tau: f64,
    grad_h: G,
    dual_prox: P,
    x0: &DenseVector,
    u0: &DenseVector,
    options: RunOptions,
    objective: Option<&dyn Fn(&DenseVector) -> f64>,
) -> Result<(DenseVector, DenseVector, SolverTrace)>
where
    G: Fn(&DenseVector) -> DenseVector,
    P: Fn(&DenseVector) -> DenseVector,
{
    let mut it = CondatVu::new(l, sigma, tau, grad_h, dual_prox, x0.clone(), u0.clone())?;
    let mut rec = Recorder::new(options);
    for k in 0..options.max_iter {
        let scale = (it.x.norm_sq() + it.u.norm_sq()).sqrt();
        let residual = it.step();
        if it.is_runaway() {
            return Err(rec.diverged(k));
        }
        let obj = match objective {
            Some(f) if rec.wants_objective(k) => Some(f(&it.x)),
            _ => None,
        };
        if rec.record(k, residual, scale, obj, &it.x) {
            break;
        }
    }
    let (x, u) = it.into_parts();
    Ok((x, u, rec.finish()))
}

/// How the primal step of the heuristic run is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauMode {
    /// `τ = γ / (σ|L|^2 + |AᵀA|/2)`, the Condat–Vũ bound for smooth part `f`.
    #[default]
    Recompute,
    /// Reuse the primal step of the modified primal-dual run.
    KeepModified,
}

/// Condat–Vũ with smooth part `f` and the firm operator substituted into the
/// dual proximal step: `prox_{σg*}(v) ≈ v - σ firm_{1/(μσ), λ2}(v/σ)`.
#[derive(Clone, Debug)]
pub struct HeuristicConfig {
    sigma: f64,
    tau: f64,
    params: FirmParams,
    l: LinearMap,
    fidelity: Arc<QuadraticFidelity>,
    pub options: RunOptions,
}

impl HeuristicConfig {
    /// Requires `1/(μσ) < λ2` so the substituted firm operator is defined.
    pub fn new(
        sigma: f64,
        tau: f64,
        mu: f64,
        lambda2: f64,
        l: LinearMap,
        fidelity: Arc<QuadraticFidelity>,
        options: RunOptions,
    ) -> Result<Self> {
        if l.input_dim() != fidelity.dim() {
            return Err(Error::DimensionMismatch {
                expected: fidelity.dim(),
                found: l.input_dim(),
            });
        }
        if !(sigma > 0.0 && tau > 0.0 && mu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma, tau, mu must be positive, got {sigma}, {tau}, {mu}"
            )));
        }
        let lambda1 = 1.0 / (mu * sigma);
        let params = FirmParams::new(lambda1, lambda2).map_err(|_| Error::StepSize {
            condition: StepCondition::HeuristicThreshold,
            detail: format!("1/(mu*sigma)={lambda1} must be below lambda2={lambda2}"),
        })?;
        Ok(Self {
            sigma,
            tau,
            params,
            l,
            fidelity,
            options,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn firm_params(&self) -> &FirmParams {
        &self.params
    }

    pub fn dual_prox(&self) -> impl Fn(&DenseVector) -> DenseVector + '_ {
        let sigma = self.sigma;
        move |v| v.map(|t| t - sigma * firm(t / sigma, &self.params))
    }
}

pub fn run_pd_heuristic(
    cfg: &HeuristicConfig,
    x0: &DenseVector,
    u0: &DenseVector,
) -> Result<(DenseVector, DenseVector, SolverTrace)> {
    let fid = &cfg.fidelity;
    run_condat_vu_form2(
        &cfg.l,
        cfg.sigma,
        cfg.tau,
        |x| fid.gradient_unchecked(x),
        cfg.dual_prox(),
        x0,
        u0,
        cfg.options,
        None,
    )
}
