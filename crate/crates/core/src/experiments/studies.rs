use serde::{Deserialize, Serialize};

use super::{discrepancy, relative_sq_error, ProblemInstance};
use crate::denoiser::{Denoiser, FirmShrinkage};
use crate::error::{Error, Result};
use crate::linalg::{norm_sq_upper_bound, DenseVector, LinearMap, QuadraticFidelity};
use crate::regularizers::{moreau_envelope_l1, FirmParams};
use crate::solvers::{
    l1_dual_prox, CondatVu, HeuristicConfig, PdConfig, PrimalDualMolGrad, Recorder, RunOptions,
    SolverTrace, TauMode,
};

/// Joint, primal-only and dual-only discrepancies; entry `k` compares the
/// iterates after `k` steps.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyCurves {
    pub joint: Vec<f64>,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

impl DiscrepancyCurves {
    fn push(
        &mut self,
        x: &DenseVector,
        x_ref: &DenseVector,
        u: &DenseVector,
        u_ref: &DenseVector,
    ) -> Result<()> {
        self.joint.push(discrepancy(x, x_ref, u, u_ref)?);
        self.x
            .push(relative_sq_error(x, x_ref).unwrap_or(f64::INFINITY));
        self.u
            .push(relative_sq_error(u, u_ref).unwrap_or(f64::INFINITY));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.joint.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joint.is_empty()
    }
}

/// Gradient of `f - w · env_{λ2}(|·|_1) ∘ L`, the smooth part of the convex
/// rewrite of `f + w · mc_{λ2}(L·)`.
fn rewritten_smooth_gradient<'a>(
    fidelity: &'a QuadraticFidelity,
    l: &'a LinearMap,
    weight: f64,
    lambda2: f64,
) -> impl Fn(&DenseVector) -> DenseVector + 'a {
    move |x| {
        let (_, env_grad) = moreau_envelope_l1(&l.apply_unchecked(x), lambda2);
        fidelity
            .gradient_unchecked(x)
            .add_scaled(-weight, &l.adjoint_unchecked(&env_grad))
    }
}

/// `γ / (σ|L|^2 + |AᵀA|/2)`, the Condat–Vũ primal step when the smooth part
/// is bounded in curvature by `f`.
fn condat_vu_tau(gamma: f64, sigma: f64, l_norm_sq: f64, fidelity: &QuadraticFidelity) -> f64 {
    gamma / (sigma * l_norm_sq + fidelity.smoothness / 2.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub delta: f64,
    pub gamma: f64,
    pub baseline_sigma: f64,
    pub baseline_gamma: f64,
    pub iters: usize,
}

impl Default for AgreementConfig {
    fn default() -> Self {
        Self {
            lambda1: 2.5,
            lambda2: 5.0,
            delta: 1.0,
            gamma: 0.9,
            baseline_sigma: 0.2,
            baseline_gamma: 0.9,
            iters: 10_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AgreementResult {
    pub curves: DiscrepancyCurves,
    pub modified_trace: SolverTrace,
    pub baseline_trace: SolverTrace,
    pub x_modified: DenseVector,
    pub u_modified: DenseVector,
    pub x_baseline: DenseVector,
    pub u_baseline: DenseVector,
    pub sigma: f64,
    pub tau: f64,
    pub baseline_tau: f64,
    /// Weight `w` of `w·mc_{λ2}(D·)` minimized by both runs.
    pub mc_weight: f64,
}

/// Runs the modified primal-dual scheme with firm shrinkage next to the
/// Condat–Vũ iteration on the convex rewrite of the same objective, in
/// lockstep from zero.
pub fn run_agreement_experiment(
    instance: &ProblemInstance,
    cfg: &AgreementConfig,
) -> Result<AgreementResult> {
    let fid = instance.fidelity();
    let d = instance.difference();
    let params = FirmParams::new(cfg.lambda1, cfg.lambda2)?;
    let firm: std::sync::Arc<dyn Denoiser> = std::sync::Arc::new(FirmShrinkage::new(params));
    let pd = PdConfig::derived(
        cfg.delta,
        cfg.gamma,
        d.clone(),
        fid.clone(),
        firm,
        RunOptions::fixed(cfg.iters),
    )?;
    let mc_weight = pd.regularizer_weight() * cfg.lambda1;

    let l_norm_sq = pd.l_norm_sq();
    let baseline_tau = condat_vu_tau(cfg.baseline_gamma, cfg.baseline_sigma, l_norm_sq, &fid);
    let x0 = DenseVector::zeros(fid.dim());
    let u0 = DenseVector::zeros(d.output_dim());

    let mut alg = PrimalDualMolGrad::new(&pd, x0.clone(), u0.clone())?;
    let mut base = CondatVu::new(
        d,
        cfg.baseline_sigma,
        baseline_tau,
        rewritten_smooth_gradient(&fid, d, mc_weight, cfg.lambda2),
        l1_dual_prox(mc_weight, cfg.baseline_sigma),
        x0,
        u0,
    )?;
    let mut rec_a = Recorder::new(RunOptions::fixed(cfg.iters));
    let mut rec_b = Recorder::new(RunOptions::fixed(cfg.iters));
    let mut curves = DiscrepancyCurves::default();
    curves.push(alg.x(), base.x(), alg.u(), base.u())?;
    for k in 0..cfg.iters {
        let ra = alg.step();
        if alg.is_runaway() {
            return Err(rec_a.diverged(k));
        }
        let rb = base.step();
        if base.is_runaway() {
            return Err(rec_b.diverged(k));
        }
        rec_a.record(k, ra, 0.0, None, alg.x());
        rec_b.record(k, rb, 0.0, None, base.x());
        curves.push(alg.x(), base.x(), alg.u(), base.u())?;
    }
    let (x_modified, u_modified) = alg.into_parts();
    let (x_baseline, u_baseline) = base.into_parts();
    Ok(AgreementResult {
        curves,
        modified_trace: rec_a.finish(),
        baseline_trace: rec_b.finish(),
        x_modified,
        u_modified,
        x_baseline,
        u_baseline,
        sigma: pd.sigma(),
        tau: pd.tau(),
        baseline_tau,
        mc_weight,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisagreementConfig {
    pub lambda2: f64,
    /// `None` selects `|D|^2 / (ρ λ2)`, the value matching the agreement run.
    pub mu: Option<f64>,
    pub sigma: f64,
    pub gamma: f64,
    pub tau_mode: TauMode,
    /// `λ1` of the modified run whose `τ` is reused under
    /// [`TauMode::KeepModified`].
    pub modified_lambda1: f64,
    pub baseline_sigma: f64,
    pub baseline_gamma: f64,
    pub iters: usize,
}

impl Default for DisagreementConfig {
    fn default() -> Self {
        Self {
            lambda2: 5.0,
            mu: None,
            sigma: 0.2,
            gamma: 0.9,
            tau_mode: TauMode::Recompute,
            modified_lambda1: 2.5,
            baseline_sigma: 0.2,
            baseline_gamma: 0.9,
            iters: 10_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DisagreementResult {
    pub curves: DiscrepancyCurves,
    pub heuristic_trace: SolverTrace,
    pub baseline_trace: SolverTrace,
    pub x_heuristic: DenseVector,
    pub u_heuristic: DenseVector,
    pub x_baseline: DenseVector,
    pub u_baseline: DenseVector,
    pub mu: f64,
    pub tau: f64,
    pub baseline_tau: f64,
}

/// Runs the direct firm plug-in against the same convex baseline as the
/// agreement study.
pub fn run_disagreement_experiment(
    instance: &ProblemInstance,
    cfg: &DisagreementConfig,
) -> Result<DisagreementResult> {
    let fid = instance.fidelity();
    let d = instance.difference();
    let l_norm_sq = norm_sq_upper_bound(d);
    let mu = cfg.mu.unwrap_or(l_norm_sq / (fid.rho * cfg.lambda2));
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "mu must be positive, got {mu}"
        )));
    }
    let tau = match cfg.tau_mode {
        TauMode::Recompute => condat_vu_tau(cfg.gamma, cfg.sigma, l_norm_sq, &fid),
        TauMode::KeepModified => {
            let firm = FirmShrinkage::new(FirmParams::new(cfg.modified_lambda1, cfg.lambda2)?);
            PdConfig::derived(
                1.0,
                cfg.gamma,
                d.clone(),
                fid.clone(),
                std::sync::Arc::new(firm),
                RunOptions::fixed(0),
            )?
            .tau()
        }
    };
    let heur = HeuristicConfig::new(
        cfg.sigma,
        tau,
        mu,
        cfg.lambda2,
        d.clone(),
        fid.clone(),
        RunOptions::fixed(cfg.iters),
    )?;
    let baseline_tau = condat_vu_tau(cfg.baseline_gamma, cfg.baseline_sigma, l_norm_sq, &fid);
    let x0 = DenseVector::zeros(fid.dim());
    let u0 = DenseVector::zeros(d.output_dim());

    let grad_f = |x: &DenseVector| fid.gradient_unchecked(x);
    let mut h = CondatVu::new(
        d,
        heur.sigma(),
        tau,
        grad_f,
        heur.dual_prox(),
        x0.clone(),
        u0.clone(),
    )?;
    let mut base = CondatVu::new(
        d,
        cfg.baseline_sigma,
        baseline_tau,
        rewritten_smooth_gradient(&fid, d, 1.0 / mu, cfg.lambda2),
        l1_dual_prox(1.0 / mu, cfg.baseline_sigma),
        x0,
        u0,
    )?;
    let mut rec_h = Recorder::new(RunOptions::fixed(cfg.iters));
    let mut rec_b = Recorder::new(RunOptions::fixed(cfg.iters));
    let mut curves = DiscrepancyCurves::default();
    curves.push(h.x(), base.x(), h.u(), base.u())?;
    for k in 0..cfg.iters {
        let rh = h.step();
        if h.is_runaway() {
            return Err(rec_h.diverged(k));
        }
        let rb = base.step();
        if base.is_runaway() {
            return Err(rec_b.diverged(k));
        }
        rec_h.record(k, rh, 0.0, None, h.x());
        rec_b.record(k, rb, 0.0, None, base.x());
        curves.push(h.x(), base.x(), h.u(), base.u())?;
    }
    let (x_heuristic, u_heuristic) = h.into_parts();
    let (x_baseline, u_baseline) = base.into_parts();
    Ok(DisagreementResult {
        curves,
        heuristic_trace: rec_h.finish(),
        baseline_trace: rec_b.finish(),
        x_heuristic,
        u_heuristic,
        x_baseline,
        u_baseline,
        mu,
        tau,
        baseline_tau,
    })
}
