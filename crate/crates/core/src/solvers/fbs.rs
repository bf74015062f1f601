use std::sync::Arc;

use super::{is_runaway, Recorder, RunOptions, SolverTrace};
use crate::denoiser::Denoiser;
use crate::error::{Error, Result, StepCondition};
use crate::linalg::{DenseVector, QuadraticFidelity};

/// Checks the convergence window of forward-backward splitting with a
/// `β`-cocoercive denoiser and a `ρ`-strongly convex, `κ`-smooth fidelity:
/// `β ∈ ((κ-ρ)/(κ+ρ), 1)` and `μ ∈ [(1-β)/ρ, (1+β)/κ)`.
///
/// `κ = ρ` is accepted, in which case the lower bound on `β` is 0.
pub fn validate_fbs_window(mu: f64, beta: f64, rho: f64, kappa: f64) -> Result<()> {
    if !(rho > 0.0 && kappa >= rho && rho.is_finite() && kappa.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need kappa >= rho > 0, got rho={rho}, kappa={kappa}"
        )));
    }
    let beta_floor = (kappa - rho) / (kappa + rho);
    if !(beta > beta_floor && beta < 1.0) {
        return Err(Error::StepSize {
            condition: StepCondition::FbsBetaWindow,
            detail: format!("beta={beta} not in ({beta_floor}, 1)"),
        });
    }
    let (lo, hi) = ((1.0 - beta) / rho, (1.0 + beta) / kappa);
    if !(mu >= lo && mu < hi) {
        return Err(Error::StepSize {
            condition: StepCondition::FbsStepWindow,
            detail: format!("mu={mu} not in [{lo}, {hi})"),
        });
    }
    Ok(())
}

#[derive(Clone)]
pub struct FbsConfig {
    mu: f64,
    denoiser: Arc<dyn Denoiser>,
    fidelity: Arc<QuadraticFidelity>,
    pub options: RunOptions,
}

impl FbsConfig {
    /// Fails when `(μ, β, ρ, κ)` is outside the convergence window.
    pub fn new(
        mu: f64,
        denoiser: Arc<dyn Denoiser>,
        fidelity: Arc<QuadraticFidelity>,
        options: RunOptions,
    ) -> Result<Self> {
        validate_fbs_window(mu, denoiser.beta(), fidelity.rho, fidelity.smoothness)?;
        if let Some(d) = denoiser.dim() {
            if d != fidelity.dim() {
                return Err(Error::DimensionMismatch {
                    expected: fidelity.dim(),
                    found: d,
                });
            }
        }
        Ok(Self {
            mu,
            denoiser,
            fidelity,
            options,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// One forward-backward step `T(x - μ∇f(x))`.
    pub fn step(&self, x: &DenseVector) -> DenseVector {
        let g = self.fidelity.gradient_unchecked(x);
        self.denoiser.apply(&x.add_scaled(-self.mu, &g))
    }

    /// `μ f(x) + φ(x)` when the denoiser's penalty is known.
    pub fn objective(&self, x: &DenseVector) -> Option<f64> {
        let phi = self.denoiser.induced_penalty()?;
        let f = self.fidelity.value(x).ok()?;
        Some(self.mu * f + phi.value(x.as_slice()).as_f64())
    }
}

impl std::fmt::Debug for FbsConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FbsConfig")
            .field("mu", &self.mu)
            .field("denoiser", &self.denoiser.name())
            .field("options", &self.options)
            .finish_non_exhaustive()
    }
}

/// Iterates `x_{k+1} = T(x_k - μ∇f(x_k))` until the relative fixed-point
/// residual drops below `stop_tol` or `max_iter` is reached.
pub fn run_fbs(cfg: &FbsConfig, x0: &DenseVector) -> Result<(DenseVector, SolverTrace)> {
    if x0.len() != cfg.fidelity.dim() {
        return Err(Error::DimensionMismatch {
            expected: cfg.fidelity.dim(),
            found: x0.len(),
        });
    }
    let mut rec = Recorder::new(cfg.options);
    let mut x = x0.clone();
    for k in 0..cfg.options.max_iter {
        let next = cfg.step(&x);
        if is_runaway(&next) {
            return Err(rec.diverged(k));
        }
        let residual = next.distance_sq(&x).sqrt();
        let objective = if rec.wants_objective(k) {
            cfg.objective(&next)
        } else {
            None
        };
        let scale = x.norm();
        let stop = rec.record(k, residual, scale, objective, &next);
        x = next;
        if stop {
            break;
        }
    }
    Ok((x, rec.finish()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::{FirmShrinkage, SoftShrinkage};
    use crate::error::Error;
    use crate::linalg::Matrix;
    use crate::regularizers::{mc_penalty, FirmParams};
    use crate::solvers::StopReason;

    fn denoise_fidelity(y: &[f64]) -> Arc<QuadraticFidelity> {
        let n = y.len();
        Arc::new(
            QuadraticFidelity::new(Matrix::identity(n), DenseVector::new(y.to_vec()).unwrap())
                .unwrap(),
        )
    }

    #[test]
    fn window_examples() {
        assert!(validate_fbs_window(1.0, 0.5, 1.0, 1.0).is_ok());
        let err = validate_fbs_window(0.4, 0.5, 1.0, 1.0).unwrap_err();
        assert!(matches!(
            err,
            Error::StepSize {
                condition: StepCondition::FbsStepWindow,
                ..
            }
        ));
        assert!(err.to_string().contains("FBS step-size window"));
        assert!(validate_fbs_window(1.5, 0.5, 1.0, 1.0).is_err());
        // β must exceed (κ-ρ)/(κ+ρ) = 1/3
        assert!(matches!(
            validate_fbs_window(0.5, 0.3, 1.0, 2.0),
            Err(Error::StepSize {
                condition: StepCondition::FbsBetaWindow,
                ..
            })
        ));
        assert!(validate_fbs_window(1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn soft_solves_l1_prox_in_one_step() {
        let fid = denoise_fidelity(&[2.0, 0.5]);
        let t = Arc::new(SoftShrinkage::with_beta(1.0, 0.5).unwrap());
        let cfg = FbsConfig::new(1.0, t, fid, RunOptions::default()).unwrap();
        let x0 = DenseVector::zeros(2);
        let x1 = cfg.step(&x0);
        assert_eq!(x1.as_slice(), &[1.0, 0.0]);
        let (xh, trace) = run_fbs(&cfg, &x0).unwrap();
        assert_eq!(xh.as_slice(), &[1.0, 0.0]);
        assert_eq!(trace.stop_reason, StopReason::Converged);
        assert_eq!(trace.iterations(), 2);
    }

    #[test]
    fn fixed_point_start_stops_immediately() {
        let fid = denoise_fidelity(&[2.0, 0.5]);
        let t = Arc::new(SoftShrinkage::with_beta(1.0, 0.5).unwrap());
        let cfg = FbsConfig::new(1.0, t, fid, RunOptions::default()).unwrap();
        let x0 = DenseVector::new(vec![1.0, 0.0]).unwrap();
        let (_, trace) = run_fbs(&cfg, &x0).unwrap();
        assert_eq!(trace.iterations(), 1);
        assert_eq!(trace.records[0].iter, 0);
        assert_eq!(trace.records[0].residual, 0.0);
        assert_eq!(trace.stop_reason, StopReason::Converged);
    }

    #[test]
    fn firm_scalar_fixed_point_is_grid_minimal() {
        let fid = denoise_fidelity(&[3.0]);
        let p = FirmParams::new(1.0, 2.0).unwrap();
        let t = Arc::new(FirmShrinkage::new(p));
        let cfg = FbsConfig::new(1.0, t.clone(), fid.clone(), RunOptions::default()).unwrap();
        let (xh, _) = run_fbs(&cfg, &DenseVector::zeros(1)).unwrap();
        assert!((xh[0] - 3.0).abs() < 1e-12);
        let again = cfg.step(&xh);
        assert!(again.distance_sq(&xh).sqrt() <= 1e-10 * (1.0 + xh.norm()));

        let objective = |x: f64| 0.5 * (x - 3.0) * (x - 3.0) + mc_penalty(x, 2.0);
        let best = objective(xh[0]);
        for i in -2000..=2000 {
            let z = xh[0] + i as f64 * 1e-3;
            assert!(best <= objective(z) + 1e-15, "grid point {z}");
        }
    }

    #[test]
    fn divergence_is_reported_with_trace() {
        // T = 3·Id is not a valid denoiser; bypass the window by declaring β.
        let fid = denoise_fidelity(&[0.0]);
        let t = Arc::new(crate::denoiser::FnDenoiser::new("3x", 0.5, |x| {
            x.scaled(3.0)
        }));
        let cfg = FbsConfig::new(0.5, t, fid, RunOptions::default()).unwrap();
        match run_fbs(&cfg, &DenseVector::new(vec![1.0]).unwrap()) {
            Err(Error::Divergence { iteration, trace }) => {
                assert!(iteration > 10);
                assert_eq!(trace.stop_reason, StopReason::Diverged);
            }
            other => panic!("expected divergence, got {:?}", other.map(|r| r.0)),
        }
    }
}
