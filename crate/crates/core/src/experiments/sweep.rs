use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_problem, system_mismatch, ProblemInstance, ProblemSpec};
use crate::denoiser::FirmShrinkage;
use crate::error::{Error, Result};
use crate::linalg::{norm_sq_upper_bound, DenseVector};
use crate::regularizers::FirmParams;
use crate::solvers::{l1_dual_prox, run_condat_vu_form2, run_pd_molgrad, PdConfig, RunOptions};

/// Terminal system mismatch per trial and grid value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub grid: Vec<f64>,
    /// `per_trial[t][j]` for trial `t` and grid value `j`.
    pub per_trial: Vec<Vec<f64>>,
    /// Arithmetic mean over trials, summed in trial order.
    pub mean: Vec<f64>,
}

impl SweepResult {
    fn from_rows(grid: Vec<f64>, per_trial: Vec<Vec<f64>>) -> Self {
        let mut sum = vec![0.0; grid.len()];
        for row in &per_trial {
            sum.iter_mut().zip(row).for_each(|(s, v)| *s += v);
        }
        let n = per_trial.len() as f64;
        let mean = sum.into_iter().map(|s| s / n).collect();
        Self {
            grid,
            per_trial,
            mean,
        }
    }

    pub fn n_trials(&self) -> usize {
        self.per_trial.len()
    }

    /// Grid value with the smallest mean mismatch, and that mean.
    pub fn best(&self) -> (f64, f64) {
        self.grid
            .iter()
            .zip(&self.mean)
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(&g, &m)| (g, m))
            .expect("grid is nonempty")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Problem shape; trial `t` uses seed `problem.seed ^ t`.
    pub problem: ProblemSpec,
    pub n_trials: usize,
    /// Firm branch: `λ2` values, with `λ1 = firm_ratio · λ2` and `δ = 1`.
    pub lambda2_grid: Vec<f64>,
    pub firm_ratio: f64,
    /// ℓ1 branch: `μ` in `μ f + |D·|_1`.
    pub mu_grid: Vec<f64>,
    pub gamma: f64,
    /// Dual step of the ℓ1 branch.
    pub l1_sigma: f64,
    pub max_iter: usize,
    pub stop_tol: f64,
}

fn geometric(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let step = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| lo * (step * i as f64).exp()).collect()
}

impl SweepConfig {
    pub fn desk(seed: u64) -> Self {
        Self {
            problem: ProblemSpec::desk(seed),
            n_trials: 30,
            lambda2_grid: geometric(0.25, 64.0, 17),
            firm_ratio: 0.5,
            mu_grid: geometric(0.5, 128.0, 17),
            gamma: 0.9,
            l1_sigma: 0.2,
            max_iter: 5_000,
            stop_tol: 1e-9,
        }
    }

    fn options(&self) -> RunOptions {
        RunOptions {
            max_iter: self.max_iter,
            stop_tol: self.stop_tol,
            snapshot_stride: 0,
            objective_stride: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::InvalidInput("n_trials must be at least 1".into()));
        }
        for (name, grid) in [("lambda2", &self.lambda2_grid), ("mu", &self.mu_grid)] {
            if grid.is_empty() {
                return Err(Error::InvalidInput(format!("{name} grid is empty")));
            }
            if grid.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
                return Err(Error::InvalidInput(format!("{name} grid must be positive")));
            }
            if grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidInput(format!(
                    "{name} grid must be strictly increasing"
                )));
            }
        }
        if !(self.firm_ratio > 0.0 && self.firm_ratio < 1.0) {
            return Err(Error::InvalidInput(format!(
                "firm_ratio must lie in (0, 1), got {}",
                self.firm_ratio
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub firm: SweepResult,
    pub l1: SweepResult,
}

fn firm_row(p: &ProblemInstance, cfg: &SweepConfig) -> Result<Vec<f64>> {
    let fid = p.fidelity();
    let d = p.difference();
    let x0 = DenseVector::zeros(fid.dim());
    let u0 = DenseVector::zeros(d.output_dim());
    cfg.lambda2_grid
        .iter()
        .map(|&l2| {
            let t = FirmShrinkage::new(FirmParams::new(cfg.firm_ratio * l2, l2)?);
            let pd = PdConfig::derived(
                1.0,
                cfg.gamma,
                d.clone(),
                fid.clone(),
                Arc::new(t),
                cfg.options(),
            )?;
            let (x, _, _) = run_pd_molgrad(&pd, &x0, &u0)?;
            system_mismatch(&p.x_true, &x)
        })
        .collect()
}

fn l1_row(p: &ProblemInstance, cfg: &SweepConfig) -> Result<Vec<f64>> {
    let fid = p.fidelity();
    let d = p.difference();
    let n_sq = norm_sq_upper_bound(d);
    let sigma = cfg.l1_sigma;
    let tau = cfg.gamma / (sigma * n_sq + fid.smoothness / 2.0);
    let x0 = DenseVector::zeros(fid.dim());
    let u0 = DenseVector::zeros(d.output_dim());
    cfg.mu_grid
        .iter()
        .map(|&mu| {
            let (x, _, _) = run_condat_vu_form2(
                d,
                sigma,
                tau,
                |x| fid.gradient_unchecked(x),
                l1_dual_prox(1.0 / mu, sigma),
                &x0,
                &u0,
                cfg.options(),
                None,
            )?;
            system_mismatch(&p.x_true, &x)
        })
        .collect()
}

/// Runs both branches on `n_trials` independent problems in parallel and
/// averages the terminal system mismatch per grid value.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let rows: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|t| {
            let spec = ProblemSpec {
                seed: cfg.problem.seed ^ t as u64,
                ..cfg.problem
            };
            let p = generate_problem(&spec)?;
            Ok((firm_row(&p, cfg)?, l1_row(&p, cfg)?))
        })
        .collect();
    let mut firm = Vec::with_capacity(cfg.n_trials);
    let mut l1 = Vec::with_capacity(cfg.n_trials);
    for (t, row) in rows.into_iter().enumerate() {
        match row {
            Ok((f, l)) => {
                firm.push(f);
                l1.push(l);
            }
            Err(e) => {
                return Err(Error::SweepAborted {
                    completed: t,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(SweepOutcome {
        firm: SweepResult::from_rows(cfg.lambda2_grid.clone(), firm),
        l1: SweepResult::from_rows(cfg.mu_grid.clone(), l1),
    })
}
