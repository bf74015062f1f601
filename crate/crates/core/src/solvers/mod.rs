//! Iterative schemes that use a denoiser in place of a proximity operator.

mod condat_vu;
mod fbs;
mod primal_dual;

pub use condat_vu::{
    l1_dual_prox, run_condat_vu_form2, run_pd_heuristic, CondatVu, HeuristicConfig, TauMode,
};
pub use fbs::{run_fbs, validate_fbs_window, FbsConfig};
pub use primal_dual::{derive_pd_params, run_pd_molgrad, PdConfig, PrimalDualMolGrad};

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DenseVector, LinearMap, QuadraticFidelity};
use crate::regularizers::Penalty;

/// Iterates with a norm above this are treated as divergent.
pub const DIVERGENCE_NORM: f64 = 1e12;

/// Iteration limits and what to record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub max_iter: usize,
    /// Relative fixed-point residual threshold; `0` disables early exit.
    pub stop_tol: f64,
    /// Store a full iterate every `snapshot_stride` iterations (`0`: never).
    pub snapshot_stride: usize,
    /// Evaluate the objective every `objective_stride` iterations (`0`: never).
    pub objective_stride: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            stop_tol: 1e-10,
            snapshot_stride: 10,
            objective_stride: 1,
        }
    }
}

impl RunOptions {
    /// Fixed iteration count with no early exit and no objective tracking.
    pub fn fixed(iters: usize) -> Self {
        Self {
            max_iter: iters,
            stop_tol: 0.0,
            snapshot_stride: 0,
            objective_stride: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    MaxIter,
    Diverged,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    /// `|z_{k+1} - z_k|` over all iterated variables.
    pub residual: f64,
    pub objective: Option<f64>,
    pub discrepancy: Option<f64>,
    /// Seconds since the run started.
    pub elapsed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub records: Vec<IterRecord>,
    /// `(iteration, x_{iteration+1})` every `snapshot_stride` steps.
    pub snapshots: Vec<(usize, DenseVector)>,
    pub stop_reason: StopReason,
}

impl SolverTrace {
    fn new() -> Self {
        Self {
            records: Vec::new(),
            snapshots: Vec::new(),
            stop_reason: StopReason::MaxIter,
        }
    }

    /// Number of iterations performed.
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.records.last().map(|r| r.residual)
    }

    /// Attaches a per-iteration discrepancy against a reference run.
    pub fn attach_discrepancy(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.records.len() {
            return Err(Error::DimensionMismatch {
                expected: self.records.len(),
                found: values.len(),
            });
        }
        for (r, &d) in self.records.iter_mut().zip(values) {
            r.discrepancy = Some(d);
        }
        Ok(())
    }

    /// Same iterates, residuals, and objectives; wall-times are ignored.
    pub fn same_path(&self, other: &SolverTrace) -> bool {
        self.stop_reason == other.stop_reason
            && self.snapshots == other.snapshots
            && self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                a.iter == b.iter
                    && a.residual.to_bits() == b.residual.to_bits()
                    && a.objective.map(f64::to_bits) == b.objective.map(f64::to_bits)
                    && a.discrepancy.map(f64::to_bits) == b.discrepancy.map(f64::to_bits)
            })
    }

    /// `iter,residual,objective,discrepancy`; missing values are empty cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,residual,objective,discrepancy\n");
        let cell = |v: Option<f64>| v.map(crate::csvio::format_f64).unwrap_or_default();
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.iter,
                crate::csvio::format_f64(r.residual),
                cell(r.objective),
                cell(r.discrepancy)
            );
        }
        out
    }
}

/// Shared bookkeeping for the iteration loops.
pub(crate) struct Recorder {
    opts: RunOptions,
    start: Instant,
    trace: SolverTrace,
}

impl Recorder {
    pub(crate) fn new(opts: RunOptions) -> Self {
        Self {
            opts,
            start: Instant::now(),
            trace: SolverTrace::new(),
        }
    }

    pub(crate) fn wants_objective(&self, k: usize) -> bool {
        self.opts.objective_stride > 0 && k.is_multiple_of(self.opts.objective_stride)
    }

    /// Records step `k` and reports whether the run should stop.
    pub(crate) fn record(
        &mut self,
        k: usize,
        residual: f64,
        scale: f64,
        objective: Option<f64>,
        x_next: &DenseVector,
    ) -> bool {
        self.trace.records.push(IterRecord {
            iter: k,
            residual,
            objective,
            discrepancy: None,
            elapsed: self.start.elapsed().as_secs_f64(),
        });
        if self.opts.snapshot_stride > 0 && k.is_multiple_of(self.opts.snapshot_stride) {
            self.trace.snapshots.push((k, x_next.clone()));
        }
        if self.opts.stop_tol > 0.0 && residual <= self.opts.stop_tol * (1.0 + scale) {
            self.trace.stop_reason = StopReason::Converged;
            return true;
        }
        false
    }

    pub(crate) fn diverged(mut self, k: usize) -> Error {
        self.trace.stop_reason = StopReason::Diverged;
        Error::Divergence {
            iteration: k,
            trace: Box::new(self.trace),
        }
    }

    pub(crate) fn finish(self) -> SolverTrace {
        self.trace
    }
}

pub(crate) fn is_runaway(v: &DenseVector) -> bool {
    !v.is_finite() || v.max_abs() > DIVERGENCE_NORM
}

/// `f(x) + weight · φ(L x)`.
pub fn implicit_objective(
    x: &DenseVector,
    fidelity: &QuadraticFidelity,
    l: &LinearMap,
    penalty: &Penalty,
    weight: f64,
) -> Result<f64> {
    let f = fidelity.value(x)?;
    if weight == 0.0 {
        return Ok(f);
    }
    let lx = l.apply(x)?;
    Ok(f + weight * penalty.value(lx.as_slice()).as_f64())
}
