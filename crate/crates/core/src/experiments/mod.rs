//! Synthetic piecewise-constant recovery problems and the comparison studies
//! run on them.

mod studies;
mod sweep;

pub use studies::{
    run_agreement_experiment, run_disagreement_experiment, AgreementConfig, AgreementResult,
    DisagreementConfig, DisagreementResult, DiscrepancyCurves,
};
pub use sweep::{run_sweep, SweepConfig, SweepOutcome, SweepResult};

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{difference_operator, DenseVector, LinearMap, Matrix, QuadraticFidelity};

/// Draws of `A` rejected for a singular Gram matrix before giving up.
const MAX_DRAW_ATTEMPTS: u64 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub n_pieces: usize,
    pub level_lo: f64,
    pub level_hi: f64,
}

impl Default for SignalSpec {
    fn default() -> Self {
        Self {
            n_pieces: 8,
            level_lo: -2.0,
            level_hi: 2.0,
        }
    }
}

/// Standard deviation of the additive Gaussian noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum NoiseLevel {
    /// `factor · |A x_true| / sqrt(m)`
    Relative(f64),
    Absolute(f64),
}

impl Default for NoiseLevel {
    fn default() -> Self {
        NoiseLevel::Relative(0.1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub n: usize,
    pub m: usize,
    pub noise: NoiseLevel,
    pub signal: SignalSpec,
    pub seed: u64,
}

impl ProblemSpec {
    pub fn desk(seed: u64) -> Self {
        Self {
            n: 64,
            m: 256,
            noise: NoiseLevel::default(),
            signal: SignalSpec::default(),
            seed,
        }
    }

    pub fn paper_scale(seed: u64) -> Self {
        Self {
            n: 256,
            m: 1024,
            ..Self::desk(seed)
        }
    }
}

/// `n_pieces` contiguous constant segments with breakpoints and levels drawn
/// from a generator seeded with `seed`.
pub fn generate_piecewise_signal(
    n: usize,
    n_pieces: usize,
    level_range: (f64, f64),
    seed: u64,
) -> Result<DenseVector> {
    if n_pieces == 0 || n_pieces > n {
        return Err(Error::InvalidInput(format!(
            "need 1 <= n_pieces <= n, got n_pieces={n_pieces}, n={n}"
        )));
    }
    let (lo, hi) = level_range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidInput(format!(
            "invalid level range [{lo}, {hi}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // breakpoints are segment starts in 1..n
    let mut starts: Vec<usize> = sample(&mut rng, n - 1, n_pieces - 1)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    starts.sort_unstable();
    starts.push(n);
    let mut out = Vec::with_capacity(n);
    let mut begin = 0;
    for end in starts {
        let level = rng.random_range(lo..hi);
        out.extend(std::iter::repeat_n(level, end - begin));
        begin = end;
    }
    DenseVector::new(out)
}

/// `y = A x_true + ε` with `A_ij ~ N(0, 1/m)`.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub spec: ProblemSpec,
    pub x_true: DenseVector,
    pub a: Matrix,
    pub noise_std: f64,
    pub y: DenseVector,
    /// Index of the accepted draw of `A` (non-zero after a degenerate draw).
    pub attempt: u64,
    fidelity: Arc<QuadraticFidelity>,
    d: LinearMap,
}

impl ProblemInstance {
    /// Least-squares fidelity with `κ` computed relative to `D`.
    pub fn fidelity(&self) -> Arc<QuadraticFidelity> {
        Arc::clone(&self.fidelity)
    }

    /// First-difference operator on `R^n`.
    pub fn difference(&self) -> &LinearMap {
        &self.d
    }
}

pub fn generate_problem(spec: &ProblemSpec) -> Result<ProblemInstance> {
    let ProblemSpec {
        n,
        m,
        noise,
        signal,
        seed,
    } = *spec;
    if m < n {
        return Err(Error::InvalidInput(format!(
            "overdetermined case required: m={m} < n={n}"
        )));
    }
    let x_true =
        generate_piecewise_signal(n, signal.n_pieces, (signal.level_lo, signal.level_hi), seed)?;
    let d = difference_operator(n)?;
    let scale = 1.0 / (m as f64).sqrt();
    let mut last_err = None;
    for attempt in 0..MAX_DRAW_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1 + attempt);
        let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
        let data: Vec<f64> = (0..m * n)
            .map(|_| scale * std_normal.sample(&mut rng))
            .collect();
        let a = Matrix::new(m, n, data)?;
        let clean = a.mul_vec(&x_true)?;
        let noise_std = match noise {
            NoiseLevel::Relative(f) => f * clean.norm() * scale,
            NoiseLevel::Absolute(s) => s,
        };
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "invalid noise level {noise_std}"
            )));
        }
        let y = if noise_std == 0.0 {
            clean
        } else {
            let eps = Normal::new(0.0, noise_std).expect("finite positive std");
            let noisy: Vec<f64> = clean.iter().map(|v| v + eps.sample(&mut rng)).collect();
            DenseVector::new(noisy)?
        };
        match QuadraticFidelity::with_companion(a.clone(), y.clone(), &d) {
            Ok(fid) => {
                return Ok(ProblemInstance {
                    spec: *spec,
                    x_true,
                    a,
                    noise_std,
                    y,
                    attempt,
                    fidelity: Arc::new(fid),
                    d,
                })
            }
            Err(e @ Error::OverdeterminedRequired(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

fn ratio(num: f64, den: f64) -> Result<f64> {
    if den > 0.0 {
        Ok(num / den)
    } else if num == 0.0 {
        Ok(0.0)
    } else {
        Err(Error::InvalidInput(
            "discrepancy denominator is zero but numerator is not".into(),
        ))
    }
}

/// `(|x - x̃|^2 + |u - ũ|^2) / (|x|^2 + |u|^2)`, with `0/0 = 0`.
pub fn discrepancy(
    x: &DenseVector,
    x_ref: &DenseVector,
    u: &DenseVector,
    u_ref: &DenseVector,
) -> Result<f64> {
    x.check_len(x_ref.len())?;
    u.check_len(u_ref.len())?;
    ratio(
        x.distance_sq(x_ref) + u.distance_sq(u_ref),
        x.norm_sq() + u.norm_sq(),
    )
}

/// `|x - x̃|^2 / |x|^2`, with `0/0 = 0`.
pub fn relative_sq_error(x: &DenseVector, x_ref: &DenseVector) -> Result<f64> {
    x.check_len(x_ref.len())?;
    ratio(x.distance_sq(x_ref), x.norm_sq())
}

/// `|x_true - x|^2 / |x_true|^2`
pub fn system_mismatch(x_true: &DenseVector, x: &DenseVector) -> Result<f64> {
    x.check_len(x_true.len())?;
    let den = x_true.norm_sq();
    if den == 0.0 {
        return Err(Error::InvalidInput(
            "system mismatch needs a nonzero reference".into(),
        ));
    }
    Ok(x_true.distance_sq(x) / den)
}

/// `{experiment}-{branch}-{seed}.csv`
pub fn curve_file_name(experiment: &str, branch: &str, seed: u64) -> String {
    format!("{experiment}-{branch}-{seed}.csv")
}

/// Writes a two-column curve (`key`, `value`) and returns its path.
pub fn write_curve(
    dir: &Path,
    experiment: &str,
    branch: &str,
    seed: u64,
    key: (&str, &[f64]),
    value: (&str, &[f64]),
) -> Result<PathBuf> {
    let text = crate::csvio::curves_to_csv(&[key.0, value.0], &[key.1, value.1])?;
    let path = dir.join(curve_file_name(experiment, branch, seed));
    fs::write(&path, text)?;
    Ok(path)
}
