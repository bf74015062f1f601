//! Sampled checks of the MoL-Grad conditions: Lipschitz bound, monotonicity,
//! cocoercivity, symmetric Jacobian.
//!
//! All checks draw their sample pairs from a seeded ChaCha8 stream, so a
//! given `(seed, n_pairs)` always inspects the same points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Denoiser;
use crate::error::{Error, Result};
use crate::linalg::DenseVector;

/// Absolute slack, scaled by `|x - y|^2`, below which an inequality
/// violation is treated as rounding noise.
pub const VIOLATION_SLACK: f64 = 1e-10;

/// Per-coordinate offset magnitude of the near-coincident pairs lies in
/// `[NEAR_PAIR_OFFSET/2, NEAR_PAIR_OFFSET]`.
const NEAR_PAIR_OFFSET: f64 = 1e-4;

/// The cube `[lo, hi]^dim`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lo: f64,
    pub hi: f64,
    pub dim: usize,
}

impl DomainBox {
    pub fn new(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi || dim == 0 {
            return Err(Error::InvalidInput(format!(
                "degenerate domain box [{lo}, {hi}]^{dim}"
            )));
        }
        Ok(Self { lo, hi, dim })
    }
}

/// Sample pairs: even indices are independent uniform pairs, odd indices
/// are a uniform point and a neighbour within `1e-4` per coordinate.
fn sample_pairs(domain: &DomainBox, n_pairs: usize, seed: u64) -> Vec<(DenseVector, DenseVector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uniform = |rng: &mut ChaCha8Rng| {
        DenseVector::from_fn(domain.dim, |_| rng.random_range(domain.lo..domain.hi))
    };
    (0..n_pairs)
        .map(|k| {
            let x = uniform(&mut rng);
            let y = if k % 2 == 0 {
                uniform(&mut rng)
            } else {
                let off = DenseVector::from_fn(domain.dim, |_| {
                    let m = rng.random_range(0.5 * NEAR_PAIR_OFFSET..=NEAR_PAIR_OFFSET);
                    if rng.random::<bool>() {
                        m
                    } else {
                        -m
                    }
                });
                &x + &off
            };
            (x, y)
        })
        .filter(|(x, y)| x != y)
        .collect()
}

fn check_pairs(n_pairs: usize) -> Result<()> {
    if n_pairs == 0 {
        return Err(Error::InvalidInput("need at least one sample pair".into()));
    }
    Ok(())
}

/// Largest observed `|T(x) - T(y)| / |x - y|`, a lower bound on the true
/// Lipschitz constant.
pub fn estimate_lipschitz(
    t: &dyn Denoiser,
    domain: &DomainBox,
    n_pairs: usize,
    seed: u64,
) -> Result<f64> {
    check_pairs(n_pairs)?;
    Ok(sample_pairs(domain, n_pairs, seed)
        .iter()
        .map(|(x, y)| {
            let dt = &t.apply(x) - &t.apply(y);
            (dt.norm_sq() / x.distance_sq(y)).sqrt()
        })
        .fold(0.0, f64::max))
}

/// Violations of a pairwise inequality `margin(x, y) >= 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub pairs_checked: usize,
    pub violations: usize,
    /// Smallest `margin / |x - y|^2` seen (negative when violated).
    pub worst_margin: f64,
}

fn count_violations(
    pairs: &[(DenseVector, DenseVector)],
    margin: impl Fn(&DenseVector, &DenseVector) -> f64,
) -> ViolationReport {
    let mut report = ViolationReport {
        pairs_checked: pairs.len(),
        violations: 0,
        worst_margin: f64::INFINITY,
    };
    for (x, y) in pairs {
        let scaled = margin(x, y) / x.distance_sq(y);
        if scaled < -VIOLATION_SLACK {
            report.violations += 1;
        }
        report.worst_margin = report.worst_margin.min(scaled);
    }
    report
}

/// `<x - y, T(x) - T(y)> >= 0`
pub fn check_monotonicity(
    t: &dyn Denoiser,
    domain: &DomainBox,
    n_pairs: usize,
    seed: u64,
) -> Result<ViolationReport> {
    check_pairs(n_pairs)?;
    let pairs = sample_pairs(domain, n_pairs, seed);
    Ok(count_violations(&pairs, |x, y| {
        (x - y).dot(&(&t.apply(x) - &t.apply(y)))
    }))
}

/// `<βT(x) - βT(y), x - y> >= |βT(x) - βT(y)|^2`
pub fn check_cocoercivity(
    t: &dyn Denoiser,
    beta: f64,
    domain: &DomainBox,
    n_pairs: usize,
    seed: u64,
) -> Result<ViolationReport> {
    check_pairs(n_pairs)?;
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "beta must be in (0,1], got {beta}"
        )));
    }
    let pairs = sample_pairs(domain, n_pairs, seed);
    Ok(count_violations(&pairs, |x, y| {
        let d = (&t.apply(x) - &t.apply(y)).scaled(beta);
        d.dot(&(x - y)) - d.norm_sq()
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragednessCheck {
    pub passed: bool,
    pub report: ViolationReport,
}

/// Firm nonexpansiveness of `S = T ∘ (β Id)`, which is equivalent to
/// `β`-cocoercivity of `T` for gradient operators.
pub fn averagedness_relation_check(
    t: &dyn Denoiser,
    beta: f64,
    domain: &DomainBox,
    n_pairs: usize,
    seed: u64,
) -> Result<AveragednessCheck> {
    check_pairs(n_pairs)?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "beta must be in (0,1), got {beta}"
        )));
    }
    let pairs = sample_pairs(domain, n_pairs, seed);
    let s = |x: &DenseVector| t.apply(&x.scaled(beta));
    let report = count_violations(&pairs, |x, y| {
        let d = &s(x) - &s(y);
        d.dot(&(x - y)) - d.norm_sq()
    });
    Ok(AveragednessCheck {
        passed: report.violations == 0,
        report,
    })
}

/// Worst `|J - J^T|_F / (1 + |J|_F)` over `probes`, with `J` the
/// forward-difference Jacobian.
pub fn check_jacobian_symmetry(t: &dyn Denoiser, probes: &[DenseVector], fd_step: f64) -> f64 {
    probes
        .iter()
        .map(|x| {
            let n = x.len();
            let tx = t.apply(x);
            let mut jac = vec![0.0; n * n];
            for j in 0..n {
                let xp = DenseVector::from_fn(n, |i| if i == j { x[i] + fd_step } else { x[i] });
                let col = &t.apply(&xp) - &tx;
                for i in 0..n {
                    jac[i * n + j] = col[i] / fd_step;
                }
            }
            let mut asym = 0.0;
            let mut fro = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let d = jac[i * n + j] - jac[j * n + i];
                    asym += d * d;
                    fro += jac[i * n + j] * jac[i * n + j];
                }
            }
            asym.sqrt() / (1.0 + fro.sqrt())
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub name: String,
    pub beta: f64,
    pub lipschitz_estimate: f64,
    pub monotone_violations: usize,
    pub monotone_worst_margin: f64,
    pub cocoercive_violations: usize,
    pub cocoercive_worst_margin: f64,
    pub jacobian_asymmetry: f64,
    pub samples_used: usize,
    pub verdict: Verdict,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub domain: DomainBox,
    pub n_pairs: usize,
    pub seed: u64,
    /// Relative slack on the `1/β` Lipschitz bound.
    pub lipschitz_slack: f64,
    pub jacobian_probes: usize,
    pub fd_step: f64,
}

impl CertifyOptions {
    pub fn new(domain: DomainBox) -> Self {
        Self {
            domain,
            n_pairs: 10_000,
            seed: 0,
            lipschitz_slack: 1e-6,
            jacobian_probes: 20,
            fd_step: 1e-7,
        }
    }
}

/// Runs every sampled check against the denoiser's declared `β`.
pub fn certify(t: &dyn Denoiser, opts: &CertifyOptions) -> Result<CertificationReport> {
    let beta = t.beta();
    let lipschitz_estimate = estimate_lipschitz(t, &opts.domain, opts.n_pairs, opts.seed)?;
    let mono = check_monotonicity(t, &opts.domain, opts.n_pairs, opts.seed)?;
    let coco = check_cocoercivity(t, beta.min(1.0), &opts.domain, opts.n_pairs, opts.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15);
    let probes: Vec<DenseVector> = (0..opts.jacobian_probes)
        .map(|_| {
            DenseVector::from_fn(opts.domain.dim, |_| {
                rng.random_range(opts.domain.lo..opts.domain.hi)
            })
        })
        .collect();
    let jacobian_asymmetry = check_jacobian_symmetry(t, &probes, opts.fd_step);
    let pass = mono.violations == 0
        && coco.violations == 0
        && lipschitz_estimate <= (1.0 / beta) * (1.0 + opts.lipschitz_slack);
    Ok(CertificationReport {
        name: t.name().to_string(),
        beta,
        lipschitz_estimate,
        monotone_violations: mono.violations,
        monotone_worst_margin: mono.worst_margin,
        cocoercive_violations: coco.violations,
        cocoercive_worst_margin: coco.worst_margin,
        jacobian_asymmetry,
        samples_used: mono.pairs_checked,
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
    })
}
