//! Brute-force ground truth: grid scans refined by golden-section search.
//!
//! These routines know nothing about the closed-form shrinkage operators;
//! they only evaluate penalties pointwise.

use super::Penalty;
use crate::error::{Error, Result};
use crate::linalg::DenseVector;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Coarse grid plus golden-section refinement over an interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchSpec {
    /// Interval bounds; `None` picks a default around the query point.
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub coarse_steps: usize,
    /// Refinement stops when the bracket shrinks to this fraction of its
    /// initial width (two coarse cells).
    pub refine_tol: f64,
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self {
            lo: None,
            hi: None,
            coarse_steps: 4001,
            refine_tol: 1e-8,
        }
    }
}

impl SearchSpec {
    pub fn with_interval(lo: f64, hi: f64) -> Self {
        Self {
            lo: Some(lo),
            hi: Some(hi),
            ..Self::default()
        }
    }

    pub fn with_coarse_steps(mut self, steps: usize) -> Self {
        self.coarse_steps = steps;
        self
    }
}

/// Outcome of [`minimize_scalar`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarMin {
    pub argmin: f64,
    pub value: f64,
    /// The coarse minimum sat on the first or last grid point.
    pub at_boundary: bool,
}

/// Minimizes `f` over `[lo, hi]`: best point of a uniform grid, then
/// golden-section search on the two cells around it. Exact for unimodal
/// `f`; `+inf` values are allowed and simply never win.
pub fn minimize_scalar(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    coarse_steps: usize,
    refine_tol: f64,
) -> ScalarMin {
    let steps = coarse_steps.max(3);
    let h = (hi - lo) / (steps - 1) as f64;
    let grid = |i: usize| {
        if i == steps - 1 {
            hi
        } else {
            lo + h * i as f64
        }
    };

    let (mut best_i, mut best_v) = (0, f64::INFINITY);
    for i in 0..steps {
        let v = f(grid(i));
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let at_boundary = best_i == 0 || best_i == steps - 1;

    let mut a = grid(best_i.saturating_sub(1));
    let mut b = grid((best_i + 1).min(steps - 1));
    let stop = refine_tol * (b - a);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > stop {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let fm = f(mid);
    let (argmin, value) = [(mid, fm), (c, fc), (d, fd), (grid(best_i), best_v)]
        .into_iter()
        .fold(
            (f64::NAN, f64::INFINITY),
            |acc, p| if p.1 < acc.1 { p } else { acc },
        );
    ScalarMin {
        argmin,
        value,
        at_boundary,
    }
}

fn default_prox_interval(xnorm: f64, gamma: f64) -> (f64, f64) {
    (-xnorm - 10.0 * gamma, xnorm + 10.0 * gamma)
}

fn check_sprox_pre(penalty: &Penalty, gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    if gamma * penalty.weak_convexity() >= 1.0 {
        return Err(Error::Precondition(format!(
            "gamma * weak_convexity = {} >= 1; the s-prox of {} need not be unique",
            gamma * penalty.weak_convexity(),
            penalty.name()
        )));
    }
    Ok(())
}

/// The minimizer of `γ φ(y) + ½(x - y)^2` over the reals, by brute force.
pub fn sprox_oracle_1d(penalty: &Penalty, x: f64, gamma: f64, spec: &SearchSpec) -> Result<f64> {
    check_sprox_pre(penalty, gamma)?;
    let (dlo, dhi) = default_prox_interval(x.abs(), gamma);
    let (lo, hi) = (spec.lo.unwrap_or(dlo), spec.hi.unwrap_or(dhi));
    let objective = |y: f64| gamma * penalty.value_scalar(y).as_f64() + 0.5 * (x - y) * (x - y);
    let m = minimize_scalar(objective, lo, hi, spec.coarse_steps, spec.refine_tol);
    if !m.value.is_finite() {
        return Err(Error::Precondition(format!(
            "{} is +inf on the whole search interval",
            penalty.name()
        )));
    }
    Ok(m.argmin)
}

/// Grid used by [`sprox_oracle_nd`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub points_per_axis: usize,
    /// Number of zoom-in passes after the coarse grid.
    pub zoom_rounds: usize,
    /// Half-width of the initial box around the origin; `None` uses
    /// `|x| + 10γ`.
    pub half_width: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points_per_axis: 400,
            zoom_rounds: 40,
            half_width: None,
        }
    }
}

/// Brute-force s-prox in one or two dimensions.
pub fn sprox_oracle_nd(
    penalty: &Penalty,
    x: &DenseVector,
    gamma: f64,
    grid: &GridSpec,
) -> Result<DenseVector> {
    match x.len() {
        1 => DenseVector::new(vec![sprox_oracle_1d(
            penalty,
            x[0],
            gamma,
            &SearchSpec::default(),
        )?]),
        2 => sprox_oracle_2d(penalty, x, gamma, grid),
        k => Err(Error::Unsupported(format!(
            "brute-force s-prox is limited to k <= 2 dimensions, got {k}"
        ))),
    }
}

fn sprox_oracle_2d(
    penalty: &Penalty,
    x: &DenseVector,
    gamma: f64,
    grid: &GridSpec,
) -> Result<DenseVector> {
    check_sprox_pre(penalty, gamma)?;
    let (x0, x1) = (x[0], x[1]);
    let objective = |y0: f64, y1: f64| {
        gamma * penalty.value(&[y0, y1]).as_f64()
            + 0.5 * ((x0 - y0) * (x0 - y0) + (x1 - y1) * (x1 - y1))
    };
    let r = grid.half_width.unwrap_or(x.norm() + 10.0 * gamma);
    let scan = |c0: f64, c1: f64, half: f64, pts: usize| {
        let h = 2.0 * half / (pts - 1) as f64;
        let mut best = (c0, c1, f64::INFINITY);
        for i in 0..pts {
            let y0 = c0 - half + h * i as f64;
            for j in 0..pts {
                let y1 = c1 - half + h * j as f64;
                let v = objective(y0, y1);
                if v < best.2 {
                    best = (y0, y1, v);
                }
            }
        }
        (best, h)
    };
    let pts = grid.points_per_axis.max(3);
    let ((mut b0, mut b1, mut bv), mut h) = scan(0.0, 0.0, r, pts);
    for _ in 0..grid.zoom_rounds {
        if h < 1e-13 {
            break;
        }
        let ((z0, z1, zv), zh) = scan(b0, b1, 3.0 * h, 41);
        if zv <= bv {
            (b0, b1, bv) = (z0, z1, zv);
        }
        h = zh;
    }
    if !bv.is_finite() {
        return Err(Error::Precondition(format!(
            "{} is +inf on the whole search box",
            penalty.name()
        )));
    }
    DenseVector::new(vec![b0, b1])
}

/// `sup_y u·y - φ(y)` by grid search, for a convex `φ`.
///
/// When the maximizer keeps landing on the interval boundary the interval
/// is widened; after five widenings the supremum is reported as unbounded.
pub fn convex_conjugate_1d(penalty: &Penalty, u: f64, spec: &SearchSpec) -> Result<f64> {
    let (mut lo, mut hi) = match (spec.lo, spec.hi) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => {
            let r = 10.0 * (1.0 + u.abs());
            (-r, r)
        }
    };
    let neg = |y: f64| penalty.value_scalar(y).as_f64() - u * y;
    for _ in 0..6 {
        let m = minimize_scalar(neg, lo, hi, spec.coarse_steps, spec.refine_tol);
        if !m.at_boundary && m.value.is_finite() {
            return Ok(-m.value);
        }
        let (c, w) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        lo = c - 4.0 * w;
        hi = c + 4.0 * w;
    }
    Err(Error::UnboundedSup)
}

/// Classical prox of `β φ*` at `x`, with `φ*` itself computed by
/// [`convex_conjugate_1d`]. Points where the conjugate is unbounded count
/// as `+inf`.
pub fn prox_of_scaled_conjugate_1d(
    penalty: &Penalty,
    beta: f64,
    x: f64,
    outer: &SearchSpec,
    inner: &SearchSpec,
) -> Result<f64> {
    let (dlo, dhi) = default_prox_interval(x.abs(), 1.0);
    let (lo, hi) = (outer.lo.unwrap_or(dlo), outer.hi.unwrap_or(dhi));
    let objective = |y: f64| {
        let conj = convex_conjugate_1d(penalty, y, inner).unwrap_or(f64::INFINITY);
        beta * conj + 0.5 * (x - y) * (x - y)
    };
    let m = minimize_scalar(objective, lo, hi, outer.coarse_steps, outer.refine_tol);
    if !m.value.is_finite() {
        return Err(Error::UnboundedSup);
    }
    Ok(m.argmin)
}
