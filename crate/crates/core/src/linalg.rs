//! Dense vectors and matrices, structured linear maps, and the spectral
//! constants (operator norms, strong convexity and smoothness moduli) that
//! step-size rules are built from.

use std::ops::{Add, Index, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seed of the starting vector used by every power iteration in the crate.
const POWER_ITERATION_SEED: u64 = 0x6d6f_6c67_7261_6400;

/// A finite-dimensional real vector with finite entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    /// Builds a vector, rejecting empty input and non-finite entries.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput(
                "vector must have positive length".into(),
            ));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vector entries"));
        }
        Ok(Self(entries))
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n > 0, "vector must have positive length");
        Self(vec![0.0; n])
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> f64) -> Self {
        assert!(n > 0, "vector must have positive length");
        Self((0..n).map(f).collect())
    }

    /// Wraps entries produced by internal arithmetic. Callers that can
    /// overflow must check [`DenseVector::is_finite`] themselves.
    pub(crate) fn from_vec_unchecked(entries: Vec<f64>) -> Self {
        debug_assert!(!entries.is_empty());
        Self(entries)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &DenseVector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        let sq = self.norm_sq();
        if sq.is_normal() && sq < f64::MAX {
            return sq.sqrt();
        }
        // rescale against under/overflow
        let m = self.max_abs();
        if m == 0.0 || !m.is_finite() {
            return m;
        }
        m * self.0.iter().map(|v| (v / m) * (v / m)).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, c: f64) -> DenseVector {
        Self(self.0.iter().map(|v| c * v).collect())
    }

    /// `self + c * other`
    pub fn add_scaled(&self, c: f64, other: &DenseVector) -> DenseVector {
        debug_assert_eq!(self.len(), other.len());
        Self(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + c * b)
                .collect(),
        )
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseVector {
        Self(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn distance_sq(&self, other: &DenseVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub(crate) fn check_len(&self, expected: usize) -> Result<()> {
        if self.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.len(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for DenseVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DenseVector> for Vec<f64> {
    fn from(v: DenseVector) -> Self {
        v.0
    }
}

impl Index<usize> for DenseVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for &DenseVector {
    type Output = DenseVector;
    fn add(self, rhs: &DenseVector) -> DenseVector {
        self.add_scaled(1.0, rhs)
    }
}

impl Sub for &DenseVector {
    type Output = DenseVector;
    fn sub(self, rhs: &DenseVector) -> DenseVector {
        self.add_scaled(-1.0, rhs)
    }
}

impl Mul<&DenseVector> for f64 {
    type Output = DenseVector;
    fn mul(self, rhs: &DenseVector) -> DenseVector {
        rhs.scaled(self)
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(
                "matrix dimensions must be positive".into(),
            ));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidInput("ragged matrix rows".into()));
        }
        Self::new(r, c, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0);
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in d.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    fn matvec_t_into(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &ui) in u.iter().enumerate() {
            if ui == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * ui;
            }
        }
    }

    /// `A x`
    pub fn mul_vec(&self, x: &DenseVector) -> Result<DenseVector> {
        x.check_len(self.cols)?;
        let mut out = vec![0.0; self.rows];
        self.matvec_into(x.as_slice(), &mut out);
        Ok(DenseVector::from_vec_unchecked(out))
    }

    /// `A^T u`
    pub fn tr_mul_vec(&self, u: &DenseVector) -> Result<DenseVector> {
        u.check_len(self.rows)?;
        let mut out = vec![0.0; self.cols];
        self.matvec_t_into(u.as_slice(), &mut out);
        Ok(DenseVector::from_vec_unchecked(out))
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `A^T A`, symmetrized exactly.
    pub fn gram(&self) -> Matrix {
        let n = self.cols;
        let mut g = Matrix::zeros(n, n);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..n {
                let ai = row[i];
                if ai == 0.0 {
                    continue;
                }
                for (gij, &aj) in g.data[i * n + i..(i + 1) * n].iter_mut().zip(&row[i..]) {
                    *gij += ai * aj;
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                g.data[i * n + j] = g.data[j * n + i];
            }
        }
        g
    }

    pub fn scaled(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }

    /// `self + c * other`
    pub fn add_scaled(&self, c: f64, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                found: other.rows * other.cols,
            });
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + c * b)
                .collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// Eigenvalues of a symmetric matrix in ascending order.
    pub fn symmetric_eigenvalues(&self) -> Result<Vec<f64>> {
        if self.rows != self.cols {
            return Err(Error::InvalidInput(
                "eigenvalues need a square matrix".into(),
            ));
        }
        let eig = SymmetricEigen::new(self.to_nalgebra());
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        Ok(vals)
    }
}

/// The structural kind of a [`LinearMap`].
#[derive(Clone, Debug)]
pub enum MapKind {
    Dense(Matrix),
    /// `(D x)_i = x_i - x_{i+1}`, mapping `R^n -> R^{n-1}`.
    FirstDifference {
        n: usize,
    },
    /// `outer ∘ inner`
    Composition {
        outer: Box<LinearMap>,
        inner: Box<LinearMap>,
    },
    ScaledIdentity {
        dim: usize,
        scale: f64,
    },
}

/// A bounded linear operator with its adjoint and an optional cached
/// operator-norm value.
#[derive(Clone, Debug)]
pub struct LinearMap {
    kind: MapKind,
    cached_norm: Option<f64>,
}

impl LinearMap {
    pub fn dense(m: Matrix) -> Self {
        Self {
            kind: MapKind::Dense(m),
            cached_norm: None,
        }
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Result<Self> {
        if dim == 0 || !scale.is_finite() {
            return Err(Error::InvalidInput(
                "scaled identity needs dim > 0 and finite scale".into(),
            ));
        }
        Ok(Self {
            kind: MapKind::ScaledIdentity { dim, scale },
            cached_norm: Some(scale.abs()),
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::scaled_identity(dim, 1.0)
    }

    /// `outer ∘ inner`.
    pub fn compose(outer: LinearMap, inner: LinearMap) -> Result<Self> {
        if outer.input_dim() != inner.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: outer.input_dim(),
                found: inner.output_dim(),
            });
        }
        Ok(Self {
            kind: MapKind::Composition {
                outer: Box::new(outer),
                inner: Box::new(inner),
            },
            cached_norm: None,
        })
    }

    pub fn with_cached_norm(mut self, norm: f64) -> Self {
        self.cached_norm = Some(norm);
        self
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn cached_norm(&self) -> Option<f64> {
        self.cached_norm
    }

    pub fn input_dim(&self) -> usize {
        match &self.kind {
            MapKind::Dense(m) => m.cols(),
            MapKind::FirstDifference { n } => *n,
            MapKind::Composition { inner, .. } => inner.input_dim(),
            MapKind::ScaledIdentity { dim, .. } => *dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        match &self.kind {
            MapKind::Dense(m) => m.rows(),
            MapKind::FirstDifference { n } => n - 1,
            MapKind::Composition { outer, .. } => outer.output_dim(),
            MapKind::ScaledIdentity { dim, .. } => *dim,
        }
    }

    /// `L x`
    pub fn apply(&self, x: &DenseVector) -> Result<DenseVector> {
        x.check_len(self.input_dim())?;
        Ok(self.apply_unchecked(x))
    }

    /// `L^T u`
    pub fn adjoint_apply(&self, u: &DenseVector) -> Result<DenseVector> {
        u.check_len(self.output_dim())?;
        Ok(self.adjoint_unchecked(u))
    }

    /// `L^T L x`
    pub fn normal_apply(&self, x: &DenseVector) -> Result<DenseVector> {
        x.check_len(self.input_dim())?;
        Ok(self.adjoint_unchecked(&self.apply_unchecked(x)))
    }

    pub(crate) fn apply_unchecked(&self, x: &DenseVector) -> DenseVector {
        match &self.kind {
            MapKind::Dense(m) => {
                let mut out = vec![0.0; m.rows()];
                m.matvec_into(x.as_slice(), &mut out);
                DenseVector::from_vec_unchecked(out)
            }
            MapKind::FirstDifference { .. } => {
                let out = x.as_slice().windows(2).map(|w| w[0] - w[1]).collect();
                DenseVector::from_vec_unchecked(out)
            }
            MapKind::Composition { outer, inner } => {
                outer.apply_unchecked(&inner.apply_unchecked(x))
            }
            MapKind::ScaledIdentity { scale, .. } => x.scaled(*scale),
        }
    }

    pub(crate) fn adjoint_unchecked(&self, u: &DenseVector) -> DenseVector {
        match &self.kind {
            MapKind::Dense(m) => {
                let mut out = vec![0.0; m.cols()];
                m.matvec_t_into(u.as_slice(), &mut out);
                DenseVector::from_vec_unchecked(out)
            }
            MapKind::FirstDifference { n } => {
                let u = u.as_slice();
                let out = (0..*n)
                    .map(|i| {
                        let head = if i < n - 1 { u[i] } else { 0.0 };
                        let tail = if i > 0 { u[i - 1] } else { 0.0 };
                        head - tail
                    })
                    .collect();
                DenseVector::from_vec_unchecked(out)
            }
            MapKind::Composition { outer, inner } => {
                inner.adjoint_unchecked(&outer.adjoint_unchecked(u))
            }
            MapKind::ScaledIdentity { scale, .. } => u.scaled(*scale),
        }
    }

    /// Materializes the map column by column.
    pub fn to_matrix(&self) -> Matrix {
        let (m, n) = (self.output_dim(), self.input_dim());
        let mut out = Matrix::zeros(m, n);
        for j in 0..n {
            let e = DenseVector::from_fn(n, |i| if i == j { 1.0 } else { 0.0 });
            let col = self.apply_unchecked(&e);
            for i in 0..m {
                out.data[i * n + j] = col[i];
            }
        }
        out
    }
}

/// The `(n-1) x n` first-difference operator.
pub fn difference_operator(n: usize) -> Result<LinearMap> {
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "difference operator needs n >= 2, got {n}"
        )));
    }
    // spectrum of D^T D is {2 - 2 cos(k pi / n) : k = 0..n-1}
    let norm_sq = 2.0 + 2.0 * (std::f64::consts::PI / n as f64).cos();
    Ok(LinearMap {
        kind: MapKind::FirstDifference { n },
        cached_norm: None,
    }
    .with_cached_norm(norm_sq.sqrt()))
}

/// Result of a power iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    /// Relative accuracy the estimate was asked for.
    pub tol: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl NormEstimate {
    /// The estimate inflated by its tolerance; used wherever a condition
    /// needs an upper bound on the true value.
    pub fn upper_bound(&self) -> f64 {
        self.value * (1.0 + self.tol)
    }
}

fn seed_vector(n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_ITERATION_SEED);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    // alternate signs so the seed is far from constant vectors (the null
    // space of the difference operator)
    v.iter_mut()
        .enumerate()
        .filter(|(i, _)| i % 3 == 1)
        .for_each(|(_, x)| *x = -*x);
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= nrm);
    v
}

/// Largest eigenvalue of a symmetric positive semidefinite operator given by
/// `apply`. Stops when the eigen-residual `|Mv - θv|` drops below `tol·θ`.
pub fn psd_largest_eigenvalue(
    n: usize,
    apply: impl Fn(&DenseVector) -> DenseVector,
    tol: f64,
    max_iter: usize,
) -> NormEstimate {
    let mut v = DenseVector::from_vec_unchecked(seed_vector(n));
    let mut theta = 0.0;
    for it in 1..=max_iter {
        let w = apply(&v);
        theta = v.dot(&w);
        let wn = w.norm();
        if wn == 0.0 {
            return NormEstimate {
                value: 0.0,
                tol,
                iterations: it,
                converged: true,
            };
        }
        let residual = w.add_scaled(-theta, &v).norm();
        if residual <= tol * theta.abs() {
            return NormEstimate {
                value: theta,
                tol,
                iterations: it,
                converged: true,
            };
        }
        v = w.scaled(1.0 / wn);
    }
    NormEstimate {
        value: theta,
        tol,
        iterations: max_iter,
        converged: false,
    }
}

/// Spectral norm of `map` by power iteration on `L^T L`.
pub fn operator_norm(map: &LinearMap, tol: f64, max_iter: usize) -> NormEstimate {
    let est = psd_largest_eigenvalue(
        map.input_dim(),
        |v| map.adjoint_unchecked(&map.apply_unchecked(v)),
        tol,
        max_iter,
    );
    NormEstimate {
        value: est.value.max(0.0).sqrt(),
        ..est
    }
}

/// `|L|^2` to use inside step-size formulas: the cached value when present,
/// otherwise the tolerance-inflated power-iteration estimate.
pub fn norm_sq_upper_bound(map: &LinearMap) -> f64 {
    match map.cached_norm() {
        Some(c) => c * c,
        None => {
            let est = operator_norm(map, 1e-10, 100_000);
            est.upper_bound().powi(2)
        }
    }
}

/// Strong convexity of `f` and smoothness of `f̂ = f - (ρ/(2|L|^2))|L·|^2`
/// for the least-squares fidelity `f = ½|Ax - y|^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityConstants {
    /// `λ_min(A^T A)`
    pub rho: f64,
    /// `|A^T A - (ρ/|L|^2) L^T L|`
    pub kappa_fhat: f64,
    /// The `|L|^2` value used above.
    pub l_norm_sq: f64,
}

pub fn fidelity_constants(a: &Matrix, l: &LinearMap) -> Result<FidelityConstants> {
    if l.input_dim() != a.cols() {
        return Err(Error::DimensionMismatch {
            expected: a.cols(),
            found: l.input_dim(),
        });
    }
    let gram = a.gram();
    let rho = smallest_eigenvalue_checked(&gram)?;
    let l_norm_sq = norm_sq_upper_bound(l);
    let kappa_fhat = fhat_smoothness(&gram, l, rho / l_norm_sq);
    Ok(FidelityConstants {
        rho,
        kappa_fhat,
        l_norm_sq,
    })
}

fn smallest_eigenvalue_checked(gram: &Matrix) -> Result<f64> {
    let eig = gram.symmetric_eigenvalues()?;
    let (lo, hi) = (eig[0], *eig.last().unwrap());
    if lo <= 1e-12 * hi.max(f64::MIN_POSITIVE) {
        return Err(Error::OverdeterminedRequired(lo));
    }
    Ok(lo)
}

/// Largest eigenvalue of `G - c L^T L` by power iteration, inflated by its
/// tolerance.
pub(crate) fn fhat_smoothness(gram: &Matrix, l: &LinearMap, c: f64) -> f64 {
    let n = gram.cols();
    let est = psd_largest_eigenvalue(
        n,
        |v| {
            let mut out = vec![0.0; n];
            gram.matvec_into(v.as_slice(), &mut out);
            let ltl = l.adjoint_unchecked(&l.apply_unchecked(v));
            out.iter_mut()
                .zip(ltl.iter())
                .for_each(|(o, t)| *o -= c * t);
            DenseVector::from_vec_unchecked(out)
        },
        1e-12,
        200_000,
    );
    est.upper_bound()
}

/// `f(x) = ½|Ax - y|^2` with cached Gram matrix and spectral constants.
#[derive(Clone, Debug)]
pub struct QuadraticFidelity {
    a: Matrix,
    y: DenseVector,
    gram: Matrix,
    aty: DenseVector,
    /// `λ_min(A^T A)`
    pub rho: f64,
    /// `λ_max(A^T A)`, the Lipschitz constant of the gradient.
    pub smoothness: f64,
    /// Smoothness of `f̂` for the companion map given to
    /// [`QuadraticFidelity::with_companion`].
    pub kappa_fhat: Option<f64>,
}

impl QuadraticFidelity {
    /// Requires `A^T A` to be positive definite.
    pub fn new(a: Matrix, y: DenseVector) -> Result<Self> {
        y.check_len(a.rows())?;
        let gram = a.gram();
        let eig = gram.symmetric_eigenvalues()?;
        let rho = smallest_eigenvalue_checked(&gram)?;
        let smoothness = *eig.last().unwrap();
        let aty = a.tr_mul_vec(&y)?;
        Ok(Self {
            a,
            y,
            gram,
            aty,
            rho,
            smoothness,
            kappa_fhat: None,
        })
    }

    /// Also computes `κ` for `f̂` relative to `l`.
    pub fn with_companion(a: Matrix, y: DenseVector, l: &LinearMap) -> Result<Self> {
        let mut fid = Self::new(a, y)?;
        let l_norm_sq = norm_sq_upper_bound(l);
        fid.kappa_fhat = Some(fhat_smoothness(&fid.gram, l, fid.rho / l_norm_sq));
        Ok(fid)
    }

    pub fn dim(&self) -> usize {
        self.a.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn observation(&self) -> &DenseVector {
        &self.y
    }

    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn value(&self, x: &DenseVector) -> Result<f64> {
        let r = self.a.mul_vec(x)?;
        Ok(0.5 * r.distance_sq(&self.y))
    }

    /// `A^T (A x - y)`, computed as `G x - A^T y`.
    pub fn gradient(&self, x: &DenseVector) -> Result<DenseVector> {
        x.check_len(self.dim())?;
        Ok(self.gradient_unchecked(x))
    }

    pub(crate) fn gradient_unchecked(&self, x: &DenseVector) -> DenseVector {
        let mut out = vec![0.0; self.dim()];
        self.gram.matvec_into(x.as_slice(), &mut out);
        out.iter_mut()
            .zip(self.aty.iter())
            .for_each(|(o, b)| *o -= b);
        DenseVector::from_vec_unchecked(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DenseVector {
        DenseVector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn vector_rejects_nan_and_empty() {
        assert!(DenseVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(DenseVector::new(vec![f64::INFINITY]).is_err());
        assert!(DenseVector::new(vec![]).is_err());
        assert_eq!(v(&[0.0, 0.0]).norm(), 0.0);
        assert!(v(&[0.0, 1e-300]).norm() > 0.0);
    }

    #[test]
    fn first_difference_apply() {
        let d = difference_operator(3).unwrap();
        assert_eq!(d.apply(&v(&[1.0, 3.0, 2.0])).unwrap(), v(&[-2.0, 1.0]));
        let d2 = difference_operator(2).unwrap();
        assert_eq!(d2.apply(&v(&[4.5, 4.5])).unwrap(), v(&[0.0]));
    }

    #[test]
    fn first_difference_adjoint() {
        let d = difference_operator(3).unwrap();
        assert_eq!(
            d.adjoint_apply(&v(&[1.0, 0.0])).unwrap(),
            v(&[1.0, -1.0, 0.0])
        );
    }

    #[test]
    fn first_difference_matrix() {
        let d = difference_operator(3).unwrap().to_matrix();
        let expected = Matrix::from_rows(&[vec![1.0, -1.0, 0.0], vec![0.0, 1.0, -1.0]]).unwrap();
        assert_eq!(d, expected);
    }

    #[test]
    fn difference_needs_two_points() {
        assert!(difference_operator(1).is_err());
        assert!(difference_operator(0).is_err());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let d = difference_operator(4).unwrap();
        assert!(matches!(
            d.apply(&v(&[1.0, 2.0])),
            Err(Error::DimensionMismatch {
                expected: 4,
                found: 2
            })
        ));
        assert!(d.adjoint_apply(&v(&[1.0])).is_err());
    }

    #[test]
    fn identity_and_zero_maps() {
        let x = v(&[1.5, -2.0, 0.25]);
        let id = LinearMap::dense(Matrix::identity(3));
        assert_eq!(id.apply(&x).unwrap(), x);
        assert_eq!(id.adjoint_apply(&x).unwrap(), x);
        let z = LinearMap::dense(Matrix::zeros(2, 3));
        assert_eq!(z.apply(&x).unwrap(), DenseVector::zeros(2));
    }

    #[test]
    fn norm_of_scaled_identity() {
        let m = LinearMap::scaled_identity(5, -2.5).unwrap();
        let est = operator_norm(&m, 1e-12, 100);
        assert!(est.converged);
        assert!((est.value - 2.5).abs() < 1e-12);
    }

    #[test]
    fn norm_of_difference_three() {
        let d = difference_operator(3).unwrap();
        let est = operator_norm(&d, 1e-12, 10_000);
        assert!(est.converged);
        assert!((est.value - 3f64.sqrt()).abs() < 1e-10, "{}", est.value);
        assert!((d.cached_norm().unwrap() - 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn norm_of_diagonal() {
        let m = LinearMap::dense(Matrix::diagonal(&[1.0, 4.0]));
        let est = operator_norm(&m, 1e-12, 1000);
        assert!((est.value - 4.0).abs() < 1e-10);
    }

    #[test]
    fn norm_of_zero_map_is_zero() {
        let m = LinearMap::dense(Matrix::zeros(3, 4));
        let est = operator_norm(&m, 1e-10, 100);
        assert_eq!(est.value, 0.0);
        assert!(est.converged);
    }

    #[test]
    fn norm_flags_non_convergence() {
        let d = difference_operator(200).unwrap();
        let est = operator_norm(&d, 1e-14, 3);
        assert!(!est.converged);
        assert_eq!(est.iterations, 3);
    }

    #[test]
    fn fidelity_constants_identity() {
        let c = fidelity_constants(&Matrix::identity(3), &difference_operator(3).unwrap()).unwrap();
        assert!((c.rho - 1.0).abs() < 1e-12);
        assert!((c.kappa_fhat - 1.0).abs() < 1e-9, "{}", c.kappa_fhat);
        let c2 = fidelity_constants(
            &Matrix::identity(3).scaled(2.0),
            &difference_operator(3).unwrap(),
        )
        .unwrap();
        assert!((c2.rho - 4.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_constants_rejects_rank_deficient() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]]).unwrap();
        let err = fidelity_constants(&a, &difference_operator(2).unwrap()).unwrap_err();
        assert!(matches!(err, Error::OverdeterminedRequired(_)));
        assert!(err.to_string().contains("overdetermined case required"));
    }

    #[test]
    fn composition_dims_and_adjoint() {
        let d = difference_operator(4).unwrap();
        let s = LinearMap::scaled_identity(3, 2.0).unwrap();
        let c = LinearMap::compose(s, d).unwrap();
        assert_eq!((c.input_dim(), c.output_dim()), (4, 3));
        let x = v(&[1.0, 2.0, 4.0, 8.0]);
        assert_eq!(c.apply(&x).unwrap(), v(&[-2.0, -4.0, -8.0]));
        assert!(LinearMap::compose(
            difference_operator(4).unwrap(),
            difference_operator(4).unwrap()
        )
        .is_err());
    }

    #[test]
    fn fidelity_value_and_gradient() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0], vec![1.0, 1.0]]).unwrap();
        let y = v(&[1.0, 0.0, 0.0]);
        let f = QuadraticFidelity::new(a, y).unwrap();
        let x = v(&[1.0, 1.0]);
        // Ax - y = (0, 2, 2)
        assert!((f.value(&x).unwrap() - 4.0).abs() < 1e-14);
        // A^T (0,2,2) = (2, 6)
        assert_eq!(f.gradient(&x).unwrap(), v(&[2.0, 6.0]));
    }
}
