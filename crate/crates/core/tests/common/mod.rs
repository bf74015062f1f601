#![allow(dead_code)]

use molgrad::DenseVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_points(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.random_range(lo..hi)).collect()
}

pub fn random_vector(n: usize, scale: f64, r: &mut ChaCha8Rng) -> DenseVector {
    DenseVector::from_fn(n, |_| r.random_range(-scale..scale))
}

pub fn gaussian_rows(rows: usize, cols: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand_distr::{Distribution, StandardNormal};
    let mut r = rng(seed);
    (0..rows)
        .map(|_| (0..cols).map(|_| StandardNormal.sample(&mut r)).collect())
        .collect()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `AᵀA` from rows.
pub fn gram(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows[0].len();
    let mut g = vec![vec![0.0; n]; n];
    for r in rows {
        for i in 0..n {
            for j in 0..n {
                g[i][j] += r[i] * r[j];
            }
        }
    }
    g
}

/// Central finite-difference gradient.
pub fn fd_gradient(f: impl Fn(&DenseVector) -> f64, x: &DenseVector, h: f64) -> DenseVector {
    DenseVector::from_fn(x.len(), |i| {
        let mut p = x.as_slice().to_vec();
        let mut m = p.clone();
        p[i] += h;
        m[i] -= h;
        let (p, m) = (DenseVector::new(p).unwrap(), DenseVector::new(m).unwrap());
        (f(&p) - f(&m)) / (2.0 * h)
    })
}

pub fn relative_error(a: &DenseVector, b: &DenseVector) -> f64 {
    a.distance_sq(b).sqrt() / b.norm().max(1e-300)
}
