//! Dense linear-algebra helpers shared by kriging and simulation.

use crate::error::{Error, Result};
use crate::models::CovarianceModel;
use crate::data::distance;
use nalgebra::{DMatrix, DVector};

/// Number of times the diagonal jitter is doubled before giving up.
pub const MAX_JITTER_DOUBLINGS: u32 = 6;

/// Relative size of the first jitter level, scaled by `trace/n`.
pub const JITTER_SCALE: f64 = 1e-10;

/// Covariance matrix `[C(|xᵢ − xⱼ|)]` for points stored row-major.
pub fn gram_matrix<M: CovarianceModel + ?Sized>(model: &M, coords: &[f64], dim: usize) -> Result<DMatrix<f64>> {
    let n = coords.len() / dim;
    let mut k = DMatrix::zeros(n, n);
    let c0 = model.total_variance();
    for i in 0..n {
        k[(i, i)] = c0;
        let xi = &coords[i * dim..(i + 1) * dim];
        for j in 0..i {
            let xj = &coords[j * dim..(j + 1) * dim];
            let v = model.covariance(distance(xi, xj))?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Covariances between every row-major point in `coords` and `x0`.
pub fn cross_covariance<M: CovarianceModel + ?Sized>(
    model: &M,
    coords: &[f64],
    dim: usize,
    x0: &[f64],
) -> Result<DVector<f64>> {
    let n = coords.len() / dim;
    let mut c = DVector::zeros(n);
    for i in 0..n {
        c[i] = model.covariance(distance(&coords[i * dim..(i + 1) * dim], x0))?;
    }
    Ok(c)
}

/// Lower Cholesky factor of `K + δI`.
#[derive(Debug, Clone)]
pub struct JitteredCholesky {
    l: DMatrix<f64>,
    delta: f64,
}

impl JitteredCholesky {
    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn into_l(self) -> DMatrix<f64> {
        self.l
    }

    /// Diagonal jitter that was added.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solves `(K + δI) x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let y = self
            .l
            .solve_lower_triangular(b)
            .ok_or_else(|| Error::LinAlg("singular triangular factor".into()))?;
        self.l
            .tr_solve_lower_triangular(&y)
            .ok_or_else(|| Error::LinAlg("singular triangular factor".into()))
    }

    /// Solves `(K + δI) X = B` column by column.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let y = self
            .l
            .solve_lower_triangular(b)
            .ok_or_else(|| Error::LinAlg("singular triangular factor".into()))?;
        self.l
            .tr_solve_lower_triangular(&y)
            .ok_or_else(|| Error::LinAlg("singular triangular factor".into()))
    }
}

/// Cholesky factorisation with escalating diagonal jitter.
///
/// Tries `δ = 0`, then `δ = 1e-10·trace/n·2^k` for `k = 0..=6`.
/// An all-zero matrix yields the zero factor with `δ = 0`.
pub fn cholesky_with_jitter(k: &DMatrix<f64>) -> Result<JitteredCholesky> {
    let n = k.nrows();
    if n != k.ncols() {
        return Err(Error::LinAlg(format!("matrix is {}x{}, not square", n, k.ncols())));
    }
    if n == 0 {
        return Ok(JitteredCholesky {
            l: DMatrix::zeros(0, 0),
            delta: 0.0,
        });
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinAlg("matrix has non-finite entries".into()));
    }
    if k.iter().all(|&v| v == 0.0) {
        return Ok(JitteredCholesky {
            l: DMatrix::zeros(n, n),
            delta: 0.0,
        });
    }
    if let Some(c) = k.clone().cholesky() {
        return Ok(JitteredCholesky {
            l: c.unpack(),
            delta: 0.0,
        });
    }
    let base = JITTER_SCALE * (k.trace() / n as f64).abs().max(f64::MIN_POSITIVE);
    let mut delta = base;
    for _ in 0..=MAX_JITTER_DOUBLINGS {
        let mut kj = k.clone();
        for i in 0..n {
            kj[(i, i)] += delta;
        }
        if let Some(c) = kj.cholesky() {
            return Ok(JitteredCholesky { l: c.unpack(), delta });
        }
        delta *= 2.0;
    }
    Err(Error::LinAlg(format!(
        "matrix of order {n} is not positive semi-definite (jitter up to {:e} failed)",
        delta / 2.0
    )))
}

/// Solves a general square system by partial-pivot LU.
pub fn lu_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let x = a
        .clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::LinAlg(format!("singular system of order {}", a.nrows())))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinAlg(format!("system of order {} is numerically singular", a.nrows())));
    }
    Ok(x)
}

/// Inverse of a symmetric positive definite matrix via jittered Cholesky.
pub fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = cholesky_with_jitter(a)?;
    chol.solve_matrix(&DMatrix::identity(a.nrows(), a.nrows()))
}

/// Numerical rank by SVD with relative threshold `1e-10·σ_max`.
pub fn numerical_rank(a: &DMatrix<f64>) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-10 * smax).count()
}
