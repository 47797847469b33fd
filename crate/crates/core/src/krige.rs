//! Simple, ordinary, universal and Bayes kriging with neighbourhood search.

use crate::data::{distance, SpatialDataset};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, cross_covariance, gram_matrix, lu_solve, numerical_rank, JitteredCholesky};
use crate::linalg::{JITTER_SCALE, MAX_JITTER_DOUBLINGS};
use crate::models::CovarianceModel;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// Neighbourhoods with this many points or fewer are not kriged.
pub const DEFAULT_MIN_NEIGHBORS: usize = 4;

/// Polynomial trend `m(x) = Σ βⱼ fⱼ(x)`; each term is a vector of exponents,
/// one per coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrendBasis {
    terms: Vec<Vec<u32>>,
}

impl TrendBasis {
    pub fn new(terms: Vec<Vec<u32>>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Precondition("trend basis needs at least one term".into()));
        }
        let d = terms[0].len();
        if d == 0 || terms.iter().any(|t| t.len() != d) {
            return Err(Error::Precondition("trend terms must share one positive dimension".into()));
        }
        Ok(Self { terms })
    }

    pub fn constant(dim: usize) -> Self {
        Self {
            terms: vec![vec![0; dim]],
        }
    }

    /// `1, x₁, …, x_d`.
    pub fn linear(dim: usize) -> Self {
        let mut terms = vec![vec![0; dim]];
        for i in 0..dim {
            let mut t = vec![0; dim];
            t[i] = 1;
            terms.push(t);
        }
        Self { terms }
    }

    /// Planar quadratic `1, x, y, x², xy, y²`.
    pub fn quadratic_2d() -> Self {
        Self {
            terms: vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]],
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.terms[0].len()
    }

    /// Human-readable name of term `j`, e.g. `x1^2*x2`.
    pub fn term_name(&self, j: usize) -> String {
        let parts: Vec<String> = self.terms[j]
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, &e)| if e == 1 { format!("x{}", i + 1) } else { format!("x{}^{e}", i + 1) })
            .collect();
        if parts.is_empty() {
            "1".into()
        } else {
            parts.join("*")
        }
    }

    /// `f(x)`.
    pub fn eval(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.terms
                .iter()
                .map(|t| t.iter().zip(x).map(|(&e, &xi)| xi.powi(e as i32)).product::<f64>()),
        )
    }

    /// Design matrix `F` (n × k), checked for full column rank.
    pub fn design(&self, data: &SpatialDataset) -> Result<DMatrix<f64>> {
        if data.dim() != self.dim() {
            return Err(Error::Precondition(format!(
                "trend basis is {}-dimensional, data are {}-dimensional",
                self.dim(),
                data.dim()
            )));
        }
        let n = data.len();
        let k = self.len();
        let mut f = DMatrix::zeros(n, k);
        for i in 0..n {
            f.set_row(i, &self.eval(data.location(i)).transpose());
        }
        if n < k || numerical_rank(&f) < k {
            for j in 0..k {
                if j + 1 > n || numerical_rank(&f.columns(0, j + 1).into_owned()) < j + 1 {
                    return Err(Error::LinAlg(format!(
                        "trend design matrix is rank deficient at basis term '{}' ({n} points, {k} terms)",
                        self.term_name(j)
                    )));
                }
            }
        }
        Ok(f)
    }
}

/// Prior `β ~ (μ, Φ)` on the trend coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesPrior {
    mu: DVector<f64>,
    phi: DMatrix<f64>,
}

impl BayesPrior {
    pub fn new(mu: DVector<f64>, phi: DMatrix<f64>) -> Result<Self> {
        let k = mu.len();
        if phi.nrows() != k || phi.ncols() != k {
            return Err(Error::Precondition(format!("prior covariance must be {k}x{k}")));
        }
        if (&phi - phi.transpose()).amax() > 1e-12 * phi.amax().max(1.0) {
            return Err(Error::Precondition("prior covariance is not symmetric".into()));
        }
        cholesky_with_jitter(&phi)
            .map_err(|_| Error::Precondition("prior covariance is not positive semi-definite".into()))?;
        Ok(Self { mu, phi })
    }

    /// Scalar prior on a constant trend.
    pub fn scalar(mu: f64, phi: f64) -> Result<Self> {
        Self::new(DVector::from_element(1, mu), DMatrix::from_element(1, 1, phi))
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KrigingMethod {
    Simple { mean: f64 },
    Ordinary,
    Universal { basis: TrendBasis },
    Bayes { basis: TrendBasis, prior: BayesPrior },
}

impl KrigingMethod {
    pub fn name(&self) -> &'static str {
        match self {
            KrigingMethod::Simple { .. } => "simple",
            KrigingMethod::Ordinary => "ordinary",
            KrigingMethod::Universal { .. } => "universal",
            KrigingMethod::Bayes { .. } => "bayes",
        }
    }

    fn min_points(&self) -> usize {
        match self {
            KrigingMethod::Simple { .. } | KrigingMethod::Bayes { .. } => 1,
            KrigingMethod::Ordinary => 2,
            KrigingMethod::Universal { basis } => basis.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrigingResult {
    pub prediction: f64,
    /// `√max(0, variance)`.
    pub sd: f64,
    /// Error variance before clamping.
    pub variance: f64,
    pub n_neighbors: usize,
    pub method: &'static str,
    /// Equivalent linear weights on the data: `prediction = Σ wᵢ zᵢ + const`.
    pub weights: Vec<f64>,
    /// Lagrange multiplier(s) of the ordinary system, if any.
    pub lagrange: Vec<f64>,
    /// True if a negative variance was clamped to zero.
    pub clamped: bool,
}

impl KrigingResult {
    fn new(prediction: f64, variance: f64, n: usize, method: &'static str, weights: Vec<f64>) -> Self {
        Self {
            prediction,
            sd: variance.max(0.0).sqrt(),
            variance,
            n_neighbors: n,
            method,
            weights,
            lagrange: Vec::new(),
            clamped: variance < 0.0,
        }
    }
}

/// Points with `|xᵢ − x₀| ≤ radius`, original order preserved.
pub fn neighborhood(data: &SpatialDataset, x0: &[f64], radius: f64) -> Option<SpatialDataset> {
    let idx: Vec<usize> = (0..data.len()).filter(|&i| distance(data.location(i), x0) <= radius).collect();
    data.select(&idx)
}

fn factor<M: CovarianceModel + ?Sized>(model: &M, data: &SpatialDataset) -> Result<(DMatrix<f64>, JitteredCholesky)> {
    let k = gram_matrix(model, data.coords(), data.dim())?;
    let chol = cholesky_with_jitter(&k)?;
    Ok((k, chol))
}

fn check_x0(data: &SpatialDataset, x0: &[f64]) -> Result<()> {
    if x0.len() != data.dim() {
        return Err(Error::Precondition(format!(
            "prediction location has {} coordinates, data have {}",
            x0.len(),
            data.dim()
        )));
    }
    Ok(())
}

/// Simple kriging with known mean `m`: `λ = K⁻¹c₀`, `σ² = C(0) − λᵀc₀`.
pub fn simple_kriging<M: CovarianceModel + ?Sized>(x0: &[f64], data: &SpatialDataset, model: &M, mean: f64) -> Result<KrigingResult> {
    check_x0(data, x0)?;
    let (_, chol) = factor(model, data)?;
    let c0 = cross_covariance(model, data.coords(), data.dim(), x0)?;
    let lambda = chol.solve(&c0)?;
    let z = DVector::from_column_slice(data.values());
    let pred = mean + lambda.dot(&z.add_scalar(-mean));
    let var = model.total_variance() - lambda.dot(&c0);
    Ok(KrigingResult::new(pred, var, data.len(), "simple", lambda.iter().copied().collect()))
}

/// Solves `[K F; Fᵀ 0][w; ν] = [c; f]` by LU, adding the covariance jitter
/// to the `K` block if the system is singular.
fn solve_bordered(k: &DMatrix<f64>, f: &DMatrix<f64>, c: &DVector<f64>, f0: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = k.nrows();
    let p = f.ncols();
    let mut a = DMatrix::zeros(n + p, n + p);
    a.view_mut((0, 0), (n, n)).copy_from(k);
    a.view_mut((0, n), (n, p)).copy_from(f);
    a.view_mut((n, 0), (p, n)).copy_from(&f.transpose());
    let mut rhs = DVector::zeros(n + p);
    rhs.rows_mut(0, n).copy_from(c);
    rhs.rows_mut(n, p).copy_from(f0);
    let base = JITTER_SCALE * (k.trace() / n as f64).abs().max(f64::MIN_POSITIVE);
    let mut delta = 0.0;
    for attempt in 0..=(MAX_JITTER_DOUBLINGS + 1) {
        let mut aj = a.clone();
        for i in 0..n {
            aj[(i, i)] += delta;
        }
        if let Ok(x) = lu_solve(&aj, &rhs) {
            return Ok((x.rows(0, n).into_owned(), x.rows(n, p).into_owned()));
        }
        delta = base * 2f64.powi(attempt as i32);
    }
    Err(Error::LinAlg(format!("bordered kriging system of order {} is singular", n + p)))
}

/// Ordinary kriging: `[K 1; 1ᵀ 0][w; ν] = [c₀; 1]`, `σ² = C(0) − c₀ᵀw − ν`.
pub fn ordinary_kriging<M: CovarianceModel + ?Sized>(x0: &[f64], data: &SpatialDataset, model: &M) -> Result<KrigingResult> {
    check_x0(data, x0)?;
    if data.len() < 2 {
        return Err(Error::Precondition("ordinary kriging needs at least 2 points".into()));
    }
    let k = gram_matrix(model, data.coords(), data.dim())?;
    let c0 = cross_covariance(model, data.coords(), data.dim(), x0)?;
    let ones = DMatrix::from_element(data.len(), 1, 1.0);
    let (w, nu) = solve_bordered(&k, &ones, &c0, &DVector::from_element(1, 1.0))?;
    let pred = w.dot(&DVector::from_column_slice(data.values()));
    let var = model.total_variance() - c0.dot(&w) - nu[0];
    let mut r = KrigingResult::new(pred, var, data.len(), "ordinary", w.iter().copied().collect());
    r.lagrange = vec![nu[0]];
    Ok(r)
}

/// `β̂ = (FᵀK⁻¹F)⁻¹FᵀK⁻¹Z`.
pub fn gls_beta<M: CovarianceModel + ?Sized>(data: &SpatialDataset, model: &M, basis: &TrendBasis) -> Result<DVector<f64>> {
    let f = basis.design(data)?;
    let (_, chol) = factor(model, data)?;
    gls_from_parts(&chol, &f, &DVector::from_column_slice(data.values())).map(|(b, _, _)| b)
}

/// Returns `(β̂, K⁻¹F, (FᵀK⁻¹F)⁻¹)`.
fn gls_from_parts(
    chol: &JitteredCholesky,
    f: &DMatrix<f64>,
    z: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let kinv_f = chol.solve_matrix(f)?;
    let ftkf = f.tr_mul(&kinv_f);
    let ftkf_inv = ftkf
        .clone()
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::LinAlg("FᵀK⁻¹F is singular".into()))?;
    let beta = &ftkf_inv * kinv_f.tr_mul(z);
    Ok((beta, kinv_f, ftkf_inv))
}

/// Universal kriging: `Ẑ = f₀ᵀβ̂ + c₀ᵀK⁻¹(Z − Fβ̂)` with MSEP
/// `C(0) − c₀ᵀK⁻¹c₀ + gᵀ(FᵀK⁻¹F)⁻¹g`, `g = f₀ − FᵀK⁻¹c₀`.
pub fn universal_kriging<M: CovarianceModel + ?Sized>(
    x0: &[f64],
    data: &SpatialDataset,
    model: &M,
    basis: &TrendBasis,
) -> Result<KrigingResult> {
    check_x0(data, x0)?;
    let f = basis.design(data)?;
    let (_, chol) = factor(model, data)?;
    let z = DVector::from_column_slice(data.values());
    let (beta, kinv_f, ftkf_inv) = gls_from_parts(&chol, &f, &z)?;
    let c0 = cross_covariance(model, data.coords(), data.dim(), x0)?;
    let f0 = basis.eval(x0);
    let kinv_c0 = chol.solve(&c0)?;
    let resid = &z - &f * &beta;
    let pred = f0.dot(&beta) + kinv_c0.dot(&resid);
    let g = &f0 - f.tr_mul(&kinv_c0);
    let var = model.total_variance() - c0.dot(&kinv_c0) + g.dot(&(&ftkf_inv * &g));
    let weights = &kinv_c0 + &kinv_f * (&ftkf_inv * &g);
    Ok(KrigingResult::new(pred, var, data.len(), "universal", weights.iter().copied().collect()))
}

/// Bayes kriging: `Ẑ = f₀ᵀμ + bᵀA⁻¹(Z − Fμ)` with `A = K + FΦFᵀ`,
/// `b = c₀ + FΦf₀`, and `TMSEP = C(0) + f₀ᵀΦf₀ − bᵀA⁻¹b`.
pub fn bayes_kriging<M: CovarianceModel + ?Sized>(
    x0: &[f64],
    data: &SpatialDataset,
    model: &M,
    basis: &TrendBasis,
    prior: &BayesPrior,
) -> Result<KrigingResult> {
    check_x0(data, x0)?;
    if prior.mu.len() != basis.len() {
        return Err(Error::Precondition(format!(
            "prior has {} coefficients, basis has {}",
            prior.mu.len(),
            basis.len()
        )));
    }
    let f = basis.design(data)?;
    let k = gram_matrix(model, data.coords(), data.dim())?;
    let c0 = cross_covariance(model, data.coords(), data.dim(), x0)?;
    let f0 = basis.eval(x0);
    let z = DVector::from_column_slice(data.values());
    let kchol = cholesky_with_jitter(&k)?;
    let kinv_f = kchol.solve_matrix(&f)?;
    let g = f.transpose() * &kinv_f;
    // A vague prior makes K + FΦFᵀ ill conditioned; the precision form
    // (FᵀK⁻¹F + Φ⁻¹) is then the stable one.
    if let Some(phi_inv) = dominated_prior_precision(&prior.phi, &g) {
        let r = kchol.solve(&c0)?;
        let p = &g + &phi_inv;
        let pchol = cholesky_with_jitter(&p)?;
        let beta = pchol.solve(&(kinv_f.transpose() * &z + &phi_inv * &prior.mu))?;
        let u = &f0 - f.transpose() * &r;
        let pinv_u = pchol.solve(&u)?;
        let pred = r.dot(&z) + u.dot(&beta);
        let var = model.total_variance() - c0.dot(&r) + u.dot(&pinv_u);
        let weights = &r + &kinv_f * &pinv_u;
        return Ok(KrigingResult::new(pred, var, data.len(), "bayes", weights.iter().copied().collect()));
    }
    let a = &k + &f * &prior.phi * f.transpose();
    let chol = cholesky_with_jitter(&a)?;
    let b = &c0 + &f * (&prior.phi * &f0);
    let ainv_b = chol.solve(&b)?;
    let pred = f0.dot(&prior.mu) + ainv_b.dot(&(&z - &f * &prior.mu));
    let var = model.total_variance() + f0.dot(&(&prior.phi * &f0)) - b.dot(&ainv_b);
    Ok(KrigingResult::new(pred, var, data.len(), "bayes", ainv_b.iter().copied().collect()))
}

/// `Φ⁻¹` when Φ is positive definite and the data outweigh the prior in every
/// direction, i.e. `LᵀGL ⪰ I` for `Φ = LLᵀ`.
fn dominated_prior_precision(phi: &DMatrix<f64>, g: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let l = phi.clone().cholesky()?;
    let lm = l.l();
    let m = lm.transpose() * g * &lm;
    let min_eig = m.symmetric_eigenvalues().min();
    (min_eig >= 1.0).then(|| l.inverse())
}

/// Bayes kriging with a constant trend through the bordered covariance of
/// `(x₀, x₁, …, xₙ)` plus `φ·11ᵀ`: the predictor uses the first row of that
/// matrix and the variance is `1/[M⁻¹]₁₁`.
pub fn bayes_kriging_schur<M: CovarianceModel + ?Sized>(
    x0: &[f64],
    data: &SpatialDataset,
    model: &M,
    mu: f64,
    phi: f64,
) -> Result<(f64, f64)> {
    check_x0(data, x0)?;
    let n = data.len();
    let mut all = x0.to_vec();
    all.extend_from_slice(data.coords());
    let mut m = gram_matrix(model, &all, data.dim())?;
    m.add_scalar_mut(phi);
    let block = m.view((1, 1), (n, n)).into_owned();
    let first = m.view((1, 0), (n, 1)).column(0).into_owned();
    let chol = cholesky_with_jitter(&block)?;
    let z = DVector::from_column_slice(data.values()).add_scalar(-mu);
    let pred = mu + first.dot(&chol.solve(&z)?);
    let inv = crate::linalg::spd_inverse(&m)?;
    let var = 1.0 / inv[(0, 0)];
    Ok((pred, var))
}

/// Dispatches to the predictor chosen by `method`.
pub fn krige_point<M: CovarianceModel + ?Sized>(
    x0: &[f64],
    data: &SpatialDataset,
    model: &M,
    method: &KrigingMethod,
) -> Result<KrigingResult> {
    match method {
        KrigingMethod::Simple { mean } => simple_kriging(x0, data, model, *mean),
        KrigingMethod::Ordinary => ordinary_kriging(x0, data, model),
        KrigingMethod::Universal { basis } => universal_kriging(x0, data, model, basis),
        KrigingMethod::Bayes { basis, prior } => bayes_kriging(x0, data, model, basis, prior),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapStatus {
    Ok,
    TooFewNeighbors,
    NumericFailure,
}

impl MapStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            MapStatus::Ok => "ok",
            MapStatus::TooFewNeighbors => "too_few_neighbors",
            MapStatus::NumericFailure => "numeric_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapEntry {
    pub location: Vec<f64>,
    pub status: MapStatus,
    pub n_neighbors: usize,
    pub result: Option<KrigingResult>,
    /// Duplicate locations dropped from the neighbourhood.
    pub dropped_duplicates: usize,
    pub message: Option<String>,
}

/// Keeps the first occurrence of every location.
pub fn dedup_locations(data: &SpatialDataset) -> (SpatialDataset, usize) {
    let keep: Vec<usize> = (0..data.len())
        .filter(|&j| !(0..j).any(|i| data.location(i) == data.location(j)))
        .collect();
    let dropped = data.len() - keep.len();
    (data.select(&keep).expect("at least one location survives"), dropped)
}

/// Kriging at every grid location using the points within `radius`.
/// Neighbourhoods with `min_neighbors` points or fewer are reported missing.
pub fn krige_map<M: CovarianceModel + ?Sized>(
    grid: &[f64],
    data: &SpatialDataset,
    model: &M,
    method: &KrigingMethod,
    radius: f64,
    min_neighbors: usize,
) -> Vec<MapEntry> {
    let dim = data.dim();
    (0..grid.len() / dim)
        .into_par_iter()
        .map(|g| {
            let x0 = &grid[g * dim..(g + 1) * dim];
            let missing = |status, n, dropped, message| MapEntry {
                location: x0.to_vec(),
                status,
                n_neighbors: n,
                result: None,
                dropped_duplicates: dropped,
                message,
            };
            let Some(nb) = neighborhood(data, x0, radius) else {
                return missing(MapStatus::TooFewNeighbors, 0, 0, None);
            };
            let (nb, dropped) = dedup_locations(&nb);
            if nb.len() <= min_neighbors || nb.len() < method.min_points() {
                return missing(MapStatus::TooFewNeighbors, nb.len(), dropped, None);
            }
            match krige_point(x0, &nb, model, method) {
                Ok(r) if r.prediction.is_finite() && r.sd.is_finite() => MapEntry {
                    location: x0.to_vec(),
                    status: MapStatus::Ok,
                    n_neighbors: nb.len(),
                    result: Some(r),
                    dropped_duplicates: dropped,
                    message: None,
                },
                Ok(_) => missing(MapStatus::NumericFailure, nb.len(), dropped, Some("non-finite result".into())),
                Err(e) => missing(MapStatus::NumericFailure, nb.len(), dropped, Some(e.to_string())),
            }
        })
        .collect()
}
