//! Predictive density for lognormal spatial data: conditional normals from
//! Bayes kriging under each posterior draw of the nested Matérn parameters,
//! averaged on a log grid and mapped back to the original scale.

use crate::data::SpatialDataset;
use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::krige::{bayes_kriging, dedup_locations, neighborhood, BayesPrior, TrendBasis, DEFAULT_MIN_NEIGHBORS};
use crate::linalg::{cholesky_with_jitter, gram_matrix, spd_inverse};
use crate::models::{CovarianceModel, NestedMaternSpec};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Probability levels of the reported quantiles.
pub const QUANTILE_LEVELS: [f64; 6] = [0.01, 0.05, 0.25, 0.75, 0.95, 0.99];

/// Divisor turning the interquartile range into an approximate sd.
pub const IQR_DIVISOR: f64 = 1.45;

/// Nested Matérn parameter vectors, one row per converged fit.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    rows: Vec<[f64; 7]>,
}

impl PosteriorDraws {
    pub fn new(rows: Vec<[f64; 7]>) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            NestedMaternSpec::from_params(r).map_err(|e| Error::Precondition(format!("draw {}: {e}", i + 1)))?;
        }
        Ok(Self { rows })
    }

    /// Single-Matérn rows `(nugget, sill, range, ν)`, stored with an empty
    /// second component.
    pub fn from_single_matern(rows: &[[f64; 4]]) -> Result<Self> {
        Self::new(rows.iter().map(|r| [r[0], r[1], r[2], r[3], 0.0, 1.0, 0.5]).collect())
    }

    /// Converged fits only.
    pub fn from_fits(fits: &[FitResult]) -> Result<Self> {
        let rows = fits
            .iter()
            .filter(|f| f.converged && f.params.len() == 7)
            .map(|f| {
                let mut r = [0.0; 7];
                r.copy_from_slice(&f.params);
                r
            })
            .collect();
        Self::new(rows)
    }

    pub fn rows(&self) -> &[[f64; 7]] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Column `j` across all draws.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integration {
    /// Weights `exp(g_{k+1}) − exp(g_k)` at every grid point.
    Forward,
    /// Trapezoid rule on the original scale.
    Trapezoid,
}

/// Log-scale evaluation grid `lo, lo + step, …, hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    pub integration: Integration,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            lo: -5.0,
            hi: 6.5,
            step: 0.01,
            integration: Integration::Forward,
        }
    }
}

impl GridConfig {
    pub fn n_points(&self) -> usize {
        ((self.hi - self.lo) / self.step).round() as usize + 1
    }

    pub fn log_grid(&self) -> Vec<f64> {
        (0..self.n_points()).map(|k| self.lo + self.step * k as f64).collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.hi > self.lo && self.lo.is_finite() && self.hi.is_finite()) {
            return Err(Error::Precondition(format!(
                "invalid log grid lo={} hi={} step={}",
                self.lo, self.hi, self.step
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensitySummary {
    pub modal: f64,
    pub median: f64,
    pub mean: f64,
    pub q001: f64,
    pub q005: f64,
    pub q025: f64,
    pub q075: f64,
    pub q095: f64,
    pub q099: f64,
    /// `(q075 − q025)/1.45`.
    pub approx_sd: f64,
    /// Set when some level lies below the first cdf value.
    pub below_grid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDensity {
    pub log_grid: Vec<f64>,
    /// `exp(log_grid)`.
    pub values: Vec<f64>,
    /// Density per original-scale unit.
    pub density: Vec<f64>,
    pub cdf: Vec<f64>,
    /// Grid integral of `density` before normalisation.
    pub unnormalized_mass: f64,
    /// Conditional log-scale `(mean, variance)` per draw, in draw order.
    pub conditionals: Vec<(f64, f64)>,
    pub n_neighbors: usize,
    pub summary: DensitySummary,
}

fn normal_density(x: f64, m: f64, var: f64) -> f64 {
    let d = x - m;
    (-0.5 * d * d / var).exp() / (2.0 * PI * var).sqrt()
}

/// Log-scale conditional `(mean, variance)` at `x0` for one draw: Bayes
/// kriging with a constant trend and prior `(mu, phi)`.
pub fn conditional_moments(x0: &[f64], neighbors: &SpatialDataset, draw: &[f64; 7], mu: f64, phi: f64) -> Result<(f64, f64)> {
    let spec = NestedMaternSpec::from_params(draw)?;
    let basis = TrendBasis::constant(neighbors.dim());
    let prior = BayesPrior::scalar(mu, phi)?;
    let r = bayes_kriging(x0, neighbors, &spec, &basis, &prior)?;
    if !(r.prediction.is_finite() && r.variance.is_finite()) {
        return Err(Error::Numeric("non-finite conditional moments".into()));
    }
    Ok((r.prediction, r.variance.max(0.0)))
}

/// Density, cdf and mean on the value grid, plus the mass before normalising.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    pub values: Vec<f64>,
    pub density: Vec<f64>,
    pub cdf: Vec<f64>,
    pub mean: f64,
    pub mass: f64,
}

/// Builds the predictive density from per-draw conditional moments.
pub fn density_from_conditionals(conditionals: &[(f64, f64)], cfg: &GridConfig) -> Result<GridDensity> {
    cfg.validate()?;
    if conditionals.is_empty() {
        return Err(Error::Precondition("no posterior draws".into()));
    }
    if let Some(&(m, v)) = conditionals.iter().find(|(m, v)| !(m.is_finite() && *v >= 0.0 && v.is_finite())) {
        return Err(Error::Numeric(format!("degenerate conditional law: mean {m}, variance {v}")));
    }
    let g = cfg.log_grid();
    let y: Vec<f64> = g.iter().map(|v| v.exp()).collect();
    // a fixed summation order makes the average independent of draw order
    // laws narrower than the grid step are resolved at grid resolution
    let floor = cfg.step * cfg.step;
    let mut sorted: Vec<(f64, f64)> = conditionals.iter().map(|&(m, v)| (m, v.max(floor))).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let t = sorted.len() as f64;
    let density: Vec<f64> = g
        .iter()
        .zip(&y)
        .map(|(&gk, &yk)| sorted.iter().map(|&(m, v)| normal_density(gk, m, v)).sum::<f64>() / t / yk)
        .collect();
    let n = g.len();
    let mut mass = vec![0.0; n];
    let mut cum = vec![0.0; n];
    let mut mean_num = 0.0;
    match cfg.integration {
        Integration::Forward => {
            let mut acc = 0.0;
            for k in 0..n {
                let y_next = (g[k] + cfg.step).exp();
                let w = y_next - y[k];
                mass[k] = density[k] * w;
                acc += mass[k];
                cum[k] = acc;
                mean_num += mass[k] * 0.5 * (y_next + y[k]);
            }
        }
        Integration::Trapezoid => {
            let mut acc = 0.0;
            for k in 1..n {
                let dy = y[k] - y[k - 1];
                let m = 0.5 * (density[k - 1] + density[k]) * dy;
                acc += m;
                cum[k] = acc;
                mean_num += 0.5 * (density[k - 1] * y[k - 1] + density[k] * y[k]) * dy;
            }
        }
    }
    let total = cum[n - 1];
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Numeric("predictive density has no mass on the grid".into()));
    }
    let cdf: Vec<f64> = cum.iter().map(|c| c / total).collect();
    Ok(GridDensity {
        values: y,
        density,
        cdf,
        mean: mean_num / total,
        mass: total,
    })
}

fn quantile_on_grid(values: &[f64], cdf: &[f64], p: f64) -> (f64, bool) {
    let count = cdf.iter().filter(|&&c| c <= p).count();
    if count == 0 {
        (values[0], true)
    } else {
        (values[count - 1], false)
    }
}

fn summarize(values: &[f64], density: &[f64], cdf: &[f64], mean: f64) -> DensitySummary {
    let mut modal_idx = 0;
    for (k, &d) in density.iter().enumerate() {
        if d > density[modal_idx] {
            modal_idx = k;
        }
    }
    let mut below = false;
    let mut q = |p: f64| {
        let (v, b) = quantile_on_grid(values, cdf, p);
        below |= b;
        v
    };
    let q001 = q(0.01);
    let q005 = q(0.05);
    let q025 = q(0.25);
    let median = q(0.5);
    let q075 = q(0.75);
    let q095 = q(0.95);
    let q099 = q(0.99);
    DensitySummary {
        modal: values[modal_idx],
        median,
        mean,
        q001,
        q005,
        q025,
        q075,
        q095,
        q099,
        approx_sd: (q075 - q025) / IQR_DIVISOR,
        below_grid: below,
    }
}

/// Assembles a [`PredictiveDensity`] from conditional moments.
pub fn predictive_density_from_moments(conditionals: Vec<(f64, f64)>, cfg: &GridConfig, n_neighbors: usize) -> Result<PredictiveDensity> {
    let GridDensity {
        values,
        density,
        cdf,
        mean,
        mass,
    } = density_from_conditionals(&conditionals, cfg)?;
    let summary = summarize(&values, &density, &cdf, mean);
    Ok(PredictiveDensity {
        log_grid: cfg.log_grid(),
        values,
        density,
        cdf,
        unnormalized_mass: mass,
        conditionals,
        n_neighbors,
        summary,
    })
}

/// Settings shared by the point and map versions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityConfig {
    pub mu: f64,
    pub phi: f64,
    pub radius: f64,
    pub min_neighbors: usize,
    pub grid: GridConfig,
}

impl DensityConfig {
    pub fn new(mu: f64, phi: f64, radius: f64) -> Self {
        Self {
            mu,
            phi,
            radius,
            min_neighbors: DEFAULT_MIN_NEIGHBORS,
            grid: GridConfig::default(),
        }
    }
}

/// Predictive density at `x0` from log-scale data. `Ok(None)` when the
/// neighbourhood has `min_neighbors` points or fewer.
pub fn predictive_density_at(
    x0: &[f64],
    log_data: &SpatialDataset,
    draws: &PosteriorDraws,
    cfg: &DensityConfig,
) -> Result<Option<PredictiveDensity>> {
    if draws.is_empty() {
        return Err(Error::Precondition("no converged posterior draws".into()));
    }
    let Some(nb) = neighborhood(log_data, x0, cfg.radius) else {
        return Ok(None);
    };
    let (nb, _) = dedup_locations(&nb);
    if nb.len() <= cfg.min_neighbors {
        return Ok(None);
    }
    let conditionals = draws
        .rows()
        .iter()
        .map(|d| conditional_moments(x0, &nb, d, cfg.mu, cfg.phi))
        .collect::<Result<Vec<_>>>()?;
    predictive_density_from_moments(conditionals, &cfg.grid, nb.len()).map(Some)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityStatus {
    Ok,
    TooFewNeighbors,
    NumericFailure,
}

impl DensityStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            DensityStatus::Ok => "ok",
            DensityStatus::TooFewNeighbors => "too_few_neighbors",
            DensityStatus::NumericFailure => "numeric_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityRow {
    pub location: Vec<f64>,
    pub summary: Option<DensitySummary>,
    pub status: DensityStatus,
}

/// One summary row per grid location.
pub fn density_map(grid: &[f64], log_data: &SpatialDataset, draws: &PosteriorDraws, cfg: &DensityConfig) -> Result<Vec<DensityRow>> {
    if draws.is_empty() {
        return Err(Error::Precondition("no converged posterior draws".into()));
    }
    let dim = log_data.dim();
    Ok((0..grid.len() / dim)
        .into_par_iter()
        .map(|g| {
            let x0 = &grid[g * dim..(g + 1) * dim];
            let (summary, status) = match predictive_density_at(x0, log_data, draws, cfg) {
                Ok(Some(d)) => (Some(d.summary), DensityStatus::Ok),
                Ok(None) => (None, DensityStatus::TooFewNeighbors),
                Err(_) => (None, DensityStatus::NumericFailure),
            };
            DensityRow {
                location: x0.to_vec(),
                summary,
                status,
            }
        })
        .collect())
}

/// Normal posterior `β | Z ~ N(W(FᵀK⁻¹Z + σ⁻²V⁻¹μ), W)` with
/// `W = (FᵀK⁻¹F + σ⁻²V⁻¹)⁻¹`. Returns `(mean, W)`.
pub fn beta_posterior<M: CovarianceModel + ?Sized>(
    data: &SpatialDataset,
    model: &M,
    basis: &TrendBasis,
    mu: &DVector<f64>,
    sigma2: f64,
    v: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let k = basis.len();
    if mu.len() != k || v.nrows() != k || v.ncols() != k {
        return Err(Error::Precondition(format!("prior must have {k} coefficients")));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Precondition(format!("sigma2 must be positive and finite, got {sigma2}")));
    }
    let f = basis.design(data)?;
    let kmat = gram_matrix(model, data.coords(), data.dim())?;
    let chol = cholesky_with_jitter(&kmat)?;
    let kinv_f = chol.solve_matrix(&f)?;
    let z = DVector::from_column_slice(data.values());
    let v_inv = v
        .clone()
        .cholesky()
        .ok_or_else(|| Error::LinAlg("prior covariance V is not positive definite".into()))?
        .inverse();
    let precision = f.tr_mul(&kinv_f) + &v_inv / sigma2;
    let w = spd_inverse(&precision)?;
    let mean = &w * (kinv_f.tr_mul(&z) + &v_inv * mu / sigma2);
    Ok((mean, w))
}
