//! Gaussian random-field simulation by Cholesky and Karhunen–Loève routes,
//! and empirical variograms of simulated fields.

use crate::data::SpatialDataset;
use crate::empvario::{EmpiricalVariogram, Estimator, PairBins, VariogramBin};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, gram_matrix};
use crate::models::{CovarianceModel, CovarianceSpec, ModelSpec};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Default number of simulated fields.
pub const DEFAULT_N_SIMS: usize = 100;

/// Relative eigenvalue threshold below which KL modes are dropped.
pub const KL_EIGEN_CUTOFF: f64 = 1e-12;

/// Planar prediction or simulation locations.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    coords: Vec<f64>,
    shape: Option<(usize, usize)>,
}

impl Grid {
    /// Explicit location list (planar, row-major pairs).
    pub fn from_points(points: &[(f64, f64)]) -> Self {
        Self {
            coords: points.iter().flat_map(|&(x, y)| [x, y]).collect(),
            shape: None,
        }
    }

    /// `nx·ny` points `(xmin + iΔx, ymin + jΔy)` for `i = 1..=nx`, `j = 1..=ny`,
    /// `Δx = (xmax − xmin)/nx`: the lower edges are excluded and the upper
    /// edges included. Points are emitted with `i` outer and `j` inner.
    pub fn rect(xmin: f64, xmax: f64, ymin: f64, ymax: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::check(xmin, xmax, ymin, ymax, nx, ny)?;
        let dx = (xmax - xmin) / nx as f64;
        let dy = (ymax - ymin) / ny as f64;
        let mut coords = Vec::with_capacity(2 * nx * ny);
        for i in 1..=nx {
            for j in 1..=ny {
                coords.push(xmin + dx * i as f64);
                coords.push(ymin + dy * j as f64);
            }
        }
        Ok(Self {
            coords,
            shape: Some((nx, ny)),
        })
    }

    /// Like [`Grid::rect`] but spanning both ends of each axis.
    pub fn rect_inclusive(xmin: f64, xmax: f64, ymin: f64, ymax: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::check(xmin, xmax, ymin, ymax, nx, ny)?;
        let step = |lo: f64, hi: f64, n: usize, i: usize| {
            if n == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        };
        let mut coords = Vec::with_capacity(2 * nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                coords.push(step(xmin, xmax, nx, i));
                coords.push(step(ymin, ymax, ny, j));
            }
        }
        Ok(Self {
            coords,
            shape: Some((nx, ny)),
        })
    }

    fn check(xmin: f64, xmax: f64, ymin: f64, ymax: f64, nx: usize, ny: usize) -> Result<()> {
        if nx == 0 || ny == 0 {
            return Err(Error::Precondition("grid needs nx, ny >= 1".into()));
        }
        if !(xmax > xmin && ymax > ymin) || ![xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite()) {
            return Err(Error::Precondition(format!(
                "grid extent [{xmin}, {xmax}] x [{ymin}, {ymax}] is empty"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.coords.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> [f64; 2] {
        [self.coords[2 * i], self.coords[2 * i + 1]]
    }

    /// `(nx, ny)` for rectangular grids.
    pub fn shape(&self) -> Option<(usize, usize)> {
        self.shape
    }
}

/// The gridMaker expansion; see [`Grid::rect`].
pub fn make_grid(xmin: f64, xmax: f64, ymin: f64, ymax: f64, nx: usize, ny: usize) -> Result<Grid> {
    Grid::rect(xmin, xmax, ymin, ymax, nx, ny)
}

/// A batch of simulated fields on fixed locations.
#[derive(Debug, Clone, PartialEq)]
pub struct SimBatch {
    pub dim: usize,
    pub coords: Vec<f64>,
    /// `n_points × n_sims`, one realisation per column.
    pub values: DMatrix<f64>,
    pub seed: u64,
    pub mean: f64,
    pub spec: Option<ModelSpec>,
}

impl SimBatch {
    pub fn n_points(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_sims(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }
}

fn check_dims(spec: &ModelSpec, dim: usize, coords: &[f64]) -> Result<()> {
    if dim == 0 || !coords.len().is_multiple_of(dim) {
        return Err(Error::Precondition("coordinates do not match the dimension".into()));
    }
    if let Some(d) = spec.valid_dims() {
        if dim > d {
            return Err(Error::Precondition(format!(
                "model is only positive definite up to dimension {d}, data are {dim}-dimensional"
            )));
        }
    }
    Ok(())
}

/// Standard-normal vector for simulation `index`: the generator is keyed by
/// `seed` with stream `index`, so draws do not depend on evaluation order.
pub fn normal_draws(seed: u64, index: u64, n: usize) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

fn columns_from_factor(factor: &DMatrix<f64>, mean: f64, n_sims: usize, seed: u64) -> DMatrix<f64> {
    let n = factor.nrows();
    let k = factor.ncols();
    let cols: Vec<DVector<f64>> = (0..n_sims)
        .into_par_iter()
        .map(|s| {
            let w = normal_draws(seed, s as u64, k);
            let mut z = factor * w;
            z.add_scalar_mut(mean);
            z
        })
        .collect();
    let mut out = DMatrix::zeros(n, n_sims);
    for (j, c) in cols.into_iter().enumerate() {
        out.set_column(j, &c);
    }
    out
}

/// Fields `m·1 + L·w` with `LLᵀ` the (jittered) Gram matrix.
pub fn simulate_gaussian_field(
    coords: &[f64],
    dim: usize,
    spec: &ModelSpec,
    mean: f64,
    n_sims: usize,
    seed: u64,
) -> Result<SimBatch> {
    check_dims(spec, dim, coords)?;
    let k = gram_matrix(spec, coords, dim)?;
    let l = cholesky_with_jitter(&k)?.into_l();
    Ok(SimBatch {
        dim,
        coords: coords.to_vec(),
        values: columns_from_factor(&l, mean, n_sims, seed),
        seed,
        mean,
        spec: Some(*spec),
    })
}

/// Eigenvectors `Ψ` (columns) and clamped eigenvalues `λ` of a symmetric matrix,
/// sorted by decreasing eigenvalue. Eigenvalues below `1e-12·λ_max` become 0.
pub fn kl_decomposition(k: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    let eig = SymmetricEigen::new(k.clone());
    let n = k.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let lmax = order.first().map_or(0.0, |&i| eig.eigenvalues[i].max(0.0));
    let mut psi = DMatrix::zeros(n, n);
    let mut lambda = Vec::with_capacity(n);
    for (c, &i) in order.iter().enumerate() {
        psi.set_column(c, &eig.eigenvectors.column(i));
        let l = eig.eigenvalues[i];
        lambda.push(if l < KL_EIGEN_CUTOFF * lmax || l <= 0.0 { 0.0 } else { l });
    }
    if lambda.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("eigendecomposition produced non-finite values".into()));
    }
    Ok((psi, lambda))
}

/// Fields `m·1 + Ψ·diag(√λ)·w` from the Karhunen–Loève expansion of the Gram matrix.
pub fn kl_simulate(coords: &[f64], dim: usize, spec: &ModelSpec, mean: f64, n_sims: usize, seed: u64) -> Result<SimBatch> {
    check_dims(spec, dim, coords)?;
    let k = gram_matrix(spec, coords, dim)?;
    let (mut psi, lambda) = kl_decomposition(&k)?;
    for (j, l) in lambda.iter().enumerate() {
        psi.column_mut(j).scale_mut(l.sqrt());
    }
    Ok(SimBatch {
        dim,
        coords: coords.to_vec(),
        values: columns_from_factor(&psi, mean, n_sims, seed),
        seed,
        mean,
        spec: Some(*spec),
    })
}

/// Residual conditioning on the union of data and target locations:
/// `Z_c = Z_sim(target) + Λᵀ(z − Z_sim(data))` with `Λ = K_dd⁻¹ K_dt`.
/// With zero nugget the result honours the data exactly.
pub fn conditional_simulate(
    coords: &[f64],
    dim: usize,
    spec: &ModelSpec,
    data: &SpatialDataset,
    mean: f64,
    n_sims: usize,
    seed: u64,
) -> Result<SimBatch> {
    if data.dim() != dim {
        return Err(Error::Precondition("data and target dimensions differ".into()));
    }
    let nd = data.len();
    let nt = coords.len() / dim;
    // targets that coincide with a datum share its simulated value
    let mut all = data.coords().to_vec();
    let mut row_of = Vec::with_capacity(nt);
    for j in 0..nt {
        let x = &coords[j * dim..(j + 1) * dim];
        match (0..nd).find(|&i| data.location(i) == x) {
            Some(i) => row_of.push(i),
            None => {
                row_of.push(all.len() / dim);
                all.extend_from_slice(x);
            }
        }
    }
    let joint = simulate_gaussian_field(&all, dim, spec, mean, n_sims, seed)?;
    let k_dd = gram_matrix(spec, data.coords(), dim)?;
    let chol = cholesky_with_jitter(&k_dd)?;
    let mut k_dt = DMatrix::zeros(nd, nt);
    for i in 0..nd {
        for j in 0..nt {
            let d = crate::data::distance(data.location(i), &coords[j * dim..(j + 1) * dim]);
            k_dt[(i, j)] = spec.covariance(d)?;
        }
    }
    let lambda = chol.solve_matrix(&k_dt)?;
    let z = DVector::from_column_slice(data.values());
    let mut values = DMatrix::zeros(nt, n_sims);
    for s in 0..n_sims {
        let col = joint.values.column(s);
        let resid = &z - col.rows(0, nd);
        let sim_t = DVector::from_iterator(nt, row_of.iter().map(|&r| col[r]));
        let corrected = sim_t + lambda.tr_mul(&resid);
        values.set_column(s, &corrected);
    }
    Ok(SimBatch {
        dim,
        coords: coords.to_vec(),
        values,
        seed,
        mean,
        spec: Some(*spec),
    })
}

/// Lag descriptors plus one empirical-variogram column per simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct VariogramTable {
    /// 1-based index of the originating bin.
    pub lag: Vec<usize>,
    pub dist: Vec<f64>,
    pub n: Vec<usize>,
    /// `sims[j][i]`: γ̂ of simulation `j` at lag row `i`.
    pub sims: Vec<Vec<f64>>,
}

impl VariogramTable {
    pub fn new(lag: Vec<usize>, dist: Vec<f64>, n: Vec<usize>, sims: Vec<Vec<f64>>) -> Result<Self> {
        let rows = lag.len();
        if dist.len() != rows || n.len() != rows || sims.iter().any(|c| c.len() != rows) {
            return Err(Error::Format("variogram table columns have unequal lengths".into()));
        }
        if sims.iter().flatten().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::Format("variogram table contains negative or non-finite gamma".into()));
        }
        Ok(Self { lag, dist, n, sims })
    }

    pub fn n_rows(&self) -> usize {
        self.lag.len()
    }

    pub fn n_sims(&self) -> usize {
        self.sims.len()
    }

    /// Simulation `j` as an empirical variogram (Matheron estimates).
    pub fn column_variogram(&self, j: usize) -> Result<EmpiricalVariogram> {
        let col = self
            .sims
            .get(j)
            .ok_or_else(|| Error::Precondition(format!("no simulation column {}", j + 1)))?;
        let bins = (0..self.n_rows())
            .filter(|&i| self.n[i] > 0)
            .map(|i| VariogramBin {
                lag_center: self.dist[i],
                mean_pair_distance: self.dist[i],
                gamma_hat: Some(col[i]),
                n_pairs: self.n[i],
            })
            .collect();
        Ok(EmpiricalVariogram {
            bins,
            estimator: Estimator::Matheron,
            direction: None,
            max_dist: self.dist.last().copied().unwrap_or(0.0),
            zero_distance_pairs: 0,
            failed_bins: 0,
        })
    }
}

/// Matheron variograms of every column of `batch` on shared bins; bins
/// without pairs are dropped.
pub fn variogram_table_from_batch(batch: &SimBatch, bin_edges: &[f64]) -> Result<VariogramTable> {
    let pairs = PairBins::new(&batch.coords, batch.dim, bin_edges, None)?;
    let keep: Vec<usize> = (0..pairs.n_bins()).filter(|&k| pairs.n_pairs(k) > 0).collect();
    let lag = keep.iter().map(|k| k + 1).collect();
    let dist = keep.iter().map(|&k| pairs.mean_distance(k)).collect();
    let n = keep.iter().map(|&k| pairs.n_pairs(k)).collect();
    let sims = (0..batch.n_sims())
        .into_par_iter()
        .map(|j| {
            let v = pairs.estimate(&batch.column(j), Estimator::Matheron)?;
            Ok(keep.iter().map(|&k| v.bins[k].gamma_hat.unwrap_or(0.0)).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    VariogramTable::new(lag, dist, n, sims)
}

/// Empirical variograms of `n_sims` simulated fields on `coords`, either
/// unconditional or conditioned on `data` around the data mean.
#[allow(clippy::too_many_arguments)]
pub fn simulate_variograms(
    coords: &[f64],
    dim: usize,
    spec: &ModelSpec,
    bin_edges: &[f64],
    n_sims: usize,
    seed: u64,
    conditional: bool,
    data: Option<&SpatialDataset>,
) -> Result<VariogramTable> {
    let batch = if conditional {
        let data = data.ok_or_else(|| Error::Precondition("conditional simulation requires data".into()))?;
        let mean = data.values().iter().sum::<f64>() / data.len().max(1) as f64;
        conditional_simulate(coords, dim, spec, data, mean, n_sims, seed)?
    } else {
        simulate_gaussian_field(coords, dim, spec, 0.0, n_sims, seed)?
    };
    variogram_table_from_batch(&batch, bin_edges)
}

/// Parameters of the synthetic survey field: Matérn with nugget 0.0661,
/// sill 2.4523, range 122.79 and ν = 0.5 on the log scale.
pub fn synth_spec() -> ModelSpec {
    ModelSpec::Single(CovarianceSpec::matern(0.0661, 2.4523, 122.79, 0.5).expect("valid constants"))
}

/// Extent `[xmin, xmax, ymin, ymax]` of synthetic surveys.
pub const SYNTH_EXTENT: [f64; 4] = [-150.0, 150.0, -110.0, 110.0];

/// `n` uniform locations in [`SYNTH_EXTENT`] carrying `exp(Z)` for a
/// Gaussian field `Z` with mean `mean` and covariance [`synth_spec`].
pub fn synthetic_lognormal(n: usize, mean: f64, seed: u64) -> Result<SpatialDataset> {
    if n == 0 {
        return Err(Error::Precondition("synthetic dataset needs n >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // locations use a stream no simulation index can reach
    rng.set_stream(u64::MAX);
    let [x0, x1, y0, y1] = SYNTH_EXTENT;
    let coords: Vec<f64> = (0..n)
        .flat_map(|_| {
            let x = x0 + (x1 - x0) * rng.random::<f64>();
            let y = y0 + (y1 - y0) * rng.random::<f64>();
            [x, y]
        })
        .collect();
    let batch = simulate_gaussian_field(&coords, 2, &synth_spec(), mean, 1, seed)?;
    let values = batch.column(0).iter().map(|z| z.exp()).collect();
    SpatialDataset::new_allow_duplicates(2, coords, values)
}
