//! Empirical semivariograms: the cloud, binned Matheron and Cressie–Hawkins
//! estimators, Huber's robust fixed-point estimator and directional bins.

use crate::data::{distance, SpatialDataset};
use crate::error::{Error, Result};
use crate::specfun::{normal_cdf, normal_pdf};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Default Huber threshold.
pub const DEFAULT_HUBER_C: f64 = 2.0;

/// Default half-width of a directional window (22.5°).
pub const DEFAULT_ANGLE_TOLERANCE: f64 = PI / 8.0;

const HUBER_MAX_ITER: usize = 1000;
const HUBER_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    Matheron,
    CressieHawkins,
    Huber { c: f64 },
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Matheron => "matheron",
            Estimator::CressieHawkins => "cressie_hawkins",
            Estimator::Huber { .. } => "huber",
        }
    }
}

/// Planar direction window: pairs whose connecting vector lies within
/// `tolerance` of `angle` (both radians, axial so `angle` and `angle + π` agree).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub angle: f64,
    pub tolerance: f64,
}

impl Direction {
    pub fn new(angle: f64) -> Self {
        Self {
            angle,
            tolerance: DEFAULT_ANGLE_TOLERANCE,
        }
    }

    fn admits(&self, a: &[f64], b: &[f64]) -> bool {
        let theta = (b[1] - a[1]).atan2(b[0] - a[0]);
        let diff = (theta - self.angle).rem_euclid(PI);
        diff.min(PI - diff) <= self.tolerance + 1e-12
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPoint {
    pub distance: f64,
    pub half_sq_diff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariogramBin {
    pub lag_center: f64,
    pub mean_pair_distance: f64,
    /// `None` for empty bins and for Huber bins that failed to converge.
    pub gamma_hat: Option<f64>,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalVariogram {
    pub bins: Vec<VariogramBin>,
    pub estimator: Estimator,
    pub direction: Option<Direction>,
    pub max_dist: f64,
    /// Pairs at numerically zero distance, excluded from every bin.
    pub zero_distance_pairs: usize,
    /// Bins whose robust fixed point did not converge.
    pub failed_bins: usize,
}

impl EmpiricalVariogram {
    /// `(mean_pair_distance, gamma_hat, n_pairs)` of every bin with an estimate.
    pub fn non_empty(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        self.bins
            .iter()
            .filter_map(|b| b.gamma_hat.map(|g| (b.mean_pair_distance, g, b.n_pairs)))
    }

    pub fn n_non_empty(&self) -> usize {
        self.non_empty().count()
    }
}

/// One entry per unordered pair with `|xᵢ − xⱼ| ≤ max_dist`.
pub fn variogram_cloud(data: &SpatialDataset, max_dist: f64) -> Result<Vec<CloudPoint>> {
    if !(max_dist > 0.0) {
        return Err(Error::Precondition(format!("max_dist must be > 0, got {max_dist}")));
    }
    let z = data.values();
    let mut out = Vec::new();
    for i in 0..data.len() {
        for j in (i + 1)..data.len() {
            let d = distance(data.location(i), data.location(j));
            if d <= max_dist {
                let dz = z[i] - z[j];
                out.push(CloudPoint {
                    distance: d,
                    half_sq_diff: 0.5 * dz * dz,
                });
            }
        }
    }
    Ok(out)
}

/// `f(c) = E[min(U², c²)]` for standard normal `U`.
pub fn huber_f(c: f64) -> f64 {
    let phi = normal_cdf(c);
    (2.0 * phi - 1.0) - 2.0 * c * normal_pdf(c) + 2.0 * c * c * (1.0 - phi)
}

fn check_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 {
        return Err(Error::Precondition("at least two bin edges are required".into()));
    }
    if edges.iter().any(|e| !e.is_finite() || *e < 0.0) {
        return Err(Error::Precondition("bin edges must be finite and nonnegative".into()));
    }
    if let Some(w) = edges.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition(format!(
            "bin edges must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// Pairs of a fixed location set sorted into distance bins, reusable for
/// any set of values on those locations.
#[derive(Debug, Clone)]
pub struct PairBins {
    edges: Vec<f64>,
    direction: Option<Direction>,
    pairs: Vec<Vec<(usize, usize)>>,
    mean_dist: Vec<f64>,
    n_points: usize,
    zero_distance_pairs: usize,
}

impl PairBins {
    pub fn new(coords: &[f64], dim: usize, edges: &[f64], direction: Option<Direction>) -> Result<Self> {
        check_edges(edges)?;
        if direction.is_some() && dim != 2 {
            return Err(Error::Precondition("directional variograms need planar data".into()));
        }
        let n = coords.len() / dim;
        let nb = edges.len() - 1;
        let zero_tol = 1e-12 * edges[nb].max(1.0);
        let mut pairs = vec![Vec::new(); nb];
        let mut dists: Vec<Vec<f64>> = vec![Vec::new(); nb];
        let mut zero = 0;
        let loc = |i: usize| &coords[i * dim..(i + 1) * dim];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = distance(loc(i), loc(j));
                if d <= zero_tol {
                    zero += 1;
                    continue;
                }
                if d < edges[0] || d >= edges[nb] {
                    continue;
                }
                if let Some(dir) = &direction {
                    if !dir.admits(loc(i), loc(j)) {
                        continue;
                    }
                }
                // first edge strictly above d, minus one
                let k = edges.partition_point(|&e| e <= d) - 1;
                pairs[k].push((i, j));
                dists[k].push(d);
            }
        }
        let mean_dist = dists
            .into_iter()
            .map(|mut ds| {
                if ds.is_empty() {
                    return f64::NAN;
                }
                ds.sort_by(f64::total_cmp);
                ds.iter().sum::<f64>() / ds.len() as f64
            })
            .collect();
        Ok(Self {
            edges: edges.to_vec(),
            direction,
            pairs,
            mean_dist,
            n_points: n,
            zero_distance_pairs: zero,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.pairs.len()
    }

    pub fn n_pairs(&self, bin: usize) -> usize {
        self.pairs[bin].len()
    }

    pub fn mean_distance(&self, bin: usize) -> f64 {
        self.mean_dist[bin]
    }

    pub fn lag_center(&self, bin: usize) -> f64 {
        0.5 * (self.edges[bin] + self.edges[bin + 1])
    }

    /// Estimates every bin for `values` on the indexed locations.
    pub fn estimate(&self, values: &[f64], estimator: Estimator) -> Result<EmpiricalVariogram> {
        if values.len() != self.n_points {
            return Err(Error::Precondition(format!(
                "{} values for {} locations",
                values.len(),
                self.n_points
            )));
        }
        if let Estimator::Huber { c } = estimator {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Precondition(format!("Huber threshold must be > 0, got {c}")));
            }
        }
        let estimates: Vec<(Option<f64>, bool)> = (0..self.n_bins())
            .into_par_iter()
            .map(|k| {
                let pairs = &self.pairs[k];
                if pairs.is_empty() {
                    return (None, false);
                }
                let mut dz: Vec<f64> = pairs.iter().map(|&(i, j)| (values[i] - values[j]).abs()).collect();
                // summation order independent of point order
                dz.sort_by(f64::total_cmp);
                match bin_estimate(&dz, estimator) {
                    Some(g) => (Some(g), false),
                    None => (None, true),
                }
            })
            .collect();
        let failed_bins = estimates.iter().filter(|e| e.1).count();
        let bins = estimates
            .into_iter()
            .enumerate()
            .map(|(k, (g, _))| VariogramBin {
                lag_center: self.lag_center(k),
                mean_pair_distance: self.mean_dist[k],
                gamma_hat: g,
                n_pairs: self.pairs[k].len(),
            })
            .collect();
        Ok(EmpiricalVariogram {
            bins,
            estimator,
            direction: self.direction,
            max_dist: *self.edges.last().unwrap(),
            zero_distance_pairs: self.zero_distance_pairs,
            failed_bins,
        })
    }
}

/// Estimate from sorted absolute differences; `None` if Huber fails.
fn bin_estimate(abs_dz: &[f64], estimator: Estimator) -> Option<f64> {
    let n = abs_dz.len() as f64;
    let matheron = abs_dz.iter().map(|d| 0.5 * d * d).sum::<f64>() / n;
    match estimator {
        Estimator::Matheron => Some(matheron),
        Estimator::CressieHawkins => {
            let m = abs_dz.iter().map(|d| d.sqrt()).sum::<f64>() / n;
            Some(m.powi(4) / (2.0 * (0.457 + 0.494 / n)))
        }
        Estimator::Huber { c } => {
            let fc = huber_f(c);
            let c2 = c * c;
            let mut g = matheron;
            for _ in 0..HUBER_MAX_ITER {
                let next = abs_dz.iter().map(|d| (0.5 * d * d).min(c2 * g)).sum::<f64>() / n / fc;
                if (next - g).abs() <= HUBER_REL_TOL * next.abs() || next == g {
                    return Some(next);
                }
                g = next;
            }
            None
        }
    }
}

/// Binned empirical variogram over `[edge_k, edge_{k+1})`.
pub fn empirical_variogram(
    data: &SpatialDataset,
    bin_edges: &[f64],
    estimator: Estimator,
    direction: Option<Direction>,
) -> Result<EmpiricalVariogram> {
    PairBins::new(data.coords(), data.dim(), bin_edges, direction)?.estimate(data.values(), estimator)
}

/// Huber-type robust variogram solving
/// `Mean[min((zᵢ − zⱼ)²/2, c²γ)] = f(c)·γ` in every bin.
pub fn huber_robust_variogram(data: &SpatialDataset, bin_edges: &[f64], c: f64) -> Result<EmpiricalVariogram> {
    empirical_variogram(data, bin_edges, Estimator::Huber { c }, None)
}

/// `n + 1` equally spaced edges on `[0, max_dist]`.
pub fn uniform_edges(max_dist: f64, n_bins: usize) -> Vec<f64> {
    (0..=n_bins).map(|i| max_dist * i as f64 / n_bins as f64).collect()
}
