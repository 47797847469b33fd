//! Least-squares fitting of variogram models to empirical variograms.

use crate::empvario::EmpiricalVariogram;
use crate::error::{Error, Result};
use crate::models::{CovarianceKind, CovarianceModel, CovarianceSpec, ModelSpec, NestedMaternSpec};
use crate::optim::{minimize_bounded, MinimizeOptions};
use crate::sim::VariogramTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Number of jittered restarts tried after a failed first fit.
pub const RESTARTS: usize = 5;
/// Multiplicative half-width of the restart jitter.
pub const RESTART_JITTER: f64 = 0.2;

pub const NESTED_LOWER: [f64; 7] = [0.001; 7];
pub const NESTED_UPPER: [f64; 7] = [10.0, 18.0, 400.0, 40.0, 18.0, 400.0, 40.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMethod {
    Ols,
    Wls,
    Gls,
}

impl FitMethod {
    pub fn name(self) -> &'static str {
        match self {
            FitMethod::Ols => "ols",
            FitMethod::Wls => "wls",
            FitMethod::Gls => "gls",
        }
    }
}

impl std::str::FromStr for FitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ols" => Ok(FitMethod::Ols),
            "wls" => Ok(FitMethod::Wls),
            "gls" => Ok(FitMethod::Gls),
            _ => Err(Error::InvalidSpec(format!("unknown fit method '{s}'"))),
        }
    }
}

/// What is being fitted. Parameters are ordered
/// `(nugget, sill, range[, shape])` for a single family and
/// `(nugget, sill₁, range₁, ν₁, sill₂, range₂, ν₂)` for the nested Matérn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Single(CovarianceKind),
    NestedMatern,
}

impl Family {
    pub fn n_params(self) -> usize {
        match self {
            Family::Single(k) if k.has_shape() => 4,
            Family::Single(_) => 3,
            Family::NestedMatern => 7,
        }
    }

    pub fn build(self, p: &[f64]) -> Result<ModelSpec> {
        if p.len() != self.n_params() {
            return Err(Error::InvalidSpec(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                p.len()
            )));
        }
        match self {
            Family::Single(k) => {
                let shape = k.has_shape().then(|| p[3]);
                Ok(ModelSpec::Single(CovarianceSpec::new(k, p[0], p[1], p[2], shape)?))
            }
            Family::NestedMatern => Ok(ModelSpec::Nested(NestedMaternSpec::from_params(p)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl FitBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Precondition("bound vectors must have equal nonzero length".into()));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::Precondition(format!("bound {i}: need lower < upper, got [{l}, {u}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The nested-Matérn defaults `0.001·1` and `(10, 18, 400, 40, 18, 400, 40)`.
    pub fn nested_matern_default() -> Self {
        Self {
            lower: NESTED_LOWER.to_vec(),
            upper: NESTED_UPPER.to_vec(),
        }
    }

    /// Data-driven bounds for a single family.
    pub fn default_for(family: Family, emp: &EmpiricalVariogram) -> Self {
        let (gmax, dmax) = emp
            .non_empty()
            .fold((0.0f64, 0.0f64), |(g, d), (h, gh, _)| (g.max(gh), d.max(h)));
        let gmax = if gmax > 0.0 { gmax } else { 1.0 };
        let dmax = if dmax > 0.0 { dmax } else { 1.0 };
        match family {
            Family::NestedMatern => Self::nested_matern_default(),
            Family::Single(k) => {
                let mut lower = vec![0.0, 1e-8 * gmax, 1e-6 * dmax];
                let mut upper = vec![10.0 * gmax, 10.0 * gmax, 10.0 * dmax];
                if k.has_shape() {
                    let (l, u) = match k {
                        CovarianceKind::Matern => (0.01, 40.0),
                        CovarianceKind::Stable => (0.01, 2.0),
                        CovarianceKind::Power => (1.0, 20.0),
                        _ => (0.01, 20.0),
                    };
                    lower.push(l);
                    upper.push(u);
                }
                Self { lower, upper }
            }
        }
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.len() && p.iter().zip(&self.lower).zip(&self.upper).all(|((x, l), u)| x >= l && x <= u)
    }

    pub fn clamp(&self, p: &mut [f64]) {
        for ((x, lo), hi) in p.iter_mut().zip(&self.lower).zip(&self.upper) {
            *x = x.clamp(*lo, *hi);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
    pub n_evals: usize,
    pub method: FitMethod,
}

/// Bins as `(h, γ̂, n)`, ordered by distance.
fn sorted_bins(emp: &EmpiricalVariogram) -> Vec<(f64, f64, f64)> {
    let mut bins: Vec<(f64, f64, f64)> = emp.non_empty().map(|(h, g, n)| (h, g, n as f64)).collect();
    bins.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    bins
}

/// The fitting objective `Q(b)`; `+∞` where the model cannot be built or evaluated.
pub fn objective(family: Family, method: FitMethod, params: &[f64], bins: &[(f64, f64, f64)]) -> f64 {
    let Ok(model) = family.build(params) else {
        return f64::INFINITY;
    };
    let mut q = 0.0;
    for &(h, g_hat, n) in bins {
        let Ok(g) = model.variogram(h) else {
            return f64::INFINITY;
        };
        let r = g_hat - g;
        q += match method {
            FitMethod::Ols => r * r,
            // weight² = 1/Var with Var = 2γ²/n
            FitMethod::Wls => r * r * n / (2.0 * g * g),
            // diagonal V: rᵀ V⁻¹ r
            FitMethod::Gls => {
                let v = 2.0 * g * g / n;
                r * (1.0 / v) * r
            }
        };
    }
    if q.is_nan() {
        f64::INFINITY
    } else {
        q
    }
}

fn default_start(family: Family, bins: &[(f64, f64, f64)]) -> Vec<f64> {
    match family {
        Family::NestedMatern => start_values_from_bins(bins).to_vec(),
        Family::Single(k) => {
            let gmax = bins.iter().map(|b| b.1).fold(0.0, f64::max);
            let nugget = if bins.len() >= 2 {
                extrapolated_nugget(bins[0].0, bins[0].1, bins[1].0, bins[1].1).max(0.0)
            } else {
                0.0
            };
            let nugget = nugget.min(0.5 * gmax);
            let sill = (gmax - nugget).max(1e-3 * gmax.max(1e-12));
            let target = nugget + 0.63 * sill;
            let range = bins
                .iter()
                .find(|b| b.1 >= target)
                .or(bins.last())
                .map(|b| b.0)
                .unwrap_or(1.0);
            let mut p = vec![nugget, sill, range];
            if k.has_shape() {
                p.push(match k {
                    CovarianceKind::Matern => 0.5,
                    CovarianceKind::Power => 2.0,
                    _ => 1.0,
                });
            }
            p
        }
    }
}

fn fit_once(
    family: Family,
    method: FitMethod,
    bounds: &FitBounds,
    start: &[f64],
    bins: &[(f64, f64, f64)],
    opts: &MinimizeOptions,
) -> FitResult {
    let r = minimize_bounded(
        |p| objective(family, method, p, bins),
        start,
        bounds.lower(),
        bounds.upper(),
        opts,
    );
    FitResult {
        converged: r.converged() && r.f.is_finite(),
        params: r.x,
        objective: r.f,
        n_evals: r.n_evals,
        method,
    }
}

/// Fits `family` to the non-empty bins of `emp`.
///
/// A failed first attempt is retried from [`RESTARTS`] starts jittered by
/// ±20% using a stream seeded with `jitter_seed`. The best converged result
/// is returned, otherwise the best attempt with `converged = false`.
pub fn fit_variogram_seeded(
    emp: &EmpiricalVariogram,
    family: Family,
    method: FitMethod,
    bounds: &FitBounds,
    start: Option<&[f64]>,
    jitter_seed: u64,
    opts: &MinimizeOptions,
) -> Result<FitResult> {
    let p = family.n_params();
    if bounds.len() != p {
        return Err(Error::Precondition(format!("{} bounds for {p} parameters", bounds.len())));
    }
    let bins = sorted_bins(emp);
    if bins.len() < p {
        return Err(Error::Precondition(format!(
            "{} non-empty bins are too few for {p} parameters",
            bins.len()
        )));
    }
    let start = match start {
        Some(s) => {
            if !bounds.contains(s) {
                return Err(Error::Precondition("start vector lies outside the bounds".into()));
            }
            s.to_vec()
        }
        None => {
            let mut s = default_start(family, &bins);
            bounds.clamp(&mut s);
            s
        }
    };
    let first = fit_once(family, method, bounds, &start, &bins, opts);
    if first.converged {
        return Ok(first);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(jitter_seed);
    let mut best_converged: Option<FitResult> = None;
    let mut best_any = first;
    for _ in 0..RESTARTS {
        let mut s: Vec<f64> = start
            .iter()
            .map(|&v| v * (1.0 + RESTART_JITTER * (2.0 * rng.random::<f64>() - 1.0)))
            .collect();
        bounds.clamp(&mut s);
        let r = fit_once(family, method, bounds, &s, &bins, opts);
        let total = best_any.n_evals + r.n_evals;
        if r.converged && best_converged.as_ref().is_none_or(|b| r.objective < b.objective) {
            best_converged = Some(r.clone());
        }
        if r.objective < best_any.objective {
            best_any = r;
        }
        best_any.n_evals = total;
    }
    Ok(match best_converged {
        Some(mut b) => {
            b.n_evals = best_any.n_evals;
            b
        }
        None => best_any,
    })
}

/// [`fit_variogram_seeded`] with seed 0 and the default optimiser settings.
pub fn fit_variogram(
    emp: &EmpiricalVariogram,
    family: Family,
    method: FitMethod,
    bounds: &FitBounds,
    start: Option<&[f64]>,
) -> Result<FitResult> {
    fit_variogram_seeded(emp, family, method, bounds, start, 0, &MinimizeOptions::default())
}

/// Straight line through the first two bins, evaluated at `h = 0`.
pub fn extrapolated_nugget(h1: f64, g1: f64, h2: f64, g2: f64) -> f64 {
    g1 - (g1 - g2) / (h1 - h2) * h1
}

/// Type-7 sample quantile.
pub(crate) fn quantile7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn start_values_from_bins(bins: &[(f64, f64, f64)]) -> [f64; 7] {
    let g: Vec<f64> = bins.iter().map(|b| b.1).collect();
    let h: Vec<f64> = bins.iter().map(|b| b.0).collect();
    let last = *h.last().unwrap();
    if g.iter().all(|&v| v == g[0]) {
        let q = g[0];
        return [0.01, 0.0, last, 0.5, q, last, 0.5];
    }
    let mut nugget = if g.len() >= 2 {
        extrapolated_nugget(h[0], g[0], h[1], g[1])
    } else {
        0.01
    };
    if nugget < 0.0 {
        nugget = 0.01;
    }
    let n = g.len() as f64;
    let mean = g.iter().sum::<f64>() / n;
    let sill1 = g.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let mut sorted = g.clone();
    sorted.sort_by(f64::total_cmp);
    let sill2 = quantile7(&sorted, 0.75);
    let range_below = |s: f64| {
        h.iter()
            .zip(&g)
            .filter(|(_, &gv)| gv < s)
            .map(|(&hv, _)| hv)
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
            .unwrap_or(last)
    };
    [nugget, sill1, range_below(sill1), 0.5, sill2, range_below(sill2), 0.5]
}

/// Start vector for the nested Matérn fit, from the empirical bins:
/// nugget by linear extrapolation to the origin (negative → 0.01),
/// sill₁ the variance of γ̂, sill₂ its upper quartile, each range the
/// largest bin distance with γ̂ below the corresponding sill, ν₁ = ν₂ = 0.5.
pub fn start_values_nested_matern(emp: &EmpiricalVariogram) -> Result<[f64; 7]> {
    let bins = sorted_bins(emp);
    if bins.len() < 4 {
        return Err(Error::Precondition(format!(
            "{} non-empty bins; at least 4 are needed for start values",
            bins.len()
        )));
    }
    Ok(start_values_from_bins(&bins))
}

/// Fits the nested Matérn to every simulation column of `table`.
pub fn fit_nested_matern_batch(
    table: &VariogramTable,
    method: FitMethod,
    bounds: &FitBounds,
    opts: &MinimizeOptions,
) -> Result<Vec<FitResult>> {
    if bounds.len() != 7 {
        return Err(Error::Precondition(format!("{} bounds for 7 parameters", bounds.len())));
    }
    (0..table.n_sims())
        .into_par_iter()
        .map(|col| {
            let emp = table.column_variogram(col)?;
            let bins = sorted_bins(&emp);
            if bins.len() < 7 {
                return Err(Error::Format(format!(
                    "simulation column {} has {} usable lags, at least 7 needed",
                    col + 1,
                    bins.len()
                )));
            }
            let mut start = start_values_from_bins(&bins);
            bounds.clamp(&mut start);
            fit_variogram_seeded(&emp, Family::NestedMatern, method, bounds, Some(&start), col as u64, opts)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empvario::{Estimator, VariogramBin};

    fn exact_emp(model: &dyn CovarianceModel, hs: &[f64], n: usize) -> EmpiricalVariogram {
        EmpiricalVariogram {
            bins: hs
                .iter()
                .map(|&h| VariogramBin {
                    lag_center: h,
                    mean_pair_distance: h,
                    gamma_hat: Some(model.variogram(h).unwrap()),
                    n_pairs: n,
                })
                .collect(),
            estimator: Estimator::Matheron,
            direction: None,
            max_dist: hs.last().copied().unwrap_or(1.0),
            zero_distance_pairs: 0,
            failed_bins: 0,
        }
    }

    fn grid20() -> Vec<f64> {
        (1..=20).map(|i| 0.4 * i as f64).collect()
    }

    #[test]
    fn recovers_exponential() {
        let truth = CovarianceSpec::exponential(0.0, 1.0, 2.0).unwrap();
        let emp = exact_emp(&truth, &grid20(), 50);
        let fam = Family::Single(CovarianceKind::Exponential);
        let bounds = FitBounds::default_for(fam, &emp);
        for method in [FitMethod::Ols, FitMethod::Wls, FitMethod::Gls] {
            let r = fit_variogram(&emp, fam, method, &bounds, None).unwrap();
            assert!(r.converged, "{method:?}");
            assert!(r.params[0] < 0.01, "{:?}", r.params);
            assert!((r.params[1] - 1.0).abs() < 0.01, "{:?}", r.params);
            assert!((r.params[2] - 2.0).abs() < 0.02, "{:?}", r.params);
        }
    }

    #[test]
    fn diagonal_gls_equals_wls() {
        let bins: Vec<(f64, f64, f64)> = (1..=12).map(|i| (i as f64, 0.2 + 0.1 * i as f64 + 0.03 * (i % 3) as f64, 10.0 + i as f64)).collect();
        let fam = Family::Single(CovarianceKind::Spherical);
        for p in [[0.1, 1.0, 6.0], [0.0, 2.0, 3.0], [0.5, 0.4, 20.0]] {
            let w = objective(fam, FitMethod::Wls, &p, &bins);
            let g = objective(fam, FitMethod::Gls, &p, &bins);
            assert!((w - g).abs() <= 1e-12 * w, "{w} vs {g}");
        }
    }

    #[test]
    fn start_at_optimum_is_fixed_point() {
        let truth = CovarianceSpec::exponential(0.1, 1.0, 2.0).unwrap();
        let emp = exact_emp(&truth, &grid20(), 50);
        let fam = Family::Single(CovarianceKind::Exponential);
        let bounds = FitBounds::default_for(fam, &emp);
        let r = fit_variogram(&emp, fam, FitMethod::Ols, &bounds, Some(&[0.1, 1.0, 2.0])).unwrap();
        assert!(r.converged);
        assert!(r.objective <= 1e-20, "{}", r.objective);
    }

    #[test]
    fn flat_model_ols_equals_wls() {
        // pure nugget data, equal pair counts, and a model flat beyond 0
        let emp = EmpiricalVariogram {
            bins: (1..=10)
                .map(|i| VariogramBin {
                    lag_center: i as f64,
                    mean_pair_distance: i as f64,
                    gamma_hat: Some(1.3),
                    n_pairs: 30,
                })
                .collect(),
            estimator: Estimator::Matheron,
            direction: None,
            max_dist: 10.0,
            zero_distance_pairs: 0,
            failed_bins: 0,
        };
        let fam = Family::Single(CovarianceKind::Spherical);
        let bounds = FitBounds::new(vec![0.0, 1e-9, 1e-6], vec![5.0, 1e-8, 1e-5]).unwrap();
        let a = fit_variogram(&emp, fam, FitMethod::Ols, &bounds, None).unwrap();
        let b = fit_variogram(&emp, fam, FitMethod::Wls, &bounds, None).unwrap();
        assert!((a.params[0] - b.params[0]).abs() < 1e-6, "{:?} {:?}", a.params, b.params);
        assert!((a.params[0] - 1.3).abs() < 1e-6);
    }

    #[test]
    fn start_value_examples() {
        assert_eq!(extrapolated_nugget(1.0, 1.0, 2.0, 2.0), 0.0);
        let emp = |g: Vec<f64>| EmpiricalVariogram {
            bins: g
                .iter()
                .enumerate()
                .map(|(i, &g)| VariogramBin {
                    lag_center: (i + 1) as f64 * 10.0,
                    mean_pair_distance: (i + 1) as f64 * 10.0,
                    gamma_hat: Some(g),
                    n_pairs: 10,
                })
                .collect(),
            estimator: Estimator::Matheron,
            direction: None,
            max_dist: 100.0,
            zero_distance_pairs: 0,
            failed_bins: 0,
        };
        // steep first step extrapolates negative
        let s = start_values_nested_matern(&emp(vec![1.0, 3.0, 3.5, 3.7, 3.8])).unwrap();
        assert_eq!(s[0], 0.01);
        let s = start_values_nested_matern(&emp(vec![2.0; 6])).unwrap();
        assert_eq!(s[0], 0.01);
        assert_eq!(s[2], 60.0);
        assert_eq!(s[5], 60.0);
        let g = vec![0.5, 1.0, 1.4, 1.7, 1.9, 2.0];
        let s = start_values_nested_matern(&emp(g.clone())).unwrap();
        let mean = g.iter().sum::<f64>() / 6.0;
        let var = g.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 5.0;
        assert!((s[1] - var).abs() < 1e-15);
        // type-7 upper quartile of the six values
        assert!((s[4] - 1.85).abs() < 1e-12);
        assert_eq!(s[5], 40.0);
        assert_eq!((s[3], s[6]), (0.5, 0.5));
        assert!(start_values_nested_matern(&emp(vec![1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn nested_exact_recovery() {
        let truth = NestedMaternSpec::from_params(&[0.05, 1.0, 30.0, 0.5, 2.0, 150.0, 1.5]).unwrap();
        let hs: Vec<f64> = (1..=25).map(|i| 8.0 * i as f64).collect();
        let emp = exact_emp(&truth, &hs, 100);
        let r = fit_variogram(
            &emp,
            Family::NestedMatern,
            FitMethod::Ols,
            &FitBounds::nested_matern_default(),
            Some(&[0.04, 1.1, 28.0, 0.55, 1.9, 160.0, 1.4]),
        )
        .unwrap();
        assert!(r.converged);
        let p = &r.params;
        for &(i, t) in [(1usize, 1.0), (2, 30.0), (4, 2.0), (5, 150.0)].iter() {
            assert!((p[i] - t).abs() < 0.05 * t, "param {i}: {} vs {t} ({p:?})", p[i]);
        }
    }

    #[test]
    fn bin_order_does_not_matter() {
        let truth = CovarianceSpec::exponential(0.2, 1.0, 3.0).unwrap();
        let mut emp = exact_emp(&truth, &grid20(), 40);
        for (i, b) in emp.bins.iter_mut().enumerate() {
            b.gamma_hat = b.gamma_hat.map(|g| g * (1.0 + 0.03 * ((i * 5 % 7) as f64 - 3.0)));
        }
        let fam = Family::Single(CovarianceKind::Exponential);
        let bounds = FitBounds::default_for(fam, &emp);
        let a = fit_variogram(&emp, fam, FitMethod::Wls, &bounds, None).unwrap();
        emp.bins.reverse();
        let b = fit_variogram(&emp, fam, FitMethod::Wls, &bounds, None).unwrap();
        assert_eq!(a, b);
    }
}
