//! Archimedean copulas and the copula-based joint density of fitted
//! covariance parameters.

use crate::bayes::PosteriorDraws;
use crate::error::{Error, Result};
use crate::fit::quantile7;
use crate::optim::brent_minimize;
use rand::Rng;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Largest share of rows whose log-likelihood term may be non-finite.
pub const MAX_DROPPED_FRACTION: f64 = 0.05;

/// Points of the marginal smoothing grid.
pub const KDE_GRID_POINTS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Clayton,
    Frank,
    Gumbel,
    Joe,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Clayton => "clayton",
            Family::Frank => "frank",
            Family::Gumbel => "gumbel",
            Family::Joe => "joe",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "clayton" => Ok(Family::Clayton),
            "frank" => Ok(Family::Frank),
            "gumbel" => Ok(Family::Gumbel),
            "joe" => Ok(Family::Joe),
            other => Err(Error::InvalidSpec(format!("unknown copula family '{other}'"))),
        }
    }
}

/// Copula family with its dependence parameter. Frank uses the standard
/// form `φ(t) = −log((e^{−θt}−1)/(e^{−θ}−1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopulaSpec {
    family: Family,
    theta: f64,
    dim: usize,
}

impl CopulaSpec {
    pub fn new(family: Family, theta: f64, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidSpec(format!("copula needs at least 2 margins, got {dim}")));
        }
        let ok = theta.is_finite()
            && match family {
                Family::Clayton => theta > 0.0,
                // negative Frank dependence is a copula only in two dimensions
                Family::Frank => theta != 0.0 && (dim == 2 || theta > 0.0),
                Family::Gumbel | Family::Joe => theta >= 1.0,
            };
        if !ok {
            return Err(Error::InvalidSpec(format!("{family} copula: theta {theta} outside its domain (dim {dim})")));
        }
        Ok(Self { family, theta, dim })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

fn check_unit(t: f64) -> Result<()> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("generator argument {t} not in (0, 1]")))
    }
}

fn generator_unchecked(family: Family, theta: f64, t: f64) -> f64 {
    match family {
        Family::Clayton => (t.powf(-theta) - 1.0) / theta,
        Family::Frank => -((-theta * t).exp_m1() / (-theta).exp_m1()).ln(),
        Family::Gumbel => (-t.ln()).powf(theta),
        Family::Joe => -(-(1.0 - t).powf(theta)).ln_1p(),
    }
}

/// Additive generator `φ(t)`.
pub fn generator(spec: &CopulaSpec, t: f64) -> Result<f64> {
    check_unit(t)?;
    Ok(generator_unchecked(spec.family, spec.theta, t))
}

/// `φ⁻¹(s)` for `s ≥ 0`; `+∞` maps to 0.
pub fn generator_inverse(spec: &CopulaSpec, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("generator inverse argument {s} must be nonnegative")));
    }
    let th = spec.theta;
    Ok(match spec.family {
        Family::Clayton => (-(th * s).ln_1p() / th).exp(),
        Family::Frank => -((-s).exp() * (-th).exp_m1()).ln_1p() / th,
        Family::Gumbel => (-s.powf(1.0 / th)).exp(),
        Family::Joe => 1.0 - (-(-s).exp_m1()).powf(1.0 / th),
    })
}

/// `C(u) = φ⁻¹(Σ φ(uᵢ))`.
pub fn copula_cdf(spec: &CopulaSpec, u: &[f64]) -> Result<f64> {
    if u.len() != spec.dim {
        return Err(Error::Precondition(format!("expected {} coordinates, got {}", spec.dim, u.len())));
    }
    if let Some(&bad) = u.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
        return Err(Error::Domain(format!("copula argument {bad} not in [0, 1]")));
    }
    if u.contains(&0.0) {
        return Ok(0.0);
    }
    let s: f64 = u.iter().map(|&x| generator_unchecked(spec.family, spec.theta, x)).sum();
    generator_inverse(spec, s)
}

fn stirling2_row(n: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    for m in 1..=n {
        let mut next = vec![0.0; m + 1];
        for k in 1..=m {
            let prev = if k < m { row[k] } else { 0.0 };
            next[k] = k as f64 * prev + row[k - 1];
        }
        if m == 1 {
            next[0] = 0.0;
        }
        row = next;
    }
    row
}

/// Mixed partial `∂ⁿC/∂u₁…∂uₙ` of the Frank copula written with base `b`,
/// `C = log_b(1 + Π(b^{uᵢ}−1)/(b−1)^{n−1})`. Standard dependence `θ`
/// corresponds to `b = e^{−θ}`.
fn frank_density_log_base(l: f64, u: &[f64]) -> Result<f64> {
    let n = u.len();
    if l == 0.0 {
        return Ok(1.0);
    }
    let bm1 = l.exp_m1();
    let denom = bm1.powi(n as i32 - 1);
    let prod: f64 = u.iter().map(|&x| (l * x).exp_m1()).product();
    let x = prod / denom;
    let sum_u: f64 = u.iter().sum();
    let pref = l.powi(n as i32 - 1) * (l * sum_u).exp() / denom;
    let s = stirling2_row(n);
    let one_x = 1.0 + x;
    let mut acc = 0.0;
    let mut fact = 1.0;
    let mut xpow = 1.0;
    for (k, &s_nk) in s.iter().enumerate().skip(1) {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        acc += sign * fact * s_nk * xpow / one_x.powi(k as i32);
        fact *= k as f64;
        xpow *= x;
    }
    let c = pref * acc;
    if !c.is_finite() {
        return Err(Error::Numeric(format!("non-finite Frank density at base log {l}")));
    }
    Ok(c)
}

fn check_interior(u: &[f64]) -> Result<()> {
    if u.len() < 2 {
        return Err(Error::Precondition("copula density needs at least 2 coordinates".into()));
    }
    if let Some(&bad) = u.iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
        return Err(Error::Domain(format!("density argument {bad} not in (0, 1)")));
    }
    Ok(())
}

/// Frank copula density in the base parameterisation: terms are powers
/// `th^u`, and `th = e^{−θ}` recovers the standard dependence `θ`.
/// Requires `th > 0`, `th ≠ 1`.
pub fn frank_density(th: f64, u: &[f64]) -> Result<f64> {
    if !(th > 0.0 && th.is_finite() && th != 1.0) {
        return Err(Error::Domain(format!("Frank base parameter {th} must be positive and not 1")));
    }
    check_interior(u)?;
    frank_density_log_base(th.ln(), u)
}

/// Frank copula density in the standard parameterisation; `θ = 0` is the
/// independence copula.
pub fn frank_density_standard(theta: f64, u: &[f64]) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::Domain(format!("Frank theta {theta} not finite")));
    }
    check_interior(u)?;
    frank_density_log_base(-theta, u)
}

/// Smoothed marginal distribution of one parameter column.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalEstimate {
    sample: Vec<f64>,
    bandwidth: f64,
    grid: Vec<f64>,
    density: Vec<f64>,
    cdf: Vec<f64>,
    slopes: Vec<f64>,
    degenerate: bool,
}

/// Normal reference bandwidth `0.9 min(sd, IQR/1.34) n^{−1/5}`.
pub fn bandwidth_nrd0(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n < 2 {
        return 1.0;
    }
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let sd = (sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let iqr = quantile7(sorted, 0.75) - quantile7(sorted, 0.25);
    let mut lo = sd.min(iqr / 1.34);
    if lo <= 0.0 {
        lo = if sd > 0.0 {
            sd
        } else if sorted[0] != 0.0 {
            sorted[0].abs()
        } else {
            1.0
        };
    }
    0.9 * lo * (n as f64).powf(-0.2)
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
        return d;
    }
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s * d0 <= 0.0 {
            0.0
        } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    d[0] = end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

impl MarginalEstimate {
    /// Gaussian kernel density on a 512-point grid spanning the sample
    /// widened by three bandwidths. Constant samples are flagged
    /// degenerate with `F ≡ 1` and `f ≡ 1`.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Precondition("marginal needs at least one sample".into()));
        }
        if let Some(bad) = samples.iter().find(|x| !x.is_finite()) {
            return Err(Error::Precondition(format!("non-finite sample {bad}")));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
        if lo == hi {
            return Ok(Self {
                sample: sorted,
                bandwidth: 0.0,
                grid: vec![lo],
                density: vec![1.0],
                cdf: vec![1.0],
                slopes: vec![0.0],
                degenerate: true,
            });
        }
        let bw = bandwidth_nrd0(&sorted);
        let (a, b) = (lo - 3.0 * bw, hi + 3.0 * bw);
        let m = KDE_GRID_POINTS;
        let grid: Vec<f64> = (0..m).map(|k| a + (b - a) * k as f64 / (m - 1) as f64).collect();
        let mut est = Self {
            sample: sorted,
            bandwidth: bw,
            grid,
            density: Vec::new(),
            cdf: Vec::new(),
            slopes: Vec::new(),
            degenerate: false,
        };
        est.density = est.grid.iter().map(|&x| est.kde(x)).collect();
        let total: f64 = est.density.iter().sum();
        let mut acc = 0.0;
        est.cdf = est
            .density
            .iter()
            .map(|d| {
                acc += d;
                (acc / total).min(1.0)
            })
            .collect();
        est.slopes = pchip_slopes(&est.grid, &est.cdf);
        Ok(est)
    }

    fn kde(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let norm = 1.0 / ((2.0 * PI).sqrt() * h * self.sample.len() as f64);
        self.sample.iter().map(|&s| (-0.5 * ((x - s) / h).powi(2)).exp()).sum::<f64>() * norm
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn grid_density(&self) -> &[f64] {
        &self.density
    }

    pub fn grid_cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// Smoothed density at `x`.
    pub fn pdf(&self, x: f64) -> f64 {
        if self.degenerate {
            1.0
        } else {
            self.kde(x)
        }
    }

    /// Monotone cubic interpolant of the cumulative grid density.
    pub fn cdf(&self, x: f64) -> f64 {
        if self.degenerate {
            return 1.0;
        }
        let g = &self.grid;
        let n = g.len();
        if x <= g[0] {
            return if x == g[0] { self.cdf[0] } else { 0.0 };
        }
        if x >= g[n - 1] {
            return 1.0;
        }
        let i = g.partition_point(|&v| v <= x) - 1;
        let h = g[i + 1] - g[i];
        let t = (x - g[i]) / h;
        let (y0, y1, d0, d1) = (self.cdf[i], self.cdf[i + 1], self.slopes[i], self.slopes[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * h * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * h * d1;
        v.clamp(0.0, 1.0)
    }
}

/// Outcome of the Frank maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaFit {
    /// Standard Frank dependence parameter.
    pub theta: f64,
    pub loglik: f64,
    pub converged: bool,
    /// Rows whose log term was non-finite at `theta`.
    pub dropped: usize,
    pub n_rows: usize,
    /// Columns entering the copula; degenerate margins are left out.
    pub active: Vec<usize>,
    pub margins: Vec<MarginalEstimate>,
    /// `(start, loglik)` over the start grid.
    pub starts: Vec<(f64, f64)>,
}

/// Start grid for the dependence parameter; negative values only in two
/// dimensions.
pub fn start_grid(dim: usize) -> Vec<f64> {
    let pos: Vec<f64> = (1..=40).map(|k| 0.5 * k as f64).collect();
    if dim == 2 {
        pos.iter().rev().map(|v| -v).chain(pos.iter().copied()).collect()
    } else {
        pos
    }
}

fn pseudo_observations(columns: &[Vec<f64>], margins: &[MarginalEstimate], active: &[usize]) -> Vec<Vec<f64>> {
    let n = columns[0].len();
    (0..n).map(|t| active.iter().map(|&j| margins[j].cdf(columns[j][t])).collect()).collect()
}

/// `(loglik, dropped)` with terms summed in sorted order.
fn frank_loglik(theta: f64, u: &[Vec<f64>]) -> (f64, usize) {
    let mut terms: Vec<f64> = Vec::with_capacity(u.len());
    let mut dropped = 0;
    for row in u {
        match frank_density_standard(theta, row) {
            Ok(c) if c > 0.0 && c.ln().is_finite() => terms.push(c.ln()),
            _ => dropped += 1,
        }
    }
    terms.sort_by(f64::total_cmp);
    (terms.iter().sum(), dropped)
}

/// Frank MLE over parameter columns. Margins are smoothed first; the
/// log-likelihood of the pseudo-observations is maximised over the start
/// grid, then refined by Brent between the neighbours of the best start.
pub fn fit_frank_columns(columns: &[Vec<f64>]) -> Result<CopulaFit> {
    if columns.is_empty() || columns[0].is_empty() {
        return Err(Error::Precondition("no draws".into()));
    }
    let n = columns[0].len();
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::Precondition("parameter columns differ in length".into()));
    }
    let margins = columns.iter().map(|c| MarginalEstimate::from_samples(c)).collect::<Result<Vec<_>>>()?;
    let active: Vec<usize> = (0..columns.len()).filter(|&j| !margins[j].degenerate).collect();
    if active.len() < 2 {
        return Err(Error::Precondition(format!(
            "copula fit needs at least 2 non-degenerate margins, found {}",
            active.len()
        )));
    }
    let u = pseudo_observations(columns, &margins, &active);
    let grid = start_grid(active.len());
    let starts: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&th| {
            let (ll, _) = frank_loglik(th, &u);
            (th, ll)
        })
        .collect();
    let mut best: Option<usize> = None;
    for (i, &(_, ll)) in starts.iter().enumerate() {
        if ll.is_finite() && best.is_none_or(|b| ll > starts[b].1) {
            best = Some(i);
        }
    }
    let Some(b) = best else {
        return Ok(CopulaFit {
            theta: f64::NAN,
            loglik: f64::NAN,
            converged: false,
            dropped: n,
            n_rows: n,
            active,
            margins,
            starts,
        });
    };
    let lo = if b > 0 {
        starts[b - 1].0
    } else if active.len() == 2 {
        starts[b].0 - 0.5
    } else {
        0.0
    };
    let hi = if b + 1 < starts.len() { starts[b + 1].0 } else { starts[b].0 + 0.5 };
    let (x, fx, _) = brent_minimize(
        |th| {
            let (ll, _) = frank_loglik(th, &u);
            if ll.is_finite() {
                -ll
            } else {
                f64::INFINITY
            }
        },
        lo,
        hi,
        1e-8,
        200,
    );
    let (theta, loglik) = if -fx >= starts[b].1 { (x, -fx) } else { starts[b] };
    let (_, dropped) = frank_loglik(theta, &u);
    Ok(CopulaFit {
        theta,
        loglik,
        converged: (dropped as f64) <= MAX_DROPPED_FRACTION * n as f64,
        dropped,
        n_rows: n,
        active,
        margins,
        starts,
    })
}

/// Frank MLE on the seven parameter columns of the posterior draws.
pub fn fit_copula_mle(draws: &PosteriorDraws) -> Result<CopulaFit> {
    let cols: Vec<Vec<f64>> = (0..7).map(|j| draws.column(j)).collect();
    fit_frank_columns(&cols)
}

/// `c(F₁(v₁), …) Π f_k(v_k)` per row; negative or non-finite values set to 0.
pub fn joint_density(fit: &CopulaFit, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let dim = fit.margins.len();
    rows.iter()
        .map(|r| {
            if r.len() != dim {
                return Err(Error::Precondition(format!("row has {} values, expected {dim}", r.len())));
            }
            let marg: f64 = fit.margins.iter().zip(r).map(|(m, &v)| m.pdf(v)).product();
            if marg == 0.0 {
                return Ok(0.0);
            }
            let u: Vec<f64> = fit.active.iter().map(|&j| fit.margins[j].cdf(r[j])).collect();
            let c = frank_density_standard(fit.theta, &u).unwrap_or(f64::NAN);
            let d = c * marg;
            Ok(if d > 0.0 && d.is_finite() { d } else { 0.0 })
        })
        .collect()
}

/// Bivariate Frank draws by conditional inversion.
pub fn sample_frank_bivariate<R: Rng>(theta: f64, n: usize, rng: &mut R) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let w: f64 = rng.random();
            if theta == 0.0 {
                return (u, w);
            }
            let a = (-theta).exp_m1();
            let e = (-theta * u).exp();
            let v = -(w * a / (w + (1.0 - w) * e)).ln_1p() / theta;
            (u, v)
        })
        .collect()
}
