//! Gamma function and modified Bessel function of the second kind.
//!
//! `K_ν(x)` is computed with Temme's series for `x < 2` and Steed's continued
//! fraction for `x >= 2`, both at a reduced order `μ = ν - round(ν)`, followed
//! by forward recurrence in the order (which is stable for `K`). The
//! recurrence is carried out on rescaled values so that `ln K_ν(x)` stays
//! available even where `K_ν(x)` itself overflows.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Largest order accepted by [`bessel_k`].
pub const MAX_BESSEL_ORDER: f64 = 50.0;

const LANCZOS_G: f64 = 607.0 / 128.0;
const LANCZOS_COEFFS: [f64; 15] = [
    0.999_999_999_999_997_1,
    57.156_235_665_862_92,
    -59.597_960_355_475_49,
    14.136_097_974_741_746,
    -0.491_913_816_097_620_2,
    3.399_464_998_481_189e-5,
    4.652_362_892_704_858e-5,
    -9.837_447_530_487_956e-5,
    1.580_887_032_249_125e-4,
    -2.102_644_417_241_049e-4,
    2.174_396_181_152_126_5e-4,
    -1.643_181_065_367_639e-4,
    8.441_822_398_385_275e-5,
    -2.619_083_840_158_141e-5,
    3.689_918_265_953_162_4e-6,
];

fn lanczos_sum(x: f64) -> f64 {
    // x is the shifted argument (Γ(x + 1))
    let mut acc = LANCZOS_COEFFS[0];
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    acc
}

/// Γ(x) for `x > 0`.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("gamma_fn requires finite x > 0, got {x}")));
    }
    if x == x.floor() && x <= 171.0 {
        // exact factorials for integer arguments
        let mut acc = 1.0;
        let mut k = 2.0;
        while k < x {
            acc *= k;
            k += 1.0;
        }
        return Ok(acc);
    }
    if x < 0.5 {
        return Ok(PI / ((PI * x).sin() * gamma_positive(1.0 - x)));
    }
    Ok(gamma_positive(x))
}

fn gamma_positive(x: f64) -> f64 {
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * lanczos_sum(z)
}

/// ln Γ(x) for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("ln_gamma requires finite x > 0, got {x}")));
    }
    if x < 0.5 {
        return Ok((PI / (PI * x).sin()).ln() - ln_gamma_positive(1.0 - x));
    }
    if x <= 50.0 {
        return Ok(gamma_fn(x)?.ln());
    }
    Ok(ln_gamma_positive(x))
}

fn ln_gamma_positive(x: f64) -> f64 {
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln()
}

// Chebyshev expansions of Γ₁(μ) and Γ₂(μ) on |μ| <= 1/2 (Temme's auxiliary gammas).
const GAM1_CHEB: [f64; 7] = [
    -1.142_022_680_371_168,
    6.516_511_267_073_7e-3,
    3.087_090_173_086e-4,
    -3.470_626_964_9e-6,
    6.943_766_4e-9,
    3.677_95e-11,
    -1.356e-13,
];
const GAM2_CHEB: [f64; 8] = [
    1.843_740_587_300_905,
    -7.685_284_084_478_67e-2,
    1.271_927_136_654_6e-3,
    -4.971_736_704_2e-6,
    -3.312_611_98e-8,
    2.423_096e-10,
    -1.702e-13,
    -1.49e-15,
];

fn chebyshev(coeffs: &[f64], t: f64) -> f64 {
    let (mut d, mut dd) = (0.0, 0.0);
    let t2 = 2.0 * t;
    for c in coeffs.iter().skip(1).rev() {
        let sv = d;
        d = t2 * d - dd + c;
        dd = sv;
    }
    t * d - dd + 0.5 * coeffs[0]
}

/// Returns (Γ₁(μ), Γ₂(μ), 1/Γ(1+μ), 1/Γ(1−μ)).
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let t = 8.0 * mu * mu - 1.0;
    let gam1 = chebyshev(&GAM1_CHEB, t);
    let gam2 = chebyshev(&GAM2_CHEB, t);
    (gam1, gam2, gam2 - mu * gam1, gam2 + mu * gam1)
}

/// `e^x K_μ(x)` and `e^x K_{μ+1}(x)` for `|μ| <= 1/2`.
fn k_pair_scaled(mu: f64, x: f64) -> (f64, f64) {
    const EPS: f64 = 1e-16;
    const MAXIT: usize = 10_000;
    let mu2 = mu * mu;
    let xi = 1.0 / x;
    if x < 2.0 {
        let x2 = 0.5 * x;
        let pimu = PI * mu;
        let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = mu * d;
        let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let e = e.exp();
        let mut p = 0.5 * e / gampl;
        let mut q = 0.5 / (e * gammi);
        let mut c = 1.0;
        let dx = x2 * x2;
        let mut sum1 = p;
        for i in 1..=MAXIT {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - mu2);
            c *= dx / fi;
            p /= fi - mu;
            q /= fi + mu;
            let del = c * ff;
            sum += del;
            sum1 += c * (p - fi * ff);
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        let scale = x.exp();
        (sum * scale, sum1 * 2.0 * xi * scale)
    } else {
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut h = d;
        let mut delh = d;
        let (mut q1, mut q2) = (0.0, 1.0);
        let a1 = 0.25 - mu2;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        for i in 1..=MAXIT {
            let fi = i as f64;
            a -= 2.0 * fi;
            c = -a * c / (fi + 1.0);
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh *= b * d - 1.0;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < EPS {
                break;
            }
        }
        h *= a1;
        let kmu = (PI / (2.0 * x)).sqrt() / s;
        (kmu, kmu * (mu + x + 0.5 - h) * xi)
    }
}

/// `e^x K_ν(x) = mantissa · exp(log_scale)`.
#[derive(Debug, Clone, Copy)]
struct ScaledK {
    mantissa: f64,
    log_scale: f64,
}

fn check_bessel_args(nu: f64, x: f64) -> Result<()> {
    if !nu.is_finite() || !(0.0..=MAX_BESSEL_ORDER).contains(&nu) {
        return Err(Error::Domain(format!(
            "bessel_k order must lie in [0, {MAX_BESSEL_ORDER}], got {nu}"
        )));
    }
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("bessel_k requires finite x > 0, got {x}")));
    }
    if !(1.0 / x).is_finite() {
        return Err(Error::Overflow(format!("bessel_k({nu}, {x}) exceeds the floating range")));
    }
    Ok(())
}

fn bessel_k_scaled_parts(nu: f64, x: f64) -> ScaledK {
    let nl = (nu + 0.5).floor();
    let mu = nu - nl;
    let (mut kmu, mut k1) = k_pair_scaled(mu, x);
    let mut log_scale = 0.0;
    let xi2 = 2.0 / x;
    for i in 1..=(nl as usize) {
        let next = (mu + i as f64) * xi2 * k1 + kmu;
        kmu = k1;
        k1 = next;
        if k1 > 1e250 {
            log_scale += k1.ln();
            kmu /= k1;
            k1 = 1.0;
        }
    }
    ScaledK {
        mantissa: kmu,
        log_scale,
    }
}

/// K_ν(x), the modified Bessel function of the second kind.
///
/// Returns [`Error::Overflow`] when the value exceeds `f64::MAX` (tiny `x`,
/// large `ν`) instead of saturating to infinity.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    check_bessel_args(nu, x)?;
    let parts = bessel_k_scaled_parts(nu, x);
    if parts.log_scale == 0.0 && parts.mantissa.is_finite() {
        let v = parts.mantissa * (-x).exp();
        if v.is_finite() {
            return Ok(v);
        }
    }
    let ln_v = parts.mantissa.ln() + parts.log_scale - x;
    if ln_v >= f64::MAX.ln() || !ln_v.is_finite() {
        return Err(Error::Overflow(format!("bessel_k({nu}, {x}) exceeds the floating range")));
    }
    Ok(ln_v.exp())
}

/// Exponentially scaled `e^x K_ν(x)`.
pub fn bessel_k_scaled(nu: f64, x: f64) -> Result<f64> {
    check_bessel_args(nu, x)?;
    let parts = bessel_k_scaled_parts(nu, x);
    if parts.log_scale == 0.0 && parts.mantissa.is_finite() {
        return Ok(parts.mantissa);
    }
    let ln_v = parts.mantissa.ln() + parts.log_scale;
    if ln_v >= f64::MAX.ln() || !ln_v.is_finite() {
        return Err(Error::Overflow(format!(
            "scaled bessel_k({nu}, {x}) exceeds the floating range"
        )));
    }
    Ok(ln_v.exp())
}

/// ln K_ν(x); finite wherever the arguments are in range.
pub fn ln_bessel_k(nu: f64, x: f64) -> Result<f64> {
    check_bessel_args(nu, x)?;
    let parts = bessel_k_scaled_parts(nu, x);
    Ok(parts.mantissa.ln() + parts.log_scale - x)
}

/// Unit-sill Matérn correlation `u^ν K_ν(u) / (2^{ν-1} Γ(ν))`, equal to 1 at `u = 0`.
pub fn matern_correlation(nu: f64, u: f64) -> Result<f64> {
    if u == 0.0 {
        return Ok(1.0);
    }
    if nu <= 0.0 {
        return Err(Error::Domain(format!("Matérn smoothness must be positive, got {nu}")));
    }
    check_bessel_args(nu, u)?;
    let parts = bessel_k_scaled_parts(nu, u);
    if parts.log_scale == 0.0 {
        let k = parts.mantissa * (-u).exp();
        let un = u.powf(nu);
        if k.is_finite() && un.is_finite() && k > 0.0 {
            let v = un * k / (2f64.powf(nu - 1.0) * gamma_fn(nu)?);
            if v.is_finite() {
                return Ok(v.min(1.0));
            }
        }
    }
    let ln_v = nu * u.ln() + parts.mantissa.ln() + parts.log_scale - u
        - (nu - 1.0) * std::f64::consts::LN_2
        - ln_gamma(nu)?;
    if ln_v.is_nan() {
        return Err(Error::Numeric(format!("Matérn correlation undefined at nu={nu}, u={u}")));
    }
    Ok(ln_v.exp().min(1.0))
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}
