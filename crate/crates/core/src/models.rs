//! Stationary covariance and variogram models.
//!
//! Every model is parameterised as `C(h) = c₀·1{h=0} + c·ρ(h/a)` where `ρ` is
//! the unit-sill correlation of the named family, `c₀` the nugget, `c` the
//! sill and `a` the range (scale). The variogram is `γ(h) = C(0) − C(h)` for
//! `h > 0` and `γ(0) = 0`.

use crate::error::{Error, Result};
use crate::specfun::{bessel_k, gamma_fn, matern_correlation};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Upper bound on the Matérn smoothness accepted by [`CovarianceSpec`].
pub const MATERN_MAX_NU: f64 = 40.0;

/// Model families of the catalogue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CovarianceKind {
    Exponential,
    Gaussian,
    Spherical,
    Circular,
    Triangle,
    Cubic,
    Penta,
    Power,
    Stable,
    Wave,
    Cauchy,
    Matern,
}

impl CovarianceKind {
    pub const ALL: [CovarianceKind; 12] = [
        CovarianceKind::Exponential,
        CovarianceKind::Gaussian,
        CovarianceKind::Spherical,
        CovarianceKind::Circular,
        CovarianceKind::Triangle,
        CovarianceKind::Cubic,
        CovarianceKind::Penta,
        CovarianceKind::Power,
        CovarianceKind::Stable,
        CovarianceKind::Wave,
        CovarianceKind::Cauchy,
        CovarianceKind::Matern,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CovarianceKind::Exponential => "exponential",
            CovarianceKind::Gaussian => "gaussian",
            CovarianceKind::Spherical => "spherical",
            CovarianceKind::Circular => "circular",
            CovarianceKind::Triangle => "triangle",
            CovarianceKind::Cubic => "cubic",
            CovarianceKind::Penta => "penta",
            CovarianceKind::Power => "power",
            CovarianceKind::Stable => "stable",
            CovarianceKind::Wave => "wave",
            CovarianceKind::Cauchy => "cauchy",
            CovarianceKind::Matern => "matern",
        }
    }

    /// Whether the family carries a shape parameter.
    pub fn has_shape(self) -> bool {
        matches!(
            self,
            CovarianceKind::Power
                | CovarianceKind::Stable
                | CovarianceKind::Cauchy
                | CovarianceKind::Matern
        )
    }

    /// Key used for the shape parameter in the text form.
    pub fn shape_key(self) -> &'static str {
        match self {
            CovarianceKind::Matern => "nu",
            CovarianceKind::Cauchy => "alpha",
            _ => "shape",
        }
    }
}

impl fmt::Display for CovarianceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CovarianceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        CovarianceKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == lower)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown model kind '{s}'")))
    }
}

/// Anything that provides a stationary isotropic covariance.
pub trait CovarianceModel: Sync {
    /// `C(h)` for a distance `h >= 0`.
    fn covariance(&self, h: f64) -> Result<f64>;

    /// `C(0)`, the total variance including the nugget.
    fn total_variance(&self) -> f64;

    /// Nugget variance `c₀`.
    fn nugget(&self) -> f64;

    /// `γ(h) = C(0) − C(h)` for `h > 0`, `γ(0) = 0`.
    fn variogram(&self, h: f64) -> Result<f64> {
        if h == 0.0 {
            return Ok(0.0);
        }
        Ok(self.total_variance() - self.covariance(h)?)
    }
}

/// A validated member of the model catalogue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceSpec {
    kind: CovarianceKind,
    nugget: f64,
    sill: f64,
    range: f64,
    shape: f64,
}

impl CovarianceSpec {
    /// Validates the constraints of the family. `shape` is required for
    /// matern (ν), cauchy (α), power and stable, and ignored otherwise.
    pub fn new(
        kind: CovarianceKind,
        nugget: f64,
        sill: f64,
        range: f64,
        shape: Option<f64>,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidSpec(format!("{kind}: {msg}")));
        if !(nugget.is_finite() && nugget >= 0.0) {
            return bad(format!("nugget must be >= 0, got {nugget}"));
        }
        if !(sill.is_finite() && sill >= 0.0) {
            return bad(format!("sill must be >= 0, got {sill}"));
        }
        if !(range.is_finite() && range > 0.0) {
            return bad(format!("range must be > 0, got {range}"));
        }
        let shape = if kind.has_shape() {
            let s = match shape {
                Some(s) if s.is_finite() => s,
                Some(s) => return bad(format!("shape must be finite, got {s}")),
                None => return bad(format!("missing {}", kind.shape_key())),
            };
            let ok = match kind {
                CovarianceKind::Matern => s > 0.0 && s <= MATERN_MAX_NU,
                CovarianceKind::Stable => s > 0.0 && s <= 2.0,
                CovarianceKind::Power => s >= 1.0,
                CovarianceKind::Cauchy => s > 0.0,
                _ => unreachable!(),
            };
            if !ok {
                let rule = match kind {
                    CovarianceKind::Matern => "0 < nu <= 40",
                    CovarianceKind::Stable => "0 < shape <= 2",
                    CovarianceKind::Power => "shape >= 1",
                    _ => "alpha > 0",
                };
                return bad(format!("{} = {s} violates {rule}", kind.shape_key()));
            }
            s
        } else {
            0.0
        };
        Ok(Self {
            kind,
            nugget,
            sill,
            range,
            shape,
        })
    }

    pub fn exponential(nugget: f64, sill: f64, range: f64) -> Result<Self> {
        Self::new(CovarianceKind::Exponential, nugget, sill, range, None)
    }

    pub fn gaussian(nugget: f64, sill: f64, range: f64) -> Result<Self> {
        Self::new(CovarianceKind::Gaussian, nugget, sill, range, None)
    }

    pub fn spherical(nugget: f64, sill: f64, range: f64) -> Result<Self> {
        Self::new(CovarianceKind::Spherical, nugget, sill, range, None)
    }

    pub fn matern(nugget: f64, sill: f64, range: f64, nu: f64) -> Result<Self> {
        Self::new(CovarianceKind::Matern, nugget, sill, range, Some(nu))
    }

    pub fn kind(&self) -> CovarianceKind {
        self.kind
    }

    pub fn sill(&self) -> f64 {
        self.sill
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    /// Shape parameter; `None` for families without one.
    pub fn shape(&self) -> Option<f64> {
        self.kind.has_shape().then_some(self.shape)
    }

    /// Largest spatial dimension in which the model is positive definite;
    /// `None` means every dimension.
    pub fn valid_dims(&self) -> Option<usize> {
        match self.kind {
            CovarianceKind::Triangle => Some(1),
            CovarianceKind::Circular => Some(2),
            CovarianceKind::Spherical | CovarianceKind::Cubic | CovarianceKind::Penta => Some(3),
            CovarianceKind::Wave => Some(3),
            // shape >= (d + 1)/2  <=>  d <= 2·shape − 1
            CovarianceKind::Power => Some((2.0 * self.shape - 1.0 + 1e-12).floor() as usize),
            _ => None,
        }
    }

    /// Unit-sill correlation `ρ(h)`.
    pub fn correlation(&self, h: f64) -> Result<f64> {
        let x = h / self.range;
        let compact = |f: &dyn Fn(f64) -> f64| if x < 1.0 { f(x) } else { 0.0 };
        let rho = match self.kind {
            CovarianceKind::Exponential => (-x).exp(),
            CovarianceKind::Gaussian => (-x * x).exp(),
            CovarianceKind::Spherical => compact(&|x| 1.0 - 1.5 * x + 0.5 * x.powi(3)),
            CovarianceKind::Circular => {
                compact(&|x| 2.0 / PI * (x.acos() - x * (1.0 - x * x).sqrt()))
            }
            CovarianceKind::Triangle => compact(&|x| 1.0 - x),
            CovarianceKind::Cubic => compact(&|x| {
                let x2 = x * x;
                1.0 - 7.0 * x2 + 8.75 * x2 * x - 3.5 * x2 * x2 * x + 0.75 * x2 * x2 * x2 * x
            }),
            CovarianceKind::Penta => compact(&|x| {
                let x2 = x * x;
                1.0 - 22.0 / 3.0 * x2 + 33.0 * x2 * x2 - 38.5 * x2 * x2 * x
                    + 16.5 * x.powi(7)
                    - 5.5 * x.powi(9)
                    + 5.0 / 6.0 * x.powi(11)
            }),
            CovarianceKind::Power => compact(&|x| (1.0 - x).powf(self.shape)),
            CovarianceKind::Stable => (-x.powf(self.shape)).exp(),
            CovarianceKind::Wave => {
                if x == 0.0 {
                    1.0
                } else {
                    x.sin() / x
                }
            }
            CovarianceKind::Cauchy => (1.0 + x * x).powf(-self.shape),
            CovarianceKind::Matern => {
                let scale = self.range / (2.0 * self.shape.sqrt());
                matern_correlation(self.shape, h / scale)?
            }
        };
        Ok(rho)
    }
}

impl CovarianceModel for CovarianceSpec {
    fn covariance(&self, h: f64) -> Result<f64> {
        let h = h.abs();
        if h == 0.0 {
            return Ok(self.nugget + self.sill);
        }
        Ok(self.sill * self.correlation(h)?)
    }

    fn total_variance(&self) -> f64 {
        self.nugget + self.sill
    }

    fn nugget(&self) -> f64 {
        self.nugget
    }
}

/// Covariance `C(h)` of a catalogue model; shorthand for [`CovarianceModel::covariance`].
pub fn covariance_eval(spec: &CovarianceSpec, h: f64) -> Result<f64> {
    spec.covariance(h)
}

/// Variogram `γ(h)` of a catalogue model.
pub fn variogram_eval(spec: &CovarianceSpec, h: f64) -> Result<f64> {
    spec.variogram(h)
}

/// Matérn covariance with `a_s = range/(2√ν)`, `u = h/a_s`:
/// `nugget + sill` at `h = 0`, `sill·u^ν K_ν(u)/(2^{ν−1}Γ(ν))` otherwise.
pub fn matern_eval(nugget: f64, sill: f64, range: f64, nu: f64, h: f64) -> Result<f64> {
    CovarianceSpec::matern(nugget, sill, range, nu)?
        .covariance(h)
        .map_err(|e| Error::Numeric(format!("matern(nugget={nugget}, sill={sill}, range={range}, nu={nu}) at h={h}: {e}")))
}

/// True iff the model is positive definite in `dim` dimensions.
pub fn validity_check(spec: &CovarianceSpec, dim: usize) -> bool {
    dim >= 1 && spec.valid_dims().is_none_or(|d| dim <= d)
}

/// Matérn spectral density `φ(α² + ω²)^{−ν−1/2}`.
pub fn matern_spectral_density(phi: f64, alpha: f64, nu: f64, omega: f64) -> f64 {
    phi * (alpha * alpha + omega * omega).powf(-nu - 0.5)
}

/// Covariance paired with [`matern_spectral_density`] under
/// `C(t) = ∫ f(ω) e^{iωt} dω`:
/// `√π φ / (2^{ν−1} Γ(ν+½) α^{2ν}) · (α|t|)^ν K_ν(α|t|)`.
pub fn matern_spectral_covariance(phi: f64, alpha: f64, nu: f64, t: f64) -> Result<f64> {
    let pref = PI.sqrt() * phi / (2f64.powf(nu - 1.0) * gamma_fn(nu + 0.5)? * alpha.powf(2.0 * nu));
    let s = alpha * t.abs();
    if s == 0.0 {
        return Ok(pref * 2f64.powf(nu - 1.0) * gamma_fn(nu)?);
    }
    Ok(pref * s.powf(nu) * bessel_k(nu, s)?)
}

/// One Matérn component of a nested model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaternComponent {
    pub sill: f64,
    pub range: f64,
    pub nu: f64,
}

impl MaternComponent {
    fn scale(&self) -> f64 {
        self.range / (2.0 * self.nu.sqrt())
    }
}

/// Nugget plus two Matérn components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NestedMaternSpec {
    nugget: f64,
    components: [MaternComponent; 2],
}

impl NestedMaternSpec {
    pub fn new(nugget: f64, first: MaternComponent, second: MaternComponent) -> Result<Self> {
        if !(nugget.is_finite() && nugget >= 0.0) {
            return Err(Error::InvalidSpec(format!("nested matern: nugget must be >= 0, got {nugget}")));
        }
        for (i, c) in [first, second].iter().enumerate() {
            let ok = c.sill.is_finite()
                && c.sill >= 0.0
                && c.range.is_finite()
                && c.range > 0.0
                && c.nu > 0.0
                && c.nu <= MATERN_MAX_NU;
            if !ok {
                return Err(Error::InvalidSpec(format!(
                    "nested matern component {}: sill={}, range={}, nu={} out of bounds",
                    i + 1,
                    c.sill,
                    c.range,
                    c.nu
                )));
            }
        }
        Ok(Self {
            nugget,
            components: [first, second],
        })
    }

    /// From the parameter vector `(nugget, sill₁, range₁, ν₁, sill₂, range₂, ν₂)`.
    pub fn from_params(p: &[f64]) -> Result<Self> {
        if p.len() != 7 {
            return Err(Error::InvalidSpec(format!(
                "nested matern needs 7 parameters, got {}",
                p.len()
            )));
        }
        Self::new(
            p[0],
            MaternComponent {
                sill: p[1],
                range: p[2],
                nu: p[3],
            },
            MaternComponent {
                sill: p[4],
                range: p[5],
                nu: p[6],
            },
        )
    }

    pub fn params(&self) -> [f64; 7] {
        let [a, b] = self.components;
        [self.nugget, a.sill, a.range, a.nu, b.sill, b.range, b.nu]
    }

    pub fn components(&self) -> &[MaternComponent; 2] {
        &self.components
    }

    fn component_correlation(c: &MaternComponent, h: f64) -> Result<f64> {
        let u = h / c.scale();
        match matern_correlation(c.nu, u) {
            Ok(v) if v.is_finite() => Ok(v),
            // Kronecker branch for vanishing lag
            _ if u < 1e-12 => Ok(1.0),
            Ok(v) => Err(Error::Numeric(format!(
                "nested matern correlation non-finite ({v}) at h={h}, range={}, nu={}",
                c.range, c.nu
            ))),
            Err(e) => Err(Error::Numeric(format!(
                "nested matern at h={h}, range={}, nu={}: {e}",
                c.range, c.nu
            ))),
        }
    }
}

impl CovarianceModel for NestedMaternSpec {
    fn covariance(&self, h: f64) -> Result<f64> {
        let h = h.abs();
        if h == 0.0 {
            return Ok(self.total_variance());
        }
        let mut acc = 0.0;
        for c in &self.components {
            acc += c.sill * Self::component_correlation(c, h)?;
        }
        Ok(acc)
    }

    fn total_variance(&self) -> f64 {
        self.nugget + self.components[0].sill + self.components[1].sill
    }

    fn nugget(&self) -> f64 {
        self.nugget
    }

}

/// Nested Matérn variogram at `h`.
pub fn nested_matern_variogram(spec: &NestedMaternSpec, h: f64) -> Result<f64> {
    spec.variogram(h)
}

/// Nested Matérn covariance at `h`.
pub fn nested_matern_covariance(spec: &NestedMaternSpec, h: f64) -> Result<f64> {
    spec.covariance(h)
}

/// Either a catalogue model or a nested Matérn model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelSpec {
    Single(CovarianceSpec),
    Nested(NestedMaternSpec),
}

impl CovarianceModel for ModelSpec {
    fn covariance(&self, h: f64) -> Result<f64> {
        match self {
            ModelSpec::Single(s) => s.covariance(h),
            ModelSpec::Nested(n) => n.covariance(h),
        }
    }

    fn total_variance(&self) -> f64 {
        match self {
            ModelSpec::Single(s) => s.total_variance(),
            ModelSpec::Nested(n) => n.total_variance(),
        }
    }

    fn nugget(&self) -> f64 {
        match self {
            ModelSpec::Single(s) => s.nugget,
            ModelSpec::Nested(n) => n.nugget,
        }
    }

    fn variogram(&self, h: f64) -> Result<f64> {
        match self {
            ModelSpec::Single(s) => s.variogram(h),
            ModelSpec::Nested(n) => n.variogram(h),
        }
    }
}

impl ModelSpec {
    pub fn valid_dims(&self) -> Option<usize> {
        match self {
            ModelSpec::Single(s) => s.valid_dims(),
            ModelSpec::Nested(_) => None,
        }
    }
}

impl From<CovarianceSpec> for ModelSpec {
    fn from(s: CovarianceSpec) -> Self {
        ModelSpec::Single(s)
    }
}

impl From<NestedMaternSpec> for ModelSpec {
    fn from(s: NestedMaternSpec) -> Self {
        ModelSpec::Nested(s)
    }
}

/// Formats a float so that it always carries a decimal point and round-trips.
pub(crate) fn fmt_decimal(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') || !v.is_finite() {
        s
    } else {
        format!("{s}.0")
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Single(s) => {
                write!(
                    f,
                    "kind={} nugget={} sill={} range={}",
                    s.kind,
                    fmt_decimal(s.nugget),
                    fmt_decimal(s.sill),
                    fmt_decimal(s.range)
                )?;
                if let Some(shape) = s.shape() {
                    write!(f, " {}={}", s.kind.shape_key(), fmt_decimal(shape))?;
                }
                Ok(())
            }
            ModelSpec::Nested(n) => {
                let p = n.params();
                write!(
                    f,
                    "kind=nested_matern nugget={} sill1={} range1={} nu1={} sill2={} range2={} nu2={}",
                    fmt_decimal(p[0]),
                    fmt_decimal(p[1]),
                    fmt_decimal(p[2]),
                    fmt_decimal(p[3]),
                    fmt_decimal(p[4]),
                    fmt_decimal(p[5]),
                    fmt_decimal(p[6])
                )
            }
        }
    }
}

impl fmt::Display for CovarianceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        ModelSpec::Single(*self).fmt(f)
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    /// Parses the flat `key=value` form, e.g.
    /// `kind=matern nugget=0.0661 sill=2.4523 range=122.79 nu=0.5`.
    /// Field order is free; every number must use a decimal point.
    fn from_str(s: &str) -> Result<Self> {
        let mut fields: Vec<(String, &str)> = Vec::new();
        for token in s.split_whitespace() {
            let (k, v) = token
                .split_once('=')
                .ok_or_else(|| Error::InvalidSpec(format!("expected key=value, got '{token}'")))?;
            let key = k.to_ascii_lowercase();
            if fields.iter().any(|(existing, _)| *existing == key) {
                return Err(Error::InvalidSpec(format!("duplicate key '{key}'")));
            }
            fields.push((key, v));
        }
        let take = |key: &str| fields.iter().find(|(k, _)| k == key).map(|(_, v)| *v);
        let number = |key: &str| -> Result<Option<f64>> {
            match take(key) {
                None => Ok(None),
                Some(v) => {
                    if !v.contains('.') {
                        return Err(Error::InvalidSpec(format!(
                            "value of '{key}' must contain a decimal point, got '{v}'"
                        )));
                    }
                    v.parse::<f64>().map(Some).map_err(|_| {
                        Error::InvalidSpec(format!("value of '{key}' is not a number: '{v}'"))
                    })
                }
            }
        };
        let required = |key: &str| -> Result<f64> {
            number(key)?.ok_or_else(|| Error::InvalidSpec(format!("missing '{key}'")))
        };
        let kind = take("kind").ok_or_else(|| Error::InvalidSpec("missing 'kind'".into()))?;
        let allowed: Vec<&str>;
        let spec = if kind.eq_ignore_ascii_case("nested_matern") {
            allowed = vec!["kind", "nugget", "sill1", "range1", "nu1", "sill2", "range2", "nu2"];
            let p = [
                number("nugget")?.unwrap_or(0.0),
                required("sill1")?,
                required("range1")?,
                required("nu1")?,
                required("sill2")?,
                required("range2")?,
                required("nu2")?,
            ];
            ModelSpec::Nested(NestedMaternSpec::from_params(&p)?)
        } else {
            let kind: CovarianceKind = kind.parse()?;
            let shape_key = kind.shape_key();
            allowed = if kind.has_shape() {
                vec!["kind", "nugget", "sill", "range", shape_key]
            } else {
                vec!["kind", "nugget", "sill", "range"]
            };
            let shape = if kind.has_shape() {
                Some(required(shape_key)?)
            } else {
                None
            };
            ModelSpec::Single(CovarianceSpec::new(
                kind,
                number("nugget")?.unwrap_or(0.0),
                required("sill")?,
                required("range")?,
                shape,
            )?)
        };
        if let Some((k, _)) = fields.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(Error::InvalidSpec(format!("unexpected key '{k}'")));
        }
        Ok(spec)
    }
}
