use crate::output::Outputs;
use crate::{BinArgs, Cli, Command, GridArgs, ModelArgs};
use geobayes::bayes::{density_map, predictive_density_at, DensityConfig, DensityStatus, Integration, PosteriorDraws};
use geobayes::copula::fit_copula_mle;
use geobayes::empvario::{empirical_variogram, uniform_edges, Direction, EmpiricalVariogram, Estimator, DEFAULT_HUBER_C};
use geobayes::fit::{fit_nested_matern_batch, fit_variogram, Family, FitBounds, FitMethod};
use geobayes::io::{self, Config};
use geobayes::krige::{krige_map, BayesPrior, KrigingMethod, MapStatus, TrendBasis, DEFAULT_MIN_NEIGHBORS};
use geobayes::models::ModelSpec;
use geobayes::optim::MinimizeOptions;
use geobayes::sim::{conditional_simulate, simulate_gaussian_field, simulate_variograms, synthetic_lognormal, variogram_table_from_batch, Grid};
use geobayes::{CovarianceKind, Error, SpatialDataset};
use nalgebra::{DMatrix, DVector};
use std::path::{Path, PathBuf};
use std::str::FromStr;

const DEFAULT_SYNTH_N: usize = 200;
const DEFAULT_SYNTH_MEAN: f64 = 1.0;
const DEFAULT_VARIOGRAM_BINS: usize = 15;
const DEFAULT_SIM_BINS: usize = 20;
const DEFAULT_SIM_MAX_DIST: f64 = 200.0;
const DEFAULT_PRIOR_MEAN: f64 = 0.0;
const DEFAULT_PRIOR_VAR: f64 = 10000.0;
const DEFAULT_DENSITY_RADIUS: f64 = 40.0;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn user(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn numeric(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self {
            code: if e.is_numeric() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::user(format!("i/o error: {e}"))
    }
}

type Res<T> = std::result::Result<T, CliError>;

/// Flag values with config-file fallback.
struct Settings {
    cfg: Config,
}

impl Settings {
    fn raw(&self, key: &str) -> Option<&str> {
        self.cfg.get(key).or_else(|| self.cfg.get(&key.replace('_', "-")))
    }

    fn get<T: FromStr>(&self, cli: Option<T>, key: &str) -> Res<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if cli.is_some() {
            return Ok(cli);
        }
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::user(format!("config key '{key}': '{v}': {e}"))))
            .transpose()
    }

    fn or<T: FromStr>(&self, cli: Option<T>, key: &str, default: T) -> Res<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(cli, key)?.unwrap_or(default))
    }

    fn flag(&self, cli: bool, key: &str) -> Res<bool> {
        if cli {
            return Ok(true);
        }
        match self.raw(key) {
            None => Ok(false),
            Some(v) => v.parse::<bool>().map_err(|_| CliError::user(format!("config key '{key}': expected true or false"))),
        }
    }

    fn seed(&self, cli: Option<u64>) -> Res<u64> {
        self.get(cli, "seed")?.ok_or_else(|| CliError::user("this command is stochastic and needs --seed"))
    }

    fn grid(&self, args: &GridArgs) -> Res<Option<Grid>> {
        let vals = match &args.grid {
            Some(v) => v.clone(),
            None => match self.raw("grid") {
                None => return Ok(None),
                Some(s) => s
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| CliError::user(format!("config key 'grid': bad number '{t}'"))))
                    .collect::<Res<Vec<_>>>()?,
            },
        };
        if vals.len() != 6 {
            return Err(CliError::user("--grid takes NX NY XMIN XMAX YMIN YMAX"));
        }
        let count = |v: f64, name: &str| {
            if v >= 1.0 && v.fract() == 0.0 && v <= 1e7 {
                Ok(v as usize)
            } else {
                Err(CliError::user(format!("grid {name} must be a positive integer, got {v}")))
            }
        };
        let (nx, ny) = (count(vals[0], "NX")?, count(vals[1], "NY")?);
        Ok(Some(Grid::rect_inclusive(vals[2], vals[3], vals[4], vals[5], nx, ny)?))
    }

    fn model(&self, args: &ModelArgs) -> Res<Option<ModelSpec>> {
        let text = if let Some(m) = &args.model {
            m.clone()
        } else if let Some(p) = &args.model_file {
            read_text(p)?
        } else if let Some(m) = self.raw("model") {
            m.to_string()
        } else if let Some(p) = self.raw("model_file") {
            read_text(Path::new(p))?
        } else {
            return Ok(None);
        };
        Ok(Some(text.trim().parse::<ModelSpec>()?))
    }

    fn path(&self, cli: &Option<PathBuf>, key: &str) -> Res<PathBuf> {
        cli.clone()
            .or_else(|| self.raw(key).map(PathBuf::from))
            .ok_or_else(|| CliError::user(format!("missing --{key}")))
    }
}

fn read_text(p: &Path) -> Res<String> {
    std::fs::read_to_string(p).map_err(|e| CliError::user(format!("{}: {e}", p.display())))
}

fn read_bytes(p: &Path) -> Res<Vec<u8>> {
    std::fs::read(p).map_err(|e| CliError::user(format!("{}: {e}", p.display())))
}

fn load_data(s: &Settings, input: &Option<PathBuf>, log: bool) -> Res<SpatialDataset> {
    let path = s.path(input, "input")?;
    let (data, dups) = io::read_dataset_csv(&path)?;
    if dups > 0 {
        eprintln!("warning: {dups} rows share a location with an earlier row");
    }
    if s.flag(log, "log")? {
        Ok(data.log_transformed()?)
    } else {
        Ok(data)
    }
}

fn parse_point(text: &str) -> Res<Vec<f64>> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::user(format!("--at expects x,y, got '{text}'")));
    }
    parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::user(format!("--at: bad coordinate '{p}'")))
        })
        .collect()
}

fn max_pair_distance(data: &SpatialDataset) -> f64 {
    let mut m = 0.0f64;
    for i in 0..data.len() {
        for j in i + 1..data.len() {
            m = m.max(geobayes::data::distance(data.location(i), data.location(j)));
        }
    }
    m
}

fn edges(s: &Settings, b: &BinArgs, default_bins: usize, default_max: f64) -> Res<Vec<f64>> {
    let n = s.or(b.bins, "bins", default_bins)?;
    let max = s.or(b.max_dist, "max_dist", default_max)?;
    if n == 0 || !(max > 0.0 && max.is_finite()) {
        return Err(CliError::user("need --bins >= 1 and a positive --max-dist"));
    }
    Ok(uniform_edges(max, n))
}

fn to_bytes<F: FnOnce(&mut Vec<u8>) -> geobayes::Result<()>>(f: F) -> Res<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

pub fn run(cli: Cli) -> Res<Vec<PathBuf>> {
    let cfg = match &cli.config {
        Some(p) => Config::parse_bytes(&read_bytes(p)?)?,
        None => Config::default(),
    };
    let s = Settings { cfg };
    let dir = cli.out.clone().or_else(|| s.raw("out").map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."));
    let mut out = Outputs::new(&dir)?;
    match &cli.command {
        Command::Synth { n, mean } => {
            let seed = s.seed(cli.seed)?;
            let n = s.or(*n, "n", DEFAULT_SYNTH_N)?;
            let mean = s.or(*mean, "mean", DEFAULT_SYNTH_MEAN)?;
            let data = synthetic_lognormal(n, mean, seed)?;
            out.write("synth.csv", &to_bytes(|b| io::write_dataset_csv(b, &data))?)?;
        }
        Command::Variogram {
            input,
            log,
            bins,
            estimator,
            huber_c,
            direction,
            tolerance,
        } => {
            let data = load_data(&s, input, *log)?;
            let e = edges(&s, bins, DEFAULT_VARIOGRAM_BINS, 0.5 * max_pair_distance(&data))?;
            let est = match s.or(estimator.clone(), "estimator", "matheron".to_string())?.to_ascii_lowercase().as_str() {
                "matheron" => Estimator::Matheron,
                "cressie" | "cressie_hawkins" => Estimator::CressieHawkins,
                "huber" => Estimator::Huber {
                    c: s.or(*huber_c, "huber_c", DEFAULT_HUBER_C)?,
                },
                other => return Err(CliError::user(format!("unknown estimator '{other}'"))),
            };
            let dir = match s.get(*direction, "direction")? {
                None => None,
                Some(deg) => {
                    let mut d = Direction::new(deg.to_radians());
                    if let Some(t) = s.get(*tolerance, "tolerance")? {
                        d.tolerance = t.to_radians();
                    }
                    Some(d)
                }
            };
            let emp = empirical_variogram(&data, &e, est, dir)?;
            out.write("variogram.csv", &to_bytes(|b| io::write_variogram_csv(b, &emp))?)?;
        }
        Command::Fit { input, method, family } => {
            let path = s.path(input, "input")?;
            let emp = io::parse_variogram_csv(&read_bytes(&path)?)?;
            let method: FitMethod = s.or(method.clone(), "method", "ols".to_string())?.parse()?;
            let family = parse_family(&s.or(family.clone(), "family", "nested_matern".to_string())?)?;
            let fit = fit_single(&emp, family, method)?;
            out.write("fit.csv", &to_bytes(|b| io::write_fits_csv(b, std::slice::from_ref(&fit)))?)?;
            let spec = family.build(&fit.params)?;
            out.write("model.txt", format!("{spec}\n").as_bytes())?;
        }
        Command::Krige {
            input,
            log,
            model,
            method,
            grid,
            at,
            at_data,
            radius,
            min_neighbors,
            mean,
            trend,
            prior_mean,
            prior_var,
            pgm,
        } => {
            let data = load_data(&s, input, *log)?;
            let spec = s.model(model)?.ok_or_else(|| CliError::user("krige needs --model or --model-file"))?;
            let grid_pts = s.grid(grid)?;
            let at = s.get(at.clone(), "at")?;
            let choices = grid_pts.is_some() as u8 + at.is_some() as u8 + *at_data as u8;
            if choices != 1 {
                return Err(CliError::user("give exactly one of --grid, --at, --at-data"));
            }
            let locations: Vec<f64> = if let Some(g) = &grid_pts {
                g.coords().to_vec()
            } else if let Some(a) = &at {
                parse_point(a)?
            } else {
                data.coords().to_vec()
            };
            let kind = s.or(method.clone(), "method", "ordinary".to_string())?.to_ascii_lowercase();
            let trend_name = trend.clone().or_else(|| s.raw("trend").map(String::from));
            let basis = |default: &str| parse_trend(trend_name.as_deref().unwrap_or(default));
            let km = match kind.as_str() {
                "simple" => {
                    let m = s.get(*mean, "mean")?.unwrap_or_else(|| data.values().iter().sum::<f64>() / data.len() as f64);
                    KrigingMethod::Simple { mean: m }
                }
                "ordinary" => KrigingMethod::Ordinary,
                "universal" => KrigingMethod::Universal { basis: basis("linear")? },
                "bayes" => {
                    let b = basis("constant")?;
                    let pm = s.or(*prior_mean, "prior_mean", DEFAULT_PRIOR_MEAN)?;
                    let pv = s.or(*prior_var, "prior_var", DEFAULT_PRIOR_VAR)?;
                    let mut mu = DVector::zeros(b.len());
                    mu[0] = pm;
                    let prior = BayesPrior::new(mu, DMatrix::identity(b.len(), b.len()) * pv)?;
                    KrigingMethod::Bayes { basis: b, prior }
                }
                other => return Err(CliError::user(format!("unknown kriging method '{other}'"))),
            };
            let r = s.or(*radius, "radius", f64::INFINITY)?;
            let mn = s.or(*min_neighbors, "min_neighbors", DEFAULT_MIN_NEIGHBORS)?;
            let entries = krige_map(&locations, &data, &spec, &km, r, mn);
            out.write("krige.csv", &to_bytes(|b| io::write_krige_map_csv(b, &entries))?)?;
            if s.flag(*pgm, "pgm")? {
                let g = grid_pts.as_ref().ok_or_else(|| CliError::user("--pgm needs --grid"))?;
                let (nx, ny) = g.shape().expect("rectangular grid");
                let vals: Vec<Option<f64>> = entries
                    .iter()
                    .map(|e| e.result.as_ref().filter(|_| e.status == MapStatus::Ok).map(|r| r.prediction))
                    .collect();
                out.write("krige.pgm", &to_bytes(|b| io::write_pgm(b, &vals, nx, ny))?)?;
            }
        }
        Command::Simulate {
            input,
            log,
            model,
            grid,
            n_sims,
            mean,
            conditional,
            bins,
        } => {
            let seed = s.seed(cli.seed)?;
            let spec = s.model(model)?.ok_or_else(|| CliError::user("simulate needs --model or --model-file"))?;
            let n_sims = s.or(*n_sims, "n_sims", geobayes::sim::DEFAULT_N_SIMS)?;
            let conditional = s.flag(*conditional, "conditional")?;
            let has_input = input.is_some() || s.raw("input").is_some();
            let data = if has_input { Some(load_data(&s, input, *log)?) } else { None };
            let coords: Vec<f64> = match (s.grid(grid)?, &data) {
                (Some(g), _) => g.coords().to_vec(),
                (None, Some(d)) => d.coords().to_vec(),
                (None, None) => return Err(CliError::user("simulate needs --grid or --input")),
            };
            let batch = if conditional {
                let d = data.as_ref().ok_or_else(|| CliError::user("--conditional needs --input"))?;
                let m = s.get(*mean, "mean")?.unwrap_or_else(|| d.values().iter().sum::<f64>() / d.len() as f64);
                conditional_simulate(&coords, 2, &spec, d, m, n_sims, seed)?
            } else {
                simulate_gaussian_field(&coords, 2, &spec, s.or(*mean, "mean", 0.0)?, n_sims, seed)?
            };
            let e = edges(&s, bins, DEFAULT_SIM_BINS, DEFAULT_SIM_MAX_DIST)?;
            let table = variogram_table_from_batch(&batch, &e)?;
            out.write("sims.simb", &io::encode_simbatch(&batch)?)?;
            out.write("variogram_table.csv", &to_bytes(|b| io::write_variogram_table_csv(b, &table))?)?;
        }
        Command::Posterior {
            input,
            log,
            model,
            n_sims,
            bins,
            method,
            conditional,
        } => {
            let seed = s.seed(cli.seed)?;
            let data = load_data(&s, input, *log)?;
            let e = edges(&s, bins, DEFAULT_SIM_BINS, DEFAULT_SIM_MAX_DIST)?;
            let method: FitMethod = s.or(method.clone(), "method", "ols".to_string())?.parse()?;
            let spec = match s.model(model)? {
                Some(m) => m,
                None => {
                    let emp = empirical_variogram(&data, &e, Estimator::Matheron, None)?;
                    let fit = fit_single(&emp, Family::NestedMatern, method)?;
                    Family::NestedMatern.build(&fit.params)?
                }
            };
            let n_sims = s.or(*n_sims, "n_sims", geobayes::sim::DEFAULT_N_SIMS)?;
            let conditional = s.flag(*conditional, "conditional")?;
            let table = simulate_variograms(data.coords(), 2, &spec, &e, n_sims, seed, conditional, Some(&data))?;
            let fits = fit_nested_matern_batch(&table, method, &FitBounds::nested_matern_default(), &MinimizeOptions::default())?;
            let ok = fits.iter().filter(|f| f.converged).count();
            if ok == 0 {
                return Err(CliError::numeric("no simulated variogram could be fitted"));
            }
            eprintln!("{ok} of {} fits converged", fits.len());
            out.write("posterior.csv", &to_bytes(|b| io::write_fits_csv(b, &fits))?)?;
            out.write("variogram_table.csv", &to_bytes(|b| io::write_variogram_table_csv(b, &table))?)?;
            out.write("model.txt", format!("{spec}\n").as_bytes())?;
        }
        Command::Density {
            input,
            draws,
            at,
            grid,
            radius,
            min_neighbors,
            prior_mean,
            prior_var,
            integration,
            pgm,
        } => {
            let data = load_data(&s, input, false)?;
            let log_data = data
                .log_transformed()
                .map_err(|e| CliError::user(format!("density models lognormal data: {e}")))?;
            let draws = load_draws(&s, draws)?;
            let mut cfg = DensityConfig::new(
                s.or(*prior_mean, "prior_mean", DEFAULT_PRIOR_MEAN)?,
                s.or(*prior_var, "prior_var", DEFAULT_PRIOR_VAR)?,
                s.or(*radius, "radius", DEFAULT_DENSITY_RADIUS)?,
            );
            cfg.min_neighbors = s.or(*min_neighbors, "min_neighbors", DEFAULT_MIN_NEIGHBORS)?;
            cfg.grid.integration = match s.or(integration.clone(), "integration", "forward".to_string())?.as_str() {
                "forward" => Integration::Forward,
                "trapezoid" => Integration::Trapezoid,
                other => return Err(CliError::user(format!("unknown integration rule '{other}'"))),
            };
            let at = s.get(at.clone(), "at")?;
            let g = s.grid(grid)?;
            match (at, g) {
                (Some(a), None) => {
                    let x0 = parse_point(&a)?;
                    let d = predictive_density_at(&x0, &log_data, &draws, &cfg)?.ok_or_else(|| {
                        CliError::user(format!("more than {} data points needed within radius {}", cfg.min_neighbors, cfg.radius))
                    })?;
                    out.write("density_point.csv", &to_bytes(|b| io::write_point_density_csv(b, &d))?)?;
                }
                (None, Some(g)) => {
                    let rows = density_map(g.coords(), &log_data, &draws, &cfg)?;
                    out.write("density_map.csv", &to_bytes(|b| io::write_density_map_csv(b, &rows))?)?;
                    if s.flag(*pgm, "pgm")? {
                        let (nx, ny) = g.shape().expect("rectangular grid");
                        let vals: Vec<Option<f64>> = rows
                            .iter()
                            .map(|r| r.summary.filter(|_| r.status == DensityStatus::Ok).map(|x| x.median))
                            .collect();
                        out.write("density.pgm", &to_bytes(|b| io::write_pgm(b, &vals, nx, ny))?)?;
                    }
                }
                _ => return Err(CliError::user("give exactly one of --at, --grid")),
            }
        }
        Command::CopulaFit { draws } => {
            let draws = load_draws(&s, draws)?;
            let fit = fit_copula_mle(&draws)?;
            if !fit.converged {
                eprintln!("warning: copula fit unreliable ({} of {} rows dropped)", fit.dropped, fit.n_rows);
            }
            let summary = format!(
                "family=frank theta={} loglik={} converged={} dropped={} rows={}\n",
                fit.theta, fit.loglik, fit.converged, fit.dropped, fit.n_rows
            );
            let rows: Vec<Vec<f64>> = draws.rows().iter().map(|r| r.to_vec()).collect();
            let dens = geobayes::copula::joint_density(&fit, &rows)?;
            out.write("copula.txt", summary.as_bytes())?;
            out.write("joint_density.csv", &to_bytes(|b| io::write_joint_density_csv(b, &rows, &dens))?)?;
        }
    }
    Ok(out.commit())
}

fn load_draws(s: &Settings, draws: &Option<PathBuf>) -> Res<PosteriorDraws> {
    let path = s.path(draws, "draws")?;
    let fits = io::parse_fits_csv(&read_bytes(&path)?)?;
    let d = PosteriorDraws::from_fits(&fits)?;
    if d.is_empty() {
        return Err(CliError::user(format!("{}: no converged draws", path.display())));
    }
    Ok(d)
}

fn parse_family(name: &str) -> Res<Family> {
    if name.eq_ignore_ascii_case("nested_matern") {
        Ok(Family::NestedMatern)
    } else {
        Ok(Family::Single(name.parse::<CovarianceKind>()?))
    }
}

fn parse_trend(name: &str) -> Res<TrendBasis> {
    match name {
        "constant" => Ok(TrendBasis::constant(2)),
        "linear" => Ok(TrendBasis::linear(2)),
        "quadratic" => Ok(TrendBasis::quadratic_2d()),
        other => Err(CliError::user(format!("unknown trend '{other}'"))),
    }
}

fn fit_single(emp: &EmpiricalVariogram, family: Family, method: FitMethod) -> Res<geobayes::fit::FitResult> {
    let bounds = FitBounds::default_for(family, emp);
    let fit = fit_variogram(emp, family, method, &bounds, None)?;
    if !fit.converged {
        return Err(CliError::numeric(format!("{} variogram fit did not converge", method.name())));
    }
    Ok(fit)
}
