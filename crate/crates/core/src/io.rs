//! Readers and writers for the on-disk formats: point CSV, variogram and
//! fit tables, map outputs, the SimBatch binary dump, flat config files and
//! PGM heatmaps. Parsers take bytes so they can be driven directly by fuzzers.

use crate::bayes::{DensityRow, PredictiveDensity};
use crate::data::SpatialDataset;
use crate::empvario::{EmpiricalVariogram, Estimator, VariogramBin};
use crate::error::{Error, Result};
use crate::fit::{FitMethod, FitResult};
use crate::krige::MapEntry;
use crate::sim::{SimBatch, VariogramTable};
use nalgebra::DMatrix;
use std::collections::BTreeMap;
use std::io::Write;

pub const SIMB_MAGIC: &[u8; 4] = b"SIMB";
pub const SIMB_HEADER_LEN: usize = 16;

pub const VARIOGRAM_HEADER: [&str; 4] = ["lag_center", "mean_pair_distance", "gamma_hat", "n_pairs"];
pub const FIT_HEADER: [&str; 9] = ["nugget", "sill1", "range1", "nu1", "sill2", "range2", "nu2", "objective", "converged"];
pub const KRIGE_MAP_HEADER: [&str; 6] = ["x", "y", "prediction", "sd", "n_neighbors", "status"];
pub const DENSITY_MAP_HEADER: [&str; 13] = [
    "x", "y", "Modal", "Median", "Mean", "qq001", "qq005", "qq025", "qq075", "qq095", "qq099", "approxVar", "status",
];
pub const JOINT_DENSITY_HEADER: [&str; 8] = ["nugget", "sill1", "range1", "nue1", "sill2", "range2", "nue2", "dichte"];

fn csv_err(e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
        _ => Error::Format(e.to_string()),
    }
}

fn parse_num(field: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
        row,
        column: column.to_string(),
        message: format!("'{field}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            column: column.to_string(),
            message: format!("'{field}' is not finite"),
        });
    }
    Ok(v)
}

fn parse_count(field: &str, row: usize, column: &str) -> Result<usize> {
    field.trim().parse().map_err(|_| Error::Parse {
        row,
        column: column.to_string(),
        message: format!("'{field}' is not a nonnegative integer"),
    })
}

fn reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(false).from_reader(bytes)
}

fn check_header(rdr: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<()> {
    let h = rdr.headers().map_err(csv_err)?;
    let got: Vec<&str> = h.iter().collect();
    if got.len() < expected.len() || got[..expected.len()] != *expected {
        return Err(Error::Format(format!("expected header '{}', found '{}'", expected.join(","), got.join(","))));
    }
    Ok(())
}

/// Point data with columns `EASTING,NORTHING,VALUE` in any order and any
/// letter case; other columns are ignored. Rows are numbered from 1
/// after the header. Duplicate locations are kept; the second value is
/// their count.
pub fn parse_dataset_csv(bytes: &[u8]) -> Result<(SpatialDataset, usize)> {
    let mut rdr = reader(bytes);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Format(format!("missing column {name}")))
    };
    let cols = [find("EASTING")?, find("NORTHING")?, find("VALUE")?];
    let names = ["EASTING", "NORTHING", "VALUE"];
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        let mut v = [0.0; 3];
        for k in 0..3 {
            let field = rec.get(cols[k]).ok_or_else(|| Error::Parse {
                row,
                column: names[k].into(),
                message: "missing field".into(),
            })?;
            v[k] = parse_num(field, row, names[k])?;
        }
        coords.extend_from_slice(&v[..2]);
        values.push(v[2]);
    }
    if values.is_empty() {
        return Err(Error::Precondition("empty dataset".into()));
    }
    let ds = SpatialDataset::new_allow_duplicates(2, coords, values)?;
    let dups = ds.duplicate_count();
    Ok((ds, dups))
}

/// Reads a point file from disk.
pub fn read_dataset_csv(path: &std::path::Path) -> Result<(SpatialDataset, usize)> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_dataset_csv(&bytes)
}

pub fn write_dataset_csv<W: Write>(out: W, data: &SpatialDataset) -> Result<()> {
    if data.dim() != 2 {
        return Err(Error::Precondition("point CSV holds planar data only".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["EASTING", "NORTHING", "VALUE"]).map_err(csv_err)?;
    for (i, loc) in data.locations().enumerate() {
        w.write_record([loc[0].to_string(), loc[1].to_string(), data.values()[i].to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per bin; empty bins leave `gamma_hat` blank.
pub fn write_variogram_csv<W: Write>(out: W, emp: &EmpiricalVariogram) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(VARIOGRAM_HEADER).map_err(csv_err)?;
    for b in &emp.bins {
        w.write_record([b.lag_center.to_string(), b.mean_pair_distance.to_string(), opt(b.gamma_hat), b.n_pairs.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_variogram_csv`]; the estimator is recorded as Matheron.
pub fn parse_variogram_csv(bytes: &[u8]) -> Result<EmpiricalVariogram> {
    let mut rdr = reader(bytes);
    check_header(&mut rdr, &VARIOGRAM_HEADER)?;
    let mut bins = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(csv_err)?;
        let lag_center = parse_num(&rec[0], row, VARIOGRAM_HEADER[0])?;
        let mean_pair_distance = parse_num(&rec[1], row, VARIOGRAM_HEADER[1])?;
        let gamma_hat = if rec[2].is_empty() {
            None
        } else {
            let g = parse_num(&rec[2], row, VARIOGRAM_HEADER[2])?;
            if g < 0.0 {
                return Err(Error::Parse {
                    row,
                    column: VARIOGRAM_HEADER[2].into(),
                    message: "negative semivariance".into(),
                });
            }
            Some(g)
        };
        let n_pairs = parse_count(&rec[3], row, VARIOGRAM_HEADER[3])?;
        bins.push(VariogramBin {
            lag_center,
            mean_pair_distance,
            gamma_hat,
            n_pairs,
        });
    }
    let max_dist = bins.iter().map(|b| b.mean_pair_distance.max(b.lag_center)).fold(0.0, f64::max);
    Ok(EmpiricalVariogram {
        bins,
        estimator: Estimator::Matheron,
        direction: None,
        max_dist,
        zero_distance_pairs: 0,
        failed_bins: 0,
    })
}

/// Seven nested-Matérn parameters per row, padded for shorter families.
/// Fits that did not converge are written with zero parameters.
pub fn write_fits_csv<W: Write>(out: W, fits: &[FitResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FIT_HEADER).map_err(csv_err)?;
    for f in fits {
        let mut rec: Vec<String> = (0..7)
            .map(|j| if f.converged { f.params.get(j).copied().unwrap_or(0.0) } else { 0.0 }.to_string())
            .collect();
        let obj = if f.converged && f.objective.is_finite() { f.objective } else { 0.0 };
        rec.push(obj.to_string());
        rec.push(f.converged.to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads fit rows; the fitting method is not stored and comes back as OLS.
pub fn parse_fits_csv(bytes: &[u8]) -> Result<Vec<FitResult>> {
    let mut rdr = reader(bytes);
    check_header(&mut rdr, &FIT_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(csv_err)?;
        let params = (0..7).map(|j| parse_num(&rec[j], row, FIT_HEADER[j])).collect::<Result<Vec<_>>>()?;
        let objective = parse_num(&rec[7], row, FIT_HEADER[7])?;
        let converged = match rec[8].to_ascii_lowercase().as_str() {
            "true" => true,
            "false" => false,
            other => {
                return Err(Error::Parse {
                    row,
                    column: FIT_HEADER[8].into(),
                    message: format!("'{other}' is not true or false"),
                })
            }
        };
        out.push(FitResult {
            params,
            objective,
            converged,
            n_evals: 0,
            method: FitMethod::Ols,
        });
    }
    Ok(out)
}

pub fn write_krige_map_csv<W: Write>(out: W, entries: &[MapEntry]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(KRIGE_MAP_HEADER).map_err(csv_err)?;
    for e in entries {
        let (p, sd) = match &e.result {
            Some(r) => (r.prediction.to_string(), r.sd.to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([
            e.location[0].to_string(),
            e.location.get(1).copied().unwrap_or(0.0).to_string(),
            p,
            sd,
            e.n_neighbors.to_string(),
            e.status.as_str().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_variogram_table_csv<W: Write>(out: W, table: &VariogramTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["lag".to_string(), "dist".into(), "n".into()];
    header.extend((1..=table.n_sims()).map(|j| format!("sim{j}")));
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..table.n_rows() {
        let mut rec = vec![table.lag[i].to_string(), table.dist[i].to_string(), table.n[i].to_string()];
        rec.extend(table.sims.iter().map(|c| c[i].to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_variogram_table_csv(bytes: &[u8]) -> Result<VariogramTable> {
    let mut rdr = reader(bytes);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let n_sims = header.len().saturating_sub(3);
    let ok = header.len() >= 3
        && &header[0] == "lag"
        && &header[1] == "dist"
        && &header[2] == "n"
        && (0..n_sims).all(|j| header[j + 3] == format!("sim{}", j + 1));
    if !ok {
        return Err(Error::Format("expected header 'lag,dist,n,sim1,...'".into()));
    }
    let (mut lag, mut dist, mut n) = (Vec::new(), Vec::new(), Vec::new());
    let mut sims = vec![Vec::new(); n_sims];
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(csv_err)?;
        lag.push(parse_count(&rec[0], row, "lag")?);
        dist.push(parse_num(&rec[1], row, "dist")?);
        n.push(parse_count(&rec[2], row, "n")?);
        for (j, col) in sims.iter_mut().enumerate() {
            col.push(parse_num(&rec[j + 3], row, &header[j + 3])?);
        }
    }
    VariogramTable::new(lag, dist, n, sims)
}

pub fn write_density_map_csv<W: Write>(out: W, rows: &[DensityRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DENSITY_MAP_HEADER).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![r.location[0].to_string(), r.location.get(1).copied().unwrap_or(0.0).to_string()];
        match &r.summary {
            Some(s) => rec.extend(
                [s.modal, s.median, s.mean, s.q001, s.q005, s.q025, s.q075, s.q095, s.q099, s.approx_sd]
                    .iter()
                    .map(|v| v.to_string()),
            ),
            None => rec.extend(std::iter::repeat_n(String::new(), 10)),
        }
        rec.push(r.status.as_str().to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `value,density,cdf` on the original scale.
pub fn write_point_density_csv<W: Write>(out: W, d: &PredictiveDensity) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["value", "density", "cdf"]).map_err(csv_err)?;
    for k in 0..d.values.len() {
        w.write_record([d.values[k].to_string(), d.density[k].to_string(), d.cdf[k].to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_joint_density_csv<W: Write>(out: W, rows: &[Vec<f64>], density: &[f64]) -> Result<()> {
    if rows.len() != density.len() {
        return Err(Error::Precondition("rows and densities differ in length".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(JOINT_DENSITY_HEADER).map_err(csv_err)?;
    for (r, d) in rows.iter().zip(density) {
        if r.len() != 7 {
            return Err(Error::Precondition(format!("joint density row has {} parameters, expected 7", r.len())));
        }
        let mut rec: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        rec.push(d.to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `"SIMB"`, `u32` point count, `u32` simulation count, four reserved zero
/// bytes, then the values as little-endian `f64`, column-major.
pub fn encode_simbatch(batch: &SimBatch) -> Result<Vec<u8>> {
    encode_sim_matrix(&batch.values)
}

pub fn encode_sim_matrix(values: &DMatrix<f64>) -> Result<Vec<u8>> {
    let to_u32 = |n: usize, what: &str| u32::try_from(n).map_err(|_| Error::Format(format!("{what} {n} exceeds u32")));
    let np = to_u32(values.nrows(), "point count")?;
    let ns = to_u32(values.ncols(), "simulation count")?;
    let mut out = Vec::with_capacity(SIMB_HEADER_LEN + 8 * values.len());
    out.extend_from_slice(SIMB_MAGIC);
    out.extend_from_slice(&np.to_le_bytes());
    out.extend_from_slice(&ns.to_le_bytes());
    out.extend_from_slice(&[0; 4]);
    // nalgebra storage is column-major already
    for v in values.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Decodes a dump into an `n_points × n_sims` matrix.
pub fn decode_simbatch(bytes: &[u8]) -> Result<DMatrix<f64>> {
    if bytes.len() < SIMB_HEADER_LEN {
        return Err(Error::Format(format!("SimBatch dump has {} bytes, header needs 16", bytes.len())));
    }
    if &bytes[..4] != SIMB_MAGIC {
        return Err(Error::Format("bad SimBatch magic".into()));
    }
    let np = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let ns = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    if bytes[12..16] != [0; 4] {
        return Err(Error::Format("SimBatch reserved header bytes must be zero".into()));
    }
    let payload = &bytes[SIMB_HEADER_LEN..];
    let expected = np
        .checked_mul(ns)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Format("SimBatch dimensions overflow".into()))?;
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "SimBatch payload has {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let vals: Vec<f64> = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok(DMatrix::from_vec(np, ns, vals))
}

/// Flat `key = value` configuration. `#` starts a comment; keys are
/// lowercase identifiers that may contain `_` and `-`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let row = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse {
                    row,
                    column: String::new(),
                    message: format!("expected 'key = value', found '{line}'"),
                });
            };
            let key = k.trim().to_ascii_lowercase();
            let valid = !key.is_empty()
                && key.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
                && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
            if !valid {
                return Err(Error::Parse {
                    row,
                    column: key,
                    message: "invalid key".into(),
                });
            }
            let value = v.trim();
            if value.is_empty() {
                return Err(Error::Parse {
                    row,
                    column: key,
                    message: "empty value".into(),
                });
            }
            if entries.insert(key.clone(), value.to_string()).is_some() {
                return Err(Error::Parse {
                    row,
                    column: key,
                    message: "duplicate key".into(),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn parse_bytes(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::Format(format!("config is not UTF-8: {e}")))?;
        Self::parse(text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| Error::Parse {
                    row: 0,
                    column: key.to_string(),
                    message: format!("'{v}': {e}"),
                })
            })
            .transpose()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Plain-text (P2) grayscale image, row `j` of the grid at the top for
/// the largest `j`. Values map linearly from their range onto 0..=255;
/// missing cells are black.
pub fn write_pgm<W: Write>(mut out: W, values: &[Option<f64>], nx: usize, ny: usize) -> Result<()> {
    if values.len() != nx * ny || nx == 0 || ny == 0 {
        return Err(Error::Precondition(format!("PGM needs {nx}×{ny} cells, got {}", values.len())));
    }
    let finite = values.iter().flatten().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    writeln!(out, "P2\n{nx} {ny}\n255")?;
    for j in (0..ny).rev() {
        let line: Vec<String> = (0..nx)
            .map(|i| {
                // grid points run with x outer, y inner
                match values[i * ny + j] {
                    Some(v) if v.is_finite() => {
                        let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
                        ((t * 255.0).round() as u8).to_string()
                    }
                    _ => "0".to_string(),
                }
            })
            .collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dataset_rows_and_errors() {
        let (d, dups) = parse_dataset_csv(b"easting,Northing,VALUE\n1,2,3\n4,5,6\n7,8.5,9\n").unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(dups, 0);
        assert_eq!(d.location(2), &[7.0, 8.5]);
        let e = parse_dataset_csv(b"EASTING,NORTHING,VALUE\n").unwrap_err();
        assert_eq!(e, Error::Precondition("empty dataset".into()));
        let mut text = String::from("EASTING,NORTHING,VALUE\n");
        for i in 1..=8 {
            let v = if i == 7 { "abc".to_string() } else { i.to_string() };
            text += &format!("{i},{i},{v}\n");
        }
        match parse_dataset_csv(text.as_bytes()).unwrap_err() {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 7);
                assert_eq!(column, "VALUE");
            }
            e => panic!("{e}"),
        }
        assert!(matches!(parse_dataset_csv(b"EASTING,VALUE\n1,2\n").unwrap_err(), Error::Format(_)));
        let (_, dups) = parse_dataset_csv(b"EASTING,NORTHING,VALUE\n1,1,1\n1,1,2\n").unwrap();
        assert_eq!(dups, 1);
    }

    #[test]
    fn fits_round_trip_and_failed_rows() {
        let fits = vec![
            FitResult {
                params: vec![0.1, 1.0, 30.0, 0.5, 0.2, 90.0, 1.5],
                objective: 0.25,
                converged: true,
                n_evals: 10,
                method: FitMethod::Ols,
            },
            FitResult {
                params: vec![9.0; 7],
                objective: 3.0,
                converged: false,
                n_evals: 10,
                method: FitMethod::Ols,
            },
        ];
        let mut buf = Vec::new();
        write_fits_csv(&mut buf, &fits).unwrap();
        let back = parse_fits_csv(&buf).unwrap();
        assert_eq!(back[0].params, fits[0].params);
        assert_eq!(back[1].params, vec![0.0; 7]);
        assert!(!back[1].converged);
    }

    #[test]
    fn simbatch_errors() {
        assert!(decode_simbatch(b"SIMB").is_err());
        let mut bad = b"SIMX".to_vec();
        bad.extend_from_slice(&[0; 12]);
        assert!(decode_simbatch(&bad).is_err());
        let mut huge = b"SIMB".to_vec();
        huge.extend_from_slice(&u32::MAX.to_le_bytes());
        huge.extend_from_slice(&u32::MAX.to_le_bytes());
        huge.extend_from_slice(&[0; 4]);
        assert!(decode_simbatch(&huge).is_err());
    }

    #[test]
    fn config_rules() {
        let c = Config::parse("# run\nseed = 7\nradius=50.5 # km\n\nlog = true\n").unwrap();
        assert_eq!(c.get_parsed::<u64>("seed").unwrap(), Some(7));
        assert_eq!(c.get_parsed::<f64>("radius").unwrap(), Some(50.5));
        assert_eq!(c.get("missing"), None);
        assert!(Config::parse("seed = 1\nseed = 2\n").is_err());
        assert!(Config::parse("just words\n").is_err());
        assert!(Config::parse("1x = 3\n").is_err());
        assert!(Config::parse("x =\n").is_err());
    }

    #[test]
    fn pgm_layout() {
        let mut buf = Vec::new();
        write_pgm(&mut buf, &[Some(0.0), Some(1.0), None, Some(2.0)], 2, 2).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "P2\n2 2\n255\n128 255\n0 0\n");
    }

    proptest! {
        #[test]
        fn simbatch_round_trip(np in 0usize..6, ns in 0usize..6, seed in any::<u64>()) {
            let vals: Vec<f64> = (0..np * ns).map(|k| (seed as f64 + k as f64).sin() * 1e3).collect();
            let m = DMatrix::from_vec(np, ns, vals);
            let bytes = encode_sim_matrix(&m).unwrap();
            prop_assert_eq!(bytes.len(), 16 + 8 * np * ns);
            prop_assert_eq!(decode_simbatch(&bytes).unwrap(), m);
        }

        #[test]
        fn dataset_round_trip(pts in proptest::collection::vec((-1e6f64..1e6, -1e6f64..1e6, -1e3f64..1e3), 1..20)) {
            let xy: Vec<(f64, f64)> = pts.iter().map(|p| (p.0, p.1)).collect();
            let ds = SpatialDataset::new_allow_duplicates(2, xy.iter().flat_map(|p| [p.0, p.1]).collect(), pts.iter().map(|p| p.2).collect()).unwrap();
            let mut buf = Vec::new();
            write_dataset_csv(&mut buf, &ds).unwrap();
            let (back, _) = parse_dataset_csv(&buf).unwrap();
            prop_assert_eq!(back.coords(), ds.coords());
            prop_assert_eq!(back.values(), ds.values());
        }

        #[test]
        fn parsers_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            let _ = parse_dataset_csv(&bytes);
            let _ = parse_variogram_csv(&bytes);
            let _ = parse_fits_csv(&bytes);
            let _ = parse_variogram_table_csv(&bytes);
            let _ = decode_simbatch(&bytes);
            let _ = Config::parse_bytes(&bytes);
        }
    }
}
