//! Point-referenced observations.

use crate::error::{Error, Result};

/// Observations `z(x_1), …, z(x_n)` at `d`-dimensional locations.
///
/// Coordinates are stored row-major in a flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialDataset {
    dim: usize,
    coords: Vec<f64>,
    values: Vec<f64>,
    label: Option<String>,
}

impl SpatialDataset {
    /// Builds a dataset, rejecting non-finite coordinates and duplicate
    /// locations carrying different values.
    pub fn new(dim: usize, coords: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let ds = Self::new_allow_duplicates(dim, coords, values)?;
        if let Some((i, j)) = ds.conflicting_duplicate() {
            return Err(Error::Precondition(format!(
                "locations {i} and {j} coincide but carry different values"
            )));
        }
        Ok(ds)
    }

    /// Like [`SpatialDataset::new`] but keeps duplicate locations.
    pub fn new_allow_duplicates(dim: usize, coords: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Precondition("spatial dimension must be at least 1".into()));
        }
        if coords.len() != dim * values.len() {
            return Err(Error::Precondition(format!(
                "{} coordinates do not match {} values in dimension {dim}",
                coords.len(),
                values.len()
            )));
        }
        if values.is_empty() {
            return Err(Error::Precondition("empty dataset".into()));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::Precondition(format!(
                "non-finite coordinate for point {}",
                i / dim
            )));
        }
        Ok(Self {
            dim,
            coords,
            values,
            label: None,
        })
    }

    /// Convenience constructor for planar data.
    pub fn from_xy(points: &[(f64, f64)], values: Vec<f64>) -> Result<Self> {
        let coords = points.iter().flat_map(|&(x, y)| [x, y]).collect();
        Self::new(2, coords, values)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn location(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn locations(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Same locations with new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        let mut out = Self::new_allow_duplicates(self.dim, self.coords.clone(), values)?;
        out.label = self.label.clone();
        Ok(out)
    }

    /// Subset by index, preserving the given order.
    pub fn select(&self, indices: &[usize]) -> Option<Self> {
        if indices.is_empty() {
            return None;
        }
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        let mut values = Vec::with_capacity(indices.len());
        for &i in indices {
            coords.extend_from_slice(self.location(i));
            values.push(self.values[i]);
        }
        Some(Self {
            dim: self.dim,
            coords,
            values,
            label: self.label.clone(),
        })
    }

    /// Natural-log transform of the values; all values must be positive.
    pub fn log_transformed(&self) -> Result<Self> {
        if let Some(i) = self.values.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::Precondition(format!(
                "log transform requires positive values; point {i} has {}",
                self.values[i]
            )));
        }
        self.with_values(self.values.iter().map(|v| v.ln()).collect())
    }

    /// Number of points whose location repeats an earlier one.
    pub fn duplicate_count(&self) -> usize {
        (0..self.len())
            .filter(|&j| (0..j).any(|i| self.location(i) == self.location(j)))
            .count()
    }

    fn conflicting_duplicate(&self) -> Option<(usize, usize)> {
        for j in 0..self.len() {
            for i in 0..j {
                if self.location(i) == self.location(j) && self.values[i] != self.values[j] {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

/// Euclidean distance.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_and_empty() {
        assert!(SpatialDataset::new(2, vec![0.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(SpatialDataset::new(2, vec![], vec![]).is_err());
        assert!(SpatialDataset::new(2, vec![f64::NAN, 0.0], vec![1.0]).is_err());
    }

    #[test]
    fn duplicate_rules() {
        let pts = [(0.0, 0.0), (0.0, 0.0)];
        assert!(SpatialDataset::from_xy(&pts, vec![1.0, 2.0]).is_err());
        let ok = SpatialDataset::from_xy(&pts, vec![1.0, 1.0]).unwrap();
        assert_eq!(ok.duplicate_count(), 1);
        let kept =
            SpatialDataset::new_allow_duplicates(2, vec![0.0, 0.0, 0.0, 0.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn log_transform_needs_positive_values() {
        let ds = SpatialDataset::from_xy(&[(0.0, 0.0), (1.0, 0.0)], vec![1.0, 0.0]).unwrap();
        assert!(ds.log_transformed().is_err());
        let ds = SpatialDataset::from_xy(&[(0.0, 0.0), (1.0, 0.0)], vec![1.0, std::f64::consts::E]).unwrap();
        let l = ds.log_transformed().unwrap();
        assert_eq!(l.values()[0], 0.0);
        assert!((l.values()[1] - 1.0).abs() < 1e-15);
    }
}
