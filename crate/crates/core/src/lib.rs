//! Geostatistics toolkit: stationary covariance models, empirical variogram
//! estimation and fitting, simple/ordinary/universal/Bayes kriging, Gaussian
//! random-field simulation, a simulation-based predictive density for
//! lognormal spatial data, and Archimedean copulas for the joint density of
//! fitted covariance parameters.

// `!(x > 0.0)` style checks reject NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod copula;
pub mod data;
pub mod empvario;
pub mod error;
pub mod fit;
pub mod io;
pub mod krige;
pub mod linalg;
pub mod models;
pub mod optim;
pub mod sim;
pub mod specfun;

pub use data::SpatialDataset;
pub use error::{Error, Result};
pub use models::{CovarianceKind, CovarianceModel, CovarianceSpec, NestedMaternSpec};
