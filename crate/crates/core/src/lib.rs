//! Persistent homology of Vietoris-Rips filtrations and statistics on
//! persistence landscapes.
//!
//! The pipeline runs matrix → [`rips::Filtration`] → [`persistence::Barcode`]
//! → [`landscape::PersistenceLandscape`], after which landscapes can be
//! averaged, compared with `L^p` distances, reduced to their total area and
//! tested with an exact permutation test, or embedded with PCA and Isomap.

pub mod cycles;
pub mod data;
pub mod embedding;
pub mod f2;
pub mod inference;
pub mod landscape;
pub mod linalg;
pub mod persistence;
pub mod rips;
pub mod rng;

pub use data::{MatrixKind, PointCloud, SquareMatrix};
pub use landscape::{Norm, PersistenceLandscape, PiecewiseLinear};
pub use persistence::{Barcode, PersistenceInterval};
pub use rips::{Filtration, RipsConfig, Simplex};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
