pub mod boundary;
pub mod error;
pub mod expr;
pub mod field;
pub mod geodesic;
pub mod jacobi;
pub mod finsler;
pub mod jet;
pub mod ode;
pub mod parallel;
pub mod recovery;
pub mod shooting;
pub mod zermelo;

pub use error::{Error, Result};
pub use field::{MetricField, OneForm, Point, ScalarField, VectorField};
pub use finsler::{Domain, RandersSpec};
