//! Discrete complex-analytic calculus on rectangular charts.

mod domain;
mod field;
pub mod io;
mod matrix;
mod ops;
pub(crate) mod stencil;

pub use domain::{GridDomain, XExtent};
pub use field::ComplexField;
pub use matrix::{FormType, Mat2, MatrixField};
pub use ops::{d_x, d_xx, d_y, d_yy, d_z, d_zbar, dzbar_dz};

/// Convenience alias for [`GridDomain::new`].
pub fn make_domain(nx: usize, ny: usize, x_period: f64, y_min: f64, y_max: f64) -> crate::Result<GridDomain> {
    GridDomain::new(nx, ny, x_period, y_min, y_max)
}
