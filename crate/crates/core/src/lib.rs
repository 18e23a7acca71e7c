//! Desk-scale numerics for rank-2 conformal limits on local surface charts:
//! Hitchin's equation for a diagonal harmonic metric, Białynicki-Birula
//! slice data, Laurent families of connections and their secondary Higgs
//! field, WKB holonomy asymptotics, and the kernel-line identity chain.

pub mod conformal;
pub mod error;
pub mod grid;
pub mod higgs;
pub mod hitchin;
pub mod io;
pub mod kernel_line;
pub mod linalg;
pub mod wkb;

pub use error::{Error, ErrorClass, Result};
