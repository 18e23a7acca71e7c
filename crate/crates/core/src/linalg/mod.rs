//! Sparse assembly and the Krylov/direct solvers behind the elliptic solves.

mod banded;
mod gmres;
mod precond;
mod sparse;

pub use banded::BandedLu;
pub use gmres::{gmres, GmresOptions, GmresOutcome};
pub use precond::XAveragedSolver;
pub use sparse::{Csr, GridOperators};


use crate::grid::GridDomain;

/// Node flags marking the Dirichlet/boundary nodes of `domain`.
pub fn boundary_flags(domain: &GridDomain) -> Vec<bool> {
    (0..domain.len())
        .map(|k| {
            let (i, j) = domain.coords(k);
            domain.is_boundary(i, j)
        })
        .collect()
}
