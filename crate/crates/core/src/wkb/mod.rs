//! Loops, eigen branches, path-ordered holonomy and the WKB limit.
//!
//! Holonomy convention: `Hol = Y(1)` for `Y′ = C(t)Y`, `Y(0) = I`, where
//! `C(t)` is the pulled-back connection coefficient.

mod branch;
mod holonomy;
mod loops;
mod search;
pub mod spectral;
mod sweep;

pub use branch::{central_charge, higgs_eigen_branch, is_wkb, wkb_margin, EigenBranch, DEGENERACY_GATE};
pub use holonomy::{expm2, path_ordered_exp, path_ordered_exp_fn, Holonomy};
pub use loops::{pullback_form, pullback_loop, FamilyPullback, Loop, LoopSamples};
pub use search::{find_wkb_loop, CandidateLoop, FoundLoop, LoopSearch};
pub use sweep::{abelian_data, wkb_sweep, wkb_sweep_with, AbelianData, WkbOptions, WkbRow, WkbSweep, SWEEP_HEADER};
