use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::branch::{higgs_eigen_branch, wkb_margin};
use super::loops::{pullback_form, Loop};
use crate::error::{Error, Result};
use crate::grid::{FormType, MatrixField};

#[derive(Debug, Clone)]
pub struct LoopSearch {
    /// Horizontal circles tried, evenly spaced inside the chart.
    pub levels: usize,
    /// Random sinusoidal candidates tried after the circles.
    pub sinusoids: usize,
    pub nt: usize,
    /// Required `min Re μ`, relative to `sup ‖Φ‖`.
    pub margin: f64,
    pub seed: u64,
}

impl Default for LoopSearch {
    fn default() -> Self {
        Self {
            levels: 9,
            sinusoids: 16,
            nt: 128,
            margin: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateLoop {
    pub y0: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub reversed: bool,
}

#[derive(Debug, Clone)]
pub struct FoundLoop {
    pub lp: Loop,
    pub margin: f64,
    pub candidate: CandidateLoop,
    /// Candidates examined, including the accepted one.
    pub tried: usize,
}

/// Scans horizontal circles (both orientations), then seeded random
/// sinusoids, for a loop with `min Re μ ≥ margin·sup‖Φ‖`.
pub fn find_wkb_loop(higgs: &MatrixField, opts: &LoopSearch) -> Result<FoundLoop> {
    let d = *higgs.domain();
    let scale = higgs.sup_norm();
    let det_sup = higgs.determinant().sup_norm();
    if !(det_sup > super::branch::DEGENERACY_GATE * scale * scale) {
        return Err(Error::Degenerate(format!(
            "Higgs field is nilpotent on the chart (sup |det| = {det_sup:.3e}); no WKB loop exists"
        )));
    }
    let required = opts.margin * scale;
    let zero = MatrixField::zeros(d, FormType::Dzbar);
    let (lo, hi) = (d.y_min(), d.y_max());
    let span = hi - lo;

    let mut candidates = Vec::new();
    for k in 0..opts.levels {
        let y0 = lo + span * (k + 1) as f64 / (opts.levels + 1) as f64;
        for reversed in [false, true] {
            candidates.push(CandidateLoop {
                y0,
                amplitude: 0.0,
                phase: 0.0,
                reversed,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.sinusoids {
        let y0 = lo + span * rng.gen_range(0.2..0.8);
        let room = (y0 - lo).min(hi - y0) * 0.9;
        candidates.push(CandidateLoop {
            y0,
            amplitude: rng.gen_range(0.0..room),
            phase: rng.gen_range(0.0..TAU),
            reversed: rng.gen_bool(0.5),
        });
    }

    let mut best = f64::NEG_INFINITY;
    for (n, cand) in candidates.into_iter().enumerate() {
        let mut lp = Loop::sinusoid(&d, cand.y0, cand.amplitude, cand.phase, opts.nt)?;
        if cand.reversed {
            lp = lp.reversed();
        }
        let Ok(samples) = pullback_form(higgs, &zero, &lp) else {
            continue;
        };
        let Ok(branch) = higgs_eigen_branch(&samples) else {
            continue;
        };
        if branch.monodromy {
            continue;
        }
        let margin = wkb_margin(&branch.mu);
        best = best.max(margin);
        if margin >= required {
            return Ok(FoundLoop {
                lp,
                margin,
                candidate: cand,
                tried: n + 1,
            });
        }
    }
    Err(Error::LoopNotFound {
        best_margin: best,
        required,
    })
}
