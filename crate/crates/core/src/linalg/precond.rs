use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::banded::BandedLu;
use super::sparse::Csr;
use crate::error::{Error, Result};
use crate::grid::GridDomain;

type C = Complex64;

/// Direct solver for the x-averaged version of a grid operator on a
/// periodic-x chart.
///
/// Each row's couplings are averaged over x with their Fourier phase, which
/// gives one banded `ny × ny` system per x-mode. For operators whose
/// coefficients depend only on `y` this is the exact inverse.
pub struct XAveragedSolver {
    nx: usize,
    ny: usize,
    modes: Vec<BandedLu>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for XAveragedSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("XAveragedSolver").field("nx", &self.nx).field("ny", &self.ny).finish()
    }
}

impl XAveragedSolver {
    pub fn new(domain: &GridDomain, op: &Csr) -> Result<Self> {
        if !domain.is_periodic() {
            return Err(Error::Validation("x-averaged solver needs a periodic-x domain".into()));
        }
        let (nx, ny) = (domain.nx(), domain.ny());
        // (j, j', x-offset) -> averaged coefficient
        let mut avg: BTreeMap<(usize, usize, usize), C> = BTreeMap::new();
        let (mut kl, mut ku) = (0usize, 0usize);
        let inv_nx = 1.0 / nx as f64;
        for r in 0..op.n() {
            let (i, j) = domain.coords(r);
            for (c, v) in op.row(r) {
                let (i2, j2) = domain.coords(c);
                let off = (i2 + nx - i) % nx;
                *avg.entry((j, j2, off)).or_insert(C::new(0.0, 0.0)) += v * inv_nx;
                if j2 < j {
                    kl = kl.max(j - j2);
                } else {
                    ku = ku.max(j2 - j);
                }
            }
        }
        let mut grouped: BTreeMap<(usize, usize), Vec<(usize, C)>> = BTreeMap::new();
        for ((j, j2, off), v) in avg {
            grouped.entry((j, j2)).or_default().push((off, v));
        }
        let modes = (0..nx)
            .into_par_iter()
            .map(|k| {
                let phase = |off: usize| C::from_polar(1.0, TAU * ((k * off) % nx) as f64 / nx as f64);
                let entry = |j: usize, j2: usize| -> C {
                    grouped
                        .get(&(j, j2))
                        .map(|terms| terms.iter().map(|&(off, v)| v * phase(off)).sum())
                        .unwrap_or(C::new(0.0, 0.0))
                };
                BandedLu::factor(ny, kl, ku, entry)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            nx,
            ny,
            modes,
            fwd: planner.plan_fft_forward(nx),
            inv: planner.plan_fft_inverse(nx),
        })
    }

    pub fn solve(&self, rhs: &[C]) -> Vec<C> {
        let (nx, ny) = (self.nx, self.ny);
        let mut work = rhs.to_vec();
        for row in work.chunks_mut(nx) {
            self.fwd.process(row);
        }
        let cols: Vec<Vec<C>> = (0..nx)
            .into_par_iter()
            .map(|k| {
                let mut col: Vec<C> = (0..ny).map(|j| work[j * nx + k]).collect();
                self.modes[k].solve_in_place(&mut col);
                col
            })
            .collect();
        for (k, col) in cols.into_iter().enumerate() {
            for (j, v) in col.into_iter().enumerate() {
                work[j * nx + k] = v;
            }
        }
        let scale = 1.0 / nx as f64;
        for row in work.chunks_mut(nx) {
            self.inv.process(row);
            row.iter_mut().for_each(|v| *v *= scale);
        }
        work
    }
}
