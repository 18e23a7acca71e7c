use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::branch::{central_charge, higgs_eigen_branch, is_wkb, wkb_margin};
use super::holonomy::path_ordered_exp;
use super::loops::{FamilyPullback, Loop};
use super::spectral;
use crate::conformal::{curvature_residual, LaurentConnectionFamily, CURVATURE_MARGIN};
use crate::error::{Error, Result};
use crate::grid::io::fmt_f64;
use crate::grid::Mat2;

type C = Complex64;

pub const SWEEP_HEADER: [&str; 5] = ["eps", "re_q", "im_q", "abs_dev", "log_abs_trace"];

#[derive(Debug, Clone)]
pub struct WkbOptions {
    /// Minimum integration steps (raised to `⌈20·sup‖C‖⌉` when needed).
    pub substeps: usize,
    /// Refuse the sweep when the family curvature at `r = 1` exceeds this.
    /// `None` only reports it.
    pub curvature_gate: Option<f64>,
}

impl Default for WkbOptions {
    fn default() -> Self {
        Self {
            substeps: 256,
            curvature_gate: None,
        }
    }
}

/// Leading-order abelian data along a WKB loop.
#[derive(Debug, Clone)]
pub struct AbelianData {
    pub mu: Vec<C>,
    pub central_charge: C,
    pub margin: f64,
    /// `A₊(t)`, the `L₊` diagonal entry of the power-0 pullback in the
    /// `μ`-eigenframe.
    pub a_plus: Vec<C>,
    /// `exp(∮A₊)`.
    pub hol_a_plus: C,
    /// Sup of the off-diagonal part `A₀`, reported only.
    pub a0_sup: f64,
}

fn eigenvector_columns(higgs: &[Mat2], mu: &[C], sign: f64) -> Vec<[C; 2]> {
    let first: Vec<[C; 2]> = higgs.iter().zip(mu).map(|(m, &l)| [m[(0, 1)], l * sign - m[(0, 0)]]).collect();
    let second: Vec<[C; 2]> = higgs.iter().zip(mu).map(|(m, &l)| [l * sign + m[(0, 0)], m[(1, 0)]]).collect();
    let min_norm = |v: &[[C; 2]]| v.iter().map(|p| (p[0].norm_sqr() + p[1].norm_sqr()).sqrt()).fold(f64::INFINITY, f64::min);
    // one formula for the whole loop keeps the frame periodic
    if min_norm(&first) >= min_norm(&second) {
        first
    } else {
        second
    }
}

/// `μ`, `Z_γ` and `A₊` from the power-1 (Higgs) and power-0 pullbacks.
pub fn abelian_data(pb: &FamilyPullback) -> Result<AbelianData> {
    let higgs = pb
        .power(1)
        .ok_or_else(|| Error::NotWkb("family has no power-1 Higgs coefficient".into()))?;
    let branch = higgs_eigen_branch(higgs)?;
    if branch.monodromy {
        return Err(Error::NotWkb("eigen branch returns as -mu after one circuit".into()));
    }
    if !is_wkb(&branch.mu) {
        return Err(Error::NotWkb(format!(
            "Re mu must stay positive along a WKB curve; min Re mu = {:.3e}",
            wkb_margin(&branch.mu)
        )));
    }
    let n = higgs.len();
    let vp = eigenvector_columns(higgs, &branch.mu, 1.0);
    let vm = eigenvector_columns(higgs, &branch.mu, -1.0);
    let q: Vec<Mat2> = vp.iter().zip(&vm).map(|(p, m)| Mat2::new(p[0], m[0], p[1], m[1])).collect();
    let dq: Vec<Mat2> = {
        let col = |r: usize, c: usize| spectral::derivative(&q.iter().map(|m| m[(r, c)]).collect::<Vec<_>>());
        let (a, b, c, d) = (col(0, 0), col(0, 1), col(1, 0), col(1, 1));
        (0..n).map(|i| Mat2::new(a[i], b[i], c[i], d[i])).collect()
    };
    let zero = vec![Mat2::zeros(); n];
    let conn = pb.power(0).unwrap_or(&zero);
    let mut a_plus = Vec::with_capacity(n);
    let mut a0_sup: f64 = 0.0;
    for i in 0..n {
        let qi = q[i]
            .try_inverse()
            .ok_or_else(|| Error::Degenerate(format!("eigenframe singular at sample {i}")))?;
        let a = qi * (conn[i] * q[i] - dq[i]);
        a_plus.push(a[(0, 0)]);
        a0_sup = a0_sup.max(a[(0, 1)].norm()).max(a[(1, 0)].norm());
    }
    let integral = a_plus.iter().sum::<C>() / n as f64;
    Ok(AbelianData {
        central_charge: central_charge(&branch.mu),
        margin: wkb_margin(&branch.mu),
        mu: branch.mu,
        a_plus,
        hol_a_plus: integral.exp(),
        a0_sup,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WkbRow {
    pub eps: f64,
    pub q: C,
    pub abs_dev: f64,
    pub log_abs_trace: f64,
    pub steps: usize,
    pub rescaled: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct WkbSweep {
    pub rows: Vec<WkbRow>,
    pub central_charge: C,
    pub margin: f64,
    pub hol_a_plus: C,
    pub a0_sup: f64,
    /// Linear extrapolation of `q` to `ε = 0` from the last two rows.
    pub extrapolated_q: C,
    pub extrapolated_dev: f64,
    /// Curvature sup of the family at `r = 1`.
    pub curvature_sup: f64,
}

impl WkbSweep {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SWEEP_HEADER)?;
        for r in &self.rows {
            w.write_record([
                fmt_f64(r.eps),
                fmt_f64(r.q.re),
                fmt_f64(r.q.im),
                fmt_f64(r.abs_dev),
                fmt_f64(r.log_abs_trace),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `ε·log|Tr Hol|` per row.
    pub fn growth_rates(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.eps * r.log_abs_trace).collect()
    }
}

pub fn wkb_sweep(family: &LaurentConnectionFamily, lp: &Loop, eps_list: &[f64]) -> Result<WkbSweep> {
    wkb_sweep_with(family, lp, eps_list, &WkbOptions::default())
}

/// For each `ε`: `q(ε) = Tr Hol(∇_{1/ε})·e^{−Z/ε}` and `|q/Hol(A₊) − 1|`.
pub fn wkb_sweep_with(family: &LaurentConnectionFamily, lp: &Loop, eps_list: &[f64], opts: &WkbOptions) -> Result<WkbSweep> {
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::Validation("eps list must be nonempty and positive".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Validation("eps list must be strictly decreasing".into()));
    }
    let curvature_sup = curvature_residual(family, 1.0).sup_margin(CURVATURE_MARGIN);
    if let Some(g) = opts.curvature_gate {
        if curvature_sup > g {
            return Err(Error::gate("family curvature", curvature_sup, g));
        }
    }
    let pb = FamilyPullback::new(family, lp)?;
    let ab = abelian_data(&pb)?;
    let z = ab.central_charge;
    let rows: Vec<WkbRow> = eps_list
        .par_iter()
        .map(|&eps| {
            let samples = pb.at(1.0 / eps);
            let hol = path_ordered_exp(&samples.c, opts.substeps);
            let q = (hol.log_trace() - z / eps).exp();
            WkbRow {
                eps,
                q,
                abs_dev: (q / ab.hol_a_plus - 1.0).norm(),
                log_abs_trace: hol.log_abs_trace(),
                steps: hol.steps,
                rescaled: hol.rescaled(),
            }
        })
        .collect();
    let extrapolated_q = match rows.as_slice() {
        [.., a, b] => (a.eps * b.q - b.eps * a.q) / (a.eps - b.eps),
        [a] => a.q,
        [] => unreachable!(),
    };
    Ok(WkbSweep {
        extrapolated_dev: (extrapolated_q / ab.hol_a_plus - 1.0).norm(),
        extrapolated_q,
        rows,
        central_charge: z,
        margin: ab.margin,
        hol_a_plus: ab.hol_a_plus,
        a0_sup: ab.a0_sup,
        curvature_sup,
    })
}
