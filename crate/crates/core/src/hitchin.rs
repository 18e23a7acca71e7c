//! Scalar Hitchin equation `∂_z̄∂_z u + |Φ₁|² e^{−2u} = 0` for the exponent
//! of the diagonal harmonic metric `H = diag(e^u, e^{−u})`.
//!
//! Solved by damped Newton on a periodic-x cylinder with Dirichlet data on
//! the first and last rows.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{d_zbar, dzbar_dz, ComplexField, GridDomain};
use crate::linalg::{self, gmres, Csr, GmresOptions, GridOperators, XAveragedSolver};

/// Imaginary parts below this are treated as rounding noise in `u`.
pub const REAL_TOL: f64 = 1e-12;
/// Exponent clamp guarding `e^{−2u}` against overflow.
pub const U_CLAMP: f64 = 30.0;

const MAX_HALVINGS: usize = 10;
const GROWTH_STREAK_LIMIT: usize = 5;
/// Largest relative residual of a Newton correction that is still used.
const LINEAR_ACCEPT: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct HitchinProblem {
    phi1: ComplexField,
    bottom: Vec<f64>,
    top: Vec<f64>,
}

impl HitchinProblem {
    /// `bottom`/`top` are the prescribed `u` values on rows `0` and `ny − 1`.
    pub fn new(phi1: ComplexField, bottom: Vec<f64>, top: Vec<f64>) -> Result<Self> {
        Self::with_holomorphy_gate(phi1, bottom, top, 1e-6)
    }

    /// `gate` is relative to `max(1, sup |Φ₁|)`.
    pub fn with_holomorphy_gate(phi1: ComplexField, bottom: Vec<f64>, top: Vec<f64>, gate: f64) -> Result<Self> {
        let d = *phi1.domain();
        if !d.is_periodic() {
            return Err(Error::Validation(
                "the Hitchin solver needs a periodic-x cylinder with Dirichlet rows".into(),
            ));
        }
        for (name, row) in [("bottom", &bottom), ("top", &top)] {
            if row.len() != d.nx() {
                return Err(Error::Validation(format!(
                    "{name} boundary has {} values, expected {}",
                    row.len(),
                    d.nx()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("{name} boundary data not finite")));
            }
        }
        let limit = gate * phi1.sup_norm().max(1.0);
        let hol = d_zbar(&phi1).sup_norm();
        if hol > limit {
            return Err(Error::gate("phi1 holomorphy", hol, limit));
        }
        Ok(Self { phi1, bottom, top })
    }

    /// Boundary data sampled from `g(x, y)` on the Dirichlet rows.
    pub fn with_boundary_fn(phi1: ComplexField, g: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let d = *phi1.domain();
        let row = |j: usize| (0..d.nx()).map(|i| g(d.x(i), d.y(j))).collect::<Vec<_>>();
        Self::new(phi1, row(0), row(d.ny() - 1))
    }

    pub fn domain(&self) -> &GridDomain {
        self.phi1.domain()
    }

    pub fn phi1(&self) -> &ComplexField {
        &self.phi1
    }

    fn apply_boundary(&self, u: &mut [f64]) {
        let d = self.domain();
        let last = d.ny() - 1;
        for i in 0..d.nx() {
            u[d.index(i, 0)] = self.bottom[i];
            u[d.index(i, last)] = self.top[i];
        }
    }

    fn weight(&self) -> Vec<f64> {
        self.phi1.values().iter().map(|p| p.norm_sqr()).collect()
    }
}

/// Nodewise `∂_z̄∂_z u + |Φ₁|² e^{−2u}`.
pub fn hitchin_residual(u: &ComplexField, phi1: &ComplexField) -> Result<ComplexField> {
    u.ensure_same_domain(phi1)?;
    let ur = u.real_values(REAL_TOL)?;
    Ok(residual_real(&ur, phi1))
}

fn residual_real(u: &[f64], phi1: &ComplexField) -> ComplexField {
    let d = *phi1.domain();
    let uf = ComplexField::from_real(d, u).expect("finite u");
    let lap = dzbar_dz(&uf);
    let vals = lap
        .values()
        .iter()
        .zip(phi1.values())
        .zip(u)
        .map(|((l, p), &uu)| l + p.norm_sqr() * (-2.0 * uu.clamp(-U_CLAMP, U_CLAMP)).exp())
        .collect();
    ComplexField::new(d, vals).expect("finite residual")
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Starting iterate; boundary rows are overwritten with the problem data.
    pub initial: Option<ComplexField>,
    pub linear: GmresOptions,
}

impl SolveOptions {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        Self {
            tol,
            max_iter,
            initial: None,
            linear: GmresOptions {
                rel_tol: 1e-13,
                restart: 40,
                max_iter: 400,
            },
        }
    }
}

/// One line of the solver log.
#[derive(Debug, Clone, Serialize)]
pub struct NewtonRecord {
    pub iteration: usize,
    pub residual_sup: f64,
    pub step_length: f64,
    pub linear_iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct HitchinReport {
    pub iterations: usize,
    pub initial_residual: f64,
    /// Interior residual sup after each Newton iteration.
    pub residual_history: Vec<f64>,
    pub records: Vec<NewtonRecord>,
    /// Nodes where `|u|` hit [`U_CLAMP`] in the final iterate.
    pub clamped_nodes: usize,
}

#[derive(Debug, Clone)]
pub struct HitchinSolution {
    pub u: ComplexField,
    pub report: HitchinReport,
}

fn interior_sup(d: &GridDomain, r: &ComplexField) -> f64 {
    let _ = d;
    r.sup_interior()
}

fn harmonic_extension(problem: &HitchinProblem, ops: &GridOperators, boundary: &[bool]) -> Result<Vec<f64>> {
    let d = problem.domain();
    let mut data = vec![0.0; d.len()];
    problem.apply_boundary(&mut data);
    let op = ops.quarter_laplacian.with_identity_rows(boundary);
    let solver = XAveragedSolver::new(d, &op)?;
    let rhs: Vec<Complex64> = data
        .iter()
        .zip(boundary)
        .map(|(&v, &b)| Complex64::new(if b { v } else { 0.0 }, 0.0))
        .collect();
    let out = gmres(|v| op.apply(v), |v| solver.solve(v), &rhs, SolveOptions::new(1.0, 1).linear);
    let mut u: Vec<f64> = out.x.iter().map(|v| v.re).collect();
    problem.apply_boundary(&mut u);
    Ok(u)
}

pub fn solve_hitchin(problem: &HitchinProblem, tol: f64, max_iter: usize) -> Result<HitchinSolution> {
    solve_hitchin_with(problem, &SolveOptions::new(tol, max_iter))
}

pub fn solve_hitchin_with(problem: &HitchinProblem, opts: &SolveOptions) -> Result<HitchinSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::Validation(format!("tol must be positive, got {}", opts.tol)));
    }
    let d = *problem.domain();
    let ops = GridOperators::new(&d);
    let boundary = linalg::boundary_flags(&d);
    let weight = problem.weight();
    let has_higgs = weight.iter().any(|&w| w > 0.0);

    let mut u: Vec<f64> = match &opts.initial {
        Some(init) => {
            init.ensure_same_domain(&problem.phi1)?;
            init.real_values(REAL_TOL)?
        }
        None if has_higgs => harmonic_extension(problem, &ops, &boundary)?,
        None => vec![0.0; d.len()],
    };
    problem.apply_boundary(&mut u);

    let mut res = interior_sup(&d, &residual_real(&u, &problem.phi1));
    let initial_residual = res;
    let mut history = Vec::new();
    let mut records = Vec::new();
    let mut growth_streak = 0usize;

    while res > opts.tol {
        if history.len() >= opts.max_iter {
            return Err(Error::Divergence {
                reason: format!("max_iter {} reached with residual {res:.3e} > tol {:.3e}", opts.max_iter, opts.tol),
                history,
            });
        }
        let n_res = residual_real(&u, &problem.phi1);
        let shift: Vec<Complex64> = weight
            .iter()
            .zip(&u)
            .map(|(&w, &uu)| Complex64::new(-2.0 * w * (-2.0 * uu.clamp(-U_CLAMP, U_CLAMP)).exp(), 0.0))
            .collect();
        let jac = ops.quarter_laplacian.add(&Csr::diag(&shift)).with_identity_rows(&boundary);
        let precond = XAveragedSolver::new(&d, &jac)?;
        let rhs: Vec<Complex64> = n_res
            .values()
            .iter()
            .zip(&boundary)
            .map(|(v, &b)| if b { Complex64::new(0.0, 0.0) } else { -v })
            .collect();
        let lin = gmres(|v| jac.apply(v), |v| precond.solve(v), &rhs, opts.linear);
        if lin.residual > LINEAR_ACCEPT {
            return Err(Error::Divergence {
                reason: format!("linearized solve stalled at relative residual {:.3e}", lin.residual),
                history,
            });
        }
        let delta: Vec<f64> = lin.x.iter().map(|v| v.re).collect();

        let mut step = 1.0;
        let mut trial = Vec::new();
        let mut trial_res = f64::INFINITY;
        for _ in 0..=MAX_HALVINGS {
            trial = u.iter().zip(&delta).map(|(a, b)| a + step * b).collect();
            trial_res = interior_sup(&d, &residual_real(&trial, &problem.phi1));
            if trial_res < res {
                break;
            }
            step *= 0.5;
        }
        if trial_res >= res {
            growth_streak += 1;
            if growth_streak >= GROWTH_STREAK_LIMIT {
                history.push(trial_res);
                return Err(Error::Divergence {
                    reason: format!("residual failed to decrease for {GROWTH_STREAK_LIMIT} consecutive steps"),
                    history,
                });
            }
        } else {
            growth_streak = 0;
        }
        u = trial;
        res = trial_res;
        history.push(res);
        records.push(NewtonRecord {
            iteration: history.len(),
            residual_sup: res,
            step_length: step,
            linear_iterations: lin.history.len(),
        });
    }

    let clamped_nodes = u.iter().filter(|v| v.abs() >= U_CLAMP).count();
    Ok(HitchinSolution {
        u: ComplexField::from_real(d, &u)?,
        report: HitchinReport {
            iterations: history.len(),
            initial_residual,
            residual_history: history,
            records,
            clamped_nodes,
        },
    })
}
