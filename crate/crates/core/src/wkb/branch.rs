use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Mat2;

type C = Complex64;

/// Relative degeneracy gate on `|det|` in units of the squared sample scale.
pub const DEGENERACY_GATE: f64 = 1e-8;

/// Continuous eigenvalue branch `μ(t)` of a trace-free sampled Higgs pullback.
#[derive(Debug, Clone)]
pub struct EigenBranch {
    pub mu: Vec<C>,
    /// The branch returns as `−μ(0)` after one circuit.
    pub monodromy: bool,
}

fn principal(v: C) -> C {
    let s = v.sqrt();
    if s.re > 0.0 || (s.re == 0.0 && s.im >= 0.0) {
        s
    } else {
        -s
    }
}

/// `μ = ±√(−det)` continued from `Re μ(0) ≥ 0` (ties: `Im μ(0) ≥ 0`).
pub fn higgs_eigen_branch(higgs: &[Mat2]) -> Result<EigenBranch> {
    if higgs.is_empty() {
        return Err(Error::Loop("empty sample set".into()));
    }
    let scale = higgs.iter().map(|m| m.norm()).fold(0.0, f64::max);
    let gate = DEGENERACY_GATE * scale * scale;
    let mut mu = Vec::with_capacity(higgs.len());
    let mut prev = C::new(0.0, 0.0);
    for (i, m) in higgs.iter().enumerate() {
        let det = m.determinant();
        if !(det.norm() > gate) {
            return Err(Error::Degenerate(format!(
                "|det| = {:.3e} at sample {i} is below the degeneracy gate {gate:.3e}; the Higgs pullback must not be nilpotent",
                det.norm()
            )));
        }
        let root = principal(-det);
        let next = if i == 0 {
            root
        } else if (root - prev).norm() <= (root + prev).norm() {
            root
        } else {
            -root
        };
        if i > 0 && (next - prev).norm() > 0.5 * prev.norm().max(next.norm()) {
            return Err(Error::Degenerate(format!(
                "eigen branch jumps between samples {} and {i}; refine the loop sampling",
                i - 1
            )));
        }
        mu.push(next);
        prev = next;
    }
    let first = mu[0];
    let monodromy = (prev + first).norm() < (prev - first).norm();
    Ok(EigenBranch { mu, monodromy })
}

/// `Re μ(t) > 0` at every sample.
pub fn is_wkb(mu: &[C]) -> bool {
    !mu.is_empty() && mu.iter().all(|m| m.re > 0.0)
}

/// `min Re μ(t)`.
pub fn wkb_margin(mu: &[C]) -> f64 {
    mu.iter().map(|m| m.re).fold(f64::INFINITY, f64::min)
}

/// `Z = ∫₀¹ μ dt` by the periodic trapezoid rule.
pub fn central_charge(mu: &[C]) -> C {
    mu.iter().sum::<C>() / mu.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn constant_diagonal_and_offdiagonal() {
        let mu0 = c(0.7, -0.2);
        let b = higgs_eigen_branch(&vec![Mat2::new(mu0, c(0.0, 0.0), c(0.0, 0.0), -mu0); 8]).unwrap();
        assert!(b.mu.iter().all(|m| (m - mu0).norm() < 1e-15));
        let e = 0.36;
        let b = higgs_eigen_branch(&vec![Mat2::new(c(0.0, 0.0), c(1.0, 0.0), c(e, 0.0), c(0.0, 0.0)); 4]).unwrap();
        assert!((b.mu[0] - c(0.6, 0.0)).norm() < 1e-15);
        assert!(!b.monodromy);
    }

    #[test]
    fn nilpotent_is_degenerate() {
        let nil = Mat2::new(c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        assert!(matches!(higgs_eigen_branch(&[nil; 4]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn square_root_monodromy_is_flagged() {
        // det = −e^{2πit}: μ = e^{πit} returns as −1
        let n = 64;
        let s: Vec<Mat2> = (0..n)
            .map(|i| {
                let w = C::from_polar(1.0, TAU * i as f64 / n as f64);
                Mat2::new(c(0.0, 0.0), w, c(1.0, 0.0), c(0.0, 0.0))
            })
            .collect();
        assert!(higgs_eigen_branch(&s).unwrap().monodromy);
    }

    #[test]
    fn wkb_flags_and_central_charge() {
        let n = 64;
        assert!(is_wkb(&vec![c(1.0, 0.0); n]));
        assert_eq!(central_charge(&vec![c(1.0, 0.0); n]), c(1.0, 0.0));
        let circle: Vec<C> = (0..n).map(|i| C::from_polar(1.0, TAU * i as f64 / n as f64)).collect();
        assert!(!is_wkb(&circle));
        let wave: Vec<C> = (0..n).map(|i| c(2.0 + (TAU * i as f64 / n as f64).sin(), 0.0)).collect();
        assert!(is_wkb(&wave));
        assert!((central_charge(&wave) - c(2.0, 0.0)).norm() < 1e-14);
    }
}
