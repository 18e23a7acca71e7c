use num_complex::Complex64;

use super::spectral::TrigMatrix;
use crate::grid::Mat2;

type C = Complex64;

/// Magnitude above which the running product is renormalized.
const RESCALE_AT: f64 = 1e100;

/// `Y(1) = e^{log_scale}·matrix` for `Y′ = C(t)Y`, `Y(0) = I`.
#[derive(Debug, Clone, Copy)]
pub struct Holonomy {
    pub matrix: Mat2,
    pub log_scale: f64,
    pub steps: usize,
}

impl Holonomy {
    /// True when the raw matrix would not be representable.
    pub fn rescaled(&self) -> bool {
        self.log_scale != 0.0
    }

    /// The raw matrix, if representable.
    pub fn raw(&self) -> Option<Mat2> {
        let s = self.log_scale.exp();
        let m = self.matrix * C::new(s, 0.0);
        m.iter().all(|v| v.re.is_finite() && v.im.is_finite()).then_some(m)
    }

    /// `log Tr Y` (principal branch of the scaled trace).
    pub fn log_trace(&self) -> C {
        self.matrix.trace().ln() + self.log_scale
    }

    pub fn log_abs_trace(&self) -> f64 {
        self.matrix.trace().norm().ln() + self.log_scale
    }

    pub fn det(&self) -> C {
        self.matrix.determinant() * (2.0 * self.log_scale).exp()
    }
}

/// `exp` of a 2×2 matrix via `exp(Ω) = e^{τ}(cosh δ·I + sinh δ/δ·(Ω − τI))`,
/// `τ = tr Ω / 2`, `δ² = −det(Ω − τI)`.
pub fn expm2(omega: &Mat2) -> Mat2 {
    let tau = omega.trace() * 0.5;
    let n = omega - Mat2::identity() * tau;
    let d2 = -n.determinant();
    let (ch, sh) = if d2.norm() < 1e-8 {
        (
            C::new(1.0, 0.0) + d2 * 0.5 + d2 * d2 / 24.0,
            C::new(1.0, 0.0) + d2 / 6.0 + d2 * d2 / 120.0,
        )
    } else {
        let d = d2.sqrt();
        (d.cosh(), d.sinh() / d)
    };
    (Mat2::identity() * ch + n * sh) * tau.exp()
}

fn frob(m: &Mat2) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // √3/6
const COMM_WEIGHT: f64 = 0.144_337_567_297_406_43; // √3/12

/// Fourth-order Magnus integration of `Y′ = C(t)Y` on `[0, 1]`.
///
/// Uses `max(substeps, ⌈20·sup_norm⌉)` uniform steps.
pub fn path_ordered_exp_fn(c: impl Fn(f64) -> Mat2, sup_norm: f64, substeps: usize) -> Holonomy {
    let n = substeps.max((20.0 * sup_norm).ceil() as usize).max(1);
    let h = 1.0 / n as f64;
    let mut y = Mat2::identity();
    let mut log_scale = 0.0;
    for s in 0..n {
        let t0 = s as f64 * h;
        let a1 = c(t0 + (0.5 - GAUSS_OFFSET) * h);
        let a2 = c(t0 + (0.5 + GAUSS_OFFSET) * h);
        let comm = a2 * a1 - a1 * a2;
        let omega = (a1 + a2) * C::new(0.5 * h, 0.0) + comm * C::new(COMM_WEIGHT * h * h, 0.0);
        y = expm2(&omega) * y;
        let norm = frob(&y);
        if norm > RESCALE_AT {
            log_scale += norm.ln();
            y /= C::new(norm, 0.0);
        }
    }
    Holonomy {
        matrix: y,
        log_scale,
        steps: n,
    }
}

/// Holonomy of the trigonometric interpolant of uniform samples of `C`.
pub fn path_ordered_exp(samples: &[Mat2], substeps: usize) -> Holonomy {
    let sup = samples.iter().map(frob).fold(0.0, f64::max);
    let ip = TrigMatrix::new(samples);
    path_ordered_exp_fn(|t| ip.eval(t), sup, substeps.max(samples.len()))
}
