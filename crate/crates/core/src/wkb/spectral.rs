use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::grid::Mat2;

type C = Complex64;

/// Discrete Fourier coefficients `ĉ_k`, `k = 0..n`, normalized by `1/n`.
fn spectrum(samples: &[C]) -> Vec<C> {
    let n = samples.len();
    let mut buf = samples.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let inv = 1.0 / n as f64;
    buf.iter_mut().for_each(|v| *v *= inv);
    buf
}

/// Signed wavenumber of FFT bin `k`; the Nyquist bin of an even length is
/// reported as `None` and handled as a cosine.
fn wavenumber(k: usize, n: usize) -> Option<i64> {
    if 2 * k == n {
        None
    } else if 2 * k < n {
        Some(k as i64)
    } else {
        Some(k as i64 - n as i64)
    }
}

/// Periodic derivative `d/dt` on `t ∈ [0, 1)` of uniformly sampled data.
pub fn derivative(samples: &[C]) -> Vec<C> {
    let n = samples.len();
    let mut spec = spectrum(samples);
    for (k, v) in spec.iter_mut().enumerate() {
        *v *= match wavenumber(k, n) {
            Some(m) => C::new(0.0, TAU * m as f64),
            // derivative of cos(πnt) vanishes on the grid
            None => C::new(0.0, 0.0),
        };
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    spec
}

/// Trigonometric interpolant of uniformly sampled 2×2 matrices on `[0, 1)`.
#[derive(Debug, Clone)]
pub struct TrigMatrix {
    /// `(wavenumber, coefficient matrix)`; the Nyquist term uses `m = 0`
    /// with `nyquist = true`.
    terms: Vec<(i64, Mat2)>,
    nyquist: Option<(f64, Mat2)>,
}

impl TrigMatrix {
    pub fn new(samples: &[Mat2]) -> Self {
        let n = samples.len();
        assert!(n > 0, "empty sample set");
        let entry = |r: usize, c: usize| spectrum(&samples.iter().map(|m| m[(r, c)]).collect::<Vec<_>>());
        let s = [entry(0, 0), entry(0, 1), entry(1, 0), entry(1, 1)];
        let mut terms = Vec::with_capacity(n);
        let mut nyquist = None;
        for k in 0..n {
            let m = Mat2::new(s[0][k], s[1][k], s[2][k], s[3][k]);
            match wavenumber(k, n) {
                Some(w) => terms.push((w, m)),
                None => nyquist = Some((n as f64 / 2.0, m)),
            }
        }
        Self { terms, nyquist }
    }

    pub fn eval(&self, t: f64) -> Mat2 {
        let mut acc = Mat2::zeros();
        for &(w, m) in &self.terms {
            acc += m * C::from_polar(1.0, TAU * w as f64 * t);
        }
        if let Some((half, m)) = self.nyquist {
            acc += m * C::new((TAU * half * t).cos(), 0.0);
        }
        acc
    }
}
