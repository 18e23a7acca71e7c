//! Wirtinger derivatives on grid fields.
//!
//! `∂_z = ½(∂_x − i∂_y)` and `∂_z̄ = ½(∂_x + i∂_y)` use second-order centered
//! differences (periodic wrap in x, one-sided second-order stencils on
//! boundary rows/columns). `∂_z̄∂_z` is the compact five-point `¼Δ`, not the
//! composition of the first-order operators.

use num_complex::Complex64;

use super::domain::GridDomain;
use super::field::ComplexField;
use super::stencil::{self, AxisStencil};

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
}

fn apply_axis(f: &ComplexField, axis: Axis, stencil_at: impl Fn(&GridDomain, usize) -> AxisStencil) -> ComplexField {
    let d = *f.domain();
    let vals = f.values();
    let src_mask = f.mask();
    let mut out = Vec::with_capacity(d.len());
    let mut mask = src_mask.map(|_| vec![false; d.len()]);
    for j in 0..d.ny() {
        for i in 0..d.nx() {
            let s = match axis {
                Axis::X => stencil_at(&d, i),
                Axis::Y => stencil_at(&d, j),
            };
            let mut acc = Complex64::new(0.0, 0.0);
            let mut touched = false;
            for (a, w) in s.iter() {
                let k = match axis {
                    Axis::X => d.index(a, j),
                    Axis::Y => d.index(i, a),
                };
                acc += vals[k] * w;
                if let Some(m) = src_mask {
                    touched |= m[k];
                }
            }
            if let Some(m) = mask.as_mut() {
                m[d.index(i, j)] = touched;
            }
            out.push(acc);
        }
    }
    ComplexField::from_parts(d, out, mask)
}

pub fn d_x(f: &ComplexField) -> ComplexField {
    apply_axis(f, Axis::X, stencil::first_x)
}

pub fn d_y(f: &ComplexField) -> ComplexField {
    apply_axis(f, Axis::Y, stencil::first_y)
}

pub fn d_xx(f: &ComplexField) -> ComplexField {
    apply_axis(f, Axis::X, stencil::second_x)
}

pub fn d_yy(f: &ComplexField) -> ComplexField {
    apply_axis(f, Axis::Y, stencil::second_y)
}

const HALF: f64 = 0.5;
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Discrete `∂_z`.
pub fn d_z(f: &ComplexField) -> ComplexField {
    d_x(f).zip_with(&d_y(f), |a, b| (a - I * b) * HALF)
}

/// Discrete `∂_z̄`.
pub fn d_zbar(f: &ComplexField) -> ComplexField {
    d_x(f).zip_with(&d_y(f), |a, b| (a + I * b) * HALF)
}

/// Discrete `∂_z̄∂_z = ¼Δ` on the compact five-point stencil.
pub fn dzbar_dz(f: &ComplexField) -> ComplexField {
    d_xx(f).zip_with(&d_yy(f), |a, b| (a + b) * 0.25)
}
