//! Finite-difference weights shared by the field operators and the sparse
//! matrix assembly, so both paths discretize identically.

use super::domain::GridDomain;

/// Weights along one axis: `(axis index, weight)` pairs.
#[derive(Debug, Clone, Copy)]
pub struct AxisStencil {
    idx: [usize; 4],
    w: [f64; 4],
    len: usize,
}

impl AxisStencil {
    fn from_slice(entries: &[(usize, f64)]) -> Self {
        let mut s = AxisStencil {
            idx: [0; 4],
            w: [0.0; 4],
            len: entries.len(),
        };
        for (n, &(i, w)) in entries.iter().enumerate() {
            s.idx[n] = i;
            s.w[n] = w;
        }
        s
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.idx[..self.len].iter().copied().zip(self.w[..self.len].iter().copied())
    }
}

// Second-order one-sided first derivative: (-3, 4, -1) / 2h.
fn first_one_sided(at: usize, toward_plus: bool, h: f64) -> AxisStencil {
    let s = if toward_plus { 1.0 } else { -1.0 };
    let step = |k: usize| if toward_plus { at + k } else { at - k };
    AxisStencil::from_slice(&[
        (at, -1.5 * s / h),
        (step(1), 2.0 * s / h),
        (step(2), -0.5 * s / h),
    ])
}

// Second-order one-sided second derivative: (2, -5, 4, -1) / h².
fn second_one_sided(at: usize, toward_plus: bool, h: f64) -> AxisStencil {
    let step = |k: usize| if toward_plus { at + k } else { at - k };
    let h2 = h * h;
    AxisStencil::from_slice(&[
        (at, 2.0 / h2),
        (step(1), -5.0 / h2),
        (step(2), 4.0 / h2),
        (step(3), -1.0 / h2),
    ])
}

fn first_bounded(at: usize, n: usize, h: f64) -> AxisStencil {
    if at == 0 {
        first_one_sided(0, true, h)
    } else if at + 1 == n {
        first_one_sided(at, false, h)
    } else {
        AxisStencil::from_slice(&[(at - 1, -0.5 / h), (at + 1, 0.5 / h)])
    }
}

fn second_bounded(at: usize, n: usize, h: f64) -> AxisStencil {
    if at == 0 {
        second_one_sided(0, true, h)
    } else if at + 1 == n {
        second_one_sided(at, false, h)
    } else {
        let h2 = h * h;
        AxisStencil::from_slice(&[(at - 1, 1.0 / h2), (at, -2.0 / h2), (at + 1, 1.0 / h2)])
    }
}

pub fn first_x(d: &GridDomain, i: usize) -> AxisStencil {
    let nx = d.nx();
    if d.is_periodic() {
        let h = d.hx();
        AxisStencil::from_slice(&[((i + nx - 1) % nx, -0.5 / h), ((i + 1) % nx, 0.5 / h)])
    } else {
        first_bounded(i, nx, d.hx())
    }
}

pub fn first_y(d: &GridDomain, j: usize) -> AxisStencil {
    first_bounded(j, d.ny(), d.hy())
}

pub fn second_x(d: &GridDomain, i: usize) -> AxisStencil {
    let nx = d.nx();
    if d.is_periodic() {
        let h2 = d.hx() * d.hx();
        AxisStencil::from_slice(&[
            ((i + nx - 1) % nx, 1.0 / h2),
            (i, -2.0 / h2),
            ((i + 1) % nx, 1.0 / h2),
        ])
    } else {
        second_bounded(i, nx, d.hx())
    }
}

pub fn second_y(d: &GridDomain, j: usize) -> AxisStencil {
    second_bounded(j, d.ny(), d.hy())
}
