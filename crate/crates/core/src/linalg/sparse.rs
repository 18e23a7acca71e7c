use num_complex::Complex64;

use crate::grid::{stencil, GridDomain};

type C = Complex64;

/// Square complex matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C>,
}

impl Csr {
    /// Assembles from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, C)>) -> Self {
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<C> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            assert!(r < n && c < n, "triplet ({r}, {c}) outside {n}x{n}");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![C::new(1.0, 0.0); n])
    }

    pub fn diag(d: &[C]) -> Self {
        let n = d.len();
        Self {
            n,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: d.to_vec(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn apply(&self, x: &[C]) -> Vec<C> {
        assert_eq!(x.len(), self.n);
        (0..self.n).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn scale(&self, s: C) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `diag(d) · self`.
    pub fn scale_rows(&self, d: &[C]) -> Self {
        let mut out = self.clone();
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out.vals[k] *= d[r];
            }
        }
        out
    }

    pub fn add(&self, other: &Csr) -> Self {
        assert_eq!(self.n, other.n);
        let t = (0..self.n)
            .flat_map(|r| self.row(r).chain(other.row(r)).map(move |(c, v)| (r, c, v)))
            .collect();
        Self::from_triplets(self.n, t)
    }

    pub fn sub(&self, other: &Csr) -> Self {
        self.add(&other.scale(C::new(-1.0, 0.0)))
    }

    /// Matrix product `self · other`.
    pub fn matmul(&self, other: &Csr) -> Self {
        assert_eq!(self.n, other.n);
        let mut t = Vec::new();
        for r in 0..self.n {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    t.push((r, c, a * b));
                }
            }
        }
        Self::from_triplets(self.n, t)
    }

    /// Replaces the listed rows by identity rows (Dirichlet elimination).
    pub fn with_identity_rows(&self, rows: &[bool]) -> Self {
        assert_eq!(rows.len(), self.n);
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.n {
            if rows[r] {
                t.push((r, r, C::new(1.0, 0.0)));
            } else {
                t.extend(self.row(r).map(|(c, v)| (r, c, v)));
            }
        }
        Self::from_triplets(self.n, t)
    }
}

/// Matrix forms of the grid stencils, identical to the field operators in
/// [`crate::grid`].
#[derive(Debug, Clone)]
pub struct GridOperators {
    pub dx: Csr,
    pub dy: Csr,
    pub dz: Csr,
    pub dzbar: Csr,
    /// Compact five-point `¼Δ`.
    pub quarter_laplacian: Csr,
}

impl GridOperators {
    pub fn new(d: &GridDomain) -> Self {
        let n = d.len();
        let mut tx = Vec::new();
        let mut ty = Vec::new();
        let mut tl = Vec::new();
        for j in 0..d.ny() {
            for i in 0..d.nx() {
                let k = d.index(i, j);
                for (a, w) in stencil::first_x(d, i).iter() {
                    tx.push((k, d.index(a, j), C::new(w, 0.0)));
                }
                for (a, w) in stencil::first_y(d, j).iter() {
                    ty.push((k, d.index(i, a), C::new(w, 0.0)));
                }
                for (a, w) in stencil::second_x(d, i).iter() {
                    tl.push((k, d.index(a, j), C::new(0.25 * w, 0.0)));
                }
                for (a, w) in stencil::second_y(d, j).iter() {
                    tl.push((k, d.index(i, a), C::new(0.25 * w, 0.0)));
                }
            }
        }
        let dx = Csr::from_triplets(n, tx);
        let dy = Csr::from_triplets(n, ty);
        let half = C::new(0.5, 0.0);
        let ihalf = C::new(0.0, 0.5);
        let dz = dx.scale(half).add(&dy.scale(-ihalf));
        let dzbar = dx.scale(half).add(&dy.scale(ihalf));
        Self {
            dx,
            dy,
            dz,
            dzbar,
            quarter_laplacian: Csr::from_triplets(n, tl),
        }
    }
}
