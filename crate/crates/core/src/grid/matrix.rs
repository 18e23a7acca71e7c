use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::domain::GridDomain;
use super::field::ComplexField;
use crate::error::{Error, Result};

pub type Mat2 = Matrix2<Complex64>;

/// Which form component a matrix field represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormType {
    Dz,
    Dzbar,
    DzDzbar,
    Scalar,
}

/// 2×2 matrix of fields on one domain.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    entries: [ComplexField; 4],
    form: FormType,
    trace_free: bool,
}

/// Relative tolerance used by the trace-free check.
const TRACE_TOL: f64 = 1e-12;

impl MatrixField {
    /// Entries in row-major order `[m11, m12, m21, m22]`.
    pub fn new(entries: [ComplexField; 4], form: FormType) -> Result<Self> {
        let d = *entries[0].domain();
        if entries.iter().any(|e| *e.domain() != d) {
            return Err(Error::DomainMismatch);
        }
        Ok(Self {
            entries,
            form,
            trace_free: false,
        })
    }

    /// Builds `[[a, b], [c, -a]]`, trace-free by construction.
    pub fn trace_free(a: ComplexField, b: ComplexField, c: ComplexField, form: FormType) -> Result<Self> {
        let neg = -&a;
        let mut m = Self::new([a, b, c, neg], form)?;
        m.trace_free = true;
        Ok(m)
    }

    pub fn zeros(domain: GridDomain, form: FormType) -> Self {
        let z = ComplexField::zeros(domain);
        Self {
            entries: [z.clone(), z.clone(), z.clone(), z],
            form,
            trace_free: true,
        }
    }

    /// Samples a matrix-valued function of `z`.
    pub fn from_fn(domain: GridDomain, form: FormType, f: impl Fn(Complex64) -> Mat2) -> Self {
        let mats: Vec<Mat2> = (0..domain.len())
            .map(|k| {
                let (i, j) = domain.coords(k);
                f(domain.z(i, j))
            })
            .collect();
        Self::from_mats(domain, form, &mats)
    }

    pub fn from_mats(domain: GridDomain, form: FormType, mats: &[Mat2]) -> Self {
        assert_eq!(mats.len(), domain.len());
        let pick = |r: usize, c: usize| {
            ComplexField::new(domain, mats.iter().map(|m| m[(r, c)]).collect()).expect("finite matrix samples")
        };
        Self {
            entries: [pick(0, 0), pick(0, 1), pick(1, 0), pick(1, 1)],
            form,
            trace_free: false,
        }
    }

    /// Sets the trace-free flag after verifying `m11 + m22 = 0` on unmasked nodes.
    pub fn enforce_trace_free(mut self) -> Result<Self> {
        let tr = &self.entries[0] + &self.entries[3];
        let scale = self.sup_norm().max(1.0);
        let sup = tr.sup_norm();
        if sup > TRACE_TOL * scale {
            return Err(Error::Validation(format!("matrix field not trace-free: sup |tr| = {sup:.3e}")));
        }
        self.trace_free = true;
        Ok(self)
    }

    pub fn is_trace_free(&self) -> bool {
        self.trace_free
    }

    pub fn form(&self) -> FormType {
        self.form
    }

    pub fn with_form(mut self, form: FormType) -> Self {
        self.form = form;
        self
    }

    pub fn domain(&self) -> &GridDomain {
        self.entries[0].domain()
    }

    pub fn entry(&self, r: usize, c: usize) -> &ComplexField {
        &self.entries[2 * r + c]
    }

    pub fn entries(&self) -> &[ComplexField; 4] {
        &self.entries
    }

    pub fn into_entries(self) -> [ComplexField; 4] {
        self.entries
    }

    pub fn at(&self, k: usize) -> Mat2 {
        let e = |n: usize| self.entries[n].values()[k];
        Mat2::new(e(0), e(1), e(2), e(3))
    }

    pub fn to_mats(&self) -> Vec<Mat2> {
        (0..self.domain().len()).map(|k| self.at(k)).collect()
    }

    /// Entrywise map sharing the flag and form.
    pub fn map_entries(&self, f: impl Fn(&ComplexField) -> ComplexField) -> Self {
        Self {
            entries: [
                f(&self.entries[0]),
                f(&self.entries[1]),
                f(&self.entries[2]),
                f(&self.entries[3]),
            ],
            form: self.form,
            trace_free: self.trace_free,
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map_entries(|e| e.scale(c))
    }

    pub fn add(&self, other: &MatrixField) -> Self {
        Self {
            entries: [0, 1, 2, 3].map(|n| &self.entries[n] + &other.entries[n]),
            form: self.form,
            trace_free: self.trace_free && other.trace_free,
        }
    }

    pub fn sub(&self, other: &MatrixField) -> Self {
        Self {
            entries: [0, 1, 2, 3].map(|n| &self.entries[n] - &other.entries[n]),
            form: self.form,
            trace_free: self.trace_free && other.trace_free,
        }
    }

    /// Nodewise matrix product.
    pub fn matmul(&self, other: &MatrixField) -> Self {
        let e = |r: usize, c: usize| -> ComplexField {
            &(self.entry(r, 0) * other.entry(0, c)) + &(self.entry(r, 1) * other.entry(1, c))
        };
        Self {
            entries: [e(0, 0), e(0, 1), e(1, 0), e(1, 1)],
            form: self.form,
            trace_free: false,
        }
    }

    /// Nodewise commutator `[self, other]`.
    pub fn commutator(&self, other: &MatrixField) -> Self {
        let mut c = self.matmul(other).sub(&other.matmul(self));
        c.trace_free = true;
        c
    }

    pub fn determinant(&self) -> ComplexField {
        &(self.entry(0, 0) * self.entry(1, 1)) - &(self.entry(0, 1) * self.entry(1, 0))
    }

    /// Max over entries of the unmasked sup norm.
    pub fn sup_norm(&self) -> f64 {
        self.entries.iter().map(ComplexField::sup_norm).fold(0.0, f64::max)
    }

    pub fn sup_interior(&self) -> f64 {
        self.entries.iter().map(ComplexField::sup_interior).fold(0.0, f64::max)
    }

    pub fn sup_margin(&self, margin: usize) -> f64 {
        self.entries.iter().map(|e| e.sup_margin(margin)).fold(0.0, f64::max)
    }

    /// True when every entry is identically zero.
    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.values().iter().all(|v| *v == Complex64::new(0.0, 0.0)))
    }
}
