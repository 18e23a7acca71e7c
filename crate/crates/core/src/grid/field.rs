use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

use super::domain::GridDomain;
use crate::error::{Error, Result};

/// Complex samples on every node of a [`GridDomain`], with an optional
/// exclusion mask (`true` marks a node as excluded, e.g. near a pole).
///
/// The arithmetic operator impls panic on domain mismatch; public entry
/// points check domains up front with [`ComplexField::ensure_same_domain`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    domain: GridDomain,
    values: Vec<Complex64>,
    mask: Option<Vec<bool>>,
}

impl ComplexField {
    pub fn new(domain: GridDomain, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::Validation(format!(
                "field has {} samples, domain {}x{} needs {}",
                values.len(),
                domain.nx(),
                domain.ny(),
                domain.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            let (i, j) = domain.coords(k);
            return Err(Error::Validation(format!("non-finite sample at node ({i}, {j})")));
        }
        Ok(Self {
            domain,
            values,
            mask: None,
        })
    }

    /// Unchecked constructor for values produced by trusted arithmetic.
    pub(crate) fn from_parts(domain: GridDomain, values: Vec<Complex64>, mask: Option<Vec<bool>>) -> Self {
        debug_assert_eq!(values.len(), domain.len());
        Self { domain, values, mask }
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.domain.len() {
            return Err(Error::Validation(format!(
                "mask has {} entries, expected {}",
                mask.len(),
                self.domain.len()
            )));
        }
        self.mask = if mask.iter().any(|&m| m) { Some(mask) } else { None };
        Ok(self)
    }

    pub fn zeros(domain: GridDomain) -> Self {
        Self::constant(domain, Complex64::new(0.0, 0.0))
    }

    pub fn constant(domain: GridDomain, c: Complex64) -> Self {
        Self::from_parts(domain, vec![c; domain.len()], None)
    }

    /// Samples `f(z)` at every node. Panics if `f` returns a non-finite value.
    pub fn from_fn(domain: GridDomain, f: impl Fn(Complex64) -> Complex64) -> Self {
        let values: Vec<_> = (0..domain.len())
            .map(|k| {
                let (i, j) = domain.coords(k);
                f(domain.z(i, j))
            })
            .collect();
        Self::new(domain, values).expect("from_fn produced non-finite samples")
    }

    pub fn try_from_fn(domain: GridDomain, f: impl Fn(Complex64) -> Complex64) -> Result<Self> {
        let values = (0..domain.len())
            .map(|k| {
                let (i, j) = domain.coords(k);
                f(domain.z(i, j))
            })
            .collect();
        Self::new(domain, values)
    }

    pub fn from_real(domain: GridDomain, values: &[f64]) -> Result<Self> {
        Self::new(domain, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[self.domain.index(i, j)]
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn is_masked(&self, k: usize) -> bool {
        self.mask.as_ref().is_some_and(|m| m[k])
    }

    pub fn clear_mask(mut self) -> Self {
        self.mask = None;
        self
    }

    pub fn ensure_same_domain(&self, other: &ComplexField) -> Result<()> {
        if self.domain == other.domain {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self::from_parts(self.domain, self.values.iter().map(|&v| f(v)).collect(), self.mask.clone())
    }

    pub fn zip_with(&self, other: &ComplexField, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        assert_eq!(self.domain, other.domain, "field domain mismatch");
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self::from_parts(self.domain, values, union_masks(self.mask(), other.mask()))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|v| v * c)
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    pub fn abs(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Real parts, after checking that imaginary parts are within `tol`.
    pub fn real_values(&self, tol: f64) -> Result<Vec<f64>> {
        if let Some(k) = self.values.iter().position(|v| v.im.abs() > tol) {
            let (i, j) = self.domain.coords(k);
            return Err(Error::Validation(format!(
                "field expected real, imaginary part {:.3e} at node ({i}, {j})",
                self.values[k].im
            )));
        }
        Ok(self.values.iter().map(|v| v.re).collect())
    }

    /// Sup of `|value|` over unmasked nodes.
    pub fn sup_norm(&self) -> f64 {
        self.sup_where(|_, _| true)
    }

    /// Sup over unmasked interior nodes (see [`GridDomain::is_interior`]).
    pub fn sup_interior(&self) -> f64 {
        let d = self.domain;
        self.sup_where(|i, j| d.is_interior(i, j))
    }

    /// Sup over unmasked nodes at least `margin` rows from the edge.
    pub fn sup_margin(&self, margin: usize) -> f64 {
        let d = self.domain;
        self.sup_where(|i, j| d.is_inside(i, j, margin))
    }

    pub fn sup_where(&self, keep: impl Fn(usize, usize) -> bool) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|&(k, _)| !self.is_masked(k))
            .filter(|&(k, _)| {
                let (i, j) = self.domain.coords(k);
                keep(i, j)
            })
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max)
    }

    /// Mean over all nodes, ignoring the mask.
    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.values.len() as f64
    }

    /// Max absolute nodewise difference, over nodes unmasked in both fields.
    pub fn max_diff(&self, other: &ComplexField) -> f64 {
        (self - other).sup_norm()
    }
}

pub(crate) fn union_masks(a: Option<&[bool]>, b: Option<&[bool]>) -> Option<Vec<bool>> {
    match (a, b) {
        (None, None) => None,
        (Some(a), None) => Some(a.to_vec()),
        (None, Some(b)) => Some(b.to_vec()),
        (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(&x, &y)| x || y).collect()),
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&ComplexField> for &ComplexField {
            type Output = ComplexField;
            fn $method(self, rhs: &ComplexField) -> ComplexField {
                self.zip_with(rhs, |a, b| a $op b)
            }
        }
        impl $trait<ComplexField> for ComplexField {
            type Output = ComplexField;
            fn $method(self, rhs: ComplexField) -> ComplexField {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&ComplexField> for ComplexField {
            type Output = ComplexField;
            fn $method(self, rhs: &ComplexField) -> ComplexField {
                (&self).$method(rhs)
            }
        }
        impl $trait<ComplexField> for &ComplexField {
            type Output = ComplexField;
            fn $method(self, rhs: ComplexField) -> ComplexField {
                self.$method(&rhs)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);
binop!(Div, div, /);

impl Mul<Complex64> for &ComplexField {
    type Output = ComplexField;
    fn mul(self, c: Complex64) -> ComplexField {
        self.scale(c)
    }
}

impl Mul<f64> for &ComplexField {
    type Output = ComplexField;
    fn mul(self, c: f64) -> ComplexField {
        self.map(|v| v * c)
    }
}

impl Mul<f64> for ComplexField {
    type Output = ComplexField;
    fn mul(self, c: f64) -> ComplexField {
        &self * c
    }
}

impl Neg for &ComplexField {
    type Output = ComplexField;
    fn neg(self) -> ComplexField {
        self.map(|v| -v)
    }
}

impl Neg for ComplexField {
    type Output = ComplexField;
    fn neg(self) -> ComplexField {
        -&self
    }
}
