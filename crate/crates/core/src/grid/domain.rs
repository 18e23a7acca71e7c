use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Horizontal extent of a chart: either a periodic circle (cylinder model)
/// or a closed interval with boundary columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum XExtent {
    Periodic { period: f64 },
    Bounded { min: f64, max: f64 },
}

/// Rectangular sample grid over a flat cylinder or a rectangle.
///
/// Nodes are laid out row-major with `x` fastest: node `(i, j)` lives at
/// linear index `j * nx + i` and sits at `z = x_i + i y_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridDomain {
    nx: usize,
    ny: usize,
    x: XExtent,
    y_min: f64,
    y_max: f64,
    hx: f64,
    hy: f64,
}

impl GridDomain {
    /// Cylinder of circumference `x_period` over `y_min..=y_max`.
    ///
    /// `x_period == 0` is rejected here; bounded charts go through
    /// [`GridDomain::bounded`] so that their x-interval is explicit.
    pub fn new(nx: usize, ny: usize, x_period: f64, y_min: f64, y_max: f64) -> Result<Self> {
        if !(x_period.is_finite() && x_period > 0.0) {
            return Err(Error::Domain {
                field: "x_period",
                reason: format!("must be positive and finite (got {x_period}); use GridDomain::bounded for non-periodic charts"),
            });
        }
        Self::build(nx, ny, XExtent::Periodic { period: x_period }, y_min, y_max)
    }

    pub fn bounded(nx: usize, ny: usize, x: (f64, f64), y: (f64, f64)) -> Result<Self> {
        if !(x.0.is_finite() && x.1.is_finite() && x.0 < x.1) {
            return Err(Error::Domain {
                field: "x_bounds",
                reason: format!("need finite x_min < x_max (got {} .. {})", x.0, x.1),
            });
        }
        Self::build(nx, ny, XExtent::Bounded { min: x.0, max: x.1 }, y.0, y.1)
    }

    fn build(nx: usize, ny: usize, x: XExtent, y_min: f64, y_max: f64) -> Result<Self> {
        if nx < 4 {
            return Err(Error::Domain {
                field: "nx",
                reason: format!("too small ({nx} < 4)"),
            });
        }
        if ny < 4 {
            return Err(Error::Domain {
                field: "ny",
                reason: format!("too small ({ny} < 4)"),
            });
        }
        if !(y_min.is_finite() && y_max.is_finite() && y_min < y_max) {
            return Err(Error::Domain {
                field: "y_bounds",
                reason: format!("need finite y_min < y_max (got {y_min} .. {y_max})"),
            });
        }
        let hx = match x {
            XExtent::Periodic { period } => period / nx as f64,
            XExtent::Bounded { min, max } => (max - min) / (nx - 1) as f64,
        };
        let hy = (y_max - y_min) / (ny - 1) as f64;
        for (field, h) in [("hx", hx), ("hy", hy)] {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::Domain {
                    field,
                    reason: format!("spacing {h} is not positive and finite"),
                });
            }
        }
        Ok(Self {
            nx,
            ny,
            x,
            y_min,
            y_max,
            hx,
            hy,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    /// Largest grid spacing; the `h` in every `C·h²` bound.
    pub fn h(&self) -> f64 {
        self.hx.max(self.hy)
    }

    pub fn extent(&self) -> XExtent {
        self.x
    }

    pub fn period(&self) -> Option<f64> {
        match self.x {
            XExtent::Periodic { period } => Some(period),
            XExtent::Bounded { .. } => None,
        }
    }

    pub fn is_periodic(&self) -> bool {
        self.period().is_some()
    }

    /// True when the chart lies in the upper half-plane.
    pub fn is_half_plane(&self) -> bool {
        self.y_min > 0.0
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn x_min(&self) -> f64 {
        match self.x {
            XExtent::Periodic { .. } => 0.0,
            XExtent::Bounded { min, .. } => min,
        }
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min() + i as f64 * self.hx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_min + j as f64 * self.hy
    }

    pub fn z(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.x(i), self.y(j))
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    /// Nodes where the discrete equations are imposed: everything except
    /// Dirichlet rows (and boundary columns on bounded charts).
    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        let y_ok = j > 0 && j + 1 < self.ny;
        let x_ok = self.is_periodic() || (i > 0 && i + 1 < self.nx);
        x_ok && y_ok
    }

    /// Nodes at least `margin` rows (and, on bounded charts, columns) away
    /// from the edge. `margin = 1` is [`GridDomain::is_interior`].
    pub fn is_inside(&self, i: usize, j: usize, margin: usize) -> bool {
        let y_ok = j >= margin && j + margin < self.ny;
        let x_ok = self.is_periodic() || (i >= margin && i + margin < self.nx);
        x_ok && y_ok
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        !self.is_interior(i, j)
    }

    /// Same grid at roughly twice the resolution (spacings halved).
    pub fn refined(&self) -> Self {
        let nx = match self.x {
            XExtent::Periodic { .. } => 2 * self.nx,
            XExtent::Bounded { .. } => 2 * self.nx - 1,
        };
        Self::build(nx, 2 * self.ny - 1, self.x, self.y_min, self.y_max)
            .expect("refining a valid domain stays valid")
    }
}
