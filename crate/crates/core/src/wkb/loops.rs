use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::io::{Read, Write};

use num_complex::Complex64;

use super::spectral;
use crate::conformal::LaurentConnectionFamily;
use crate::error::{Error, Result};
use crate::grid::io::fmt_f64;
use crate::grid::{GridDomain, Mat2, MatrixField};

type C = Complex64;

/// Closed loop sampled at `t_i = i/nt`, stored as a continuous lift:
/// `z(1) = z(0) + winding·period`.
#[derive(Debug, Clone, PartialEq)]
pub struct Loop {
    z: Vec<C>,
    dz: Vec<C>,
    winding: i64,
    period: f64,
}

impl Loop {
    fn build(z: Vec<C>, dz: Vec<C>, winding: i64, period: f64) -> Result<Self> {
        if z.len() < 4 {
            return Err(Error::Loop(format!("need at least 4 samples, got {}", z.len())));
        }
        if z.iter().chain(&dz).any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Loop("non-finite loop samples".into()));
        }
        Ok(Self { z, dz, winding, period })
    }

    /// `t ↦ x₀ + t·period + i·y₀` on a periodic chart.
    pub fn horizontal(domain: &GridDomain, y0: f64, nt: usize) -> Result<Self> {
        Self::sinusoid(domain, y0, 0.0, 0.0, nt)
    }

    /// `x = x₀ + t·period`, `y = y₀ + a·sin(2πt + φ)`.
    pub fn sinusoid(domain: &GridDomain, y0: f64, amplitude: f64, phase: f64, nt: usize) -> Result<Self> {
        let period = domain
            .period()
            .ok_or_else(|| Error::Loop("horizontal loops need a periodic-x chart".into()))?;
        let x0 = domain.x_min();
        let mut z = Vec::with_capacity(nt);
        let mut dz = Vec::with_capacity(nt);
        for i in 0..nt {
            let t = i as f64 / nt as f64;
            let arg = TAU * t + phase;
            z.push(C::new(x0 + t * period, y0 + amplitude * arg.sin()));
            dz.push(C::new(period, amplitude * TAU * arg.cos()));
        }
        Self::build(z, dz, 1, period)
    }

    /// Loop through `points`, whose last entry closes the curve: it must
    /// equal the first modulo `period` (pass `0.0` for charts without one).
    pub fn from_points(points: &[C], period: f64) -> Result<Self> {
        let n = points.len();
        if n < 5 {
            return Err(Error::Loop("need at least 4 samples plus the closing point".into()));
        }
        let (first, last) = (points[0], points[n - 1]);
        let shift = last - first;
        let winding = if period > 0.0 { (shift.re / period).round() } else { 0.0 };
        let defect = (shift - C::new(winding * period, 0.0)).norm();
        if defect > 1e-9 * (1.0 + first.norm()) {
            return Err(Error::Loop(format!("open curve: endpoint misses the start by {defect:.3e}")));
        }
        let z = points[..n - 1].to_vec();
        let lift = C::new(winding * period, 0.0);
        let nt = z.len();
        let periodic: Vec<C> = z.iter().enumerate().map(|(i, v)| v - lift * (i as f64 / nt as f64)).collect();
        let dz = spectral::derivative(&periodic).into_iter().map(|v| v + lift).collect();
        Self::build(z, dz, winding as i64, period)
    }

    pub fn nt(&self) -> usize {
        self.z.len()
    }

    pub fn t(&self, i: usize) -> f64 {
        i as f64 / self.nt() as f64
    }

    pub fn points(&self) -> &[C] {
        &self.z
    }

    pub fn velocity(&self) -> &[C] {
        &self.dz
    }

    pub fn winding(&self) -> i64 {
        self.winding
    }

    /// Closing point `z(1)`.
    pub fn end(&self) -> C {
        self.z[0] + C::new(self.winding as f64 * self.period, 0.0)
    }

    /// Orientation reversal `t ↦ 1 − t`.
    pub fn reversed(&self) -> Self {
        let n = self.nt();
        let mut z = Vec::with_capacity(n);
        let mut dz = Vec::with_capacity(n);
        z.push(self.end());
        dz.push(-self.dz[0]);
        for i in 1..n {
            z.push(self.z[n - i]);
            dz.push(-self.dz[n - i]);
        }
        Self {
            z,
            dz,
            winding: -self.winding,
            period: self.period,
        }
    }

    /// Writes `t,x,y` rows including the closing point at `t = 1`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "y"])?;
        let end = self.end();
        for (i, p) in self.z.iter().chain(std::iter::once(&end)).enumerate() {
            w.write_record([fmt_f64(i as f64 / self.nt() as f64), fmt_f64(p.re), fmt_f64(p.im)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, period: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "x", "y"] {
            return Err(Error::Table(format!("loop table header must be t,x,y, got {headers:?}")));
        }
        let mut pts = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let num = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Table(format!("loop table row {}: bad column {k}", line + 2)))
            };
            pts.push((num(0)?, C::new(num(1)?, num(2)?)));
        }
        let n = pts.len();
        if n < 2 {
            return Err(Error::Table("loop table too short".into()));
        }
        for (i, (t, _)) in pts.iter().enumerate() {
            if (t - i as f64 / (n - 1) as f64).abs() > 1e-12 {
                return Err(Error::Table(format!("loop table t values must be uniform on [0, 1]; row {} has {t}", i + 2)));
            }
        }
        Self::from_points(&pts.iter().map(|p| p.1).collect::<Vec<_>>(), period)
    }
}

/// Bilinear sample of every entry of `m` at `z`.
pub(crate) fn sample_matrix(m: &MatrixField, z: C) -> Option<Mat2> {
    let d = m.domain();
    let (i0, i1, fx) = if let Some(p) = d.period() {
        let u = ((z.re - d.x_min()).rem_euclid(p)) / d.hx();
        let i0 = (u.floor() as usize).min(d.nx() - 1);
        (i0, (i0 + 1) % d.nx(), u - i0 as f64)
    } else {
        let u = (z.re - d.x_min()) / d.hx();
        if !(0.0..=(d.nx() - 1) as f64).contains(&u) {
            return None;
        }
        let i0 = (u.floor() as usize).min(d.nx() - 2);
        (i0, i0 + 1, u - i0 as f64)
    };
    let v = (z.im - d.y_min()) / d.hy();
    if !(v >= -1e-12 && v <= (d.ny() - 1) as f64 + 1e-12) {
        return None;
    }
    let j0 = (v.floor().max(0.0) as usize).min(d.ny() - 2);
    let fy = (v - j0 as f64).clamp(0.0, 1.0);
    let w = [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy];
    let nodes = [d.index(i0, j0), d.index(i1, j0), d.index(i0, j0 + 1), d.index(i1, j0 + 1)];
    let e = |n: usize| -> C {
        let vals = m.entries()[n].values();
        nodes.iter().zip(w).map(|(&k, wk)| vals[k] * wk).sum()
    };
    Some(Mat2::new(e(0), e(1), e(2), e(3)))
}

/// `γ*(M_z dz + M_z̄ dz̄) = M_z·ż + M_z̄·conj(ż)` at every sample.
pub fn pullback_form(mz: &MatrixField, mzbar: &MatrixField, lp: &Loop) -> Result<Vec<Mat2>> {
    lp.z.iter()
        .zip(&lp.dz)
        .enumerate()
        .map(|(i, (&z, &dz))| {
            let a = sample_matrix(mz, z).ok_or(Error::LoopExitsDomain { t: lp.t(i) })?;
            let b = sample_matrix(mzbar, z).ok_or(Error::LoopExitsDomain { t: lp.t(i) })?;
            Ok(a * dz + b * dz.conj())
        })
        .collect()
}

/// Sampled coefficient `C(t)` of a pulled-back connection.
#[derive(Debug, Clone)]
pub struct LoopSamples {
    pub t: Vec<f64>,
    pub z: Vec<C>,
    pub c: Vec<Mat2>,
}

/// Per-power pullback of a family; `at(r)` sums `rᵏ·C_k`.
#[derive(Debug, Clone)]
pub struct FamilyPullback {
    pub lp: Loop,
    pub powers: BTreeMap<i32, Vec<Mat2>>,
}

impl FamilyPullback {
    pub fn new(family: &LaurentConnectionFamily, lp: &Loop) -> Result<Self> {
        let mut powers = BTreeMap::new();
        for (&k, c) in family.coefficients() {
            powers.insert(k, pullback_form(&c.mz, &c.mzbar, lp)?);
        }
        Ok(Self { lp: lp.clone(), powers })
    }

    pub fn power(&self, k: i32) -> Option<&[Mat2]> {
        self.powers.get(&k).map(Vec::as_slice)
    }

    pub fn at(&self, r: f64) -> LoopSamples {
        let n = self.lp.nt();
        let mut c = vec![Mat2::zeros(); n];
        for (&k, samples) in &self.powers {
            let w = C::new(r.powi(k), 0.0);
            c.iter_mut().zip(samples).for_each(|(acc, m)| *acc += m * w);
        }
        LoopSamples {
            t: (0..n).map(|i| self.lp.t(i)).collect(),
            z: self.lp.z.clone(),
            c,
        }
    }
}

/// Pulls the family evaluated at `r` back to the loop.
pub fn pullback_loop(family: &LaurentConnectionFamily, lp: &Loop, r: f64) -> Result<LoopSamples> {
    Ok(FamilyPullback::new(family, lp)?.at(r))
}
