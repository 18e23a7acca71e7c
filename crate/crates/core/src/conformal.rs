//! Laurent families `∇ᵣ = Σ rᵏ (M_z^{(k)} dz + M_z̄^{(k)} dz̄)` of SL(2)
//! connections, their curvature, diagonal constant gauges and the secondary
//! expansion in the kernel-line frame.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::io::{load_field, save_field};
use crate::grid::{d_z, d_zbar, ComplexField, FormType, GridDomain, Mat2, MatrixField};
use crate::higgs::{self, clamped_exp, BBSliceData, FixedPointData};
use crate::io::{to_manifest, write_atomic};

pub const MIN_POWER: i32 = -3;
pub const MAX_POWER: i32 = 2;

/// Coefficient of `rᵏ`: the `dz` and `dz̄` matrix parts.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    pub mz: MatrixField,
    pub mzbar: MatrixField,
}

impl Coefficient {
    pub fn zeros(domain: GridDomain) -> Self {
        Self {
            mz: MatrixField::zeros(domain, FormType::Dz),
            mzbar: MatrixField::zeros(domain, FormType::Dzbar),
        }
    }

    fn is_zero(&self) -> bool {
        self.mz.is_zero() && self.mzbar.is_zero()
    }
}

#[derive(Debug, Clone)]
pub struct LaurentConnectionFamily {
    domain: GridDomain,
    coefficients: BTreeMap<i32, Coefficient>,
}

/// Families compare equal when every power carries the same coefficient,
/// with absent powers read as zero.
impl PartialEq for LaurentConnectionFamily {
    fn eq(&self, other: &Self) -> bool {
        if self.domain != other.domain {
            return false;
        }
        let zero = Coefficient::zeros(self.domain);
        let keys: std::collections::BTreeSet<i32> =
            self.coefficients.keys().chain(other.coefficients.keys()).copied().collect();
        keys.into_iter().all(|k| {
            let a = self.coefficients.get(&k).unwrap_or(&zero);
            let b = other.coefficients.get(&k).unwrap_or(&zero);
            a == b
        })
    }
}

impl LaurentConnectionFamily {
    pub fn new(domain: GridDomain, coefficients: BTreeMap<i32, Coefficient>) -> Result<Self> {
        let mut checked = BTreeMap::new();
        for (k, c) in coefficients {
            if !(MIN_POWER..=MAX_POWER).contains(&k) && !c.is_zero() {
                return Err(Error::PowerOverflow {
                    power: k,
                    min: MIN_POWER,
                    max: MAX_POWER,
                });
            }
            if *c.mz.domain() != domain || *c.mzbar.domain() != domain {
                return Err(Error::DomainMismatch);
            }
            let mz = c.mz.enforce_trace_free()?.with_form(FormType::Dz);
            let mzbar = c.mzbar.enforce_trace_free()?.with_form(FormType::Dzbar);
            checked.insert(k, Coefficient { mz, mzbar });
        }
        Ok(Self {
            domain,
            coefficients: checked,
        })
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn powers(&self) -> impl Iterator<Item = i32> + '_ {
        self.coefficients.keys().copied()
    }

    pub fn coefficient(&self, k: i32) -> Option<&Coefficient> {
        self.coefficients.get(&k)
    }

    pub fn coefficients(&self) -> &BTreeMap<i32, Coefficient> {
        &self.coefficients
    }

    /// `(A_z, A_z̄) = Σ rᵏ (M_z^{(k)}, M_z̄^{(k)})`.
    pub fn evaluate(&self, r: f64) -> (MatrixField, MatrixField) {
        let mut az = MatrixField::zeros(self.domain, FormType::Dz);
        let mut azb = MatrixField::zeros(self.domain, FormType::Dzbar);
        for (&k, c) in &self.coefficients {
            let w = Complex64::new(r.powi(k), 0.0);
            az = az.add(&c.mz.scale(w));
            azb = azb.add(&c.mzbar.scale(w));
        }
        (az, azb)
    }

    /// Sum of the coefficients with power `< k`, evaluated at `r`.
    pub fn evaluate_below(&self, k: i32, r: f64) -> (MatrixField, MatrixField) {
        let lower = Self {
            domain: self.domain,
            coefficients: self.coefficients.range(..k).map(|(&p, c)| (p, c.clone())).collect(),
        };
        lower.evaluate(r)
    }
}

/// Conformal-limit family of a slice, validated at the slice's default gate.
pub fn build_family(slice: &BBSliceData, hbar: f64) -> Result<LaurentConnectionFamily> {
    build_family_gated(slice, hbar, slice.default_gate())
}

/// Powers `+1: ħ⁻¹Φ dz`, `0: ∂₀^H + β`, `−1: ħΦ₀^† dz̄` with
/// `∂₀^H = diag(∂_z u, −∂_z u) dz` and `Φ₀^† = [[0, Φ̄₁e^{−2u}], [0, 0]]`.
pub fn build_family_gated(slice: &BBSliceData, hbar: f64, gate: f64) -> Result<LaurentConnectionFamily> {
    if hbar == 0.0 || !hbar.is_finite() {
        return Err(Error::Validation(format!("hbar must be finite and nonzero, got {hbar}")));
    }
    slice.validate(gate)?;
    let d = *slice.domain();
    let zero = ComplexField::zeros(d);
    let higgs = slice.higgs_matrix().scale((1.0 / hbar).into());
    let uz = d_z(slice.u());
    let conn = MatrixField::trace_free(uz, zero.clone(), zero.clone(), FormType::Dz)?;
    let dagger = adjoint_entry(slice.base());
    let dag = MatrixField::trace_free(zero.clone(), dagger.scale(hbar.into()), zero, FormType::Dzbar)?;
    let mut coefficients = BTreeMap::new();
    coefficients.insert(
        1,
        Coefficient {
            mz: higgs,
            mzbar: MatrixField::zeros(d, FormType::Dzbar),
        },
    );
    coefficients.insert(
        0,
        Coefficient {
            mz: conn,
            mzbar: slice.beta_matrix(),
        },
    );
    coefficients.insert(
        -1,
        Coefficient {
            mz: MatrixField::zeros(d, FormType::Dz),
            mzbar: dag,
        },
    );
    LaurentConnectionFamily::new(d, coefficients)
}

/// `Φ̄₁e^{−2u}`, the upper-right entry of the adjoint `Φ₀^†`.
pub fn adjoint_entry(base: &FixedPointData) -> ComplexField {
    &base.phi1().conj() * &clamped_exp(base.u(), -2.0)
}

/// Rows from the edge excluded from curvature sups: composed first-order
/// stencils are only O(h) accurate next to a Dirichlet row.
pub const CURVATURE_MARGIN: usize = 2;

/// `∂_z A_z̄ − ∂_z̄ A_z + [A_z, A_z̄]` of the family evaluated at `r`.
pub fn curvature_residual(family: &LaurentConnectionFamily, r: f64) -> MatrixField {
    let (az, azb) = family.evaluate(r);
    curvature(&az, &azb)
}

pub fn curvature(az: &MatrixField, azb: &MatrixField) -> MatrixField {
    let da = azb.map_entries(d_z);
    let db = az.map_entries(d_zbar);
    da.sub(&db).add(&az.commutator(azb)).with_form(FormType::DzDzbar)
}

/// Conjugation by the constant gauge `g(r) = diag(r^p, r^{−p})`.
///
/// The `(1,2)` entries move up by `2p` powers and the `(2,1)` entries down
/// by `2p`; nothing else changes, so the map is exact.
pub fn gauge_transform(family: &LaurentConnectionFamily, p: f64) -> Result<LaurentConnectionFamily> {
    let two_p = 2.0 * p;
    if two_p.fract() != 0.0 || !two_p.is_finite() {
        return Err(Error::Validation(format!("gauge exponent must be a half-integer, got {p}")));
    }
    let s = two_p as i32;
    let d = family.domain;
    // (power, part, entry) -> field
    let mut placed: BTreeMap<i32, [[Option<ComplexField>; 4]; 2]> = BTreeMap::new();
    for (&k, c) in &family.coefficients {
        for (part, m) in [&c.mz, &c.mzbar].into_iter().enumerate() {
            for (e, f) in m.entries().iter().enumerate() {
                let target = match e {
                    1 => k + s,
                    2 => k - s,
                    _ => k,
                };
                let nonzero = f.values().iter().any(|v| *v != Complex64::new(0.0, 0.0));
                if !(MIN_POWER..=MAX_POWER).contains(&target) {
                    if nonzero {
                        return Err(Error::PowerOverflow {
                            power: target,
                            min: MIN_POWER,
                            max: MAX_POWER,
                        });
                    }
                    continue;
                }
                placed.entry(target).or_default()[part][e] = Some(f.clone());
            }
        }
    }
    let mut coefficients = BTreeMap::new();
    for (k, parts) in placed {
        let build = |slots: &[Option<ComplexField>; 4], form| {
            let entries = [0, 1, 2, 3].map(|e| slots[e].clone().unwrap_or_else(|| ComplexField::zeros(d)));
            MatrixField::new(entries, form)
        };
        coefficients.insert(
            k,
            Coefficient {
                mz: build(&parts[0], FormType::Dz)?,
                mzbar: build(&parts[1], FormType::Dzbar)?,
            },
        );
    }
    LaurentConnectionFamily::new(d, coefficients)
}

/// `r → r²`: the coefficient of `rᵏ` moves to `r^{2k}`.
fn square_parameter(family: &LaurentConnectionFamily) -> BTreeMap<i32, Coefficient> {
    family.coefficients.iter().map(|(&k, c)| (2 * k, c.clone())).collect()
}

/// `det` of a trace-free `dz` matrix field.
pub fn det_higgs(phi: &MatrixField) -> Result<ComplexField> {
    if !phi.is_trace_free() {
        return Err(Error::Validation("det_higgs expects a trace-free Higgs field".into()));
    }
    if phi.form() != FormType::Dz {
        return Err(Error::Validation(format!("det_higgs expects a dz-form, got {:?}", phi.form())));
    }
    Ok(phi.determinant())
}

#[derive(Debug, Clone)]
pub struct SecondaryHiggsData {
    /// `Hom(L₂, L₁)` entry of `Φ` in the kernel frame.
    pub phi_tilde: ComplexField,
    /// `Hom(L₁, L₂)` entry of the `dz` part of `D`.
    pub a_minus1: ComplexField,
    /// `(1,1)` entries of the `dz` and `dz̄` parts of `D′`.
    pub dprime_diag: (ComplexField, ComplexField),
    /// `−Φ̃·A₋₁`.
    pub det_field: ComplexField,
}

impl SecondaryHiggsData {
    /// `Φ′ = [[0, Φ̃], [A₋₁, 0]] dz`.
    pub fn phi_prime(&self) -> MatrixField {
        let d = *self.phi_tilde.domain();
        MatrixField::trace_free(ComplexField::zeros(d), self.phi_tilde.clone(), self.a_minus1.clone(), FormType::Dz)
            .expect("shared domain")
    }
}

#[derive(Debug, Clone)]
pub struct SecondaryExpansion {
    pub data: SecondaryHiggsData,
    /// `∇′ᵣ = g(r)·∇_{r²}` in the kernel frame; powers `1`, `0` and the tail.
    pub family: LaurentConnectionFamily,
    /// Sup of the entries of `P⁻¹ΦP` that vanish for nilpotent `Φ` (dropped).
    pub dropped_sup: f64,
    /// Sup of the `dz̄` part of the power-1 coefficient (second fundamental
    /// form of `L₁` for `∂̄`).
    pub antiholomorphic_sup: f64,
}

impl SecondaryExpansion {
    /// `∇′ᵣ − (rΦ′ + D′)`: the coefficients of negative power at `r`.
    pub fn tail(&self, r: f64) -> (MatrixField, MatrixField) {
        self.family.evaluate_below(0, r)
    }

    /// `r · sup ‖∇′ᵣ − (rΦ′ + D′)‖` over interior nodes.
    pub fn scaled_tail_sup(&self, r: f64) -> f64 {
        let (tz, tzb) = self.tail(r);
        r * tz.sup_interior().max(tzb.sup_interior())
    }
}

/// Secondary expansion with the default nilpotency gate.
pub fn secondary_expansion(family: &LaurentConnectionFamily, splitting: &FixedPointData) -> Result<SecondaryExpansion> {
    let higgs = family
        .coefficient(1)
        .ok_or_else(|| Error::Validation("family has no power-1 Higgs coefficient".into()))?;
    let scale = higgs.mz.sup_norm().max(1.0);
    secondary_expansion_gated(family, splitting, higgs::default_gate(family.domain(), scale * scale))
}

/// Rotates to the frame `P = [s/|s|_H, t/|s|_H]` with `s = (Φ₁₁, Φ₂₁)` the
/// kernel of the power-1 coefficient and `t` its `H`-orthogonal complement,
/// substitutes `r → r²` and applies the gauge `p = −1/2`.
pub fn secondary_expansion_gated(
    family: &LaurentConnectionFamily,
    splitting: &FixedPointData,
    nilpotency_gate: f64,
) -> Result<SecondaryExpansion> {
    let d = family.domain;
    if *splitting.domain() != d {
        return Err(Error::DomainMismatch);
    }
    let higgs = family
        .coefficient(1)
        .ok_or_else(|| Error::Validation("family has no power-1 Higgs coefficient".into()))?;
    if !higgs.mzbar.is_zero() {
        return Err(Error::Validation("power-1 coefficient must be a pure dz Higgs term".into()));
    }
    let det_sup = higgs.mz.determinant().sup_norm();
    if det_sup > nilpotency_gate {
        return Err(Error::NotNilpotent {
            det_sup,
            gate: nilpotency_gate,
        });
    }

    let s1 = higgs.mz.entry(0, 0).clone();
    let s2 = higgs.mz.entry(1, 0).clone();
    let eu = clamped_exp(splitting.u(), 1.0);
    let emu = clamped_exp(splitting.u(), -1.0);
    let norm2 = &(&s1.map(|v| v.norm_sqr().into()) * &eu) + &(&s2.map(|v| v.norm_sqr().into()) * &emu);
    if norm2.values().iter().any(|v| v.re <= 0.0) {
        return Err(Error::Degenerate("kernel section vanishes; frame undefined".into()));
    }
    let inv_n = norm2.map(|v| (1.0 / v.re.sqrt()).into());
    let t1 = &(&s2.conj() * &emu).scale((-1.0).into()) * &inv_n;
    let t2 = &(&s1.conj() * &eu) * &inv_n;
    let p = MatrixField::new([&s1 * &inv_n, t1, &s2 * &inv_n, t2], FormType::Scalar)?;
    let det = p.determinant();
    let p_inv = MatrixField::new(
        [
            p.entry(1, 1) / &det,
            (-p.entry(0, 1)) / &det,
            (-p.entry(1, 0)) / &det,
            p.entry(0, 0) / &det,
        ],
        FormType::Scalar,
    )?;
    let conjugate = |m: &MatrixField| p_inv.matmul(m).matmul(&p).with_form(m.form());
    let dpz = p_inv.matmul(&p.map_entries(d_z));
    let dpzb = p_inv.matmul(&p.map_entries(d_zbar));

    let mut rotated = BTreeMap::new();
    for (&k, c) in &family.coefficients {
        let mut mz = conjugate(&c.mz);
        let mut mzbar = conjugate(&c.mzbar);
        if k == 0 {
            mz = mz.add(&dpz);
            mzbar = mzbar.add(&dpzb);
        }
        rotated.insert(k, (mz, mzbar));
    }

    // P⁻¹ΦP has first column P⁻¹Φs/|s| = O(det Φ); drop it.
    let (phi_rot, _) = rotated.get(&1).expect("power 1 present").clone();
    let dropped_sup = [phi_rot.entry(0, 0), phi_rot.entry(1, 0), phi_rot.entry(1, 1)]
        .iter()
        .map(|f| f.sup_norm())
        .fold(0.0, f64::max);
    let zero = ComplexField::zeros(d);
    let phi_clean = MatrixField::new([zero.clone(), phi_rot.entry(0, 1).clone(), zero.clone(), zero.clone()], FormType::Dz)?;
    rotated.insert(1, (phi_clean, MatrixField::zeros(d, FormType::Dzbar)));

    let mut coefficients = BTreeMap::new();
    for (k, (mz, mzbar)) in rotated {
        let mz = enforce_rotated(mz)?;
        let mzbar = enforce_rotated(mzbar)?;
        coefficients.insert(k, Coefficient { mz, mzbar });
    }
    let frame_family = LaurentConnectionFamily {
        domain: d,
        coefficients,
    };
    let squared = LaurentConnectionFamily {
        domain: d,
        coefficients: square_parameter(&frame_family),
    };
    let gauged = gauge_transform(&squared, -0.5)?;

    let lead = gauged.coefficient(1).cloned().unwrap_or_else(|| Coefficient::zeros(d));
    let dprime = gauged.coefficient(0).cloned().unwrap_or_else(|| Coefficient::zeros(d));
    let phi_tilde = lead.mz.entry(0, 1).clone();
    let a_minus1 = lead.mz.entry(1, 0).clone();
    let det_field = -&(&phi_tilde * &a_minus1);
    let antiholomorphic_sup = lead.mzbar.sup_interior();
    Ok(SecondaryExpansion {
        data: SecondaryHiggsData {
            phi_tilde,
            a_minus1,
            dprime_diag: (dprime.mz.entry(0, 0).clone(), dprime.mzbar.entry(0, 0).clone()),
            det_field,
        },
        family: gauged,
        dropped_sup,
        antiholomorphic_sup,
    })
}

/// Restores exact tracelessness lost to rounding in the frame change.
fn enforce_rotated(m: MatrixField) -> Result<MatrixField> {
    let form = m.form();
    let [a, b, c, dd] = m.into_entries();
    let half = (&a - &dd) * 0.5;
    MatrixField::trace_free(half, b, c, form)
}

/// `min |det Φ′|` over interior nodes.
pub fn det_min_interior(det: &ComplexField) -> f64 {
    let d = *det.domain();
    det.values()
        .iter()
        .enumerate()
        .filter(|&(k, _)| {
            let (i, j) = d.coords(k);
            d.is_interior(i, j)
        })
        .map(|(_, v)| v.norm())
        .fold(f64::INFINITY, f64::min)
}

/// One line of an `r` sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub r: f64,
    pub residual_sup: f64,
    pub det_min: f64,
}

/// Default logarithmic `r` sweep.
pub fn default_r_sweep() -> Vec<f64> {
    [1.0, 1.5, 2.0, 2.5, 3.0].iter().map(|e: &f64| 10f64.powf(*e)).collect()
}

/// Curvature sup and `min |det|` of the leading Higgs coefficient at each `r`.
pub fn curvature_sweep(family: &LaurentConnectionFamily, rs: &[f64]) -> Vec<SweepRecord> {
    use rayon::prelude::*;
    let det_min = family
        .coefficient(1)
        .map(|c| det_min_interior(&c.mz.determinant()))
        .unwrap_or(0.0);
    rs.par_iter()
        .map(|&r| SweepRecord {
            r,
            residual_sup: curvature_residual(family, r).sup_margin(CURVATURE_MARGIN),
            det_min,
        })
        .collect()
}

/// Scaled tail sup and `min |det Φ′|` at each `r`.
pub fn secondary_sweep(exp: &SecondaryExpansion, rs: &[f64]) -> Vec<SweepRecord> {
    let det_min = det_min_interior(&exp.data.det_field);
    rs.iter()
        .map(|&r| SweepRecord {
            r,
            residual_sup: exp.scaled_tail_sup(r),
            det_min,
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyManifest {
    pub domain: GridDomain,
    pub powers: Vec<i32>,
    pub adjoint_convention: String,
    /// `power -> part -> entry -> file`.
    pub tables: BTreeMap<String, String>,
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

const ENTRY_NAMES: [&str; 4] = ["11", "12", "21", "22"];

fn table_key(k: i32, part: &str, e: usize) -> String {
    format!("p{k}_{part}_{}", ENTRY_NAMES[e])
}

pub fn save_family(family: &LaurentConnectionFamily, dir: &Path, provenance: BTreeMap<String, String>) -> Result<FamilyManifest> {
    let mut tables = BTreeMap::new();
    for (&k, c) in &family.coefficients {
        for (part, m) in [("z", &c.mz), ("zbar", &c.mzbar)] {
            for (e, f) in m.entries().iter().enumerate() {
                let key = table_key(k, part, e);
                let file = format!("{key}.csv");
                save_field(f, &dir.join(&file))?;
                tables.insert(key, file);
            }
        }
    }
    let manifest = FamilyManifest {
        domain: family.domain,
        powers: family.powers().collect(),
        adjoint_convention: higgs::ADJOINT_CONVENTION.into(),
        tables,
        provenance,
    };
    write_atomic(&dir.join("manifest.toml"), to_manifest(&manifest)?.as_bytes())?;
    Ok(manifest)
}

pub fn load_family(dir: &Path) -> Result<LaurentConnectionFamily> {
    let text = std::fs::read_to_string(dir.join("manifest.toml"))?;
    let m: FamilyManifest =
        toml::from_str(&text).map_err(|e| Error::Validation(format!("family manifest {}: {e}", dir.display())))?;
    let mut coefficients = BTreeMap::new();
    for &k in &m.powers {
        let mut parts = Vec::new();
        for (part, form) in [("z", FormType::Dz), ("zbar", FormType::Dzbar)] {
            let mut entries = Vec::new();
            for e in 0..4 {
                let key = table_key(k, part, e);
                let file = m
                    .tables
                    .get(&key)
                    .ok_or_else(|| Error::Validation(format!("family manifest lacks table `{key}`")))?;
                entries.push(load_field(m.domain, &dir.join(file))?);
            }
            let arr: [ComplexField; 4] = entries.try_into().expect("four entries");
            parts.push(MatrixField::new(arr, form)?);
        }
        let mzbar = parts.pop().expect("two parts");
        let mz = parts.pop().expect("two parts");
        coefficients.insert(k, Coefficient { mz, mzbar });
    }
    LaurentConnectionFamily::new(m.domain, coefficients)
}

/// `g(r) = diag(r^p, r^{−p})`.
pub fn gauge_matrix(r: f64, p: f64) -> Mat2 {
    let a = r.powf(p);
    Mat2::new(a.into(), 0.0.into(), 0.0.into(), (1.0 / a).into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::higgs::{synthesize_slice_with, Phi3Mode, SynthesisOptions};
    use crate::hitchin::{solve_hitchin, HitchinProblem};

    fn cyl(n: usize) -> GridDomain {
        GridDomain::new(n, n, 1.0, 0.5, 1.5).unwrap()
    }

    fn base(n: usize) -> FixedPointData {
        let d = cyl(n);
        let p = HitchinProblem::with_boundary_fn(ComplexField::constant(d, 1.0.into()), |_, y| (2.0 * y).ln()).unwrap();
        let sol = solve_hitchin(&p, 1e-11, 30).unwrap();
        FixedPointData::new(p.phi1().clone(), sol.u).unwrap()
    }

    fn slice(n: usize, amp: f64) -> BBSliceData {
        let b = base(n);
        let seed = ComplexField::from_fn(*b.domain(), |z| Complex64::new(amp * if z.im < 1.0 { 1.0 } else { 0.5 }, 0.0));
        let opts = SynthesisOptions::new(1e-5).with_phi3(Phi3Mode::Nilpotent);
        synthesize_slice_with(&b, &seed, &opts).unwrap().slice
    }

    fn random_family(d: GridDomain) -> LaurentConnectionFamily {
        let mut coefficients = BTreeMap::new();
        for k in -1..=1 {
            let kk = k as f64;
            let f = |z: Complex64| {
                let a = (z * (1.0 + kk)).sin();
                Mat2::new(a, z * z + kk, z.conj() - 2.0, -a)
            };
            let g = |z: Complex64| {
                let a = z.conj() * (0.5 * kk);
                Mat2::new(a, (z * 0.3).exp(), z + kk, -a)
            };
            coefficients.insert(
                k,
                Coefficient {
                    mz: MatrixField::from_fn(d, FormType::Dz, f),
                    mzbar: MatrixField::from_fn(d, FormType::Dzbar, g),
                },
            );
        }
        LaurentConnectionFamily::new(d, coefficients).unwrap()
    }

    #[test]
    fn fixed_point_family_shape() {
        let fp = BBSliceData::fixed_point(base(32));
        let f1 = build_family(&fp, 1.0).unwrap();
        assert_eq!(f1.powers().collect::<Vec<_>>(), vec![-1, 0, 1]);
        let (az, azb) = f1.evaluate(1.0);
        let c = |k: i32| f1.coefficient(k).unwrap().clone();
        let sum_z = c(-1).mz.add(&c(0).mz).add(&c(1).mz);
        let sum_zb = c(-1).mzbar.add(&c(0).mzbar).add(&c(1).mzbar);
        assert!(az.sub(&sum_z).sup_norm() == 0.0 && azb.sub(&sum_zb).sup_norm() == 0.0);
        let f2 = build_family(&fp, 2.0).unwrap();
        assert_eq!(f2.coefficient(1).unwrap().mz, c(1).mz.scale(0.5.into()));
        assert_eq!(f2.coefficient(-1).unwrap().mzbar, c(-1).mzbar.scale(2.0.into()));
        assert!(build_family(&fp, 0.0).is_err());
    }

    #[test]
    fn fixed_point_family_is_flat() {
        let mut prev = None;
        for n in [32, 64] {
            let fam = build_family(&BBSliceData::fixed_point(base(n)), 1.0).unwrap();
            let d = *fam.domain();
            let h2 = d.h() * d.h();
            for r in [1.0, 10.0] {
                let f = curvature_residual(&fam, r).sup_margin(CURVATURE_MARGIN);
                assert!(f < 10.0 * h2 + 1e-9, "r={r}: {f:e}");
            }
            let f1 = curvature_residual(&fam, 1.0).sup_margin(CURVATURE_MARGIN);
            if let Some(p) = prev {
                assert!(p / f1 > 3.0, "{p:e} -> {f1:e}");
            }
            prev = Some(f1);
        }
    }

    #[test]
    fn commuting_constant_family_is_flat() {
        let d = cyl(8);
        let diag = |a: f64| MatrixField::from_fn(d, FormType::Dz, move |_| Mat2::new(a.into(), 0.0.into(), 0.0.into(), (-a).into()));
        let mut co = BTreeMap::new();
        co.insert(
            0,
            Coefficient {
                mz: diag(1.5),
                mzbar: diag(-0.25).with_form(FormType::Dzbar),
            },
        );
        let fam = LaurentConnectionFamily::new(d, co).unwrap();
        assert_eq!(curvature_residual(&fam, 3.0).sup_norm(), 0.0);
    }

    #[test]
    fn gauge_identity_and_inverse_are_exact() {
        let fam = random_family(cyl(8));
        assert_eq!(gauge_transform(&fam, 0.0).unwrap(), fam);
        let there = gauge_transform(&fam, 0.5).unwrap();
        assert_eq!(gauge_transform(&there, -0.5).unwrap(), fam);
        assert!(gauge_transform(&fam, 0.25).is_err());
        assert!(matches!(gauge_transform(&fam, 1.5), Err(Error::PowerOverflow { .. })));
    }

    #[test]
    fn gauge_moves_upper_entry_down() {
        let d = cyl(8);
        let mut m = MatrixField::zeros(d, FormType::Dz).into_entries();
        m[1] = ComplexField::constant(d, 3.0.into());
        let mut co = BTreeMap::new();
        co.insert(
            2,
            Coefficient {
                mz: MatrixField::new(m, FormType::Dz).unwrap(),
                mzbar: MatrixField::zeros(d, FormType::Dzbar),
            },
        );
        let fam = LaurentConnectionFamily::new(d, co).unwrap();
        let g = gauge_transform(&fam, -0.5).unwrap();
        assert_eq!(g.coefficient(1).unwrap().mz.entry(0, 1).sup_norm(), 3.0);
        assert!(g.coefficient(2).map_or(true, |c| c.mz.is_zero()));
    }

    #[test]
    fn gauge_bookkeeping_matches_conjugation() {
        let fam = random_family(cyl(8));
        for p in [-0.5, 0.5] {
            let g = gauge_transform(&fam, p).unwrap();
            for r in [0.5, 1.0, 2.0] {
                let gm = gauge_matrix(r, p);
                let gi = gauge_matrix(r, -p);
                let (az, azb) = fam.evaluate(r);
                let (bz, bzb) = g.evaluate(r);
                for k in 0..az.domain().len() {
                    assert!((gm * az.at(k) * gi - bz.at(k)).norm() < 1e-12);
                    assert!((gm * azb.at(k) * gi - bzb.at(k)).norm() < 1e-12);
                }
                let fa = curvature_residual(&fam, r);
                let fb = curvature_residual(&g, r);
                for k in 0..fa.domain().len() {
                    assert!((gm * fa.at(k) * gi - fb.at(k)).norm() < 1e-10 * (1.0 + fa.at(k).norm()));
                }
            }
        }
    }

    #[test]
    fn det_higgs_examples() {
        let d = cyl(8);
        let z = ComplexField::zeros(d);
        let p1 = ComplexField::from_fn(d, |w| w + 1.0);
        let phi0 = MatrixField::trace_free(z.clone(), z.clone(), p1.clone(), FormType::Dz).unwrap();
        assert_eq!(det_higgs(&phi0).unwrap().sup_norm(), 0.0);
        let q = ComplexField::from_fn(d, |w| w * 2.0);
        let off = MatrixField::trace_free(z.clone(), q.clone(), p1.clone(), FormType::Dz).unwrap();
        assert_eq!(det_higgs(&off).unwrap(), -&(&q * &p1));
        let mu = ComplexField::from_fn(d, |w| w.exp());
        let dg = MatrixField::trace_free(mu.clone(), z.clone(), z, FormType::Dz).unwrap();
        assert_eq!(det_higgs(&dg).unwrap(), -&(&mu * &mu));
        let not_tf = MatrixField::new([mu.clone(), mu.clone(), mu.clone(), mu], FormType::Dz).unwrap();
        assert!(det_higgs(&not_tf).is_err());
    }

    #[test]
    fn secondary_at_fixed_point_is_nilpotent() {
        let b = base(32);
        let fam = build_family(&BBSliceData::fixed_point(b.clone()), 1.0).unwrap();
        let sec = secondary_expansion(&fam, &b).unwrap();
        assert!(sec.data.a_minus1.sup_interior() < 1e-12);
        assert!(sec.data.det_field.sup_interior() < 1e-12);
    }

    #[test]
    fn secondary_on_slice() {
        let s = slice(64, 1e-2);
        let fam = build_family(&s, 1.0).unwrap();
        let sec = secondary_expansion(&fam, s.base()).unwrap();
        assert!(det_min_interior(&sec.data.det_field) > 0.0);
        let lead = sec.family.coefficient(1).unwrap();
        assert_eq!(lead.mz.determinant(), sec.data.det_field);
        let tails: Vec<f64> = [10.0, 100.0, 1000.0].iter().map(|&r| sec.scaled_tail_sup(r)).collect();
        let (lo, hi) = tails.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &t| (a.min(t), b.max(t)));
        assert!(hi <= 1.2 * lo, "{tails:?}");
        // kernel frame of ∂̄_E is holomorphic up to discretization
        assert!(sec.antiholomorphic_sup < 1e-3, "{:e}", sec.antiholomorphic_sup);
    }

    #[test]
    fn secondary_refuses_non_nilpotent() {
        let s = slice(32, 1e-2);
        let zm = BBSliceData::new(
            s.base().clone(),
            s.phi2().clone(),
            ComplexField::constant(*s.domain(), 1.0.into()),
            s.b().clone(),
        )
        .unwrap();
        let fam = build_family_gated(&zm, 1.0, 1.0).unwrap();
        assert!(matches!(secondary_expansion(&fam, s.base()), Err(Error::NotNilpotent { .. })));
    }

    #[test]
    fn family_round_trip() {
        let fam = random_family(cyl(8));
        let dir = tempfile::tempdir().unwrap();
        save_family(&fam, dir.path(), BTreeMap::new()).unwrap();
        assert_eq!(load_family(dir.path()).unwrap(), fam);
    }
}
