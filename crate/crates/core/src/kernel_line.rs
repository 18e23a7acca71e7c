//! The kernel line `L₁ = span(s)`, `s = (Φ₂, Φ₁)`, of a nilpotent slice and
//! the identity chain forced by asking `∂₀^H` to preserve it.
//!
//! With `f = Φ₁/Φ₂`, a preserved kernel needs `∂_z f = 2f∂_z u` (eq1) and
//! `∂_z̄ f = b f²` (eq2), whence `2∂_z̄∂_z u/(∂_z b + 2b∂_z u) = f`. The
//! Hitchin and `D′` equations instead give `−f`.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::io::save_field;
use crate::grid::{d_z, d_zbar, dzbar_dz, ComplexField, GridDomain};
use crate::higgs::{dprime_residual, kernel_section, BBSliceData};
use crate::io::{to_manifest, to_records, write_atomic};

type C = Complex64;

/// Default `|Φ₂|` mask threshold, relative to `sup |Φ₂|`.
pub const MASK_THRESHOLD: f64 = 1e-3;
/// Floor on `|∂_z b + 2b∂_z u|`, relative to the slice scale.
pub const DENOMINATOR_FLOOR: f64 = 1e-8;

fn wedge_unchecked(slice: &BBSliceData) -> ComplexField {
    let (p1, p2) = (slice.phi1(), slice.phi2());
    let uz = d_z(slice.u());
    let a = p2 * &(&d_z(p1) - &(&uz * p1));
    let b = p1 * &(&d_z(p2) + &(&uz * p2));
    &a - &b
}

/// `s ∧ ∂₀^H s = Φ₂(∂_z − ∂_z u)Φ₁ − Φ₁(∂_z + ∂_z u)Φ₂`; nonzero exactly
/// where `∂₀^H` moves `s` off `L₁`.
pub fn wedge_with_dh(slice: &BBSliceData) -> Result<ComplexField> {
    kernel_section(slice)?;
    Ok(wedge_unchecked(slice))
}

/// Masks `|Φ₂| < threshold·sup|Φ₂|` and the Dirichlet rows. Everything is
/// masked when `Φ₂ ≡ 0`.
fn phi2_mask(slice: &BBSliceData, threshold: f64) -> Vec<bool> {
    let d = slice.domain();
    let p2 = slice.phi2();
    let cut = threshold * p2.sup_norm();
    (0..d.len())
        .map(|k| {
            let (i, j) = d.coords(k);
            !d.is_interior(i, j) || !(p2.values()[k].norm() >= cut) || p2.values()[k].norm() == 0.0
        })
        .collect()
}

/// Grows a mask by one node in each grid direction, so first-order stencils
/// never read masked values.
fn dilate(d: &GridDomain, mask: &[bool]) -> Vec<bool> {
    let (nx, ny) = (d.nx(), d.ny());
    let periodic = d.is_periodic();
    (0..d.len())
        .map(|k| {
            let (i, j) = d.coords(k);
            let mut hit = mask[k];
            if j > 0 {
                hit |= mask[d.index(i, j - 1)];
            }
            if j + 1 < ny {
                hit |= mask[d.index(i, j + 1)];
            }
            if i > 0 {
                hit |= mask[d.index(i - 1, j)];
            } else if periodic {
                hit |= mask[d.index(nx - 1, j)];
            }
            if i + 1 < nx {
                hit |= mask[d.index(i + 1, j)];
            } else if periodic {
                hit |= mask[d.index(0, j)];
            }
            hit
        })
        .collect()
}

fn masked(d: GridDomain, values: Vec<C>, mask: Vec<bool>) -> ComplexField {
    let values = values
        .into_iter()
        .zip(&mask)
        .map(|(v, &m)| if m { C::new(0.0, 0.0) } else { v })
        .collect();
    ComplexField::new(d, values)
        .and_then(|f| f.with_mask(mask))
        .expect("mask matches domain")
}

/// Gate levels and residuals recorded with an identity chain.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IdentityGates {
    pub gate: f64,
    pub hitchin_residual: f64,
    pub d1_residual: f64,
    pub mask_threshold: f64,
    pub denominator_floor: f64,
    /// Both hypotheses hold at `gate`.
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct IdentityReport {
    pub f: ComplexField,
    pub wedge: ComplexField,
    pub f1_value: ComplexField,
    pub eq1_res: ComplexField,
    pub eq2_res: ComplexField,
    /// `sup |f1_value + f|` over the joint mask.
    pub contradiction_sup: f64,
    /// `contradiction_sup / sup |f|` over the joint mask.
    pub contradiction_scaled: f64,
    pub unmasked_nodes: usize,
    /// No node survives the masks (the fixed point).
    pub degenerate: bool,
    pub gates: IdentityGates,
}

/// Scalar summary, one record per report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentitySummary {
    pub contradiction_sup: f64,
    pub contradiction_scaled: f64,
    pub unmasked_nodes: usize,
    pub degenerate: bool,
    pub probe: Option<f64>,
    pub gates: IdentityGates,
}

impl IdentityReport {
    pub fn summary(&self, probe: Option<f64>) -> IdentitySummary {
        IdentitySummary {
            contradiction_sup: self.contradiction_sup,
            contradiction_scaled: self.contradiction_scaled,
            unmasked_nodes: self.unmasked_nodes,
            degenerate: self.degenerate,
            probe,
            gates: self.gates,
        }
    }
}

/// Identity chain at the slice's default gate.
pub fn identity_chain(slice: &BBSliceData, mask_threshold: f64) -> Result<IdentityReport> {
    identity_chain_gated(slice, mask_threshold, slice.default_gate())
}

/// Evaluates `f`, the wedge, eq1/eq2 residuals and the `(f1)` value.
///
/// The Hitchin and `D′` hypotheses are recorded in `gates` rather than
/// enforced, so perturbed slices can still be measured.
pub fn identity_chain_gated(slice: &BBSliceData, mask_threshold: f64, gate: f64) -> Result<IdentityReport> {
    if !(mask_threshold >= 0.0) {
        return Err(Error::Validation("mask threshold must be nonnegative".into()));
    }
    let d = *slice.domain();
    let (p1, p2, u, b) = (slice.phi1(), slice.phi2(), slice.u(), slice.b());
    let hitchin_residual = slice.base().hitchin_residual();
    let d1_residual = dprime_residual(slice).sup_interior();
    let floor = DENOMINATOR_FLOOR * slice.scale();

    let f_mask = phi2_mask(slice, mask_threshold);
    let fv: Vec<C> = p1.values().iter().zip(p2.values()).map(|(a, c)| a / c).collect();
    let f = masked(d, fv, f_mask.clone());

    let uz = d_z(u);
    let deriv_mask = dilate(&d, &f_mask);
    let eq1 = &d_z(&f) - &((&f * &uz) * 2.0);
    let eq2 = &d_zbar(&f) - &(b * &(&f * &f));
    let eq1_res = masked(d, eq1.into_values(), deriv_mask.clone());
    let eq2_res = masked(d, eq2.into_values(), deriv_mask);

    let denom = &d_z(b) + &((b * &uz) * 2.0);
    let num = dzbar_dz(u) * 2.0;
    let f1_mask: Vec<bool> = (0..d.len())
        .map(|k| {
            let (i, j) = d.coords(k);
            !d.is_interior(i, j) || !(denom.values()[k].norm() >= floor)
        })
        .collect();
    let f1v: Vec<C> = num.values().iter().zip(denom.values()).map(|(n, q)| n / q).collect();
    let f1_value = masked(d, f1v, f1_mask.clone());

    let joint: Vec<bool> = f_mask.iter().zip(&f1_mask).map(|(a, b)| *a || *b).collect();
    let unmasked_nodes = joint.iter().filter(|m| !**m).count();
    let (mut raw, mut fsup) = (0.0f64, 0.0f64);
    for k in (0..d.len()).filter(|&k| !joint[k]) {
        raw = raw.max((f1_value.values()[k] + f.values()[k]).norm());
        fsup = fsup.max(f.values()[k].norm());
    }
    let scaled = if fsup > 0.0 { raw / fsup } else { 0.0 };

    Ok(IdentityReport {
        f,
        wedge: wedge_unchecked(slice),
        f1_value,
        eq1_res,
        eq2_res,
        contradiction_sup: raw,
        contradiction_scaled: scaled,
        unmasked_nodes,
        degenerate: unmasked_nodes == 0,
        gates: IdentityGates {
            gate,
            hitchin_residual,
            d1_residual,
            mask_threshold,
            denominator_floor: floor,
            passed: hitchin_residual <= gate && d1_residual <= gate,
        },
    })
}

/// `min |s ∧ ∂₀^H s| / |s|²_H` over the `|Φ₂|` mask, with
/// `|s|²_H = e^u|Φ₂|² + e^{−u}|Φ₁|²`.
pub fn preserved_kernel_probe(slice: &BBSliceData) -> Result<f64> {
    if slice.phi2().sup_norm() == 0.0 {
        return Err(Error::Degenerate(
            "Φ₂ ≡ 0: the slice is the fixed point, whose kernel line is trivially preserved".into(),
        ));
    }
    let wedge = wedge_with_dh(slice)?;
    let mask = phi2_mask(slice, MASK_THRESHOLD);
    let (p1, p2, u) = (slice.phi1(), slice.phi2(), slice.u());
    let mut best = f64::INFINITY;
    for k in (0..mask.len()).filter(|&k| !mask[k]) {
        let ur = u.values()[k].re;
        let norm2 = ur.exp() * p2.values()[k].norm_sqr() + (-ur).exp() * p1.values()[k].norm_sqr();
        best = best.min(wedge.values()[k].norm() / norm2);
    }
    if !best.is_finite() {
        return Err(Error::Degenerate("every node is masked; no probe value".into()));
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityManifest {
    pub domain: GridDomain,
    pub summary: IdentitySummary,
    pub fields: BTreeMap<String, String>,
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

/// Writes per-field tables, `manifest.toml` and `summary.jsonl`.
pub fn save_identity_report(
    report: &IdentityReport,
    probe: Option<f64>,
    dir: &Path,
    provenance: BTreeMap<String, String>,
) -> Result<IdentityManifest> {
    let tables = [
        ("f", &report.f),
        ("wedge", &report.wedge),
        ("f1_value", &report.f1_value),
        ("eq1_res", &report.eq1_res),
        ("eq2_res", &report.eq2_res),
    ];
    let mut fields = BTreeMap::new();
    for (name, field) in tables {
        let file = format!("{name}.csv");
        save_field(field, &dir.join(&file))?;
        fields.insert(name.to_string(), file);
    }
    let summary = report.summary(probe);
    write_atomic(&dir.join("summary.jsonl"), to_records(&[&summary])?.as_bytes())?;
    let manifest = IdentityManifest {
        domain: *report.f.domain(),
        summary,
        fields,
        provenance,
    };
    write_atomic(&dir.join("manifest.toml"), to_manifest(&manifest)?.as_bytes())?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::higgs::{synthesize_slice_with, FixedPointData, Phi3Mode, SynthesisOptions};
    use crate::hitchin::{solve_hitchin, HitchinProblem};

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn rect(n: usize) -> GridDomain {
        GridDomain::bounded(n, n, (-0.5, 0.5), (0.5, 1.5)).unwrap()
    }

    fn base(n: usize) -> FixedPointData {
        let d = GridDomain::new(n, n, 1.0, 0.5, 1.5).unwrap();
        let p = HitchinProblem::with_boundary_fn(ComplexField::constant(d, 1.0.into()), |_, y| (2.0 * y).ln()).unwrap();
        let sol = solve_hitchin(&p, 1e-11, 30).unwrap();
        FixedPointData::new(p.phi1().clone(), sol.u).unwrap()
    }

    fn slice(n: usize, amp: f64) -> BBSliceData {
        let b = base(n);
        let seed = ComplexField::from_fn(*b.domain(), |z| c(amp * if z.im < 1.0 { 1.0 } else { 0.5 }, 0.0));
        let opts = SynthesisOptions::new(1e-5).with_phi3(Phi3Mode::Nilpotent);
        synthesize_slice_with(&b, &seed, &opts).unwrap().slice
    }

    fn polynomial(scale: C) -> BBSliceData {
        let d = rect(16);
        let base = FixedPointData::from_fields(ComplexField::constant(d, scale), ComplexField::zeros(d)).unwrap();
        let p2 = ComplexField::from_fn(d, |z| scale * z);
        let p3 = ComplexField::from_fn(d, |z| -scale * z * z);
        BBSliceData::new(base, p2, p3, ComplexField::zeros(d)).unwrap()
    }

    #[test]
    fn wedge_examples() {
        let s = polynomial(c(1.0, 0.0));
        let w = wedge_with_dh(&s).unwrap();
        assert!(w.values().iter().all(|v| (v + 1.0).norm() < 1e-12));
        let k = c(0.5, 1.5);
        let sc = polynomial(k);
        let wc = wedge_with_dh(&sc).unwrap();
        assert!(wc.values().iter().all(|v| (v + k * k).norm() < 1e-12));
        let fp = BBSliceData::fixed_point(base(16));
        assert_eq!(wedge_with_dh(&fp).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn fixed_point_is_degenerate() {
        let fp = BBSliceData::fixed_point(base(32));
        let r = identity_chain(&fp, MASK_THRESHOLD).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.unmasked_nodes, 0);
        assert_eq!(r.contradiction_sup, 0.0);
        assert!(r.gates.passed);
        assert!(matches!(preserved_kernel_probe(&fp), Err(Error::Degenerate(_))));
    }

    #[test]
    fn chain_gives_minus_f_and_reacts_to_perturbation() {
        let s = slice(64, 1e-2);
        let r = identity_chain_gated(&s, MASK_THRESHOLD, 1e-5).unwrap();
        assert!(r.gates.passed, "{:?}", r.gates);
        assert!(!r.degenerate);
        assert!(r.contradiction_scaled < 1e-4, "{}", r.contradiction_scaled);
        let bumped = BBSliceData::new(s.base().clone(), s.phi2().clone(), s.phi3().clone(), s.b() * 1.1).unwrap();
        let rp = identity_chain_gated(&bumped, MASK_THRESHOLD, 1e-5).unwrap();
        assert!(!rp.gates.passed);
        assert!(rp.contradiction_sup > 10.0 * r.contradiction_sup);
        for v in [r.contradiction_sup, rp.contradiction_sup] {
            assert!(v.is_finite());
        }
    }

    #[test]
    fn masks_are_monotone_in_threshold() {
        let s = slice(32, 1e-2);
        let lo = identity_chain(&s, 1e-3).unwrap();
        let hi = identity_chain(&s, 0.9).unwrap();
        let (ml, mh) = (lo.f.mask().unwrap(), hi.f.mask().unwrap());
        assert!(ml.iter().zip(mh).all(|(a, b)| !a || *b));
        assert!(hi.unmasked_nodes <= lo.unmasked_nodes);
    }

    #[test]
    fn wedge_matches_eq1_residual() {
        let s = slice(64, 1e-2);
        let r = identity_chain(&s, MASK_THRESHOLD).unwrap();
        let p2 = s.phi2();
        let d = s.domain();
        let scale = r.wedge.sup_margin(2);
        let (mut plus, mut minus): (f64, f64) = (0.0, 0.0);
        for k in 0..d.len() {
            let (i, j) = d.coords(k);
            if r.eq1_res.is_masked(k) || !d.is_inside(i, j, 2) {
                continue;
            }
            let lhs = r.wedge.values()[k];
            let rhs = p2.values()[k] * p2.values()[k] * r.eq1_res.values()[k];
            plus = plus.max((lhs - rhs).norm() / scale);
            minus = minus.max((lhs + rhs).norm() / scale);
        }
        assert!(plus < 2e-2, "{plus}");
        assert!(minus > 1.0, "{minus}");
    }

    #[test]
    fn probe_is_positive_and_normalized() {
        let s = slice(32, 1e-2);
        let p = preserved_kernel_probe(&s).unwrap();
        assert!(p > 0.0);
        let k = 3.0;
        let scaled_base = FixedPointData::from_fields(s.phi1() * k, s.u().clone()).unwrap();
        let scaled = BBSliceData::new(scaled_base, s.phi2() * k, s.phi3() * k, s.b().clone()).unwrap();
        let w = wedge_unchecked(&s).sup_norm();
        let ws = wedge_unchecked(&scaled).sup_norm();
        assert!((ws / w - k * k).abs() < 1e-10);
        // Φ₃ ↦ kΦ₃ keeps det = k²·det, so the unscaled gate still applies after rescaling
        let ps = preserved_kernel_probe(&scaled);
        if let Ok(ps) = ps {
            assert!((ps / p - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn report_bundle_is_written() {
        let s = slice(32, 1e-2);
        let r = identity_chain_gated(&s, MASK_THRESHOLD, 1e-4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let m = save_identity_report(&r, preserved_kernel_probe(&s).ok(), dir.path(), BTreeMap::new()).unwrap();
        assert_eq!(m.fields.len(), 5);
        let line = std::fs::read_to_string(dir.path().join("summary.jsonl")).unwrap();
        let back: IdentitySummary = serde_json::from_str(line.trim()).unwrap();
        assert_eq!(back.contradiction_sup, r.contradiction_sup);
    }
}
