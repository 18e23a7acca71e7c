//! Fixed-point and slice data in the local frame where
//! `Φ₀ = [[0, 0], [Φ₁, 0]] dz`, `H = diag(e^u, e^{−u})`,
//! `Φ = [[Φ₂, Φ₃], [Φ₁, −Φ₂]] dz` and `β = [[0, b], [0, 0]] dz̄`.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::io::{load_field, save_field};
use crate::grid::{d_z, d_zbar, ComplexField, FormType, GridDomain, MatrixField};
use crate::hitchin::{self, U_CLAMP};
use crate::io::{to_manifest, write_atomic};
use crate::linalg::{self, gmres, Csr, GmresOptions, GridOperators, XAveragedSolver};

/// `max(1e-6, 10·h²·scale)`.
pub fn default_gate(domain: &GridDomain, scale: f64) -> f64 {
    let h = domain.h();
    (10.0 * h * h * scale).max(1e-6)
}

fn field_scale(f: &ComplexField) -> f64 {
    f.sup_norm().max(1.0)
}

pub(crate) fn clamped_exp(u: &ComplexField, factor: f64) -> ComplexField {
    u.map(|v| Complex64::new((factor * v.re.clamp(-U_CLAMP, U_CLAMP)).exp(), 0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointData {
    phi1: ComplexField,
    u: ComplexField,
}

impl FixedPointData {
    /// Checks holomorphy of `Φ₁` and the Hitchin residual at the default gate.
    pub fn new(phi1: ComplexField, u: ComplexField) -> Result<Self> {
        let gate = default_gate(phi1.domain(), field_scale(&phi1));
        Self::with_gate(phi1, u, gate)
    }

    pub fn with_gate(phi1: ComplexField, u: ComplexField, gate: f64) -> Result<Self> {
        let fp = Self::from_fields(phi1, u)?;
        let hol = fp.holomorphy_residual();
        if hol > gate {
            return Err(Error::gate("phi1 holomorphy", hol, gate));
        }
        let hit = fp.hitchin_residual();
        if hit > gate {
            return Err(Error::gate("hitchin", hit, gate));
        }
        Ok(fp)
    }

    /// Structural checks only (shared domain, real `u`).
    pub fn from_fields(phi1: ComplexField, u: ComplexField) -> Result<Self> {
        phi1.ensure_same_domain(&u)?;
        u.real_values(hitchin::REAL_TOL)?;
        Ok(Self { phi1, u })
    }

    pub fn domain(&self) -> &GridDomain {
        self.phi1.domain()
    }

    pub fn phi1(&self) -> &ComplexField {
        &self.phi1
    }

    pub fn u(&self) -> &ComplexField {
        &self.u
    }

    /// Interior sup of `∂_z̄Φ₁`.
    pub fn holomorphy_residual(&self) -> f64 {
        d_zbar(&self.phi1).sup_interior()
    }

    /// Interior sup of the Hitchin residual.
    pub fn hitchin_residual(&self) -> f64 {
        hitchin::hitchin_residual(&self.u, &self.phi1)
            .map(|r| r.sup_interior())
            .unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceResiduals {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
}

impl SliceResiduals {
    pub fn max(&self) -> f64 {
        self.r1.max(self.r2).max(self.r3).max(self.r4)
    }

    fn check(&self, gate: f64) -> Result<()> {
        for (name, v) in [("r1", self.r1), ("r2", self.r2), ("r3", self.r3), ("r4", self.r4)] {
            if !(v <= gate) {
                return Err(Error::gate(name, v, gate));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BBSliceData {
    base: FixedPointData,
    phi2: ComplexField,
    phi3: ComplexField,
    b: ComplexField,
}

impl BBSliceData {
    /// Structural constructor; see [`BBSliceData::validate`] for the gates.
    pub fn new(base: FixedPointData, phi2: ComplexField, phi3: ComplexField, b: ComplexField) -> Result<Self> {
        for f in [&phi2, &phi3, &b] {
            base.phi1.ensure_same_domain(f)?;
        }
        Ok(Self { base, phi2, phi3, b })
    }

    pub fn fixed_point(base: FixedPointData) -> Self {
        let z = ComplexField::zeros(*base.domain());
        Self {
            base,
            phi2: z.clone(),
            phi3: z.clone(),
            b: z,
        }
    }

    pub fn base(&self) -> &FixedPointData {
        &self.base
    }

    pub fn domain(&self) -> &GridDomain {
        self.base.domain()
    }

    pub fn phi1(&self) -> &ComplexField {
        &self.base.phi1
    }

    pub fn u(&self) -> &ComplexField {
        &self.base.u
    }

    pub fn phi2(&self) -> &ComplexField {
        &self.phi2
    }

    pub fn phi3(&self) -> &ComplexField {
        &self.phi3
    }

    pub fn b(&self) -> &ComplexField {
        &self.b
    }

    pub fn is_fixed_point(&self) -> bool {
        [&self.phi2, &self.phi3, &self.b].iter().all(|f| f.sup_norm() == 0.0)
    }

    /// Sup scale used for relative gates.
    pub fn scale(&self) -> f64 {
        [&self.base.phi1, &self.phi2, &self.phi3, &self.b]
            .iter()
            .map(|f| f.sup_norm())
            .fold(1.0, f64::max)
    }

    pub fn default_gate(&self) -> f64 {
        default_gate(self.domain(), self.scale())
    }

    /// Interior sups of `r₁ … r₄`.
    pub fn residuals(&self) -> SliceResiduals {
        let (r1, r2, r3) = holomorphicity_residuals(self);
        SliceResiduals {
            r1: r1.sup_interior(),
            r2: r2.sup_interior(),
            r3: r3.sup_interior(),
            r4: dprime_residual(self).sup_interior(),
        }
    }

    /// Checks `r₁ … r₄` and the Hitchin residual of the base against `gate`.
    pub fn validate(&self, gate: f64) -> Result<SliceResiduals> {
        let res = self.residuals();
        res.check(gate)?;
        let hit = self.base.hitchin_residual();
        if hit > gate {
            return Err(Error::gate("hitchin", hit, gate));
        }
        Ok(res)
    }

    /// `Φ_z = [[Φ₂, Φ₃], [Φ₁, −Φ₂]]` tagged `dz`.
    pub fn higgs_matrix(&self) -> MatrixField {
        MatrixField::trace_free(self.phi2.clone(), self.phi3.clone(), self.base.phi1.clone(), FormType::Dz)
            .expect("slice fields share a domain")
    }

    /// `β = [[0, b], [0, 0]]` tagged `dz̄`.
    pub fn beta_matrix(&self) -> MatrixField {
        let z = ComplexField::zeros(*self.domain());
        MatrixField::trace_free(z.clone(), self.b.clone(), z, FormType::Dzbar).expect("slice fields share a domain")
    }
}

/// `(r₁, r₂, r₃) = (∂_z̄Φ₁, ∂_z̄Φ₂ + bΦ₁, ∂_z̄Φ₃ − 2bΦ₂)`.
pub fn holomorphicity_residuals(slice: &BBSliceData) -> (ComplexField, ComplexField, ComplexField) {
    let b = &slice.b;
    let r1 = d_zbar(slice.phi1());
    let r2 = &d_zbar(&slice.phi2) + &(b * slice.phi1());
    let r3 = &d_zbar(&slice.phi3) - &((b * &slice.phi2) * 2.0);
    (r1, r2, r3)
}

/// `r₄ = ∂_z b + 2b∂_z u − 2Φ̄₁Φ₂e^{−2u}`.
pub fn dprime_residual(slice: &BBSliceData) -> ComplexField {
    let b = &slice.b;
    let e = clamped_exp(slice.u(), -2.0);
    let lhs = &d_z(b) + &((b * &d_z(slice.u())) * 2.0);
    let rhs = &(&slice.phi1().conj() * &slice.phi2) * &e;
    &lhs - &(rhs * 2.0)
}

/// How `Φ₃` is chosen once `(b, Φ₂)` are known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Phi3Mode {
    /// `Φ₃ = ∂_zΨ − mean + constant` with `∂_z̄∂_zΨ = 2bΦ₂` (composed
    /// stencils) and `Ψ = 0` on the boundary rows.
    ZeroMean { constant: Complex64 },
    /// `Φ₃ = −Φ₂²/Φ₁`, making `Φ` nilpotent; `r₃` then holds up to the
    /// discrete product-rule defect.
    Nilpotent,
}

impl Default for Phi3Mode {
    fn default() -> Self {
        Phi3Mode::ZeroMean {
            constant: Complex64::new(0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisOptions {
    pub gate: f64,
    pub phi3: Phi3Mode,
    pub linear: GmresOptions,
}

impl SynthesisOptions {
    pub fn new(gate: f64) -> Self {
        Self {
            gate,
            phi3: Phi3Mode::default(),
            linear: GmresOptions {
                rel_tol: 1e-14,
                restart: 60,
                max_iter: 600,
            },
        }
    }

    pub fn with_phi3(mut self, mode: Phi3Mode) -> Self {
        self.phi3 = mode;
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthesisReport {
    pub residuals: SliceResiduals,
    pub gate: f64,
    /// GMRES relative residuals of the `b` solve.
    pub linear_history: Vec<f64>,
    pub clamped_nodes: usize,
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub slice: BBSliceData,
    pub report: SynthesisReport,
}

/// Synthesizes a slice at `delta_gate` with the default `Φ₃` mode.
pub fn synthesize_slice(base: &FixedPointData, seed: &ComplexField, delta_gate: f64) -> Result<BBSliceData> {
    synthesize_slice_with(base, seed, &SynthesisOptions::new(delta_gate)).map(|s| s.slice)
}

/// Solves the slice constraints for `(b, Φ₂, Φ₃)` over a fixed base.
///
/// `r₄ = 0` is used to eliminate `Φ₂ = κ(∂_z b + 2b∂_z u)` with
/// `κ = e^{2u}/(2Φ̄₁)`, which turns `r₂ = 0` into the second-order equation
/// `∂_z̄(κ(∂_z + 2∂_z u)b) + Φ₁b = 0`. The seed's values on the first and last
/// rows are its Dirichlet data; interior seed values are ignored. The whole
/// chain is linear in the seed.
pub fn synthesize_slice_with(base: &FixedPointData, seed: &ComplexField, opts: &SynthesisOptions) -> Result<Synthesis> {
    base.phi1.ensure_same_domain(seed)?;
    let d = *base.domain();
    if !d.is_periodic() {
        return Err(Error::Validation("slice synthesis needs a periodic-x cylinder".into()));
    }
    let scale = field_scale(&base.phi1);
    let min_phi1 = base.phi1.abs().into_iter().fold(f64::INFINITY, f64::min);
    if min_phi1 < 1e-8 * scale {
        return Err(Error::Degenerate(format!(
            "|phi1| drops to {min_phi1:.3e}; elimination of phi2 needs phi1 bounded away from 0"
        )));
    }
    let u_vals = base.u.real_values(hitchin::REAL_TOL)?;
    let clamped_nodes = u_vals.iter().filter(|v| v.abs() >= U_CLAMP).count();

    let ops = GridOperators::new(&d);
    let boundary = linalg::boundary_flags(&d);
    let uz = d_z(&base.u);
    let kappa = clamped_exp(&base.u, 2.0).zip_with(&base.phi1, |e, p| e / (p.conj() * 2.0));
    let shift: Vec<Complex64> = uz.values().iter().map(|v| v * 2.0).collect();
    let inner = ops.dz.add(&Csr::diag(&shift)).scale_rows(kappa.values());
    let op = ops
        .dzbar
        .matmul(&inner)
        .add(&Csr::diag(base.phi1.values()))
        .with_identity_rows(&boundary);
    let precond = XAveragedSolver::new(&d, &op)?;
    let rhs: Vec<Complex64> = seed
        .values()
        .iter()
        .zip(&boundary)
        .map(|(&s, &bd)| if bd { s } else { Complex64::new(0.0, 0.0) })
        .collect();
    let lin = gmres(|v| op.apply(v), |v| precond.solve(v), &rhs, opts.linear);
    let history = lin.history.clone();
    if !lin.converged && lin.residual > 1e-10 {
        return Err(Error::Synthesis {
            reason: format!("b solve stalled at relative residual {:.3e}", lin.residual),
            history,
        });
    }
    let b = ComplexField::new(d, lin.x)?;
    let phi2 = &kappa * &(&d_z(&b) + &((&b * &uz) * 2.0));

    let phi3 = match opts.phi3 {
        Phi3Mode::Nilpotent => (&phi2 * &phi2).zip_with(&base.phi1, |p, q| -p / q),
        Phi3Mode::ZeroMean { constant } => {
            let lap = ops.dzbar.matmul(&ops.dz).with_identity_rows(&boundary);
            let lap_pre = XAveragedSolver::new(&d, &lap)?;
            let src: Vec<Complex64> = (&b * &phi2)
                .values()
                .iter()
                .zip(&boundary)
                .map(|(&v, &bd)| if bd { Complex64::new(0.0, 0.0) } else { v * 2.0 })
                .collect();
            let psi = gmres(|v| lap.apply(v), |v| lap_pre.solve(v), &src, opts.linear);
            if !psi.converged && psi.residual > 1e-10 {
                return Err(Error::Synthesis {
                    reason: format!("phi3 potential solve stalled at relative residual {:.3e}", psi.residual),
                    history: psi.history,
                });
            }
            let dpsi = d_z(&ComplexField::new(d, psi.x)?);
            let shift = constant - dpsi.mean();
            dpsi.map(|v| v + shift)
        }
    };

    let slice = BBSliceData::new(base.clone(), phi2, phi3, b)?;
    let residuals = slice.residuals();
    if let Err(Error::Gate { gate, value, limit }) = residuals.check(opts.gate) {
        return Err(Error::Synthesis {
            reason: format!("residual {gate} = {value:.3e} above gate {limit:.3e}"),
            history,
        });
    }
    Ok(Synthesis {
        slice,
        report: SynthesisReport {
            residuals,
            gate: opts.gate,
            linear_history: history,
            clamped_nodes,
        },
    })
}

/// The kernel section `s = (Φ₂, Φ₁)` of a nilpotent `Φ`, gated on
/// `sup |Φ₂² + Φ₃Φ₁|`.
pub fn kernel_section(slice: &BBSliceData) -> Result<(ComplexField, ComplexField)> {
    kernel_section_gated(slice, nilpotency_gate(slice))
}

/// Default nilpotency gate, `default_gate` at the squared field scale.
pub fn nilpotency_gate(slice: &BBSliceData) -> f64 {
    default_gate(slice.domain(), slice.scale().powi(2))
}

pub fn kernel_section_gated(slice: &BBSliceData, gate: f64) -> Result<(ComplexField, ComplexField)> {
    let det_sup = nilpotency_defect(slice);
    if det_sup > gate {
        return Err(Error::NotNilpotent { det_sup, gate });
    }
    Ok((slice.phi2.clone(), slice.phi1().clone()))
}

/// `sup |det Φ| = sup |Φ₂² + Φ₃Φ₁|`.
pub fn nilpotency_defect(slice: &BBSliceData) -> f64 {
    (&(&slice.phi2 * &slice.phi2) + &(&slice.phi3 * slice.phi1())).sup_norm()
}

const SLICE_FIELDS: [&str; 5] = ["phi1", "u", "phi2", "phi3", "b"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SliceManifest {
    pub domain: GridDomain,
    pub gate: f64,
    pub residuals: SliceResiduals,
    pub hitchin_residual: f64,
    pub nilpotency_defect: f64,
    pub adjoint_convention: String,
    pub fields: BTreeMap<String, String>,
    /// Free-form provenance (config, seed, phi3 mode).
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

pub const ADJOINT_CONVENTION: &str = "phi0_dagger = [[0, conj(phi1) exp(-2u)], [0, 0]] dzbar";

/// Writes one field table per slice field plus `manifest.toml`.
pub fn save_slice(slice: &BBSliceData, dir: &Path, gate: f64, provenance: BTreeMap<String, String>) -> Result<SliceManifest> {
    let fields = [slice.phi1(), slice.u(), &slice.phi2, &slice.phi3, &slice.b];
    let mut names = BTreeMap::new();
    for (name, f) in SLICE_FIELDS.iter().zip(fields) {
        let file = format!("{name}.csv");
        save_field(f, &dir.join(&file))?;
        names.insert(name.to_string(), file);
    }
    let manifest = SliceManifest {
        domain: *slice.domain(),
        gate,
        residuals: slice.residuals(),
        hitchin_residual: slice.base.hitchin_residual(),
        nilpotency_defect: nilpotency_defect(slice),
        adjoint_convention: ADJOINT_CONVENTION.into(),
        fields: names,
        provenance,
    };
    write_atomic(&dir.join("manifest.toml"), to_manifest(&manifest)?.as_bytes())?;
    Ok(manifest)
}

/// Reads a slice bundle and re-checks its recorded gate.
pub fn load_slice(dir: &Path) -> Result<(BBSliceData, SliceManifest)> {
    let text = std::fs::read_to_string(dir.join("manifest.toml"))?;
    let manifest: SliceManifest =
        toml::from_str(&text).map_err(|e| Error::Validation(format!("slice manifest {}: {e}", dir.display())))?;
    let mut loaded = Vec::with_capacity(SLICE_FIELDS.len());
    for name in SLICE_FIELDS {
        let file = manifest
            .fields
            .get(name)
            .ok_or_else(|| Error::Validation(format!("slice manifest lacks field `{name}`")))?;
        loaded.push(load_field(manifest.domain, &dir.join(file))?);
    }
    let [phi1, u, phi2, phi3, b]: [ComplexField; 5] = loaded.try_into().expect("five fields");
    let base = FixedPointData::from_fields(phi1, u)?;
    let slice = BBSliceData::new(base, phi2, phi3, b)?;
    slice.validate(manifest.gate)?;
    Ok((slice, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hitchin::{solve_hitchin, HitchinProblem};

    fn cyl(n: usize) -> GridDomain {
        GridDomain::new(n, n, 1.0, 0.5, 1.5).unwrap()
    }

    fn rect(n: usize) -> GridDomain {
        GridDomain::bounded(n, n, (-0.5, 0.5), (0.5, 1.5)).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unchecked_base(d: GridDomain, phi1: Complex64) -> FixedPointData {
        FixedPointData::from_fields(ComplexField::constant(d, phi1), ComplexField::zeros(d)).unwrap()
    }

    fn liouville_base(n: usize) -> FixedPointData {
        let d = cyl(n);
        let p = HitchinProblem::with_boundary_fn(ComplexField::constant(d, 1.0.into()), |_, y| (2.0 * y).ln()).unwrap();
        let sol = solve_hitchin(&p, 1e-11, 30).unwrap();
        FixedPointData::new(p.phi1().clone(), sol.u).unwrap()
    }

    fn step_seed(d: GridDomain, amp: f64) -> ComplexField {
        ComplexField::from_fn(d, |z| c(amp * if z.im < 1.0 { 1.0 } else { 0.5 }, 0.0))
    }

    #[test]
    fn fixed_point_residuals_vanish() {
        let s = BBSliceData::fixed_point(unchecked_base(cyl(16), c(1.0, 0.5)));
        let (r1, r2, r3) = holomorphicity_residuals(&s);
        assert_eq!(r1.sup_norm() + r2.sup_norm() + r3.sup_norm(), 0.0);
        assert_eq!(dprime_residual(&s).sup_norm(), 0.0);
        let (s2, s1) = kernel_section(&s).unwrap();
        assert_eq!(s2.sup_norm(), 0.0);
        assert_eq!(s1, *s.phi1());
    }

    #[test]
    fn decoupled_holomorphic_polynomials() {
        let d = rect(32);
        let base = unchecked_base(d, c(1.0, 0.0));
        let p2 = ComplexField::from_fn(d, |z| z * z + 1.0);
        let p3 = ComplexField::from_fn(d, |z| z * c(0.0, 3.0));
        let s = BBSliceData::new(base, p2, p3, ComplexField::zeros(d)).unwrap();
        let (_, r2, r3) = holomorphicity_residuals(&s);
        let h2 = d.h() * d.h();
        assert!(r2.sup_norm() < 10.0 * h2 && r3.sup_norm() < 10.0 * h2);
    }

    #[test]
    fn antiholomorphic_example() {
        let d = rect(32);
        let base = unchecked_base(d, c(1.0, 0.0));
        let p2 = ComplexField::from_fn(d, |z| -z.conj());
        let p3 = ComplexField::from_fn(d, |z| -(z.conj() * z.conj()));
        let s = BBSliceData::new(base, p2, p3, ComplexField::constant(d, 1.0.into())).unwrap();
        let (_, r2, r3) = holomorphicity_residuals(&s);
        let h2 = d.h() * d.h();
        assert!(r2.sup_norm() < 10.0 * h2, "{:e}", r2.sup_norm());
        assert!(r3.sup_norm() < 10.0 * h2, "{:e}", r3.sup_norm());
    }

    #[test]
    fn dprime_examples() {
        let d = rect(32);
        let base = unchecked_base(d, c(1.0, 0.0));
        let z = ComplexField::zeros(d);
        let s = BBSliceData::new(base.clone(), z.clone(), z.clone(), ComplexField::constant(d, c(2.0, -1.0))).unwrap();
        assert_eq!(dprime_residual(&s).sup_norm(), 0.0);
        let cc = c(0.3, 0.7);
        let s = BBSliceData::new(
            base,
            ComplexField::constant(d, cc / 2.0),
            z,
            ComplexField::from_fn(d, |w| w * cc),
        )
        .unwrap();
        assert!(dprime_residual(&s).sup_norm() < 1e-10);
    }

    #[test]
    fn frame_consistency() {
        let d = cyl(24);
        let base = FixedPointData::from_fields(
            ComplexField::from_fn(d, |z| (z * c(0.0, std::f64::consts::TAU)).exp() + 2.0),
            ComplexField::from_fn(d, |z| c(z.im.ln(), 0.0)),
        )
        .unwrap();
        let s = BBSliceData::new(
            base,
            ComplexField::from_fn(d, |z| z * z.conj()),
            ComplexField::from_fn(d, |z| (z.conj() * 2.0).sin()),
            ComplexField::from_fn(d, |z| z + z.conj() * 0.5),
        )
        .unwrap();
        let phi = s.higgs_matrix();
        let dbar = phi.map_entries(d_zbar);
        let total = dbar.add(&s.beta_matrix().commutator(&phi));
        let (r1, r2, r3) = holomorphicity_residuals(&s);
        assert!(total.entry(0, 0).max_diff(&r2) < 1e-12);
        assert!(total.entry(0, 1).max_diff(&r3) < 1e-12);
        assert!(total.entry(1, 0).max_diff(&r1) < 1e-12);
    }

    #[test]
    fn kernel_section_examples() {
        let d = cyl(16);
        let base = unchecked_base(d, c(1.0, 0.0));
        let zf = ComplexField::from_fn(d, |z| z);
        let s = BBSliceData::new(
            base.clone(),
            zf.clone(),
            ComplexField::from_fn(d, |z| -(z * z)),
            ComplexField::zeros(d),
        )
        .unwrap();
        let (s2, s1) = kernel_section(&s).unwrap();
        assert_eq!(s2, zf);
        assert_eq!(s1.sup_norm(), 1.0);
        let bad = BBSliceData::new(base, zf, ComplexField::zeros(d), ComplexField::zeros(d)).unwrap();
        let err = kernel_section(&bad).unwrap_err();
        assert!(err.to_string().contains("not nilpotent"));
    }

    #[test]
    fn zero_seed_returns_fixed_point() {
        let base = liouville_base(32);
        let s = synthesize_slice(&base, &ComplexField::zeros(*base.domain()), 1e-6).unwrap();
        assert!(s.is_fixed_point());
    }

    #[test]
    fn synthesis_passes_gates_in_both_modes() {
        let base = liouville_base(64);
        let seed = step_seed(*base.domain(), 1e-2);
        let zm = synthesize_slice(&base, &seed, 1e-6).unwrap();
        assert!(zm.residuals().max() <= 1e-6);
        assert!(zm.b().sup_norm() > 1e-3);
        let opts = SynthesisOptions::new(1e-6).with_phi3(Phi3Mode::Nilpotent);
        let nil = synthesize_slice_with(&base, &seed, &opts).unwrap();
        assert!(nilpotency_defect(&nil.slice) < 1e-15);
        assert!(kernel_section(&nil.slice).is_ok());
        assert_eq!(nil.slice.phi2(), zm.phi2());
    }

    #[test]
    fn synthesis_is_linear_in_the_seed() {
        let base = liouville_base(32);
        let seed = ComplexField::from_fn(*base.domain(), |z| {
            c(1e-2 * (1.0 + 0.02 * (std::f64::consts::TAU * z.re).cos()), 1e-3 * z.im)
        });
        let s1 = synthesize_slice(&base, &seed, 1e-6).unwrap();
        let s2 = synthesize_slice(&base, &seed.scale(2.0.into()), 1e-6).unwrap();
        assert_eq!(*s2.b(), s1.b().scale(2.0.into()));
        assert_eq!(*s2.phi2(), s1.phi2().scale(2.0.into()));
        // Φ₃ solves a problem with source 2bΦ₂, so it scales quadratically
        assert!(s2.phi3().max_diff(&s1.phi3().scale(4.0.into())) <= 1e-15 * s2.phi3().sup_norm());
    }

    #[test]
    fn synthesis_rejects_bad_input() {
        let d = cyl(16);
        let base = unchecked_base(d, c(0.0, 0.0));
        assert!(matches!(
            synthesize_slice(&base, &step_seed(d, 1.0), 1e-6),
            Err(Error::Degenerate(_))
        ));
        let other = ComplexField::zeros(cyl(8));
        assert!(synthesize_slice(&unchecked_base(d, c(1.0, 0.0)), &other, 1e-6).is_err());
    }

    #[test]
    fn failing_gate_is_a_synthesis_error() {
        let base = liouville_base(32);
        let err = synthesize_slice(&base, &step_seed(*base.domain(), 1e-2), 1e-30).unwrap_err();
        assert!(matches!(err, Error::Synthesis { .. }), "{err}");
    }

    #[test]
    fn gated_fixed_point_construction() {
        let d = cyl(16);
        let phi1 = ComplexField::constant(d, 1.0.into());
        assert!(matches!(
            FixedPointData::new(phi1.clone(), ComplexField::zeros(d)),
            Err(Error::Gate { .. })
        ));
        let wavy = ComplexField::from_fn(d, |z| z.conj());
        assert!(FixedPointData::with_gate(wavy, ComplexField::zeros(d), 1e-3).is_err());
    }

    #[test]
    fn bundle_round_trip() {
        let base = liouville_base(16);
        // the nilpotent r₃ defect is ~1e-5 on this coarse grid
        let opts = SynthesisOptions::new(1e-4).with_phi3(Phi3Mode::Nilpotent);
        let s = synthesize_slice_with(&base, &step_seed(*base.domain(), 1e-2), &opts).unwrap().slice;
        let dir = tempfile::tempdir().unwrap();
        let mut prov = BTreeMap::new();
        prov.insert("seed".into(), "7".into());
        save_slice(&s, dir.path(), 1e-4, prov).unwrap();
        let (back, manifest) = load_slice(dir.path()).unwrap();
        assert_eq!(back, s);
        assert_eq!(manifest.provenance["seed"], "7");
    }
}
