use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cll_core::conformal::{
    build_family, curvature_sweep, det_min_interior, load_family, save_family, secondary_expansion, secondary_sweep,
    Coefficient, LaurentConnectionFamily, SecondaryExpansion, SweepRecord,
};
use cll_core::grid::io::{fmt_f64, load_field};
use cll_core::grid::{ComplexField, FormType, GridDomain, Mat2, MatrixField};
use cll_core::higgs::{
    nilpotency_defect, save_slice, synthesize_slice_with, BBSliceData, FixedPointData, Phi3Mode, SliceResiduals,
    SynthesisOptions,
};
use cll_core::hitchin::{solve_hitchin_with, HitchinProblem, HitchinReport, SolveOptions};
use cll_core::kernel_line::{identity_chain_gated, preserved_kernel_probe, save_identity_report, IdentitySummary};
use cll_core::wkb::{find_wkb_loop, path_ordered_exp, pullback_loop, wkb_sweep_with, CandidateLoop, Loop, LoopSearch, WkbOptions, WkbSweep};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{FieldSource, LoadedConfig, LoopKind, Phi3Choice};
use crate::error::CliError;
use crate::expr::Expr;
use crate::report::Bundle;

type C = Complex64;
type Res<T> = Result<T, CliError>;

pub struct Ctx<'a> {
    pub lc: &'a LoadedConfig,
    pub bundle: Bundle,
    pub seed: u64,
    pub verbose: bool,
}

impl Ctx<'_> {
    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("[{}] {}", self.lc.config.command, msg.as_ref());
        }
    }
}

pub fn dispatch(ctx: &Ctx) -> Res<toml::Value> {
    match ctx.lc.config.command.as_str() {
        "solve-hitchin" => to_value(solve_hitchin_cmd(ctx)?),
        "make-slice" => to_value(make_slice_cmd(ctx)?),
        "family" => to_value(family_cmd(ctx)?),
        "holonomy" => to_value(holonomy_cmd(ctx)?),
        "wkb-sweep" => to_value(wkb_sweep_cmd(ctx)?),
        "secondary" => to_value(secondary_cmd(ctx)?),
        "contradiction" => to_value(contradiction_cmd(ctx)?),
        "closedness" => to_value(closedness_cmd(ctx)?),
        other => Err(CliError::UnknownCommand(other.to_string())),
    }
}

fn to_value<T: Serialize>(v: T) -> Res<toml::Value> {
    toml::Value::try_from(v).map_err(|e| CliError::Config(format!("summary serialization: {e}")))
}

pub fn domain(lc: &LoadedConfig) -> Res<GridDomain> {
    let d = &lc.config.domain;
    let dom = match (d.x_period, d.x_min, d.x_max) {
        (Some(p), None, None) => GridDomain::new(d.nx, d.ny, p, d.y_min, d.y_max)?,
        (None, Some(a), Some(b)) => GridDomain::bounded(d.nx, d.ny, (a, b), (d.y_min, d.y_max))?,
        _ => {
            return Err(CliError::Config(
                "domain needs either x_period or both x_min and x_max".into(),
            ))
        }
    };
    Ok(dom)
}

fn parse(src: &str) -> Res<Expr> {
    Expr::parse(src).map_err(|e| CliError::Config(format!("\"{src}\": {e}")))
}

fn expr_field(d: GridDomain, src: &str) -> Res<ComplexField> {
    let e = parse(src)?;
    Ok(ComplexField::try_from_fn(d, |z| e.eval(z.re, z.im))?)
}

fn source_field(lc: &LoadedConfig, d: GridDomain, src: &FieldSource) -> Res<ComplexField> {
    match src {
        FieldSource::Expr(e) => expr_field(d, e),
        FieldSource::File { file } => Ok(load_field(d, &lc.resolve(file))?),
    }
}

fn provenance(ctx: &Ctx) -> BTreeMap<String, String> {
    BTreeMap::from([
        ("command".to_string(), ctx.lc.config.command.clone()),
        ("seed".to_string(), ctx.seed.to_string()),
    ])
}

#[derive(Debug, Serialize)]
pub struct HitchinSummary {
    pub h: f64,
    pub iterations: usize,
    pub initial_residual: f64,
    pub final_residual: f64,
    pub residual_history: Vec<f64>,
    pub clamped_nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_error: Option<f64>,
}

struct FixedPointRun {
    base: FixedPointData,
    report: HitchinReport,
}

fn fixed_point(ctx: &Ctx) -> Res<FixedPointRun> {
    let c = &ctx.lc.config;
    let d = domain(ctx.lc)?;
    let phi1 = match &c.fields.phi1 {
        Some(src) => source_field(ctx.lc, d, src)?,
        None => ComplexField::constant(d, C::new(1.0, 0.0)),
    };
    let g = parse(
        c.fields
            .boundary_u
            .as_deref()
            .ok_or_else(|| CliError::Config("fields.boundary_u is required".into()))?,
    )?;
    let problem = HitchinProblem::with_boundary_fn(phi1, |x, y| g.eval(x, y).re)?;
    ctx.log(format!("solving Hitchin on {}x{}", d.nx(), d.ny()));
    let sol = solve_hitchin_with(&problem, &SolveOptions::new(c.hitchin.tol, c.hitchin.max_iter))?;
    let base = FixedPointData::new(problem.phi1().clone(), sol.u)?;
    Ok(FixedPointRun {
        base,
        report: sol.report,
    })
}

fn solve_hitchin_cmd(ctx: &Ctx) -> Res<HitchinSummary> {
    let run = fixed_point(ctx)?;
    let d = *run.base.domain();
    let u = run.base.u();
    let exact_error = match &ctx.lc.config.fields.exact_u {
        Some(src) => Some(u.max_diff(&expr_field(d, src)?)),
        None => None,
    };
    ctx.bundle.field("u.csv", u)?;
    ctx.bundle.field("phi1.csv", run.base.phi1())?;
    ctx.bundle.records("hitchin.jsonl", &run.report.records)?;
    let r = &run.report;
    Ok(HitchinSummary {
        h: d.h(),
        iterations: r.iterations,
        initial_residual: r.initial_residual,
        final_residual: r.residual_history.last().copied().unwrap_or(r.initial_residual),
        residual_history: r.residual_history.clone(),
        clamped_nodes: r.clamped_nodes,
        exact_error,
    })
}

struct SliceRun {
    slice: BBSliceData,
    gate: f64,
}

#[derive(Debug, Serialize)]
pub struct SliceSummary {
    pub gate: f64,
    pub residuals: SliceResiduals,
    pub hitchin_residual: f64,
    pub nilpotency_defect: f64,
    pub fixed_point: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linear_history: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linearity_deviation: Option<f64>,
}

fn synthesis_options(ctx: &Ctx) -> SynthesisOptions {
    let s = &ctx.lc.config.slice;
    let mode = match s.phi3 {
        Phi3Choice::Nilpotent => Phi3Mode::Nilpotent,
        Phi3Choice::ZeroMean => Phi3Mode::ZeroMean { constant: C::new(0.0, 0.0) },
    };
    SynthesisOptions::new(s.gate).with_phi3(mode)
}

fn obtain_slice(ctx: &Ctx) -> Res<(SliceRun, SliceSummary)> {
    let c = &ctx.lc.config;
    if let Some(dir) = &c.slice.load {
        let (slice, manifest) = cll_core::higgs::load_slice(&ctx.lc.resolve(dir))?;
        let summary = slice_summary(&slice, manifest.gate, None, None);
        return Ok((
            SliceRun {
                slice,
                gate: manifest.gate,
            },
            summary,
        ));
    }
    let run = fixed_point(ctx)?;
    let d = *run.base.domain();
    let Some(seed_src) = &c.fields.seed else {
        let slice = BBSliceData::fixed_point(run.base);
        let summary = slice_summary(&slice, c.slice.gate, None, None);
        return Ok((SliceRun { slice, gate: c.slice.gate }, summary));
    };
    let seed = source_field(ctx.lc, d, seed_src)?;
    let opts = synthesis_options(ctx);
    ctx.log("synthesizing slice");
    let syn = synthesize_slice_with(&run.base, &seed, &opts)?;
    let linearity = if c.slice.linearity_check {
        let doubled = synthesize_slice_with(&run.base, &(&seed * 2.0), &opts)?.slice;
        Some(linearity_deviation(&syn.slice, &doubled))
    } else {
        None
    };
    let summary = slice_summary(&syn.slice, c.slice.gate, Some(syn.report.linear_history), linearity);
    Ok((
        SliceRun {
            slice: syn.slice,
            gate: c.slice.gate,
        },
        summary,
    ))
}

/// `max(sup|Φ₂′ − 2Φ₂|/sup|2Φ₂|, sup|b′ − 2b|/sup|2b|)`.
pub fn linearity_deviation(one: &BBSliceData, two: &BBSliceData) -> f64 {
    let rel = |a: &ComplexField, b: &ComplexField| {
        let twice = a * 2.0;
        let s = twice.sup_norm();
        if s == 0.0 {
            b.sup_norm()
        } else {
            b.max_diff(&twice) / s
        }
    };
    rel(one.phi2(), two.phi2()).max(rel(one.b(), two.b()))
}

fn slice_summary(slice: &BBSliceData, gate: f64, history: Option<Vec<f64>>, lin: Option<f64>) -> SliceSummary {
    SliceSummary {
        gate,
        residuals: slice.residuals(),
        hitchin_residual: slice.base().hitchin_residual(),
        nilpotency_defect: nilpotency_defect(slice),
        fixed_point: slice.is_fixed_point(),
        linear_history: history,
        linearity_deviation: lin,
    }
}

fn make_slice_cmd(ctx: &Ctx) -> Res<SliceSummary> {
    let (run, summary) = obtain_slice(ctx)?;
    save_slice(&run.slice, &ctx.bundle.path("slice"), run.gate, provenance(ctx))?;
    Ok(summary)
}

fn entry_fields(d: GridDomain, exprs: &Option<[String; 4]>, form: FormType) -> Res<MatrixField> {
    match exprs {
        None => Ok(MatrixField::zeros(d, form)),
        Some(e) => {
            let fields = [
                expr_field(d, &e[0])?,
                expr_field(d, &e[1])?,
                expr_field(d, &e[2])?,
                expr_field(d, &e[3])?,
            ];
            Ok(MatrixField::new(fields, form)?)
        }
    }
}

struct FamilyRun {
    family: LaurentConnectionFamily,
    slice: Option<(SliceRun, SliceSummary)>,
}

fn obtain_family(ctx: &Ctx) -> Res<FamilyRun> {
    let c = &ctx.lc.config;
    if !c.family.term.is_empty() {
        let d = domain(ctx.lc)?;
        let mut co = BTreeMap::new();
        for t in &c.family.term {
            let coef = Coefficient {
                mz: entry_fields(d, &t.dz, FormType::Dz)?,
                mzbar: entry_fields(d, &t.dzbar, FormType::Dzbar)?,
            };
            if co.insert(t.power, coef).is_some() {
                return Err(CliError::Config(format!("family.term power {} given twice", t.power)));
            }
        }
        return Ok(FamilyRun {
            family: LaurentConnectionFamily::new(d, co)?,
            slice: None,
        });
    }
    if let Some(dir) = &c.family.load {
        return Ok(FamilyRun {
            family: load_family(&ctx.lc.resolve(dir))?,
            slice: None,
        });
    }
    let slice = obtain_slice(ctx)?;
    let family = build_family(&slice.0.slice, c.family.hbar)?;
    Ok(FamilyRun {
        family,
        slice: Some(slice),
    })
}

#[derive(Debug, Serialize)]
pub struct FamilySummary {
    pub h: f64,
    pub powers: Vec<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slice_gate: Option<f64>,
    pub curvature: Vec<SweepRecord>,
}

fn sweep_table(records: &[SweepRecord]) -> String {
    let mut s = String::from("r,residual_sup,det_min\n");
    for r in records {
        s.push_str(&format!("{},{},{}\n", fmt_f64(r.r), fmt_f64(r.residual_sup), fmt_f64(r.det_min)));
    }
    s
}

fn family_cmd(ctx: &Ctx) -> Res<FamilySummary> {
    let run = obtain_family(ctx)?;
    save_family(&run.family, &ctx.bundle.path("family"), provenance(ctx))?;
    let curvature = curvature_sweep(&run.family, &ctx.lc.config.family.r);
    ctx.bundle.text("curvature.csv", &sweep_table(&curvature))?;
    Ok(FamilySummary {
        h: run.family.domain().h(),
        powers: run.family.powers().collect(),
        slice_gate: run.slice.as_ref().map(|s| s.0.gate),
        curvature,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LoopSummary {
    pub kind: String,
    pub nt: usize,
    pub winding: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidate: Option<CandidateLoop>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tried: Option<usize>,
}

fn obtain_loop(ctx: &Ctx, d: &GridDomain, higgs: Option<&MatrixField>) -> Res<(Loop, LoopSummary)> {
    let l = &ctx.lc.config.lp;
    let mid = 0.5 * (d.y_min() + d.y_max());
    let (lp, mut summary) = match l.kind {
        LoopKind::Search => {
            let higgs = higgs.ok_or_else(|| CliError::Config("loop search needs a power-1 Higgs coefficient".into()))?;
            let found = find_wkb_loop(
                higgs,
                &LoopSearch {
                    levels: l.levels,
                    sinusoids: l.sinusoids,
                    nt: l.nt,
                    margin: l.margin,
                    seed: ctx.seed,
                },
            )?;
            let s = LoopSummary {
                kind: "search".into(),
                nt: l.nt,
                winding: found.lp.winding(),
                candidate: Some(found.candidate),
                margin: Some(found.margin),
                tried: Some(found.tried),
            };
            (found.lp, s)
        }
        LoopKind::Horizontal | LoopKind::Sinusoid => {
            let amp = if l.kind == LoopKind::Horizontal { 0.0 } else { l.amplitude };
            let lp = Loop::sinusoid(d, l.y0.unwrap_or(mid), amp, l.phase, l.nt)?;
            let kind = if amp == 0.0 { "horizontal" } else { "sinusoid" };
            (lp, plain_summary(kind, l.nt))
        }
        LoopKind::File => {
            let path = ctx.lc.resolve(l.file.as_ref().expect("validated"));
            let f = std::fs::File::open(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let lp = Loop::read_csv(f, d.period().unwrap_or(0.0))?;
            let nt = lp.nt();
            (lp, plain_summary("file", nt))
        }
    };
    let lp = if l.reversed && l.kind != LoopKind::Search { lp.reversed() } else { lp };
    summary.winding = lp.winding();
    let mut buf = Vec::new();
    lp.write_csv(&mut buf)?;
    ctx.bundle.bytes("loop.csv", &buf)?;
    Ok((lp, summary))
}

fn plain_summary(kind: &str, nt: usize) -> LoopSummary {
    LoopSummary {
        kind: kind.into(),
        nt,
        winding: 0,
        candidate: None,
        margin: None,
        tried: None,
    }
}

#[derive(Debug, Serialize)]
pub struct HolonomySummary {
    pub r: f64,
    pub lp: LoopSummary,
    pub matrix_re: [f64; 4],
    pub matrix_im: [f64; 4],
    pub log_scale: f64,
    pub trace_re: f64,
    pub trace_im: f64,
    pub log_abs_trace: f64,
    pub det_re: f64,
    pub det_im: f64,
    pub steps: usize,
}

fn holonomy_cmd(ctx: &Ctx) -> Res<HolonomySummary> {
    let run = obtain_family(ctx)?;
    let d = *run.family.domain();
    let higgs = run.family.coefficient(1).map(|c| &c.mz);
    let (lp, ls) = obtain_loop(ctx, &d, higgs)?;
    let r = ctx.lc.config.wkb.r;
    let samples = pullback_loop(&run.family, &lp, r)?;
    let hol = path_ordered_exp(&samples.c, ctx.lc.config.wkb.substeps);
    let m: Mat2 = hol.matrix;
    let tr = m.trace() * hol.log_scale.exp();
    let det = hol.det();
    let summary = HolonomySummary {
        r,
        lp: ls,
        matrix_re: [m[(0, 0)].re, m[(0, 1)].re, m[(1, 0)].re, m[(1, 1)].re],
        matrix_im: [m[(0, 0)].im, m[(0, 1)].im, m[(1, 0)].im, m[(1, 1)].im],
        log_scale: hol.log_scale,
        trace_re: tr.re,
        trace_im: tr.im,
        log_abs_trace: hol.log_abs_trace(),
        det_re: det.re,
        det_im: det.im,
        steps: hol.steps,
    };
    ctx.bundle.records("holonomy.jsonl", std::slice::from_ref(&summary))?;
    Ok(summary)
}

#[derive(Debug, Serialize)]
pub struct WkbSummary {
    pub lp: LoopSummary,
    pub re_z: f64,
    pub im_z: f64,
    pub margin: f64,
    pub hol_a_plus_re: f64,
    pub hol_a_plus_im: f64,
    pub a0_sup: f64,
    pub curvature_sup: f64,
    pub extrapolated_dev: f64,
    pub eps: Vec<f64>,
    pub abs_dev: Vec<f64>,
    pub growth_rates: Vec<f64>,
    /// `ε·log|Tr Hol|` at the smallest `ε`.
    pub growth_rate: f64,
    /// `|growth_rate − Re Z| / |Re Z|`.
    pub growth_gap: f64,
}

fn run_sweep(ctx: &Ctx, family: &LaurentConnectionFamily, higgs: Option<&MatrixField>) -> Res<(WkbSweep, WkbSummary)> {
    let d = *family.domain();
    let (lp, ls) = obtain_loop(ctx, &d, higgs)?;
    let w = &ctx.lc.config.wkb;
    let opts = WkbOptions {
        substeps: w.substeps,
        curvature_gate: w.curvature_gate,
    };
    ctx.log(format!("sweeping {} eps values", w.eps.len()));
    let sweep = wkb_sweep_with(family, &lp, &w.eps, &opts)?;
    let mut buf = Vec::new();
    sweep.write_csv(&mut buf)?;
    ctx.bundle.bytes("wkb.csv", &buf)?;
    ctx.bundle.records("wkb.jsonl", &sweep.rows)?;
    let rates = sweep.growth_rates();
    let growth_rate = *rates.last().expect("nonempty eps list");
    let re_z = sweep.central_charge.re;
    let summary = WkbSummary {
        lp: ls,
        re_z,
        im_z: sweep.central_charge.im,
        margin: sweep.margin,
        hol_a_plus_re: sweep.hol_a_plus.re,
        hol_a_plus_im: sweep.hol_a_plus.im,
        a0_sup: sweep.a0_sup,
        curvature_sup: sweep.curvature_sup,
        extrapolated_dev: sweep.extrapolated_dev,
        eps: sweep.rows.iter().map(|r| r.eps).collect(),
        abs_dev: sweep.rows.iter().map(|r| r.abs_dev).collect(),
        growth_gap: (growth_rate - re_z).abs() / re_z.abs(),
        growth_rate,
        growth_rates: rates,
    };
    Ok((sweep, summary))
}

fn wkb_sweep_cmd(ctx: &Ctx) -> Res<WkbSummary> {
    let run = obtain_family(ctx)?;
    let higgs = run.family.coefficient(1).map(|c| c.mz.clone());
    Ok(run_sweep(ctx, &run.family, higgs.as_ref())?.1)
}

#[derive(Debug, Serialize)]
pub struct SecondarySummary {
    pub slice: SliceSummary,
    pub dropped_sup: f64,
    pub antiholomorphic_sup: f64,
    pub det_min: f64,
    /// `max/min − 1` of the scaled tail over the sweep.
    pub tail_variation: f64,
    pub tail: Vec<SweepRecord>,
}

fn secondary_run(ctx: &Ctx) -> Res<(SecondaryExpansion, SecondarySummary)> {
    let (run, slice_summary) = obtain_slice(ctx)?;
    let family = build_family(&run.slice, ctx.lc.config.family.hbar)?;
    let exp = secondary_expansion(&family, run.slice.base())?;
    let tail = secondary_sweep(&exp, &ctx.lc.config.secondary.r);
    ctx.bundle.text("secondary.csv", &sweep_table(&tail))?;
    ctx.bundle.field("phi_tilde.csv", &exp.data.phi_tilde)?;
    ctx.bundle.field("a_minus1.csv", &exp.data.a_minus1)?;
    ctx.bundle.field("det_phi_prime.csv", &exp.data.det_field)?;
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.residual_sup), hi.max(r.residual_sup)));
    let summary = SecondarySummary {
        slice: slice_summary,
        dropped_sup: exp.dropped_sup,
        antiholomorphic_sup: exp.antiholomorphic_sup,
        det_min: det_min_interior(&exp.data.det_field),
        tail_variation: if lo > 0.0 { hi / lo - 1.0 } else { 0.0 },
        tail,
    };
    Ok((exp, summary))
}

fn secondary_cmd(ctx: &Ctx) -> Res<SecondarySummary> {
    Ok(secondary_run(ctx)?.1)
}

fn contradiction_cmd(ctx: &Ctx) -> Res<IdentitySummary> {
    let (run, _) = obtain_slice(ctx)?;
    let cc = &ctx.lc.config.contradiction;
    let slice = if cc.perturb_b != 0.0 {
        let s = &run.slice;
        BBSliceData::new(s.base().clone(), s.phi2().clone(), s.phi3().clone(), s.b() * (1.0 + cc.perturb_b))?
    } else {
        run.slice
    };
    let gate = cc.gate.unwrap_or(run.gate);
    let report = identity_chain_gated(&slice, cc.mask_threshold, gate)?;
    let probe = preserved_kernel_probe(&slice).ok();
    save_identity_report(&report, probe, &ctx.bundle.path("identity"), provenance(ctx))?;
    let g = report.gates;
    if cc.require_gates && !g.passed {
        let (name, value) = if g.hitchin_residual > gate {
            ("hitchin", g.hitchin_residual)
        } else {
            ("d1", g.d1_residual)
        };
        return Err(cll_core::Error::Gate {
            gate: name.into(),
            value,
            limit: gate,
        }
        .into());
    }
    Ok(report.summary(probe))
}

#[derive(Debug, Serialize)]
pub struct ClosednessSummary {
    pub re_z: f64,
    pub growth_rate: f64,
    pub growth_gap: f64,
    pub det_min: f64,
    pub secondary: SecondarySummary,
    pub wkb: WkbSummary,
}

fn closedness_cmd(ctx: &Ctx) -> Res<ClosednessSummary> {
    let (exp, secondary) = secondary_run(ctx)?;
    let higgs = exp.family.coefficient(1).map(|c| c.mz.clone());
    let (_, wkb) = run_sweep(ctx, &exp.family, higgs.as_ref())?;
    Ok(ClosednessSummary {
        re_z: wkb.re_z,
        growth_rate: wkb.growth_rate,
        growth_gap: wkb.growth_gap,
        det_min: secondary.det_min,
        secondary,
        wkb,
    })
}

pub fn out_dir(ctx_out: Option<&Path>, lc: &LoadedConfig) -> PathBuf {
    match ctx_out {
        Some(p) => p.to_path_buf(),
        None => match &lc.config.output {
            Some(p) => lc.resolve(p),
            None => PathBuf::from("cll-out"),
        },
    }
}
