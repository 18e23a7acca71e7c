//! Experiment configuration (TOML with dotted sections).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::expr::Expr;

pub const COMMANDS: [&str; 8] = [
    "solve-hitchin",
    "make-slice",
    "family",
    "holonomy",
    "wkb-sweep",
    "secondary",
    "contradiction",
    "closedness",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub domain: DomainConfig,
    #[serde(default)]
    pub fields: FieldsConfig,
    #[serde(default)]
    pub hitchin: HitchinConfig,
    #[serde(default)]
    pub slice: SliceConfig,
    #[serde(default)]
    pub family: FamilyConfig,
    #[serde(default)]
    pub secondary: SecondaryConfig,
    #[serde(default)]
    pub wkb: WkbConfig,
    #[serde(default, rename = "loop")]
    pub lp: LoopConfig,
    #[serde(default)]
    pub contradiction: ContradictionConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub nx: usize,
    pub ny: usize,
    /// Periodic in `x` with this period when set; otherwise `x_min`/`x_max`.
    #[serde(default)]
    pub x_period: Option<f64>,
    #[serde(default)]
    pub x_min: Option<f64>,
    #[serde(default)]
    pub x_max: Option<f64>,
    pub y_min: f64,
    pub y_max: f64,
}

/// An inline expression or a field table on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSource {
    Expr(String),
    File { file: PathBuf },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsConfig {
    #[serde(default)]
    pub phi1: Option<FieldSource>,
    /// Dirichlet data for `u`, an expression in `x`, `y`.
    #[serde(default)]
    pub boundary_u: Option<String>,
    /// Optional exact `u` for error reporting.
    #[serde(default)]
    pub exact_u: Option<String>,
    /// Slice seed; absent means the fixed-point slice.
    #[serde(default)]
    pub seed: Option<FieldSource>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HitchinConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for HitchinConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phi3Choice {
    Nilpotent,
    ZeroMean,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SliceConfig {
    pub gate: f64,
    pub phi3: Phi3Choice,
    /// Load a saved slice bundle instead of synthesizing.
    pub load: Option<PathBuf>,
    /// Also synthesize from the doubled seed and report the deviation.
    pub linearity_check: bool,
}

impl Default for SliceConfig {
    fn default() -> Self {
        Self {
            gate: 1e-6,
            phi3: Phi3Choice::Nilpotent,
            load: None,
            linearity_check: false,
        }
    }
}

/// One coefficient `r^power·(dz·[e11, e12, e21, e22] + dz̄·[…])`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub power: i32,
    #[serde(default)]
    pub dz: Option<[String; 4]>,
    #[serde(default)]
    pub dzbar: Option<[String; 4]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilyConfig {
    pub hbar: f64,
    /// Curvature sweep values.
    pub r: Vec<f64>,
    /// Load a saved family bundle.
    pub load: Option<PathBuf>,
    /// Synthetic family from expressions; overrides the slice pipeline.
    pub term: Vec<TermConfig>,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            r: vec![1.0, 10.0],
            load: None,
            term: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SecondaryConfig {
    pub r: Vec<f64>,
}

impl Default for SecondaryConfig {
    fn default() -> Self {
        Self {
            r: vec![10.0, 100.0, 1000.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WkbConfig {
    pub eps: Vec<f64>,
    pub substeps: usize,
    pub curvature_gate: Option<f64>,
    /// Spectral parameter for the `holonomy` command.
    pub r: f64,
}

impl Default for WkbConfig {
    fn default() -> Self {
        Self {
            eps: vec![0.2, 0.1, 0.05, 0.025],
            substeps: 256,
            curvature_gate: None,
            r: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopKind {
    Search,
    Horizontal,
    Sinusoid,
    File,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoopConfig {
    pub kind: LoopKind,
    pub nt: usize,
    pub y0: Option<f64>,
    pub amplitude: f64,
    pub phase: f64,
    pub reversed: bool,
    pub file: Option<PathBuf>,
    pub levels: usize,
    pub sinusoids: usize,
    pub margin: f64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            kind: LoopKind::Search,
            nt: 128,
            y0: None,
            amplitude: 0.0,
            phase: 0.0,
            reversed: false,
            file: None,
            levels: 9,
            sinusoids: 16,
            margin: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContradictionConfig {
    pub mask_threshold: f64,
    /// Relative perturbation applied to `b` before the chain.
    pub perturb_b: f64,
    /// Fail with a gate error when the Hitchin or `D′` gate fails.
    pub require_gates: bool,
    /// Gate level; defaults to the slice's own gate.
    pub gate: Option<f64>,
}

impl Default for ContradictionConfig {
    fn default() -> Self {
        Self {
            mask_threshold: 1e-3,
            perturb_b: 0.0,
            require_gates: true,
            gate: None,
        }
    }
}

/// A validated config plus its verbatim text and base directory.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub text: String,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str(&text, &base)
    }

    pub fn from_str(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let loaded = Self {
            config,
            text: text.to_string(),
            base_dir: base_dir.to_path_buf(),
        };
        loaded.validate()?;
        Ok(loaded)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        let c = &self.config;
        if !COMMANDS.contains(&c.command.as_str()) {
            return Err(CliError::UnknownCommand(c.command.clone()));
        }
        let mut files: Vec<&PathBuf> = Vec::new();
        let mut exprs: Vec<(&str, &str)> = Vec::new();
        for (name, src) in [("fields.phi1", &c.fields.phi1), ("fields.seed", &c.fields.seed)] {
            match src {
                Some(FieldSource::File { file }) => files.push(file),
                Some(FieldSource::Expr(e)) => exprs.push((name, e)),
                None => {}
            }
        }
        for (name, e) in [("fields.boundary_u", &c.fields.boundary_u), ("fields.exact_u", &c.fields.exact_u)] {
            if let Some(e) = e {
                exprs.push((name, e));
            }
        }
        for t in &c.family.term {
            for e in t.dz.iter().chain(&t.dzbar).flatten() {
                exprs.push(("family.term", e));
            }
        }
        for (name, e) in exprs {
            Expr::parse(e).map_err(|err| CliError::Config(format!("{name} = \"{e}\": {err}")))?;
        }
        files.extend(c.slice.load.iter());
        files.extend(c.family.load.iter());
        if c.lp.kind == LoopKind::File {
            match &c.lp.file {
                Some(f) => files.push(f),
                None => return Err(CliError::Config("loop.kind = \"file\" needs loop.file".into())),
            }
        }
        for f in files {
            let p = self.resolve(f);
            if !p.exists() {
                return Err(CliError::MissingFile(p));
            }
        }
        strictly_monotone("family.r", &c.family.r, true)?;
        strictly_monotone("secondary.r", &c.secondary.r, true)?;
        strictly_monotone("wkb.eps", &c.wkb.eps, false)?;
        for (name, v) in [
            ("hitchin.tol", c.hitchin.tol),
            ("slice.gate", c.slice.gate),
            ("family.hbar", c.family.hbar),
            ("wkb.r", c.wkb.r),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

fn strictly_monotone(name: &str, v: &[f64], increasing: bool) -> Result<(), CliError> {
    if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(CliError::Config(format!("{name} entries must be positive")));
    }
    let ok = v.windows(2).all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] });
    if !ok {
        let dir = if increasing { "increasing" } else { "decreasing" };
        return Err(CliError::Config(format!("{name} must be strictly {dir}")));
    }
    Ok(())
}
