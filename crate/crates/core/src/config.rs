//! TOML run configuration.
//!
//! ```toml
//! mode = "flow"              # flow | elliptic | functionals | verify
//! seed = 1
//! snapshot_every = 100
//!
//! [domain]
//! shape = "radial"           # or "box" with lower/upper/h (scalars or per-axis lists)
//! n = 1
//! radius = 1.0
//! nodes = 513
//!
//! [boundary]
//! kind = "quadratic"         # a|z|² + c
//!
//! [source]                   # f = a·u + g(z) + b·t, a ≤ 0
//! a = 0.0
//! g = { kind = "constant", value = 0.0 }
//!
//! [initial]
//! kind = "quadratic"
//! a = 2.0
//! c = -1.0
//!
//! [flow]
//! scheme = "implicit"
//! steady = true
//! ```
//!
//! Every table rejects unknown keys. Relative paths of tabulated fields are
//! resolved against the directory holding the config file and must exist.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::DEFAULT_SIMPSON_NODES;
use crate::grid::{DomainSpec, Shape};
use crate::problem::{FieldExpr, ProblemSpec, Scheme, SourceG, SourceSpec, Stepping, Tolerances};
use crate::verify::VerifyOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Flow,
    Elliptic,
    Functionals,
    Verify,
}

/// A scalar applied to every axis, or one value per real axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axes {
    Uniform(f64),
    PerAxis(Vec<f64>),
}

impl Axes {
    fn expand(&self, dim: usize) -> Vec<f64> {
        match self {
            Axes::Uniform(v) => vec![*v; 2 * dim],
            Axes::PerAxis(v) => v.clone(),
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Radial {
        n: usize,
        #[serde(default = "one")]
        radius: f64,
        nodes: usize,
    },
    Box {
        n: usize,
        lower: Axes,
        upper: Axes,
        h: Axes,
    },
}

impl DomainConfig {
    pub fn spec(&self) -> DomainSpec {
        match self {
            DomainConfig::Radial { n, radius, nodes } => DomainSpec::radial(*n, *radius, *nodes),
            DomainConfig::Box { n, lower, upper, h } => {
                DomainSpec::boxed(*n, lower.expand(*n), upper.expand(*n), h.expand(*n))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub scheme: Scheme,
    pub cfl: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    pub steady: bool,
    pub dt0: f64,
    pub dt_growth: f64,
    pub dt_max: f64,
    pub max_steps: usize,
    pub override_subsolution: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        let s = Stepping::default();
        FlowConfig {
            scheme: s.scheme,
            cfl: s.cfl,
            horizon: None,
            steady: true,
            dt0: s.dt0,
            dt_growth: s.dt_growth,
            dt_max: s.dt_max,
            max_steps: s.max_steps,
            override_subsolution: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FunctionalsConfig {
    pub simpson_nodes: usize,
    /// Defaults to the initial data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<FieldExpr>,
    /// Defaults to the subsolution.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<FieldExpr>,
    /// Optional time derivative for Y.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub udot: Option<FieldExpr>,
}

impl Default for FunctionalsConfig {
    fn default() -> Self {
        FunctionalsConfig {
            simpson_nodes: DEFAULT_SIMPSON_NODES,
            u: None,
            v: None,
            udot: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EllipticConfig {
    /// Newton start; defaults to the subsolution.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<FieldExpr>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub samples: usize,
    pub radial_nodes: usize,
    pub box_h: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            samples: 200,
            radial_nodes: 65,
            box_h: 0.125,
        }
    }
}

fn default_seed() -> u64 {
    1
}

fn default_every() -> usize {
    100
}

fn default_boundary() -> FieldExpr {
    FieldExpr::quadratic(1.0, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_every")]
    pub snapshot_every: usize,
    /// Output directory; the command line takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub domain: DomainConfig,
    #[serde(default = "default_boundary")]
    pub boundary: FieldExpr,
    #[serde(default)]
    pub source: SourceSpec,
    /// Defaults to the subsolution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<FieldExpr>,
    /// Defaults to the initial data, then to the boundary expression.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsolution: Option<FieldExpr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<FieldExpr>,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub functionals: FunctionalsConfig,
    #[serde(default)]
    pub elliptic: EllipticConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

impl RunConfig {
    /// Structural checks that need no file access beyond existence.
    pub fn validate(&self) -> Result<()> {
        self.domain.spec().validate()?;
        self.source.validate()?;
        let m = self.functionals.simpson_nodes;
        if m < 3 || m.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "functionals.simpson_nodes = {m} must be odd and ≥ 3"
            )));
        }
        if self.snapshot_every == 0 {
            return Err(Error::Config("snapshot_every must be ≥ 1".into()));
        }
        let f = &self.flow;
        if let Some(t) = f.horizon {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::Config(format!("flow.horizon = {t} must be > 0")));
            }
        }
        if !f.steady && f.horizon.is_none() {
            return Err(Error::Config("flow needs steady = true or a horizon".into()));
        }
        if !(f.cfl > 0.0 && f.dt0 > 0.0 && f.dt_growth >= 1.0 && f.dt_max >= f.dt0) {
            return Err(Error::Config(
                "flow step controls need cfl > 0, dt0 > 0, dt_growth ≥ 1, dt_max ≥ dt0".into(),
            ));
        }
        if self.verify.samples == 0 || self.verify.radial_nodes < 3 || self.verify.box_h.is_nan() || self.verify.box_h <= 0.0 {
            return Err(Error::Config(
                "verify needs samples ≥ 1, radial_nodes ≥ 3 and box_h > 0".into(),
            ));
        }
        for p in self.tabulated_paths() {
            if !p.exists() {
                return Err(Error::Config(format!("tabulated field {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    fn exprs_mut(&mut self) -> Vec<&mut FieldExpr> {
        let mut out = vec![&mut self.boundary];
        for e in [
            &mut self.initial,
            &mut self.subsolution,
            &mut self.reference,
            &mut self.functionals.u,
            &mut self.functionals.v,
            &mut self.functionals.udot,
            &mut self.elliptic.init,
        ] {
            if let Some(e) = e.as_mut() {
                out.push(e);
            }
        }
        out
    }

    fn tabulated_paths(&self) -> Vec<PathBuf> {
        let mut copy = self.clone();
        let mut paths: Vec<PathBuf> = copy
            .exprs_mut()
            .into_iter()
            .filter_map(|e| match e {
                FieldExpr::Tabulated { path } => Some(path.clone()),
                _ => None,
            })
            .collect();
        if let SourceG::Tabulated { path } = &self.source.g {
            paths.push(path.clone());
        }
        paths
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for e in self.exprs_mut() {
            if let FieldExpr::Tabulated { path } = e {
                fix(path);
            }
        }
        if let SourceG::Tabulated { path } = &mut self.source.g {
            fix(path);
        }
    }

    pub fn subsolution_expr(&self) -> FieldExpr {
        self.subsolution
            .clone()
            .or_else(|| self.initial.clone())
            .unwrap_or_else(|| self.boundary.clone())
    }

    pub fn problem_spec(&self) -> ProblemSpec {
        let f = &self.flow;
        ProblemSpec {
            domain: self.domain.spec(),
            boundary: self.boundary.clone(),
            source: self.source.clone(),
            initial: self.initial.clone(),
            subsolution: self.subsolution_expr(),
            reference: self.reference.clone(),
            horizon: f.horizon,
            steady: f.steady,
            tolerances: self.tolerances.clone(),
            stepping: Stepping {
                scheme: f.scheme,
                cfl: f.cfl,
                dt0: f.dt0,
                dt_growth: f.dt_growth,
                dt_max: f.dt_max,
                max_steps: f.max_steps,
            },
            simpson_nodes: self.functionals.simpson_nodes,
        }
    }

    pub fn verify_options(&self, seed: u64) -> VerifyOptions {
        let v = &self.verify;
        let n = self.domain.spec().dim;
        let radius = match self.domain.spec().shape {
            Shape::Radial { radius, .. } => radius,
            Shape::Box { .. } => 1.0,
        };
        VerifyOptions {
            seed,
            samples: v.samples,
            simpson_nodes: self.functionals.simpson_nodes,
            grids: vec![
                DomainSpec::radial(n, radius, v.radial_nodes),
                DomainSpec::cube(n, -1.0, 1.0, v.box_h),
            ],
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Parses and validates configuration text; relative tabulated paths are
/// resolved against `base_dir`.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<RunConfig> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.resolve_paths(base_dir);
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[domain]
shape = "radial"
n = 1
nodes = 65
"#;

    #[test]
    fn minimal_flow_config() {
        let c = parse_config_str(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(c.domain.spec(), DomainSpec::radial(1, 1.0, 65));
        assert_eq!(c.boundary, FieldExpr::quadratic(1.0, 0.0));
        assert_eq!(c.source, SourceSpec::zero());
        let p = c.problem_spec().materialize().unwrap();
        assert_eq!(p.u0, p.subsolution);
    }

    #[test]
    fn positive_a_is_rejected() {
        let text = format!("{MINIMAL}\n[source]\na = 0.5\n");
        let err = parse_config_str(&text, Path::new(".")).unwrap_err();
        assert_eq!(err.class(), crate::ErrorClass::Config);
        let msg = err.to_string();
        assert!(msg.contains("a ≤ 0") && msg.contains("f_u ≤ 0"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_named() {
        for text in [
            format!("fooo = 1\n{MINIMAL}"),
            format!("{MINIMAL}fooo = 1\n"),
            format!("{MINIMAL}\n[flow]\nfooo = 1\n"),
            format!("{MINIMAL}\n[initial]\nkind = \"quadratic\"\nfooo = 1\n"),
        ] {
            let msg = parse_config_str(&text, Path::new(".")).unwrap_err().to_string();
            assert!(msg.contains("fooo"), "{msg}");
        }
    }

    #[test]
    fn box_domain_and_round_trip() {
        let text = r#"
mode = "flow"
seed = 7
[domain]
shape = "box"
n = 2
lower = -1.0
upper = [1.0, 1.0, 1.0, 1.0]
h = 0.125
[source]
a = -1.0
g = { kind = "quadratic", coef = 1.0 }
[initial]
kind = "box_bubble"
amplitude = 0.1
[flow]
horizon = 0.5
steady = false
[tolerances]
steady_tol = 1e-7
"#;
        let c = parse_config_str(text, Path::new(".")).unwrap();
        assert_eq!(c.domain.spec(), DomainSpec::cube(2, -1.0, 1.0, 0.125));
        let again = parse_config_str(&c.to_toml().unwrap(), Path::new(".")).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn tabulated_paths_resolve_and_must_exist() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!("{MINIMAL}\n[source.g]\nkind = \"tabulated\"\npath = \"g.bin\"\n");
        let err = parse_config_str(&text, dir.path()).unwrap_err().to_string();
        assert!(err.contains("g.bin"), "{err}");
        let g = crate::grid::build_grid(&DomainSpec::radial(1, 1.0, 65)).unwrap();
        crate::snapshot::write_snapshot(&dir.path().join("g.bin"), &g, "g", &crate::grid::GridField::zeros(&g))
            .unwrap();
        let c = parse_config_str(&text, dir.path()).unwrap();
        assert_eq!(c.source.g, SourceG::Tabulated { path: dir.path().join("g.bin") });
        c.problem_spec().materialize().unwrap();
    }
}
