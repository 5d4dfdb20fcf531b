//! Problem data: boundary values, source term, initial data, subsolution and
//! tolerances, in declarative form ([`ProblemSpec`]) and materialized on a grid
//! ([`Problem`]).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{build_grid, DomainSpec, Grid, GridField, Shape};
use crate::snapshot;

fn one() -> f64 {
    1.0
}

/// Closed-form or tabulated scalar fields. `|z|²` is the squared Euclidean
/// norm in ℝ²ⁿ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldExpr {
    /// `a|z|² + c`
    Quadratic {
        #[serde(default = "one")]
        a: f64,
        #[serde(default)]
        c: f64,
    },
    /// `a|z|⁴ + b|z|² + c`
    Quartic {
        a: f64,
        #[serde(default)]
        b: f64,
        #[serde(default)]
        c: f64,
    },
    /// `c + Σ_p slope_p·x_p` over the real axes.
    Affine {
        #[serde(default)]
        c: f64,
        slope: Vec<f64>,
    },
    Constant { value: f64 },
    /// `a|z|² + c + amplitude·β(z)`, with β the product of normalized
    /// parabolas vanishing on the box faces (`1 − |z|²/R²` on radial grids).
    BoxBubble {
        amplitude: f64,
        #[serde(default = "one")]
        a: f64,
        #[serde(default)]
        c: f64,
    },
    /// Values read from a snapshot file on the same grid.
    Tabulated { path: PathBuf },
}

impl FieldExpr {
    pub fn quadratic(a: f64, c: f64) -> Self {
        FieldExpr::Quadratic { a, c }
    }

    pub fn materialize(&self, grid: &Grid) -> Result<GridField> {
        if let FieldExpr::Tabulated { path } = self {
            return snapshot::read_snapshot(path)?.into_field(grid);
        }
        if let FieldExpr::Affine { slope, .. } = self {
            if slope.len() != 2 * grid.dim() {
                return Err(Error::Config(format!(
                    "affine field needs {} slopes, got {}",
                    2 * grid.dim(),
                    slope.len()
                )));
            }
        }
        let spec = grid.spec().clone();
        GridField::from_fn(grid, |x| self.eval(&spec, x))
    }

    fn eval(&self, spec: &DomainSpec, x: &[f64]) -> f64 {
        let s: f64 = x.iter().map(|v| v * v).sum();
        match self {
            FieldExpr::Quadratic { a, c } => a * s + c,
            FieldExpr::Quartic { a, b, c } => a * s * s + b * s + c,
            FieldExpr::Affine { c, slope } => c + slope.iter().zip(x).map(|(k, v)| k * v).sum::<f64>(),
            FieldExpr::Constant { value } => *value,
            FieldExpr::BoxBubble { amplitude, a, c } => a * s + c + amplitude * bubble(spec, x),
            FieldExpr::Tabulated { .. } => unreachable!("tabulated fields are read, not evaluated"),
        }
    }
}

fn bubble(spec: &DomainSpec, x: &[f64]) -> f64 {
    match &spec.shape {
        Shape::Radial { radius, .. } => 1.0 - x[0] * x[0] / (radius * radius),
        Shape::Box { lower, upper, .. } => x
            .iter()
            .enumerate()
            .map(|(p, v)| {
                let half = 0.5 * (upper[p] - lower[p]);
                (v - lower[p]) * (upper[p] - v) / (half * half)
            })
            .product(),
    }
}

/// The z-dependent part g of the source term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceG {
    Constant { value: f64 },
    /// `coef·|z|²`
    Quadratic { coef: f64 },
    /// `coef·log(1 + |z|²)`
    Log1p { coef: f64 },
    Tabulated { path: PathBuf },
}

impl Default for SourceG {
    fn default() -> Self {
        SourceG::Constant { value: 0.0 }
    }
}

/// `f(t, z, u) = a·u + g(z) + b·t` with `a ≤ 0`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub g: SourceG,
}

impl SourceSpec {
    pub fn zero() -> Self {
        SourceSpec::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.b.is_finite()) {
            return Err(Error::Config("source.a and source.b must be finite".into()));
        }
        if self.a > 0.0 {
            return Err(Error::Config(format!(
                "source.a = {} violates a ≤ 0 (the flow requires f_u ≤ 0)",
                self.a
            )));
        }
        Ok(())
    }

    pub fn materialize(&self, grid: &Grid) -> Result<Source> {
        self.validate()?;
        let g = match &self.g {
            SourceG::Tabulated { path } => snapshot::read_snapshot(path)?.into_field(grid)?,
            SourceG::Constant { value } => GridField::constant(grid, *value),
            SourceG::Quadratic { coef } => {
                GridField::from_fn(grid, |x| coef * x.iter().map(|v| v * v).sum::<f64>())?
            }
            SourceG::Log1p { coef } => {
                GridField::from_fn(grid, |x| coef * x.iter().map(|v| v * v).sum::<f64>().ln_1p())?
            }
        };
        Ok(Source {
            a: self.a,
            b: self.b,
            g,
        })
    }
}

/// Source term materialized on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Source {
    pub a: f64,
    pub b: f64,
    pub g: GridField,
}

impl Source {
    pub fn zero(grid: &Grid) -> Self {
        Source {
            a: 0.0,
            b: 0.0,
            g: GridField::zeros(grid),
        }
    }

    /// `f(t, z_node, u)`.
    pub fn eval(&self, node: usize, t: f64, u: f64) -> f64 {
        self.a * u + self.g.get(node) + self.b * t
    }

    /// `∂f/∂u`.
    pub fn f_u(&self) -> f64 {
        self.a
    }

    /// `∂f/∂t`.
    pub fn f_t(&self) -> f64 {
        self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Explicit,
    Implicit,
}

/// Numerical tolerances. `None` entries take grid-dependent defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub tol_bc: f64,
    pub tol_psh: f64,
    pub det_floor: f64,
    pub tol_newton: f64,
    pub tol_cmp: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steady_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_f: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_bc: 1e-10,
            tol_psh: 1e-10,
            det_floor: 1e-12,
            tol_newton: 1e-10,
            tol_cmp: 1e-8,
            steady_tol: None,
            tol_q: None,
            tol_f: None,
        }
    }
}

impl Tolerances {
    pub fn steady_tol(&self, grid: &Grid) -> f64 {
        self.steady_tol
            .unwrap_or(if grid.is_radial() { 1e-9 } else { 1e-6 })
    }
}

/// Time-stepping controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Stepping {
    pub scheme: Scheme,
    /// Safety factor σ of the explicit step `dt = σ·h²/4 / max tr(H⁻¹)`.
    pub cfl: f64,
    /// First implicit step.
    pub dt0: f64,
    /// Implicit step growth factor after each accepted step.
    pub dt_growth: f64,
    pub dt_max: f64,
    pub max_steps: usize,
}

impl Default for Stepping {
    fn default() -> Self {
        Stepping {
            scheme: Scheme::Explicit,
            cfl: 0.4,
            dt0: 1e-3,
            dt_growth: 1.5,
            dt_max: 1.0,
            max_steps: 10_000_000,
        }
    }
}

/// Declarative problem description.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub domain: DomainSpec,
    pub boundary: FieldExpr,
    pub source: SourceSpec,
    /// Defaults to the subsolution.
    pub initial: Option<FieldExpr>,
    pub subsolution: FieldExpr,
    pub reference: Option<FieldExpr>,
    /// Final time; `None` runs until steady (or `max_steps`).
    pub horizon: Option<f64>,
    pub steady: bool,
    pub tolerances: Tolerances,
    pub stepping: Stepping,
    pub simpson_nodes: usize,
}

impl ProblemSpec {
    /// Radial problem with `f ≡ 0`, `φ = |z|²` and the given initial data
    /// doubling as subsolution.
    pub fn radial_disc(dim: usize, nodes: usize, initial: FieldExpr) -> Self {
        ProblemSpec {
            domain: DomainSpec::radial(dim, 1.0, nodes),
            boundary: FieldExpr::quadratic(1.0, 0.0),
            source: SourceSpec::zero(),
            initial: None,
            subsolution: initial,
            reference: None,
            horizon: None,
            steady: true,
            tolerances: Tolerances::default(),
            stepping: Stepping::default(),
            simpson_nodes: crate::functionals::DEFAULT_SIMPSON_NODES,
        }
    }

    pub fn materialize(&self) -> Result<Problem> {
        let grid = build_grid(&self.domain)?;
        let source = self.source.materialize(&grid)?;
        let boundary_full = self.boundary.materialize(&grid)?;
        let mut phi = GridField::zeros(&grid);
        for &node in grid.boundary() {
            phi.values_mut()[node] = boundary_full.get(node);
        }
        let subsolution = self.subsolution.materialize(&grid)?;
        let u0 = match &self.initial {
            Some(expr) => expr.materialize(&grid)?,
            None => subsolution.clone(),
        };
        let reference = self
            .reference
            .as_ref()
            .map(|r| r.materialize(&grid))
            .transpose()?;
        if self.simpson_nodes < 3 || self.simpson_nodes.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "functionals.simpson_nodes = {} must be odd and ≥ 3",
                self.simpson_nodes
            )));
        }
        if let Some(t) = self.horizon {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::Config(format!("flow.horizon = {t} must be > 0")));
            }
        }
        let st = &self.stepping;
        if !(st.cfl > 0.0 && st.dt0 > 0.0 && st.dt_growth >= 1.0 && st.dt_max >= st.dt0) {
            return Err(Error::Config(
                "flow step controls need cfl > 0, dt0 > 0, dt_growth ≥ 1, dt_max ≥ dt0".into(),
            ));
        }
        Ok(Problem {
            grid,
            phi,
            source,
            u0,
            subsolution,
            reference,
            horizon: self.horizon,
            steady: self.steady,
            tolerances: self.tolerances.clone(),
            stepping: self.stepping.clone(),
            simpson_nodes: self.simpson_nodes,
        })
    }
}

/// A problem materialized on its grid.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Grid,
    /// Boundary data on BOUNDARY nodes, zero elsewhere.
    pub phi: GridField,
    pub source: Source,
    pub u0: GridField,
    pub subsolution: GridField,
    pub reference: Option<GridField>,
    pub horizon: Option<f64>,
    pub steady: bool,
    pub tolerances: Tolerances,
    pub stepping: Stepping,
    pub simpson_nodes: usize,
}

impl Problem {
    pub fn steady_tol(&self) -> f64 {
        self.tolerances.steady_tol(&self.grid)
    }

    /// Rejects initial data whose boundary trace differs from φ by more than
    /// `tol_bc` (relative to the size of φ).
    pub fn check_initial_trace(&self) -> Result<()> {
        let scale = 1.0f64.max(self.phi.sup_over(self.grid.boundary()));
        let tol = self.tolerances.tol_bc * scale;
        for &node in self.grid.boundary() {
            let gap = (self.u0.get(node) - self.phi.get(node)).abs();
            if gap > tol {
                return Err(Error::Config(format!(
                    "initial data differs from boundary data by {gap:e} at node {node}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_positive_a() {
        let s = SourceSpec {
            a: 0.5,
            ..SourceSpec::zero()
        };
        let err = s.validate().unwrap_err().to_string();
        assert!(err.contains("a ≤ 0") && err.contains("f_u ≤ 0"), "{err}");
    }

    #[test]
    fn materializes_canonical_problem() {
        let spec = ProblemSpec::radial_disc(1, 9, FieldExpr::quadratic(2.0, -1.0));
        let p = spec.materialize().unwrap();
        assert_eq!(p.phi.get(8), 1.0);
        assert_eq!(p.phi.get(3), 0.0);
        assert_eq!(p.u0, p.subsolution);
        assert_eq!(p.u0.get(0), -1.0);
        assert_eq!(p.steady_tol(), 1e-9);
    }

    #[test]
    fn rejects_initial_data_off_the_boundary() {
        let mut spec = ProblemSpec::radial_disc(1, 9, FieldExpr::quadratic(1.0, 0.0));
        spec.initial = Some(FieldExpr::quadratic(1.0, 0.5));
        assert!(spec.materialize().unwrap().check_initial_trace().is_err());
    }

    #[test]
    fn bubble_vanishes_on_box_faces() {
        let spec = DomainSpec::cube(2, -1.0, 1.0, 0.5);
        let g = build_grid(&spec).unwrap();
        let f = FieldExpr::BoxBubble {
            amplitude: 0.3,
            a: 1.0,
            c: 0.0,
        }
        .materialize(&g)
        .unwrap();
        for &node in g.boundary() {
            let s: f64 = g.coords(node).iter().map(|v| v * v).sum();
            assert!((f.get(node) - s).abs() < 1e-15);
        }
        let centre = g.node_count() / 2;
        assert!((f.get(centre) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn source_evaluation() {
        let g = build_grid(&DomainSpec::radial(1, 1.0, 5)).unwrap();
        let s = SourceSpec {
            a: -1.0,
            b: 0.0,
            g: SourceG::Quadratic { coef: 1.0 },
        }
        .materialize(&g)
        .unwrap();
        // f = |z|² − u vanishes at u = |z|²
        assert_eq!(s.eval(2, 0.0, 0.25), 0.0);
        let l = SourceSpec {
            g: SourceG::Log1p { coef: -1.0 },
            ..SourceSpec::zero()
        }
        .materialize(&g)
        .unwrap();
        assert!((l.eval(4, 0.0, 0.0) + 2f64.ln()).abs() < 1e-15);
    }
}
