//! Discretized bounded domains in ℂⁿ (n = 1, 2).
//!
//! Two layouts are supported:
//!
//! * **Box** — a uniform Cartesian grid over a grid-aligned box in ℝ²ⁿ (a
//!   rectangle for n = 1, a product of two rectangles for n = 2). Real axes are
//!   ordered `x₁, y₁, x₂, y₂`; node indices are row-major with the last axis
//!   fastest.
//! * **Radial** — nodes `r_i = iΔr`, `i = 0..N`, on `[0, R]` representing a
//!   disc (n = 1) or ball (n = 2) for radially symmetric functions. Each node
//!   stands for the shell `r_{i-1/2} ≤ |z| ≤ r_{i+1/2}` (clamped to `[0, R]`),
//!   whose volume is the node's quadrature weight.

use std::collections::hash_map::DefaultHasher;
use std::f64::consts::PI;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};

/// Shape and resolution of the domain.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Grid-aligned box `Π [lower_p, upper_p]` over the 2n real axes, with mesh
    /// size `h_p` per axis.
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
        h: Vec<f64>,
    },
    /// Disc or ball `|z| ≤ radius` sampled at `nodes` equispaced radii.
    Radial { radius: f64, nodes: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    /// Complex dimension n.
    pub dim: usize,
    pub shape: Shape,
}

impl DomainSpec {
    pub fn radial(dim: usize, radius: f64, nodes: usize) -> Self {
        DomainSpec {
            dim,
            shape: Shape::Radial { radius, nodes },
        }
    }

    /// Box with the same interval `[lower, upper]` and mesh size on every real axis.
    pub fn cube(dim: usize, lower: f64, upper: f64, h: f64) -> Self {
        DomainSpec {
            dim,
            shape: Shape::Box {
                lower: vec![lower; 2 * dim],
                upper: vec![upper; 2 * dim],
                h: vec![h; 2 * dim],
            },
        }
    }

    pub fn boxed(dim: usize, lower: Vec<f64>, upper: Vec<f64>, h: Vec<f64>) -> Self {
        DomainSpec {
            dim,
            shape: Shape::Box { lower, upper, h },
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.shape, Shape::Radial { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::InvalidDomain(format!(
                "dimension n = {} (only 1 and 2 are supported)",
                self.dim
            )));
        }
        match &self.shape {
            Shape::Radial { radius, nodes } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidDomain(format!("radius {radius} must be > 0")));
                }
                if *nodes < 3 {
                    return Err(Error::InvalidDomain(format!(
                        "radial node count {nodes} < 3"
                    )));
                }
            }
            Shape::Box { lower, upper, h } => {
                let axes = 2 * self.dim;
                if lower.len() != axes || upper.len() != axes || h.len() != axes {
                    return Err(Error::InvalidDomain(format!(
                        "box needs {axes} entries for lower, upper and h"
                    )));
                }
                for p in 0..axes {
                    let (lo, hi, hp) = (lower[p], upper[p], h[p]);
                    if !(lo.is_finite() && hi.is_finite() && hp.is_finite()) {
                        return Err(Error::InvalidDomain(format!("axis {p}: non-finite extent")));
                    }
                    if hp <= 0.0 {
                        return Err(Error::InvalidDomain(format!("axis {p}: h = {hp} must be > 0")));
                    }
                    if hi <= lo {
                        return Err(Error::InvalidDomain(format!(
                            "axis {p}: upper {hi} must exceed lower {lo}"
                        )));
                    }
                    let cells = (hi - lo) / hp;
                    if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) {
                        return Err(Error::InvalidDomain(format!(
                            "axis {p}: extent {} is not an integer multiple of h = {hp}",
                            hi - lo
                        )));
                    }
                    if cells.round() < 2.0 {
                        return Err(Error::InvalidDomain(format!(
                            "axis {p}: needs at least one interior node"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Node classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeClass {
    Interior,
    Boundary,
    /// Outside the domain. Grid-aligned boxes and radial grids never produce
    /// exterior nodes; operations skip them.
    Exterior,
}

/// Identity of a grid, derived from its [`DomainSpec`]; fields built on grids
/// with equal specs are interchangeable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridTag(u64);

#[derive(Debug, Clone)]
pub(crate) enum Layout {
    Box {
        lower: Vec<f64>,
        h: Vec<f64>,
        counts: Vec<usize>,
        strides: Vec<usize>,
    },
    Radial {
        radius: f64,
        dr: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Grid {
    spec: DomainSpec,
    tag: GridTag,
    pub(crate) layout: Layout,
    class: Vec<NodeClass>,
    weights: Vec<f64>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
}

/// Volume of the unit ball in ℂⁿ = ℝ²ⁿ: πⁿ/n!.
pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        1 => PI,
        2 => PI * PI / 2.0,
        _ => PI.powi(dim as i32) / (1..=dim).product::<usize>() as f64,
    }
}

/// Builds the grid for `spec`.
pub fn build_grid(spec: &DomainSpec) -> Result<Grid> {
    spec.validate()?;
    let tag = spec_tag(spec);
    match &spec.shape {
        Shape::Radial { radius, nodes } => {
            let n = *nodes;
            let dr = radius / (n - 1) as f64;
            let vol = unit_ball_volume(spec.dim);
            let two_n = 2 * spec.dim as i32;
            let mut class = vec![NodeClass::Interior; n];
            class[n - 1] = NodeClass::Boundary;
            let weights = (0..n)
                .map(|i| {
                    let outer = if i == n - 1 {
                        *radius
                    } else {
                        (i as f64 + 0.5) * dr
                    };
                    let inner = if i == 0 { 0.0 } else { (i as f64 - 0.5) * dr };
                    vol * (outer.powi(two_n) - inner.powi(two_n))
                })
                .collect();
            Ok(Grid {
                spec: spec.clone(),
                tag,
                layout: Layout::Radial {
                    radius: *radius,
                    dr,
                },
                class,
                weights,
                interior: (0..n - 1).collect(),
                boundary: vec![n - 1],
            })
        }
        Shape::Box { lower, upper, h } => {
            let axes = lower.len();
            let counts: Vec<usize> = (0..axes)
                .map(|p| ((upper[p] - lower[p]) / h[p]).round() as usize + 1)
                .collect();
            let mut strides = vec![1usize; axes];
            for p in (0..axes - 1).rev() {
                strides[p] = strides[p + 1] * counts[p + 1];
            }
            let total = strides[0] * counts[0];
            let mut class = Vec::with_capacity(total);
            let mut weights = Vec::with_capacity(total);
            let mut interior = Vec::new();
            let mut boundary = Vec::new();
            let mut idx = vec![0usize; axes];
            for node in 0..total {
                let mut rem = node;
                for p in 0..axes {
                    idx[p] = rem / strides[p];
                    rem %= strides[p];
                }
                let mut on_face = false;
                let mut w = 1.0;
                for p in 0..axes {
                    let end = idx[p] == 0 || idx[p] == counts[p] - 1;
                    on_face |= end;
                    w *= if end { 0.5 * h[p] } else { h[p] };
                }
                if on_face {
                    class.push(NodeClass::Boundary);
                    boundary.push(node);
                } else {
                    class.push(NodeClass::Interior);
                    interior.push(node);
                }
                weights.push(w);
            }
            Ok(Grid {
                spec: spec.clone(),
                tag,
                layout: Layout::Box {
                    lower: lower.clone(),
                    h: h.clone(),
                    counts,
                    strides,
                },
                class,
                weights,
                interior,
                boundary,
            })
        }
    }
}

fn spec_tag(spec: &DomainSpec) -> GridTag {
    let mut hasher = DefaultHasher::new();
    spec.dim.hash(&mut hasher);
    match &spec.shape {
        Shape::Radial { radius, nodes } => {
            0u8.hash(&mut hasher);
            radius.to_bits().hash(&mut hasher);
            nodes.hash(&mut hasher);
        }
        Shape::Box { lower, upper, h } => {
            1u8.hash(&mut hasher);
            for v in lower.iter().chain(upper).chain(h) {
                v.to_bits().hash(&mut hasher);
            }
        }
    }
    GridTag(hasher.finish())
}

impl Grid {
    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn tag(&self) -> GridTag {
        self.tag
    }

    /// Complex dimension n.
    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.layout, Layout::Radial { .. })
    }

    pub fn node_count(&self) -> usize {
        self.class.len()
    }

    pub fn class(&self, node: usize) -> NodeClass {
        self.class[node]
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Smallest mesh size (Δr in radial mode).
    pub fn min_spacing(&self) -> f64 {
        match &self.layout {
            Layout::Box { h, .. } => h.iter().copied().fold(f64::INFINITY, f64::min),
            Layout::Radial { dr, .. } => *dr,
        }
    }

    /// Sum of quadrature weights.
    pub fn volume(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    /// Real coordinates (length 2n) of a node. Radial nodes are placed on the
    /// positive x₁ axis.
    pub fn coords(&self, node: usize) -> Vec<f64> {
        let mut out = vec![0.0; 2 * self.dim()];
        self.coords_into(node, &mut out);
        out
    }

    pub fn coords_into(&self, node: usize, out: &mut [f64]) {
        match &self.layout {
            Layout::Box {
                lower, h, strides, ..
            } => {
                let mut rem = node;
                for p in 0..strides.len() {
                    let i = rem / strides[p];
                    rem %= strides[p];
                    out[p] = lower[p] + i as f64 * h[p];
                }
            }
            Layout::Radial { .. } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                out[0] = self.radius_of(node);
            }
        }
    }

    /// |z| at a node.
    pub fn radius_of(&self, node: usize) -> f64 {
        match &self.layout {
            Layout::Radial { radius, dr } => {
                if node == self.class.len() - 1 {
                    *radius
                } else {
                    node as f64 * dr
                }
            }
            Layout::Box { .. } => {
                let c = self.coords(node);
                c.iter().map(|x| x * x).sum::<f64>().sqrt()
            }
        }
    }

    /// Per-axis multi-index of a box node.
    pub(crate) fn multi_index(&self, node: usize) -> Vec<usize> {
        match &self.layout {
            Layout::Box { strides, .. } => {
                let mut rem = node;
                strides
                    .iter()
                    .map(|s| {
                        let i = rem / s;
                        rem %= s;
                        i
                    })
                    .collect()
            }
            Layout::Radial { .. } => vec![node],
        }
    }

    pub(crate) fn check(&self, field: &GridField) -> Result<()> {
        if field.tag != self.tag || field.values.len() != self.node_count() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// A real value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    tag: GridTag,
    values: Vec<f64>,
}

impl GridField {
    /// Wraps `values` (one per node); rejects wrong lengths and non-finite entries.
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::GridMismatch);
        }
        if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { node, value });
        }
        Ok(GridField {
            tag: grid.tag(),
            values,
        })
    }

    pub fn zeros(grid: &Grid) -> Self {
        GridField {
            tag: grid.tag(),
            values: vec![0.0; grid.node_count()],
        }
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        GridField {
            tag: grid.tag(),
            values: vec![value; grid.node_count()],
        }
    }

    /// Evaluates `f` on the real coordinates of every node.
    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let mut buf = vec![0.0; 2 * grid.dim()];
        let values = (0..grid.node_count())
            .map(|node| {
                grid.coords_into(node, &mut buf);
                f(&buf)
            })
            .collect();
        GridField::new(grid, values)
    }

    /// Unchecked constructor for values computed in-crate.
    pub(crate) fn raw(tag: GridTag, values: Vec<f64>) -> Self {
        GridField { tag, values }
    }

    pub fn tag(&self) -> GridTag {
        self.tag
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_grid(&self, other: &GridField) -> Result<()> {
        if self.tag != other.tag || self.len() != other.len() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `a·self + b·other`, node by node.
    pub fn lincomb(&self, a: f64, other: &GridField, b: f64) -> Result<GridField> {
        self.same_grid(other)?;
        Ok(GridField::raw(
            self.tag,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        ))
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Result<GridField> {
        let values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { node, value });
        }
        Ok(GridField::raw(self.tag, values))
    }

    /// Largest |value| over the given nodes.
    pub fn sup_over(&self, nodes: &[usize]) -> f64 {
        nodes
            .iter()
            .map(|&i| self.values[i].abs())
            .fold(0.0, f64::max)
    }
}

/// Pairwise (cascade) summation; fixed order for bitwise determinism.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// ∫_Ω field dV: weighted sum over interior and boundary nodes.
pub fn integrate(grid: &Grid, field: &GridField) -> Result<f64> {
    grid.check(field)?;
    Ok(weighted_sum(grid, field.values()))
}

pub(crate) fn weighted_sum(grid: &Grid, values: &[f64]) -> f64 {
    let terms: Vec<f64> = grid
        .weights
        .iter()
        .zip(values)
        .zip(&grid.class)
        .map(|((w, v), c)| if *c == NodeClass::Exterior { 0.0 } else { w * v })
        .collect();
    pairwise_sum(&terms)
}

/// Euclidean distance from each node to ∂Ω.
pub fn distance_to_boundary(grid: &Grid) -> GridField {
    let values = match &grid.layout {
        Layout::Radial { radius, .. } => (0..grid.node_count())
            .map(|i| radius - grid.radius_of(i))
            .collect(),
        Layout::Box { .. } => {
            let Shape::Box { lower, upper, .. } = &grid.spec.shape else {
                unreachable!("box layout without box shape")
            };
            let mut buf = vec![0.0; lower.len()];
            (0..grid.node_count())
                .map(|node| {
                    grid.coords_into(node, &mut buf);
                    buf.iter()
                        .enumerate()
                        .map(|(p, x)| (x - lower[p]).min(upper[p] - x))
                        .fold(f64::INFINITY, f64::min)
                        .max(0.0)
                })
                .collect()
        }
    };
    GridField::raw(grid.tag(), values)
}

/// Materializes boundary data: `phi` on BOUNDARY nodes, zero elsewhere.
pub fn lift_boundary_data(grid: &Grid, phi: impl Fn(&[f64]) -> f64) -> Result<GridField> {
    let mut values = vec![0.0; grid.node_count()];
    let mut buf = vec![0.0; 2 * grid.dim()];
    for &node in grid.boundary() {
        grid.coords_into(node, &mut buf);
        let v = phi(&buf);
        if !v.is_finite() {
            return Err(Error::NonFinite { node, value: v });
        }
        values[node] = v;
    }
    Ok(GridField::raw(grid.tag(), values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r2(c: &[f64]) -> f64 {
        c.iter().map(|x| x * x).sum()
    }

    #[test]
    fn rectangle_counts() {
        let g = build_grid(&DomainSpec::cube(1, -1.0, 1.0, 0.5)).unwrap();
        assert_eq!(g.node_count(), 25);
        assert_eq!(g.interior().len(), 9);
        assert_eq!(g.boundary().len(), 16);
    }

    #[test]
    fn radial_nodes() {
        let g = build_grid(&DomainSpec::radial(1, 1.0, 5)).unwrap();
        let radii: Vec<f64> = (0..5).map(|i| g.radius_of(i)).collect();
        assert_eq!(radii, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.class(4), NodeClass::Boundary);
        assert!((0..4).all(|i| g.class(i) == NodeClass::Interior));
    }

    #[test]
    fn polydisc_classification_is_product() {
        let g2 = build_grid(&DomainSpec::cube(2, -1.0, 1.0, 0.25)).unwrap();
        let g1 = build_grid(&DomainSpec::cube(1, -1.0, 1.0, 0.25)).unwrap();
        let per = 9 * 9;
        for node in 0..g2.node_count() {
            let (a, b) = (node / per, node % per);
            let both_interior =
                g1.class(a) == NodeClass::Interior && g1.class(b) == NodeClass::Interior;
            let expect = if both_interior {
                NodeClass::Interior
            } else {
                NodeClass::Boundary
            };
            assert_eq!(g2.class(node), expect);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(build_grid(&DomainSpec::cube(1, -1.0, 1.0, 0.3)).is_err());
        assert!(build_grid(&DomainSpec::radial(1, 1.0, 2)).is_err());
        assert!(build_grid(&DomainSpec::radial(3, 1.0, 9)).is_err());
        assert!(build_grid(&DomainSpec::radial(1, -1.0, 9)).is_err());
    }

    #[test]
    fn radial_integrals() {
        let g = build_grid(&DomainSpec::radial(1, 1.0, 129)).unwrap();
        let one = GridField::constant(&g, 1.0);
        assert!((integrate(&g, &one).unwrap() - PI).abs() < 1e-10);
        let g4 = build_grid(&DomainSpec::radial(2, 1.0, 33)).unwrap();
        let one = GridField::constant(&g4, 1.0);
        assert!((integrate(&g4, &one).unwrap() - PI * PI / 2.0).abs() < 1e-12);
        // |z|² is second order: error halves twice per refinement
        let err = |n| {
            let g = build_grid(&DomainSpec::radial(1, 1.0, n)).unwrap();
            let f = GridField::from_fn(&g, r2).unwrap();
            (integrate(&g, &f).unwrap() - PI / 2.0).abs()
        };
        let (e1, e2, e3) = (err(33), err(65), err(129));
        assert!(e1 / e2 > 3.5 && e2 / e3 > 3.5, "{e1} {e2} {e3}");
        assert!(err(1025) < 1e-6);
    }

    #[test]
    fn box_integrals() {
        let err = |h| {
            let g = build_grid(&DomainSpec::cube(1, -1.0, 1.0, h)).unwrap();
            let one = GridField::constant(&g, 1.0);
            assert!((integrate(&g, &one).unwrap() - 4.0).abs() < 1e-12);
            // affine per axis: exact
            let aff = GridField::from_fn(&g, |c| 1.0 + 2.0 * c[0] - c[1] + c[0] * c[1]).unwrap();
            assert!((integrate(&g, &aff).unwrap() - 4.0).abs() < 1e-12);
            let f = GridField::from_fn(&g, |c| (c[0] + 0.3 * c[1]).exp()).unwrap();
            let exact = (1f64.exp() - (-1f64).exp()) * (0.3f64.exp() - (-0.3f64).exp()) / 0.3;
            (integrate(&g, &f).unwrap() - exact).abs()
        };
        let (e1, e2) = (err(0.25), err(0.125));
        assert!(e1 / e2 > 3.5);
    }

    #[test]
    fn distances() {
        let g = build_grid(&DomainSpec::cube(1, -1.0, 1.0, 0.5)).unwrap();
        let d = distance_to_boundary(&g);
        assert_eq!(d.get(12), 1.0); // center
        let node = (0..g.node_count())
            .find(|&i| g.coords(i) == vec![0.5, 0.0])
            .unwrap();
        assert_eq!(d.get(node), 0.5);
        let r = build_grid(&DomainSpec::radial(1, 1.0, 5)).unwrap();
        assert_eq!(distance_to_boundary(&r).get(1), 0.75);
    }

    #[test]
    fn lifting() {
        let g = build_grid(&DomainSpec::radial(1, 1.0, 9)).unwrap();
        let f = lift_boundary_data(&g, r2).unwrap();
        assert_eq!(f.get(8), 1.0);
        assert!(f.values()[..8].iter().all(|&v| v == 0.0));
        let b = build_grid(&DomainSpec::cube(1, -1.0, 1.0, 0.5)).unwrap();
        let f = lift_boundary_data(&b, |c| c[0]).unwrap();
        for &node in b.boundary() {
            assert_eq!(f.get(node), b.coords(node)[0]);
        }
        assert!(lift_boundary_data(&b, |_| f64::NAN).is_err());
        assert!(lift_boundary_data(&b, |_| 0.0)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn mismatched_grids_rejected() {
        let a = build_grid(&DomainSpec::radial(1, 1.0, 9)).unwrap();
        let b = build_grid(&DomainSpec::radial(1, 1.0, 17)).unwrap();
        let f = GridField::zeros(&b);
        assert!(integrate(&a, &f).is_err());
        assert!(GridField::new(&a, vec![f64::INFINITY; 9]).is_err());
        // equal specs are interchangeable
        let a2 = build_grid(&DomainSpec::radial(1, 1.0, 9)).unwrap();
        assert!(integrate(&a, &GridField::zeros(&a2)).is_ok());
    }
}
