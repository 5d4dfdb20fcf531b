//! Energy functionals on psh functions with a common boundary trace.
//!
//! All functionals use the measure `det(u_{αβ̄}) dV`:
//!
//! * `I_v(u) = −∫(u−v)(det u − det v)`
//! * `J_v(u) = −∫₀¹∫ (u−v)(det u_t − det v) dt` along `u_t = (1−t)v + tu`
//! * `F⁰_v(u) = J_v(u) − ∫u det v`
//! * `F(u) = F⁰_v(u) + ∫G(z,u)`, `G(z,s) = ∫₀ˢ e^{−f(z,σ)} dσ`
//! * `Y = ∫ u̇² det u`
//!
//! The Hessian of the linear path is `(1−t)H(v) + tH(u)` because the stencils
//! are linear, so J needs no extra stencil evaluations.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::Serialize;

use crate::complex_calculus::{complex_hessian, HermitianField};
use crate::error::{Error, Result};
use crate::grid::{weighted_sum, Grid, GridField};
use crate::problem::Source;

pub const DEFAULT_SIMPSON_NODES: usize = 9;
/// Boundary-trace agreement required between u and v, relative to field scale.
pub const DEFAULT_TOL_BC: f64 = 1e-10;
/// Most negative Hessian eigenvalue still accepted as psh.
pub const DEFAULT_TOL_PSH: f64 = 1e-10;

/// Largest absolute value over the given fields.
pub fn field_scale(fields: &[&GridField]) -> f64 {
    fields
        .iter()
        .flat_map(|f| f.values().iter())
        .fold(0.0, |m: f64, v| m.max(v.abs()))
}

/// Declared quadrature tolerance: `c·vol(Ω)·scale²` with c = 1e−8 on radial
/// grids and 1e−4 on box grids.
pub fn tol_q(grid: &Grid, scale: f64) -> f64 {
    let c = if grid.is_radial() { 1e-8 } else { 1e-4 };
    c * grid.volume() * scale * scale
}

/// Lyapunov tolerance, `10·tol_q`.
pub fn tol_f(grid: &Grid, scale: f64) -> f64 {
    10.0 * tol_q(grid, scale)
}

/// `G(z, s)` for `f = a·u + g` (`g` the value at z, including any `b·t`).
pub fn nonlinear_g(a: f64, g: f64, s: f64) -> Result<f64> {
    if a > 0.0 || !a.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "G needs f = a·u + g(z) with a ≤ 0, got a = {a}"
        )));
    }
    let e = (-g).exp();
    Ok(if a == 0.0 {
        e * s
    } else {
        e * (-(-a * s).exp_m1()) / a
    })
}

fn simpson_weights(m: usize) -> Result<Vec<f64>> {
    if m < 3 || m.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "Simpson node count {m} must be odd and ≥ 3"
        )));
    }
    let h = 1.0 / (m - 1) as f64;
    Ok((0..m)
        .map(|k| {
            let c = if k == 0 || k == m - 1 {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect())
}

/// Rejects non-psh interior Hessians.
pub(crate) fn check_psh(grid: &Grid, h: &HermitianField, tol_psh: f64) -> Result<()> {
    for &node in grid.interior() {
        let m = h.at(node);
        let min_eig = m.min_eig();
        if min_eig < -tol_psh {
            return Err(Error::NotPositive {
                node,
                min_eig,
                det: m.det(),
            });
        }
    }
    Ok(())
}

fn check_trace(grid: &Grid, u: &GridField, v: &GridField) -> Result<()> {
    let scale = field_scale(&[u, v]).max(1.0);
    let tol = DEFAULT_TOL_BC * scale;
    let defect = grid
        .boundary()
        .iter()
        .map(|&b| (u.get(b) - v.get(b)).abs())
        .fold(0.0, f64::max);
    if defect > tol {
        return Err(Error::TraceMismatch { defect, tol });
    }
    Ok(())
}

fn checked_hessian(grid: &Grid, u: &GridField) -> Result<HermitianField> {
    let h = complex_hessian(grid, u)?;
    check_psh(grid, &h, DEFAULT_TOL_PSH)?;
    Ok(h)
}

/// Functional values at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Energies {
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "F0")]
    pub f0: f64,
    #[serde(rename = "F")]
    pub f: Option<f64>,
}

/// A frozen base point v with its Hessian, for repeated evaluation.
#[derive(Debug, Clone)]
pub struct BasePoint {
    v: GridField,
    hv: HermitianField,
    det_v: Vec<f64>,
}

impl BasePoint {
    pub fn new(grid: &Grid, v: &GridField) -> Result<Self> {
        grid.check(v)?;
        let hv = checked_hessian(grid, v)?;
        let det_v = hv.matrices().iter().map(|m| m.det()).collect();
        Ok(BasePoint {
            v: v.clone(),
            hv,
            det_v,
        })
    }

    pub fn field(&self) -> &GridField {
        &self.v
    }

    /// Hex digest of the base point values.
    pub fn tag(&self) -> String {
        let mut hasher = DefaultHasher::new();
        for v in self.v.values() {
            v.to_bits().hash(&mut hasher);
        }
        format!("{:016x}", hasher.finish())
    }

    /// `−∫ w (det H_t − det v)` along the segment from `(a, ha)` to `(b, hb)`,
    /// integrated over t by Simpson with `m` nodes; `w = b − a`.
    fn segment(
        &self,
        grid: &Grid,
        a: &GridField,
        ha: &HermitianField,
        b: &GridField,
        hb: &HermitianField,
        m: usize,
    ) -> Result<f64> {
        let weights = simpson_weights(m)?;
        let w: Vec<f64> = b.values().iter().zip(a.values()).map(|(x, y)| x - y).collect();
        let mut total = 0.0;
        let mut integrand = vec![0.0; w.len()];
        for (k, wk) in weights.iter().enumerate() {
            let t = k as f64 / (m - 1) as f64;
            for (node, out) in integrand.iter_mut().enumerate() {
                let det = ha.at(node).lerp(hb.at(node), t).det();
                *out = w[node] * (det - self.det_v[node]);
            }
            total += wk * -weighted_sum(grid, &integrand);
        }
        Ok(total)
    }

    /// I, J and F⁰ at `u` (with Hessian `hu`), plus F when a source is given.
    pub fn evaluate(
        &self,
        grid: &Grid,
        u: &GridField,
        hu: &HermitianField,
        source: Option<(&Source, f64)>,
        m: usize,
    ) -> Result<Energies> {
        grid.check(u)?;
        check_trace(grid, u, &self.v)?;
        check_psh(grid, hu, DEFAULT_TOL_PSH)?;
        let w: Vec<f64> = u.values().iter().zip(self.v.values()).map(|(x, y)| x - y).collect();
        let ddet: Vec<f64> = (0..w.len())
            .map(|node| w[node] * (hu.at(node).det() - self.det_v[node]))
            .collect();
        let i = -weighted_sum(grid, &ddet);
        let j = self.segment(grid, &self.v, &self.hv, u, hu, m)?;
        let u_det_v: Vec<f64> = u.values().iter().zip(&self.det_v).map(|(x, d)| x * d).collect();
        let f0 = j - weighted_sum(grid, &u_det_v);
        let f = match source {
            None => None,
            Some((src, t)) => Some(f0 + potential(grid, u, src, t)?),
        };
        Ok(Energies { i, j, f0, f })
    }

    /// J along the polygonal path `v → waypoints… → u`, base point v.
    pub fn path_j(&self, grid: &Grid, waypoints: &[&GridField], m: usize) -> Result<f64> {
        let mut prev = self.v.clone();
        let mut hprev = self.hv.clone();
        let mut total = 0.0;
        for p in waypoints {
            grid.check(p)?;
            check_trace(grid, p, &self.v)?;
            let hp = checked_hessian(grid, p)?;
            total += self.segment(grid, &prev, &hprev, p, &hp, m)?;
            prev = (*p).clone();
            hprev = hp;
        }
        Ok(total)
    }
}

/// `∫ G(z, u) dV` with `g + b·t` as the z-part of f.
pub(crate) fn potential(grid: &Grid, u: &GridField, source: &Source, t: f64) -> Result<f64> {
    let vals = (0..u.len())
        .map(|node| nonlinear_g(source.a, source.g.get(node) + source.b * t, u.get(node)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(weighted_sum(grid, &vals))
}

fn energies(grid: &Grid, u: &GridField, v: &GridField, m: usize) -> Result<Energies> {
    let base = BasePoint::new(grid, v)?;
    let hu = complex_hessian(grid, u)?;
    base.evaluate(grid, u, &hu, None, m)
}

/// `I_v(u) = −∫(u−v)(det u − det v) dV`.
pub fn energy_i(grid: &Grid, u: &GridField, v: &GridField) -> Result<f64> {
    Ok(energies(grid, u, v, 3)?.i)
}

/// Variant without the det v subtraction: `−∫(u−v) det u dV`.
pub fn energy_i_unsubtracted(grid: &Grid, u: &GridField, v: &GridField) -> Result<f64> {
    grid.check(u)?;
    grid.check(v)?;
    check_trace(grid, u, v)?;
    let hu = checked_hessian(grid, u)?;
    checked_hessian(grid, v)?;
    let vals: Vec<f64> = (0..u.len())
        .map(|n| (u.get(n) - v.get(n)) * hu.at(n).det())
        .collect();
    Ok(-weighted_sum(grid, &vals))
}

pub fn energy_j(grid: &Grid, u: &GridField, v: &GridField, m: usize) -> Result<f64> {
    Ok(energies(grid, u, v, m)?.j)
}

/// J with base v along the polygonal path `v → path[0] → … → path[last]`.
pub fn energy_j_path(grid: &Grid, v: &GridField, path: &[&GridField], m: usize) -> Result<f64> {
    BasePoint::new(grid, v)?.path_j(grid, path, m)
}

pub fn energy_f0(grid: &Grid, u: &GridField, v: &GridField, m: usize) -> Result<f64> {
    Ok(energies(grid, u, v, m)?.f0)
}

/// `F(u) = F⁰_v(u) + ∫G(z,u) dV`; requires a time-independent source.
pub fn energy_f(grid: &Grid, u: &GridField, v: &GridField, source: &Source, m: usize) -> Result<f64> {
    grid.check(&source.g)?;
    if source.b != 0.0 {
        return Err(Error::InvalidArgument(
            "F is defined for time-independent sources (b = 0)".into(),
        ));
    }
    let base = BasePoint::new(grid, v)?;
    let hu = complex_hessian(grid, u)?;
    let e = base.evaluate(grid, u, &hu, Some((source, 0.0)), m)?;
    Ok(e.f.expect("source given"))
}

/// `Y = ∫ u̇² det(u_{αβ̄}) dV`.
pub fn dissipation_y(grid: &Grid, u: &GridField, udot: &GridField) -> Result<f64> {
    grid.check(u)?;
    grid.check(udot)?;
    let hu = complex_hessian(grid, u)?;
    dissipation_from(grid, &hu, udot)
}

pub(crate) fn dissipation_from(grid: &Grid, hu: &HermitianField, udot: &GridField) -> Result<f64> {
    for &node in grid.interior() {
        let m = hu.at(node);
        if !m.is_positive() {
            return Err(Error::NotPositive {
                node,
                min_eig: m.min_eig(),
                det: m.det(),
            });
        }
    }
    let vals: Vec<f64> = (0..udot.len())
        .map(|n| udot.get(n) * udot.get(n) * hu.at(n).det())
        .collect();
    Ok(weighted_sum(grid, &vals))
}

/// All functionals at `u` with base `v`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalReport {
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "F0")]
    pub f0: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "Y")]
    pub y: Option<f64>,
    pub base_point: String,
    pub simpson_nodes: usize,
    pub tol_q: f64,
}

pub fn functional_report(
    grid: &Grid,
    u: &GridField,
    v: &GridField,
    source: &Source,
    udot: Option<&GridField>,
    m: usize,
) -> Result<FunctionalReport> {
    let base = BasePoint::new(grid, v)?;
    let hu = complex_hessian(grid, u)?;
    let e = base.evaluate(grid, u, &hu, Some((source, 0.0)), m)?;
    let y = udot.map(|d| dissipation_from(grid, &hu, d)).transpose()?;
    Ok(FunctionalReport {
        i: e.i,
        j: e.j,
        f0: e.f0,
        f: e.f.expect("source given"),
        y,
        base_point: base.tag(),
        simpson_nodes: m,
        tol_q: tol_q(grid, field_scale(&[u, v])),
    })
}
