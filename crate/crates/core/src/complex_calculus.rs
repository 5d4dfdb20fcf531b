//! Discrete complex Hessians and the operators built from them.
//!
//! On box grids the Hessian is assembled from central second differences:
//!
//! ```text
//! u_{αβ̄} = ¼[(S_{xαxβ} + S_{yαyβ}) + i(S_{xαyβ} − S_{yαxβ})]
//! ```
//!
//! with `S_pq` the 3-point (p = q) or 4-point cross (p ≠ q) stencil. Boundary
//! nodes get a Hessian extrapolated linearly along the inward diagonal.
//!
//! In radial mode a profile `U(r)` is differenced in flux form. With
//! `r± = r_i ± Δr/2` (clamped to `[0, R]`) and `P± = r·U'` at the half nodes,
//!
//! ```text
//! λ_r = (P₊ − P₋) / (2(r₊² − r₋²)),    λ_t = (P₊ + P₋) / (2(r₊² + r₋²))
//! ```
//!
//! approximate the eigenvalues `φ' + sφ''` and `φ'` (multiplicity n−1) of the
//! Hessian of `U = φ(|z|²)`. The radial Hessian is stored as `diag(λ_r, λ_t)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridField, GridTag, Layout, NodeClass};
use crate::linalg::{conjugate_gradient, gmres, Csr, Tridiagonal};

/// Relative tolerance of every inner linear solve.
pub const LINEAR_TOL: f64 = 1e-10;

/// An n×n Hermitian matrix, n ≤ 2: `[[a, b], [b̄, d]]` (only `a` for n = 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hermitian {
    pub dim: usize,
    pub a: f64,
    pub d: f64,
    pub b: Complex64,
}

impl Hermitian {
    pub fn scalar(a: f64) -> Self {
        Hermitian {
            dim: 1,
            a,
            d: 0.0,
            b: Complex64::new(0.0, 0.0),
        }
    }

    pub fn two(a: f64, b: Complex64, d: f64) -> Self {
        Hermitian { dim: 2, a, d, b }
    }

    pub fn identity(dim: usize) -> Self {
        match dim {
            1 => Hermitian::scalar(1.0),
            _ => Hermitian::two(1.0, Complex64::new(0.0, 0.0), 1.0),
        }
    }

    /// Entry (α, β), zero-based.
    pub fn entry(&self, alpha: usize, beta: usize) -> Complex64 {
        match (alpha, beta) {
            (0, 0) => Complex64::new(self.a, 0.0),
            (1, 1) => Complex64::new(self.d, 0.0),
            (0, 1) => self.b,
            (1, 0) => self.b.conj(),
            _ => panic!("index out of range"),
        }
    }

    pub fn det(&self) -> f64 {
        match self.dim {
            1 => self.a,
            _ => self.a * self.d - self.b.norm_sqr(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self.dim {
            1 => self.a,
            _ => self.a + self.d,
        }
    }

    /// Eigenvalues in ascending order (the second equals the first for n = 1).
    pub fn eigenvalues(&self) -> (f64, f64) {
        match self.dim {
            1 => (self.a, self.a),
            _ => {
                let mean = 0.5 * (self.a + self.d);
                let rad = (0.5 * (self.a - self.d)).hypot(self.b.norm());
                (mean - rad, mean + rad)
            }
        }
    }

    pub fn min_eig(&self) -> f64 {
        self.eigenvalues().0
    }

    pub fn max_eig(&self) -> f64 {
        self.eigenvalues().1
    }

    pub fn is_positive(&self) -> bool {
        self.min_eig() > 0.0 && self.det() > 0.0
    }

    pub fn inverse(&self) -> Option<Hermitian> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(match self.dim {
            1 => Hermitian::scalar(1.0 / self.a),
            _ => Hermitian::two(self.d / det, -self.b / det, self.a / det),
        })
    }

    /// tr(H⁻¹W); `None` unless H is positive definite.
    pub fn trace_inv_apply(&self, w: &Hermitian) -> Option<f64> {
        if !self.is_positive() {
            return None;
        }
        let det = self.det();
        Some(match self.dim {
            1 => w.a / self.a,
            _ => (self.d * w.a + self.a * w.d - 2.0 * (self.b * w.b.conj()).re) / det,
        })
    }

    /// tr(H⁻¹) = Σ_α u^{αᾱ}.
    pub fn trace_inv(&self) -> Option<f64> {
        self.trace_inv_apply(&Hermitian::identity(self.dim))
    }

    pub fn lerp(&self, other: &Hermitian, t: f64) -> Hermitian {
        Hermitian {
            dim: self.dim,
            a: (1.0 - t) * self.a + t * other.a,
            d: (1.0 - t) * self.d + t * other.d,
            b: self.b * (1.0 - t) + other.b * t,
        }
    }

    fn scaled_sum(&self, s: f64, other: &Hermitian, t: f64) -> Hermitian {
        Hermitian {
            dim: self.dim,
            a: s * self.a + t * other.a,
            d: s * self.d + t * other.d,
            b: self.b * s + other.b * t,
        }
    }

    fn is_finite(&self) -> bool {
        self.a.is_finite() && self.d.is_finite() && self.b.re.is_finite() && self.b.im.is_finite()
    }
}

/// A Hermitian matrix per node (interior and boundary).
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianField {
    tag: GridTag,
    dim: usize,
    mats: Vec<Hermitian>,
}

impl HermitianField {
    pub fn from_matrices(grid: &Grid, mats: Vec<Hermitian>) -> Result<Self> {
        if mats.len() != grid.node_count() || mats.iter().any(|m| m.dim != grid.dim()) {
            return Err(Error::GridMismatch);
        }
        if let Some(node) = mats.iter().position(|m| !m.is_finite()) {
            return Err(Error::NonFinite {
                node,
                value: f64::NAN,
            });
        }
        Ok(HermitianField {
            tag: grid.tag(),
            dim: grid.dim(),
            mats,
        })
    }

    pub fn tag(&self) -> GridTag {
        self.tag
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrices(&self) -> &[Hermitian] {
        &self.mats
    }

    pub fn at(&self, node: usize) -> &Hermitian {
        &self.mats[node]
    }

    /// `(1−t)·self + t·other`.
    pub fn lerp(&self, other: &HermitianField, t: f64) -> Result<HermitianField> {
        if self.tag != other.tag {
            return Err(Error::GridMismatch);
        }
        Ok(HermitianField {
            tag: self.tag,
            dim: self.dim,
            mats: self
                .mats
                .iter()
                .zip(&other.mats)
                .map(|(a, b)| a.lerp(b, t))
                .collect(),
        })
    }

    fn per_node(&self, f: impl Fn(&Hermitian) -> f64) -> GridField {
        GridField::raw(self.tag, self.mats.iter().map(f).collect())
    }
}

/// Node offsets and mesh data of a box grid, for stencil evaluation.
struct BoxGeom<'a> {
    h: &'a [f64],
    counts: &'a [usize],
    strides: &'a [usize],
}

impl<'a> BoxGeom<'a> {
    fn of(grid: &'a Grid) -> Option<Self> {
        match &grid.layout {
            Layout::Box {
                h, counts, strides, ..
            } => Some(BoxGeom {
                h,
                counts,
                strides,
            }),
            Layout::Radial { .. } => None,
        }
    }

    fn second(&self, u: &[f64], node: usize, p: usize, q: usize) -> f64 {
        let sp = self.strides[p];
        if p == q {
            (u[node + sp] - 2.0 * u[node] + u[node - sp]) / (self.h[p] * self.h[p])
        } else {
            let sq = self.strides[q];
            (u[node + sp + sq] - u[node + sp - sq] - u[node - sp + sq] + u[node - sp - sq])
                / (4.0 * self.h[p] * self.h[q])
        }
    }

    fn hessian_at(&self, dim: usize, u: &[f64], node: usize) -> Hermitian {
        let s = |p, q| self.second(u, node, p, q);
        let diag = |alpha: usize| 0.25 * (s(2 * alpha, 2 * alpha) + s(2 * alpha + 1, 2 * alpha + 1));
        match dim {
            1 => Hermitian::scalar(diag(0)),
            _ => {
                let re = 0.25 * (s(0, 2) + s(1, 3));
                let im = 0.25 * (s(0, 3) - s(1, 2));
                Hermitian::two(diag(0), Complex64::new(re, im), diag(1))
            }
        }
    }
}

/// Radial half-node geometry at node i: (r₋, r₊).
pub(crate) fn radial_faces(grid: &Grid, i: usize) -> (f64, f64) {
    let Layout::Radial { radius, dr } = grid.layout else {
        unreachable!("radial geometry on a box grid")
    };
    let last = grid.node_count() - 1;
    let lo = if i == 0 { 0.0 } else { (i as f64 - 0.5) * dr };
    let hi = if i == last { radius } else { (i as f64 + 0.5) * dr };
    (lo, hi)
}

/// Radial fluxes (P₋, P₊) at node i.
fn radial_fluxes(grid: &Grid, u: &[f64], i: usize) -> (f64, f64) {
    let Layout::Radial { radius, dr } = grid.layout else {
        unreachable!("radial fluxes on a box grid")
    };
    let last = grid.node_count() - 1;
    let (lo, hi) = radial_faces(grid, i);
    let p_minus = if i == 0 {
        0.0
    } else {
        lo * (u[i] - u[i - 1]) / dr
    };
    let p_plus = if i == last {
        radius * (3.0 * u[last] - 4.0 * u[last - 1] + u[last - 2]) / (2.0 * dr)
    } else {
        hi * (u[i + 1] - u[i]) / dr
    };
    (p_minus, p_plus)
}

fn radial_matrix(dim: usize, lo: f64, hi: f64, p_minus: f64, p_plus: f64) -> Hermitian {
    let lam_r = (p_plus - p_minus) / (2.0 * (hi * hi - lo * lo));
    match dim {
        1 => Hermitian::scalar(lam_r),
        _ => {
            let lam_t = (p_plus + p_minus) / (2.0 * (hi * hi + lo * lo));
            Hermitian::two(lam_r, Complex64::new(0.0, 0.0), lam_t)
        }
    }
}

/// Discrete complex Hessian of `u` at every interior and boundary node.
pub fn complex_hessian(grid: &Grid, u: &GridField) -> Result<HermitianField> {
    grid.check(u)?;
    let vals = u.values();
    let dim = grid.dim();
    let mats = match BoxGeom::of(grid) {
        None => (0..grid.node_count())
            .map(|i| {
                let (lo, hi) = radial_faces(grid, i);
                let (pm, pp) = radial_fluxes(grid, vals, i);
                radial_matrix(dim, lo, hi, pm, pp)
            })
            .collect(),
        Some(geom) => {
            let mut mats = vec![Hermitian::identity(dim); grid.node_count()];
            for &node in grid.interior() {
                mats[node] = geom.hessian_at(dim, vals, node);
            }
            for &node in grid.boundary() {
                mats[node] = boundary_extrapolation(grid, &geom, &mats, node)?;
            }
            mats
        }
    };
    HermitianField::from_matrices(grid, mats)
}

fn boundary_extrapolation(
    grid: &Grid,
    geom: &BoxGeom,
    interior_mats: &[Hermitian],
    node: usize,
) -> Result<Hermitian> {
    let idx = grid.multi_index(node);
    let mut step: isize = 0;
    let mut fits_two = true;
    for (p, &i) in idx.iter().enumerate() {
        let n = geom.counts[p];
        let dir: isize = if i == 0 {
            1
        } else if i == n - 1 {
            -1
        } else {
            0
        };
        if dir != 0 && n < 5 {
            fits_two = false;
        }
        step += dir * geom.strides[p] as isize;
    }
    let one = (node as isize + step) as usize;
    if grid.class(one) != NodeClass::Interior {
        return Err(Error::StencilClosure { node });
    }
    if fits_two {
        let two = (node as isize + 2 * step) as usize;
        if grid.class(two) == NodeClass::Interior {
            return Ok(interior_mats[one].scaled_sum(2.0, &interior_mats[two], -1.0));
        }
    }
    Ok(interior_mats[one])
}

pub fn hermitian_det(h: &HermitianField) -> GridField {
    h.per_node(Hermitian::det)
}

pub fn min_eigenvalue(h: &HermitianField) -> GridField {
    h.per_node(Hermitian::min_eig)
}

/// tr(H⁻¹W) per node.
pub fn hermitian_inverse_apply(h: &HermitianField, w: &HermitianField) -> Result<GridField> {
    if h.tag != w.tag {
        return Err(Error::GridMismatch);
    }
    let mut out = Vec::with_capacity(h.mats.len());
    for (node, (hm, wm)) in h.mats.iter().zip(&w.mats).enumerate() {
        match hm.trace_inv_apply(wm) {
            Some(v) => out.push(v),
            None => {
                return Err(Error::NotPositive {
                    node,
                    min_eig: hm.min_eig(),
                    det: hm.det(),
                })
            }
        }
    }
    Ok(GridField::raw(h.tag, out))
}

/// First interior node where `h` fails to be positive definite.
pub(crate) fn first_non_positive(grid: &Grid, h: &HermitianField, det_floor: f64) -> Option<Error> {
    grid.interior().iter().find_map(|&node| {
        let m = h.at(node);
        let (min_eig, det) = (m.min_eig(), m.det());
        (min_eig <= 0.0 || det < det_floor || !det.is_finite())
            .then_some(Error::NotPositive { node, min_eig, det })
    })
}

/// The linear operator `w ↦ tr(H⁻¹ K(w)) + shift·w` on interior nodes, where
/// K(w) is the discrete complex Hessian of w. Boundary values enter as data.
#[derive(Debug, Clone)]
pub struct Linearization {
    tag: GridTag,
    kind: LinKind,
    /// Position of each node among the interior unknowns.
    slot: Vec<usize>,
    interior: Vec<usize>,
}

#[derive(Debug, Clone)]
enum LinKind {
    /// Rows over global node indices 0..N−1 (interior rows only).
    Radial(Tridiagonal),
    /// Rows over interior unknowns; columns are global node indices.
    Box(Csr),
}

const NO_SLOT: usize = usize::MAX;

/// Assembles the operator linearizing `log det` at the Hessian `h`.
pub fn linearization(grid: &Grid, h: &HermitianField) -> Result<Linearization> {
    if h.tag != grid.tag() {
        return Err(Error::GridMismatch);
    }
    let interior = grid.interior().to_vec();
    let mut slot = vec![NO_SLOT; grid.node_count()];
    for (k, &node) in interior.iter().enumerate() {
        slot[node] = k;
    }
    let dim = grid.dim();
    let kind = match BoxGeom::of(grid) {
        None => {
            let Layout::Radial { dr, .. } = grid.layout else {
                unreachable!()
            };
            let n = interior.len();
            let mut t = Tridiagonal {
                lower: vec![0.0; n],
                diag: vec![0.0; n],
                upper: vec![0.0; n],
            };
            for &i in &interior {
                let m = h.at(i);
                if !m.is_positive() {
                    return Err(Error::NotPositive {
                        node: i,
                        min_eig: m.min_eig(),
                        det: m.det(),
                    });
                }
                let (lo, hi) = radial_faces(grid, i);
                let c_r = 1.0 / (2.0 * (hi * hi - lo * lo) * m.a);
                let c_t = if dim == 2 {
                    1.0 / (2.0 * (hi * hi + lo * lo) * m.d)
                } else {
                    0.0
                };
                let up = hi / dr * (c_r + c_t);
                let low = lo / dr * (c_r - c_t);
                t.upper[i] = up;
                t.lower[i] = low;
                t.diag[i] = -up - low;
            }
            LinKind::Radial(t)
        }
        Some(geom) => {
            let axes = 2 * dim;
            let width = 1 + 2 * axes + 2 * axes * (axes - 1);
            let mut csr = Csr::with_capacity(interior.len(), interior.len() * width);
            let mut m = vec![vec![0.0; axes]; axes];
            for &node in &interior {
                let hm = h.at(node);
                let g = match hm.inverse() {
                    Some(g) if hm.is_positive() => g,
                    _ => {
                        return Err(Error::NotPositive {
                            node,
                            min_eig: hm.min_eig(),
                            det: hm.det(),
                        })
                    }
                };
                real_coefficients(&g, &mut m);
                let mut center = 0.0;
                for p in 0..axes {
                    let hp2 = geom.h[p] * geom.h[p];
                    center -= 2.0 * m[p][p] / hp2;
                    let sp = geom.strides[p];
                    csr.push(node + sp, m[p][p] / hp2);
                    csr.push(node - sp, m[p][p] / hp2);
                    for q in p + 1..axes {
                        if m[p][q] == 0.0 {
                            continue;
                        }
                        let c = 2.0 * m[p][q] / (4.0 * geom.h[p] * geom.h[q]);
                        let sq = geom.strides[q];
                        csr.push(node + sp + sq, c);
                        csr.push(node - sp - sq, c);
                        csr.push(node + sp - sq, -c);
                        csr.push(node - sp + sq, -c);
                    }
                }
                csr.push(node, center);
                csr.finish_row();
            }
            LinKind::Box(csr)
        }
    };
    Ok(Linearization {
        tag: grid.tag(),
        kind,
        slot,
        interior,
    })
}

/// Real 2n×2n coefficients M with tr(G·K(w)) = Σ_pq M_pq S_pq(w).
fn real_coefficients(g: &Hermitian, m: &mut [Vec<f64>]) {
    for row in m.iter_mut() {
        row.iter_mut().for_each(|v| *v = 0.0);
    }
    m[0][0] = 0.25 * g.a;
    m[1][1] = 0.25 * g.a;
    if g.dim == 2 {
        m[2][2] = 0.25 * g.d;
        m[3][3] = 0.25 * g.d;
        let (re, im) = (0.25 * g.b.re, 0.25 * g.b.im);
        // x1x2, y1y2
        m[0][2] = re;
        m[2][0] = re;
        m[1][3] = re;
        m[3][1] = re;
        // x1y2 and y2x1 carry B₁₂; x2y1 and y1x2 carry B₂₁ = −B₁₂
        m[0][3] = im;
        m[3][0] = im;
        m[2][1] = -im;
        m[1][2] = -im;
    }
}

impl Linearization {
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Applies the operator to a full field (boundary values included) and
    /// returns one value per interior node.
    pub fn apply_full(&self, w: &[f64]) -> Vec<f64> {
        match &self.kind {
            LinKind::Radial(t) => self
                .interior
                .iter()
                .map(|&i| {
                    let mut s = t.diag[i] * w[i] + t.upper[i] * w[i + 1];
                    if i > 0 {
                        s += t.lower[i] * w[i - 1];
                    }
                    s
                })
                .collect(),
            LinKind::Box(csr) => (0..csr.n)
                .map(|k| {
                    (csr.row_ptr[k]..csr.row_ptr[k + 1])
                        .map(|j| csr.vals[j] * w[csr.cols[j]])
                        .sum()
                })
                .collect(),
        }
    }

    /// Solves `(L + diag(shift)) x = rhs` for interior values with zero
    /// boundary data. `shift` and `rhs` are indexed by interior position.
    pub fn solve(&self, shift: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
        match &self.kind {
            LinKind::Radial(t) => {
                let n = self.interior.len();
                let mut sys = Tridiagonal {
                    lower: t.lower[..n].to_vec(),
                    diag: t.diag[..n].to_vec(),
                    upper: t.upper[..n].to_vec(),
                };
                sys.add_diagonal(shift);
                sys.solve(rhs)
            }
            LinKind::Box(csr) => {
                let mut a = self.interior_matrix(csr);
                a.add_diagonal(shift);
                gmres(&a, rhs, LINEAR_TOL, 80, 20_000)
            }
        }
    }

    fn interior_matrix(&self, csr: &Csr) -> Csr {
        let mut a = Csr::with_capacity(csr.n, csr.vals.len());
        for k in 0..csr.n {
            for j in csr.row_ptr[k]..csr.row_ptr[k + 1] {
                let s = self.slot[csr.cols[j]];
                if s != NO_SLOT {
                    a.push(s, csr.vals[j]);
                }
            }
            a.finish_row();
        }
        a
    }

    /// Scatters interior values into a full-length field (zeros elsewhere).
    pub(crate) fn scatter(&self, interior_values: &[f64], len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (k, &node) in self.interior.iter().enumerate() {
            out[node] = interior_values[k];
        }
        out
    }

    pub fn tag(&self) -> GridTag {
        self.tag
    }
}

/// Discrete harmonic function with boundary trace `phi` (boundary values of
/// `phi` are used; interior values are ignored).
pub fn harmonic_extension(grid: &Grid, phi: &GridField) -> Result<GridField> {
    grid.check(phi)?;
    let ident = HermitianField::from_matrices(
        grid,
        vec![Hermitian::identity(grid.dim()); grid.node_count()],
    )?;
    let lin = linearization(grid, &ident)?;
    let mut lifted = vec![0.0; grid.node_count()];
    for &node in grid.boundary() {
        lifted[node] = phi.get(node);
    }
    let rhs: Vec<f64> = lin.apply_full(&lifted).iter().map(|v| -v).collect();
    let interior = match &lin.kind {
        LinKind::Radial(_) => lin.solve(&vec![0.0; rhs.len()], &rhs)?,
        LinKind::Box(csr) => {
            let a = lin.interior_matrix(csr);
            let neg_rhs: Vec<f64> = rhs.iter().map(|v| -v).collect();
            conjugate_gradient(
                |x, y| {
                    a.matvec(x, y);
                    y.iter_mut().for_each(|v| *v = -*v);
                },
                &neg_rhs,
                1e-12,
                50_000,
            )?
        }
    };
    let mut values = lin.scatter(&interior, grid.node_count());
    for &node in grid.boundary() {
        values[node] = lifted[node];
    }
    GridField::new(grid, values)
}

/// `Lv = v̇ − u^{αβ̄}v_{αβ̄} − f_u·v` at interior nodes (zero on the boundary).
pub fn apply_l(
    grid: &Grid,
    u: &GridField,
    udot: &GridField,
    f_u: &GridField,
    v: &GridField,
    vdot: &GridField,
) -> Result<GridField> {
    for field in [u, udot, f_u, v, vdot] {
        grid.check(field)?;
    }
    let hu = complex_hessian(grid, u)?;
    let hv = complex_hessian(grid, v)?;
    let mut out = vec![0.0; grid.node_count()];
    for &node in grid.interior() {
        let m = hu.at(node);
        let contraction = m.trace_inv_apply(hv.at(node)).ok_or(Error::NotPositive {
            node,
            min_eig: m.min_eig(),
            det: m.det(),
        })?;
        out[node] = vdot.get(node) - contraction - f_u.get(node) * v.get(node);
    }
    GridField::new(grid, out)
}

/// Largest central-difference gradient norm over interior nodes.
pub fn sup_gradient(grid: &Grid, u: &GridField) -> Result<f64> {
    grid.check(u)?;
    let v = u.values();
    Ok(match BoxGeom::of(grid) {
        None => {
            let Layout::Radial { dr, .. } = grid.layout else {
                unreachable!()
            };
            grid.interior()
                .iter()
                .filter(|&&i| i > 0)
                .map(|&i| ((v[i + 1] - v[i - 1]) / (2.0 * dr)).abs())
                .fold(0.0, f64::max)
        }
        Some(geom) => grid
            .interior()
            .iter()
            .map(|&node| {
                (0..geom.h.len())
                    .map(|p| {
                        let s = geom.strides[p];
                        let d = (v[node + s] - v[node - s]) / (2.0 * geom.h[p]);
                        d * d
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max),
    })
}

/// Largest absolute real second difference over interior nodes.
pub fn sup_real_hessian(grid: &Grid, u: &GridField) -> Result<f64> {
    grid.check(u)?;
    let v = u.values();
    Ok(match BoxGeom::of(grid) {
        None => {
            let Layout::Radial { dr, .. } = grid.layout else {
                unreachable!()
            };
            grid.interior()
                .iter()
                .map(|&i| {
                    if i == 0 {
                        (2.0 * (v[1] - v[0]) / (dr * dr)).abs()
                    } else {
                        let second = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (dr * dr);
                        let first_over_r = (v[i + 1] - v[i - 1]) / (2.0 * dr * grid.radius_of(i));
                        second.abs().max(first_over_r.abs())
                    }
                })
                .fold(0.0, f64::max)
        }
        Some(geom) => {
            let axes = geom.h.len();
            grid.interior()
                .iter()
                .map(|&node| {
                    let mut best: f64 = 0.0;
                    for p in 0..axes {
                        for q in p..axes {
                            best = best.max(geom.second(v, node, p, q).abs());
                        }
                    }
                    best
                })
                .fold(0.0, f64::max)
        }
    })
}
