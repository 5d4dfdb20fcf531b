//! Independent references: closed-form functionals of radial quadratics,
//! Richardson-extrapolated quadrature, finite-difference variations,
//! radial-versus-full-grid comparisons and random psh fields.

use rand::Rng;
use serde::Serialize;

use crate::complex_calculus::{complex_hessian, hermitian_det};
use crate::error::{Error, Result};
use crate::grid::{build_grid, integrate, unit_ball_volume, DomainSpec, Grid, GridField, Shape};

/// Exact functional values of a catalogued pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedForm {
    pub det_u: f64,
    pub det_v: f64,
    pub i: f64,
    pub j: f64,
    pub f0: f64,
}

/// `v = a_v|z|² + c_v`, `u = a_u|z|² + c_u` on the ball `|z| ≤ R` in ℂⁿ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialQuadraticPair {
    pub dim: usize,
    pub radius: f64,
    pub v: (f64, f64),
    pub u: (f64, f64),
}

impl RadialQuadraticPair {
    pub fn exact(&self) -> Result<ClosedForm> {
        let n = self.dim as i32;
        let r2 = self.radius * self.radius;
        let ((av, cv), (au, cu)) = (self.v, self.u);
        if av <= 0.0 || au <= 0.0 {
            return Err(Error::InvalidArgument("quadratic coefficients must be > 0".into()));
        }
        if ((au * r2 + cu) - (av * r2 + cv)).abs() > 1e-14 * (1.0 + cu.abs() + cv.abs()) {
            return Err(Error::InvalidArgument("pair has different boundary traces".into()));
        }
        let vol = unit_ball_volume(self.dim);
        let nf = self.dim as f64;
        // ∫(|z|² − R²) dV and ∫|z|² dV over the ball
        let int_shift = -vol * self.radius.powi(2 * n + 2) / (nf + 1.0);
        let int_s = vol * self.radius.powi(2 * n + 2) * nf / (nf + 1.0);
        let int_1 = vol * self.radius.powi(2 * n);
        let delta = au - av;
        let (det_u, det_v) = (au.powi(n), av.powi(n));
        // u − v = Δ(|z|² − R²)
        let i = -delta * (det_u - det_v) * int_shift;
        // ∫₀¹ ((a_v + tΔ)ⁿ − a_vⁿ) dt
        let path = if delta == 0.0 {
            0.0
        } else {
            ((av + delta).powi(n + 1) - av.powi(n + 1)) / ((nf + 1.0) * delta) - det_v
        };
        let j = -delta * path * int_shift;
        let f0 = j - det_v * (au * int_s + cu * int_1);
        Ok(ClosedForm {
            det_u,
            det_v,
            i,
            j,
            f0,
        })
    }
}

/// Closed forms on the unit disc in ℂ¹ with `v = |z|²`:
///
/// * `canonical` : `u = 2|z|² − 1`
/// * `identical` : `u = v`
/// * `perturbed:<ε>` : `u = |z|² + ε(1 − |z|²)`
pub fn exact_functionals(tag: &str) -> Result<ClosedForm> {
    let u = match tag {
        "canonical" => (2.0, -1.0),
        "identical" => (1.0, 0.0),
        _ => match tag.strip_prefix("perturbed:").map(str::parse::<f64>) {
            Some(Ok(eps)) if eps.is_finite() && eps < 1.0 => (1.0 - eps, eps),
            _ => return Err(Error::UnknownTag(tag.to_string())),
        },
    };
    RadialQuadraticPair {
        dim: 1,
        radius: 1.0,
        v: (1.0, 0.0),
        u,
    }
    .exact()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Refined {
    pub value: f64,
    pub error_estimate: f64,
    /// Raw quadrature value per level.
    pub levels: Vec<f64>,
}

/// Integrates a radial integrand `f(|z|)` over the ball of radius R in ℂⁿ on
/// grids with `base·2^k + 1` nodes, `k < levels`, and Richardson-extrapolates
/// assuming second-order error.
pub fn refine_quadrature(
    dim: usize,
    radius: f64,
    integrand: impl Fn(f64) -> f64,
    levels: usize,
    base: usize,
) -> Result<Refined> {
    if levels < 2 || base < 2 {
        return Err(Error::InvalidArgument("need ≥ 2 levels and base ≥ 2".into()));
    }
    let mut raw = Vec::with_capacity(levels);
    for k in 0..levels {
        let g = build_grid(&DomainSpec::radial(dim, radius, base * (1 << k) + 1))?;
        let f = GridField::from_fn(&g, |x| integrand(x[0]))?;
        raw.push(integrate(&g, &f)?);
    }
    let scale = raw.iter().fold(0.0, |m: f64, v| m.max(v.abs())).max(1e-300);
    let floor = 1e-14 * scale;
    for k in 2..levels {
        let prev = (raw[k - 1] - raw[k - 2]).abs();
        let cur = (raw[k] - raw[k - 1]).abs();
        if cur > prev && cur > floor {
            return Err(Error::NoisyIntegrand { level: k });
        }
    }
    let rich: Vec<f64> = raw.windows(2).map(|w| (4.0 * w[1] - w[0]) / 3.0).collect();
    let value = *rich.last().expect("levels ≥ 2");
    let error_estimate = if rich.len() >= 2 {
        (rich[rich.len() - 1] - rich[rich.len() - 2]).abs()
    } else {
        (raw[1] - raw[0]).abs() / 3.0
    };
    Ok(Refined {
        value,
        error_estimate,
        levels: raw,
    })
}

/// Default ε ladder of [`fd_variation`].
pub const DEFAULT_LADDER: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdVariation {
    /// Richardson-extrapolated directional derivative.
    pub derivative: f64,
    /// Observed order of the central differences; `None` when their changes
    /// are at rounding level (exactly quadratic functionals).
    pub order: Option<f64>,
    /// Central difference per ladder entry.
    pub central: Vec<f64>,
}

/// Central differences `(Φ(u+εw) − Φ(u−εw))/2ε` over a geometric ε ladder.
pub fn fd_variation(
    grid: &Grid,
    functional: impl Fn(&GridField) -> Result<f64>,
    u: &GridField,
    w: &GridField,
    ladder: &[f64],
) -> Result<FdVariation> {
    grid.check(u)?;
    grid.check(w)?;
    if ladder.len() < 2 {
        return Err(Error::InvalidArgument("ε ladder needs ≥ 2 entries".into()));
    }
    if grid.boundary().iter().any(|&b| w.get(b) != 0.0) {
        return Err(Error::InvalidArgument("direction must vanish on the boundary".into()));
    }
    let mut central = Vec::with_capacity(ladder.len());
    for &eps in ladder {
        let plus = u.lincomb(1.0, w, eps)?;
        let minus = u.lincomb(1.0, w, -eps)?;
        for field in [&plus, &minus] {
            let h = complex_hessian(grid, field)?;
            if let Some(&node) = grid.interior().iter().find(|&&n| h.at(n).min_eig() < 0.0) {
                return Err(Error::NotPositive {
                    node,
                    min_eig: h.at(node).min_eig(),
                    det: h.at(node).det(),
                });
            }
        }
        central.push((functional(&plus)? - functional(&minus)?) / (2.0 * eps));
    }
    let k = central.len();
    let q = ladder[k - 2] / ladder[k - 1];
    let derivative = (q * q * central[k - 1] - central[k - 2]) / (q * q - 1.0);
    let order = if k >= 3 {
        let d1 = (central[k - 3] - central[k - 2]).abs();
        let d2 = (central[k - 2] - central[k - 1]).abs();
        let noise = 1e-9 * central.iter().fold(0.0, |m: f64, v| m.max(v.abs())).max(1e-12);
        if d1 > noise && d2 > 0.0 {
            Some((d1 / d2).ln() / (ladder[k - 3] / ladder[k - 2]).ln())
        } else {
            None
        }
    } else {
        None
    };
    Ok(FdVariation {
        derivative,
        order,
        central,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Discrepancy {
    pub max_abs: f64,
    pub max_rel: f64,
    pub compared: usize,
}

/// Compares the determinant of `U = profile(|z|²)` computed on a radial grid
/// of the unit ball with the full-grid determinant on `[−1, 1]^{2n}` at the
/// same spacing, at full-grid nodes with `|z| ≤ 1 − h` (radial values
/// interpolated linearly in |z|).
pub fn radial_vs_full(dim: usize, nodes: usize, profile: impl Fn(f64) -> f64) -> Result<Discrepancy> {
    let radial = build_grid(&DomainSpec::radial(dim, 1.0, nodes))?;
    let h = radial.min_spacing();
    let full = build_grid(&DomainSpec::cube(dim, -1.0, 1.0, h))?;
    let s = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    let ur = GridField::from_fn(&radial, |x| profile(s(x)))?;
    let uf = GridField::from_fn(&full, |x| profile(s(x)))?;
    let dr = hermitian_det(&complex_hessian(&radial, &ur)?);
    let df = hermitian_det(&complex_hessian(&full, &uf)?);
    let (mut max_abs, mut max_ref, mut compared) = (0.0f64, 0.0f64, 0usize);
    for &node in full.interior() {
        let r = full.radius_of(node);
        if r > 1.0 - h + 1e-12 {
            continue;
        }
        let pos = r / h;
        let i = (pos.floor() as usize).min(nodes - 2);
        let t = pos - i as f64;
        let interp = (1.0 - t) * dr.get(i) + t * dr.get(i + 1);
        max_abs = max_abs.max((df.get(node) - interp).abs());
        max_ref = max_ref.max(interp.abs());
        compared += 1;
    }
    Ok(Discrepancy {
        max_abs,
        max_rel: if max_ref > 0.0 { max_abs / max_ref } else { max_abs },
        compared,
    })
}

/// Compact C² bump `(1 − ρ²)³` for ρ < 1.
fn bump(rho2: f64) -> f64 {
    if rho2 >= 1.0 {
        0.0
    } else {
        let t = 1.0 - rho2;
        t * t * t
    }
}

/// Random smooth field vanishing on (and near) the boundary: a sum of up to
/// `max_bumps` compact bumps with amplitudes in `[−1, 1]`. Radial grids get
/// bumps in `|z|²` so the field stays smooth at the origin.
pub fn random_bumps(grid: &Grid, rng: &mut impl Rng, max_bumps: usize) -> Result<GridField> {
    let count = rng.gen_range(1..=max_bumps.max(1));
    let h = grid.min_spacing();
    let spec = grid.spec().clone();
    let mut bumps = Vec::with_capacity(count);
    for _ in 0..count {
        let amp: f64 = rng.gen_range(-1.0..1.0);
        match &spec.shape {
            Shape::Radial { radius, .. } => {
                let r2 = radius * radius;
                let sigma = rng.gen_range(0.15..0.45) * r2;
                let top = r2 - sigma - 2.0 * h * radius;
                let centre = rng.gen_range(-0.5 * sigma..top.max(-0.5 * sigma + 1e-9));
                bumps.push((amp, vec![centre], sigma));
            }
            Shape::Box { lower, upper, .. } => {
                let half = (0..lower.len())
                    .map(|p| 0.5 * (upper[p] - lower[p]))
                    .fold(f64::INFINITY, f64::min);
                let rho = rng.gen_range(0.25..0.6) * half;
                let centre = (0..lower.len())
                    .map(|p| rng.gen_range(lower[p] + rho + h..upper[p] - rho - h))
                    .collect();
                bumps.push((amp, centre, rho));
            }
        }
    }
    let mut field = GridField::from_fn(grid, |x| {
        bumps
            .iter()
            .map(|(amp, c, width)| {
                let rho2 = if grid.is_radial() {
                    let s = x[0] * x[0];
                    ((s - c[0]) / width).powi(2)
                } else {
                    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (width * width)
                };
                amp * bump(rho2)
            })
            .sum()
    })?;
    for &b in grid.boundary() {
        field.values_mut()[b] = 0.0;
    }
    Ok(field)
}

/// Random strictly psh field `a|z|² + c + bumps` whose interior Hessian
/// eigenvalues stay ≥ `a/5`; the bump amplitude is halved until they do.
pub fn random_psh(grid: &Grid, rng: &mut impl Rng, a: f64, c: f64, max_bumps: usize) -> Result<GridField> {
    let base = GridField::from_fn(grid, |x| a * x.iter().map(|v| v * v).sum::<f64>() + c)?;
    let bumps = random_bumps(grid, rng, max_bumps)?;
    let mut amp = rng.gen_range(0.05..0.6) * a;
    for _ in 0..60 {
        let u = base.lincomb(1.0, &bumps, amp)?;
        let h = complex_hessian(grid, &u)?;
        if grid.interior().iter().all(|&n| h.at(n).min_eig() >= 0.2 * a) {
            return Ok(u);
        }
        amp *= 0.5;
    }
    Ok(base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{energy_f0, energy_i, energy_j};
    use rand::SeedableRng;
    use std::f64::consts::PI;

    #[test]
    fn catalogue() {
        let c = exact_functionals("canonical").unwrap();
        assert!((c.i - PI / 2.0).abs() < 1e-15);
        assert!((c.j - PI / 4.0).abs() < 1e-15);
        assert!((c.f0 - PI / 4.0).abs() < 1e-15);
        let id = exact_functionals("identical").unwrap();
        assert_eq!((id.i, id.j), (0.0, 0.0));
        assert!((id.f0 + PI / 2.0).abs() < 1e-15);
        let p = exact_functionals("perturbed:0.1").unwrap();
        // n = 1: I = ε²π/2 exactly
        assert!((p.i - 0.01 * PI / 2.0).abs() < 1e-15);
        assert!(matches!(exact_functionals("nope"), Err(Error::UnknownTag(_))));
        assert!(exact_functionals("perturbed:x").is_err());
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for (dim, v, u) in [
            (1, (1.0, 0.0), (0.9, 0.1)),
            (2, (1.0, 0.0), (2.0, -1.0)),
            (2, (1.5, -0.5), (0.5, 0.5)),
        ] {
            let pair = RadialQuadraticPair {
                dim,
                radius: 1.0,
                v,
                u,
            };
            let c = pair.exact().unwrap();
            let g = build_grid(&DomainSpec::radial(dim, 1.0, 2049)).unwrap();
            let q = |(a, c): (f64, f64)| GridField::from_fn(&g, |x| a * x[0] * x[0] + c).unwrap();
            let (uf, vf) = (q(u), q(v));
            assert!((energy_i(&g, &uf, &vf).unwrap() - c.i).abs() < 1e-5);
            assert!((energy_j(&g, &uf, &vf, 9).unwrap() - c.j).abs() < 1e-5);
            assert!((energy_f0(&g, &uf, &vf, 9).unwrap() - c.f0).abs() < 1e-5);
        }
    }

    #[test]
    fn refinement_examples() {
        let one = refine_quadrature(1, 1.0, |_| 1.0, 4, 16).unwrap();
        assert!((one.value - PI).abs() < 1e-12 && one.error_estimate < 1e-12);
        let s = refine_quadrature(1, 1.0, |r| r * r, 4, 16).unwrap();
        assert!((s.value - PI / 2.0).abs() < 1e-10, "{}", s.value - PI / 2.0);
        let e = refine_quadrature(1, 1.0, |r| (-r * r).exp(), 4, 16).unwrap();
        let exact = PI * (1.0 - (-1.0f64).exp());
        assert!((e.value - exact).abs() < 1e-7);
        assert!((e.value - exact).abs() <= 10.0 * e.error_estimate + 1e-12);
    }

    #[test]
    fn noisy_integrand_is_flagged() {
        let mut state = 1u64;
        let noisy = move |_r: f64| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let cell = std::cell::RefCell::new(noisy);
        let res = refine_quadrature(1, 1.0, |r| (cell.borrow_mut())(r), 6, 4);
        assert!(matches!(res, Err(Error::NoisyIntegrand { .. })));
    }

    #[test]
    fn fd_variation_examples() {
        let g = build_grid(&DomainSpec::radial(2, 1.0, 129)).unwrap();
        let u = GridField::from_fn(&g, |x| x[0] * x[0]).unwrap();
        let w = GridField::from_fn(&g, |x| bump((x[0] * x[0] / 0.5).powi(2))).unwrap();
        let f0 = |f: &GridField| energy_f0(&g, f, &u, 9);
        let res = fd_variation(&g, f0, &u, &w, &DEFAULT_LADDER).unwrap();
        let expect = -integrate(&g, &w).unwrap();
        assert!((res.derivative - expect).abs() < 1e-9 * expect.abs().max(1.0));
        // J at u = v has a vanishing first variation
        let j = |f: &GridField| energy_j(&g, f, &u, 9);
        assert!(fd_variation(&g, j, &u, &w, &DEFAULT_LADDER).unwrap().derivative.abs() < 1e-10);
        let bad = GridField::constant(&g, 1.0);
        assert!(fd_variation(&g, f0, &u, &bad, &DEFAULT_LADDER).is_err());
    }

    #[test]
    fn radial_full_discrepancy() {
        let q = radial_vs_full(1, 17, |s| s).unwrap();
        assert!(q.max_abs < 1e-12 && q.compared > 0);
        for profile in [|s: f64| s * s / 2.0 + s, |s: f64| s.exp()] {
            let e: Vec<f64> = [33, 65, 129]
                .iter()
                .map(|&n| radial_vs_full(1, n, profile).unwrap().max_abs)
                .collect();
            assert!(e[0] / e[1] >= 3.5 && e[1] / e[2] >= 3.5, "{e:?}");
        }
    }

    #[test]
    fn random_fields_are_psh_and_vanish_on_boundary() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for spec in [DomainSpec::radial(1, 1.0, 65), DomainSpec::cube(1, -1.0, 1.0, 0.0625)] {
            let g = build_grid(&spec).unwrap();
            for _ in 0..20 {
                let u = random_psh(&g, &mut rng, 1.0, 0.0, 3).unwrap();
                let h = complex_hessian(&g, &u).unwrap();
                assert!(g.interior().iter().all(|&n| h.at(n).min_eig() >= 0.2));
                for &b in g.boundary() {
                    let s: f64 = g.coords(b).iter().map(|v| v * v).sum();
                    assert!((u.get(b) - s).abs() < 1e-15);
                }
            }
        }
    }
}
