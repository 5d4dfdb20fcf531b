//! Damped Newton solver for the stationary problem `det(v_{αβ̄}) = e^{−f(z,v)}`
//! with Dirichlet data, in log form `log det H(v) + f(z, v) = 0`.

use serde::Serialize;

use crate::complex_calculus::{complex_hessian, first_non_positive, linearization, HermitianField};
use crate::error::{Error, Result};
use crate::functionals::{check_psh, DEFAULT_TOL_PSH};
use crate::grid::{Grid, GridField};
use crate::problem::{Problem, Source};

/// Newton iteration cap.
pub const MAX_NEWTON_ITERATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonReport {
    pub iterations: usize,
    /// `sup |det H(v) − e^{−f(z,v)}|` before each step and at the end.
    pub residual_history: Vec<f64>,
    /// `sup |log det H(v) + f(z,v)|`, same cadence.
    pub log_residual_history: Vec<f64>,
    /// Accepted damping factor per step.
    pub damping_history: Vec<f64>,
    pub converged: bool,
    pub tol: f64,
}

/// `det H(v) − e^{−f(z,v)}` at interior nodes (zero on the boundary).
pub fn residual(grid: &Grid, v: &GridField, source: &Source) -> Result<GridField> {
    grid.check(v)?;
    grid.check(&source.g)?;
    let h = complex_hessian(grid, v)?;
    check_psh(grid, &h, DEFAULT_TOL_PSH)?;
    let mut out = vec![0.0; grid.node_count()];
    for &n in grid.interior() {
        out[n] = h.at(n).det() - (-source.eval(n, 0.0, v.get(n))).exp();
    }
    GridField::new(grid, out)
}

/// Solves `u^{αβ̄} w_{αβ̄} + f_u·w = rhs` at interior nodes with `w = 0` on
/// the boundary; `u^{αβ̄}` is the inverse Hessian of `v`.
pub fn linearized_solve(grid: &Grid, v: &GridField, f_u: &GridField, rhs: &GridField) -> Result<GridField> {
    for f in [v, f_u, rhs] {
        grid.check(f)?;
    }
    let h = complex_hessian(grid, v)?;
    let lin = linearization(grid, &h)?;
    let shift: Vec<f64> = lin.interior().iter().map(|&n| f_u.get(n)).collect();
    let b: Vec<f64> = lin.interior().iter().map(|&n| rhs.get(n)).collect();
    let w = lin.solve(&shift, &b)?;
    GridField::new(grid, lin.scatter(&w, grid.node_count()))
}

fn log_residual(p: &Problem, v: &GridField, h: &HermitianField) -> (Vec<f64>, f64, f64) {
    let mut sup_det: f64 = 0.0;
    let mut sup_log: f64 = 0.0;
    let r = p
        .grid
        .interior()
        .iter()
        .map(|&n| {
            let det = h.at(n).det();
            let f = p.source.eval(n, 0.0, v.get(n));
            sup_det = sup_det.max((det - (-f).exp()).abs());
            let lr = det.ln() + f;
            sup_log = sup_log.max(lr.abs());
            lr
        })
        .collect();
    (r, sup_det, sup_log)
}

/// Damped Newton from `v_init` (boundary values are reset to φ).
pub fn newton_solve(p: &Problem, v_init: &GridField) -> Result<(GridField, NewtonReport)> {
    let grid = &p.grid;
    grid.check(v_init)?;
    let tol = p.tolerances.tol_newton;
    let floor = p.tolerances.det_floor;
    let mut v = v_init.clone();
    for &n in grid.boundary() {
        v.values_mut()[n] = p.phi.get(n);
    }
    let mut h = complex_hessian(grid, &v)?;
    if let Some(err) = first_non_positive(grid, &h, floor) {
        return Err(err);
    }
    let shift = vec![p.source.f_u(); grid.interior().len()];
    let mut report = NewtonReport {
        iterations: 0,
        residual_history: Vec::new(),
        log_residual_history: Vec::new(),
        damping_history: Vec::new(),
        converged: false,
        tol,
    };
    loop {
        let (lr, sup_det, merit) = log_residual(p, &v, &h);
        report.residual_history.push(sup_det);
        report.log_residual_history.push(merit);
        if !sup_det.is_finite() {
            return Err(Error::NonFinite {
                node: 0,
                value: sup_det,
            });
        }
        if sup_det <= tol {
            report.converged = true;
            return Ok((v, report));
        }
        if report.iterations >= MAX_NEWTON_ITERATIONS {
            return Err(Error::NewtonNotConverged {
                iterations: report.iterations,
                residual: sup_det,
            });
        }
        let lin = linearization(grid, &h)?;
        let rhs: Vec<f64> = lr.iter().map(|r| -r).collect();
        let delta = lin.solve(&shift, &rhs)?;
        let mut lambda = 1.0;
        loop {
            let mut trial = v.clone();
            {
                let vals = trial.values_mut();
                for (k, &n) in grid.interior().iter().enumerate() {
                    vals[n] += lambda * delta[k];
                }
            }
            let ht = complex_hessian(grid, &trial)?;
            if first_non_positive(grid, &ht, floor).is_none() {
                let (_, _, trial_merit) = log_residual(p, &trial, &ht);
                if trial_merit < merit || trial_merit == 0.0 {
                    v = trial;
                    h = ht;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                return Err(Error::DampingUnderflow {
                    iteration: report.iterations,
                    merit,
                });
            }
        }
        report.damping_history.push(lambda);
        report.iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DomainSpec};
    use crate::problem::{FieldExpr, ProblemSpec, SourceG, SourceSpec};

    fn quad(g: &Grid, a: f64, c: f64) -> GridField {
        GridField::from_fn(g, |x| a * x.iter().map(|v| v * v).sum::<f64>() + c).unwrap()
    }

    #[test]
    fn residual_examples() {
        let g = build_grid(&DomainSpec::radial(1, 1.0, 33)).unwrap();
        let zero = Source::zero(&g);
        let v = quad(&g, 1.0, 0.0);
        assert!(residual(&g, &v, &zero).unwrap().values().iter().all(|r| r.abs() < 1e-13));
        let u = quad(&g, 2.0, -1.0);
        let r = residual(&g, &u, &zero).unwrap();
        assert!(g.interior().iter().all(|&n| (r.get(n) - 1.0).abs() < 1e-13));
        let lin = SourceSpec {
            a: -1.0,
            b: 0.0,
            g: SourceG::Quadratic { coef: 1.0 },
        }
        .materialize(&g)
        .unwrap();
        assert!(residual(&g, &v, &lin).unwrap().values().iter().all(|r| r.abs() < 1e-13));
    }

    #[test]
    fn newton_from_solution_and_from_subsolution() {
        let p = ProblemSpec::radial_disc(1, 129, FieldExpr::quadratic(1.0, 0.0))
            .materialize()
            .unwrap();
        let (v, rep) = newton_solve(&p, &p.u0).unwrap();
        assert!(rep.converged && rep.iterations <= 1);
        assert_eq!(v, p.u0);
        let p = ProblemSpec::radial_disc(1, 513, FieldExpr::quadratic(2.0, -1.0))
            .materialize()
            .unwrap();
        let (v, rep) = newton_solve(&p, &p.u0).unwrap();
        assert!(rep.converged);
        let err = (0..p.grid.node_count())
            .map(|n| (v.get(n) - p.grid.radius_of(n).powi(2)).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn newton_with_linear_source_on_box() {
        let mut spec = ProblemSpec::radial_disc(1, 9, FieldExpr::quadratic(1.0, 0.0));
        spec.domain = DomainSpec::cube(1, -1.0, 1.0, 0.125);
        spec.source = SourceSpec {
            a: -1.0,
            b: 0.0,
            g: SourceG::Quadratic { coef: 1.0 },
        };
        spec.initial = Some(FieldExpr::BoxBubble {
            amplitude: 0.2,
            a: 1.0,
            c: 0.0,
        });
        let p = spec.materialize().unwrap();
        let (v, rep) = newton_solve(&p, &p.u0).unwrap();
        assert!(rep.converged);
        let exact = quad(&p.grid, 1.0, 0.0);
        assert!(v.values().iter().zip(exact.values()).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn linearized_solve_examples() {
        let g = build_grid(&DomainSpec::cube(1, -1.0, 1.0, 0.125)).unwrap();
        let v = quad(&g, 1.0, 0.0);
        let zero = GridField::zeros(&g);
        assert_eq!(linearized_solve(&g, &v, &zero, &zero).unwrap(), zero);
        // ¼Δw = rhs; oracle: assemble the 5-point system densely and eliminate
        let rhs = GridField::from_fn(&g, |c| (c[0] * 2.0).cos() + c[1]).unwrap();
        let w = linearized_solve(&g, &v, &zero, &rhs).unwrap();
        let side = 17;
        let h2 = 0.125f64 * 0.125;
        for &n in g.interior() {
            let wv = w.values();
            let lap = (wv[n + 1] + wv[n - 1] + wv[n + side] + wv[n - side] - 4.0 * wv[n]) / h2;
            assert!((0.25 * lap - rhs.get(n)).abs() < 1e-8);
        }
        // large domain, f_u = −1, rhs = −1 → w ≈ 1 in the middle
        let big = build_grid(&DomainSpec::cube(1, -8.0, 8.0, 0.25)).unwrap();
        let v = quad(&big, 1.0, 0.0);
        let fu = GridField::constant(&big, -1.0);
        let rhs = GridField::constant(&big, -1.0);
        let w = linearized_solve(&big, &v, &fu, &rhs).unwrap();
        let centre = big.node_count() / 2;
        assert!((w.get(centre) - 1.0).abs() < 1e-3, "{}", w.get(centre));
    }
}
