//! Time stepping of `u_t = log det(u_{αβ̄}) + f(t, z, u)` with Dirichlet data,
//! hypothesis checks, functional traces and bound monitors.
//!
//! Two schemes are provided. The explicit scheme is forward Euler with
//! `dt = σ·h²/4 / max tr(H⁻¹)`. The implicit scheme is backward Euler solved by
//! Newton's method, with an adaptive step; it keeps the discrete maximum
//! principle for u̇ and the monotonicity of F for every step size.

use serde::Serialize;

use crate::complex_calculus::{
    complex_hessian, harmonic_extension, linearization, sup_gradient, sup_real_hessian,
    HermitianField,
};
use crate::error::{Error, Result};
use crate::functionals::{dissipation_from, field_scale, tol_f, BasePoint};
use crate::grid::{Grid, GridField};
use crate::problem::{Problem, Scheme};
use crate::snapshot::TraceRow;

/// State of a run at time t.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub u: GridField,
    /// `log det(u_{αβ̄}) + f` at interior nodes, zero on the boundary.
    pub udot: GridField,
    pub step: usize,
    /// Last accepted step (zero before the first step).
    pub dt: f64,
    hess: HermitianField,
}

impl FlowState {
    /// State at t = 0 from the problem's initial data.
    pub fn initial(p: &Problem) -> Result<FlowState> {
        p.check_initial_trace()?;
        let mut u = p.u0.clone();
        for &node in p.grid.boundary() {
            u.values_mut()[node] = p.phi.get(node);
        }
        FlowState::at(p, 0.0, u, 0, 0.0)
    }

    fn at(p: &Problem, t: f64, u: GridField, step: usize, dt: f64) -> Result<FlowState> {
        let hess = complex_hessian(&p.grid, &u)?;
        if let Some(err) = positivity_failure(p, &hess) {
            return Err(err);
        }
        let udot = velocity(p, &u, &hess, t);
        Ok(FlowState {
            t,
            u,
            udot,
            step,
            dt,
            hess,
        })
    }

    pub fn hessian(&self) -> &HermitianField {
        &self.hess
    }

    /// `max |u̇|` over interior nodes.
    pub fn sup_udot(&self, grid: &Grid) -> f64 {
        self.udot.sup_over(grid.interior())
    }
}

fn positivity_failure(p: &Problem, h: &HermitianField) -> Option<Error> {
    crate::complex_calculus::first_non_positive(&p.grid, h, p.tolerances.det_floor)
}

fn velocity(p: &Problem, u: &GridField, h: &HermitianField, t: f64) -> GridField {
    let mut out = vec![0.0; p.grid.node_count()];
    for &node in p.grid.interior() {
        out[node] = h.at(node).det().ln() + p.source.eval(node, t, u.get(node));
    }
    GridField::raw(u.tag(), out)
}

/// Explicit step size `σ·h²/4 / max tr(H⁻¹)`.
pub fn explicit_dt(p: &Problem, state: &FlowState) -> f64 {
    let h = p.grid.min_spacing();
    let max_tr = p
        .grid
        .interior()
        .iter()
        .filter_map(|&n| state.hess.at(n).trace_inv())
        .fold(0.0, f64::max);
    p.stepping.cfl * h * h / 4.0 / max_tr
}

fn remaining(p: &Problem, t: f64) -> f64 {
    p.horizon.map_or(f64::INFINITY, |end| end - t)
}

/// One forward Euler step.
pub fn step(state: &FlowState, p: &Problem) -> Result<FlowState> {
    let dt = explicit_dt(p, state).min(remaining(p, state.t));
    explicit_step_with(state, p, dt)
}

fn explicit_step_with(state: &FlowState, p: &Problem, dt: f64) -> Result<FlowState> {
    let fail = |reason: String| Error::StepFailure {
        step: state.step + 1,
        t: state.t,
        reason,
    };
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(fail(format!("invalid step size {dt}")));
    }
    let mut u = state.u.clone();
    {
        let vals = u.values_mut();
        for &node in p.grid.interior() {
            vals[node] += dt * state.udot.get(node);
            if !vals[node].is_finite() {
                return Err(fail(format!("non-finite value at node {node}")));
            }
        }
    }
    FlowState::at(p, state.t + dt, u, state.step + 1, dt).map_err(|e| fail(e.to_string()))
}

/// One backward Euler step of size `dt`: solves
/// `x − u = dt·(log det H(x) + f(t+dt, x))` at interior nodes by Newton.
pub fn step_implicit(state: &FlowState, p: &Problem, dt: f64) -> Result<FlowState> {
    let grid = &p.grid;
    let fail = |reason: String| Error::StepFailure {
        step: state.step + 1,
        t: state.t,
        reason,
    };
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(fail(format!("invalid step size {dt}")));
    }
    let t1 = state.t + dt;
    let scale = 1.0f64.max(state.u.sup_over(grid.interior()));
    // rounding in u reaches log det amplified by ~4·tr(H⁻¹)/h²
    let h = grid.min_spacing();
    let max_tr = grid
        .interior()
        .iter()
        .filter_map(|&n| state.hess.at(n).trace_inv())
        .fold(0.0, f64::max);
    let tol = (1e-12 * dt).max(4e-16 * scale);
    let floor = tol.max(4e-16 * scale * (1.0 + 16.0 * dt * max_tr / (h * h)));
    let shift = vec![p.source.f_u() - 1.0 / dt; grid.interior().len()];
    let mut x = state.u.clone();
    let mut hx = state.hess.clone();
    let mut prev = f64::INFINITY;
    let mut best: Option<(f64, GridField)> = None;
    for _ in 0..40 {
        let resid: Vec<f64> = grid
            .interior()
            .iter()
            .map(|&n| {
                x.get(n)
                    - state.u.get(n)
                    - dt * (hx.at(n).det().ln() + p.source.eval(n, t1, x.get(n)))
            })
            .collect();
        let sup = resid.iter().fold(0.0, |m: f64, r| m.max(r.abs()));
        if !sup.is_finite() {
            return Err(fail("non-finite Newton residual".into()));
        }
        let accept = |x: GridField| FlowState::at(p, t1, x, state.step + 1, dt).map_err(|e| fail(e.to_string()));
        if sup <= tol {
            return accept(x);
        }
        // below the rounding floor, iterate while Newton still halves the residual
        if sup <= floor {
            if sup > 0.5 * prev {
                let keep = match best {
                    Some((b, bx)) if b < sup => bx,
                    _ => x,
                };
                return accept(keep);
            }
            best = Some((sup, x.clone()));
        }
        prev = sup;
        let lin = linearization(grid, &hx).map_err(|e| fail(e.to_string()))?;
        let rhs: Vec<f64> = resid.iter().map(|r| r / dt).collect();
        let delta = lin.solve(&shift, &rhs).map_err(|e| fail(e.to_string()))?;
        let mut lambda = 1.0;
        loop {
            let mut trial = x.clone();
            {
                let vals = trial.values_mut();
                for (k, &n) in grid.interior().iter().enumerate() {
                    vals[n] += lambda * delta[k];
                }
            }
            let ht = complex_hessian(grid, &trial)?;
            if positivity_failure(p, &ht).is_none() {
                x = trial;
                hx = ht;
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-6 {
                return Err(fail("Newton iterate lost positivity".into()));
            }
        }
    }
    match best {
        Some((_, bx)) => FlowState::at(p, t1, bx, state.step + 1, dt).map_err(|e| fail(e.to_string())),
        None => Err(fail("Newton did not converge".into())),
    }
}

/// Boundary compatibility residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompatibilityReport {
    /// Largest-magnitude `−log det(Hess u₀) − f(0, z, u₀)` over boundary nodes
    /// (signed).
    pub r0: f64,
    /// `−f_t` (signed).
    pub r1: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Order-0 and order-1 compatibility residuals on boundary nodes for
/// time-independent boundary data.
pub fn check_compatibility(p: &Problem) -> Result<CompatibilityReport> {
    let tol = 1e-12;
    let h = complex_hessian(&p.grid, &p.u0)?;
    let mut r0: f64 = 0.0;
    for &node in p.grid.boundary() {
        let m = h.at(node);
        if !m.is_positive() {
            return Err(Error::NotPositive {
                node,
                min_eig: m.min_eig(),
                det: m.det(),
            });
        }
        let r = -m.det().ln() - p.source.eval(node, 0.0, p.u0.get(node));
        if r.abs() > r0.abs() {
            r0 = r;
        }
    }
    let r1 = -p.source.f_t();
    Ok(CompatibilityReport {
        r0,
        r1,
        tol,
        passed: r0.abs() <= tol && r1.abs() <= tol,
    })
}

/// Subsolution hypothesis check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubsolutionReport {
    /// `max (−log det u̲ − f(0, z, u̲))` over interior nodes; must be ≤ tol.
    pub residual: f64,
    /// `max (u̲ − u₀)` over all nodes.
    pub initial_defect: f64,
    /// `max (u̲ − φ)` over boundary nodes.
    pub boundary_defect: f64,
    pub tol: f64,
    pub passed: bool,
}

pub fn check_subsolution(p: &Problem) -> Result<SubsolutionReport> {
    let grid = &p.grid;
    let sub = &p.subsolution;
    let h = complex_hessian(grid, sub)?;
    for &node in grid.interior() {
        let m = h.at(node);
        if m.min_eig() < -p.tolerances.tol_psh || m.det() <= p.tolerances.det_floor {
            return Err(Error::SubsolutionFailed(format!(
                "subsolution is not strictly psh at node {node} (min eigenvalue {:e}, det {:e})",
                m.min_eig(),
                m.det()
            )));
        }
    }
    let residual = grid
        .interior()
        .iter()
        .map(|&n| -h.at(n).det().ln() - p.source.eval(n, 0.0, sub.get(n)))
        .fold(f64::NEG_INFINITY, f64::max);
    let initial_defect = (0..grid.node_count())
        .map(|n| sub.get(n) - p.u0.get(n))
        .fold(f64::NEG_INFINITY, f64::max);
    let boundary_defect = grid
        .boundary()
        .iter()
        .map(|&n| sub.get(n) - p.phi.get(n))
        .fold(f64::NEG_INFINITY, f64::max);
    let scale = 1.0f64.max(field_scale(&[sub]));
    let tol = p.tolerances.tol_bc * scale;
    Ok(SubsolutionReport {
        residual,
        initial_defect,
        boundary_defect,
        tol,
        passed: residual <= tol && initial_defect <= tol && boundary_defect <= tol,
    })
}

/// A-priori bound monitors at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundsReport {
    pub t: f64,
    /// `sup |u|`.
    pub m0: f64,
    /// `max (u̲ − u, 0)`.
    pub sub_defect: f64,
    /// `max (u − h, 0)` with h the harmonic majorant.
    pub majorant_defect: f64,
    /// Interior `min det`.
    pub c0: f64,
    /// Interior `max det`.
    pub c1: f64,
    pub sup_grad: f64,
    pub sup_hess: f64,
    /// `min (tr H⁻¹) − n·c₁^{−1/n}` over interior nodes.
    pub trace_margin: f64,
}

pub fn monitor_bounds(state: &FlowState, p: &Problem, h_majorant: &GridField) -> Result<BoundsReport> {
    let grid = &p.grid;
    grid.check(h_majorant)?;
    let u = &state.u;
    let n = grid.dim() as f64;
    let (mut c0, mut c1) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut min_tr = f64::INFINITY;
    for &node in grid.interior() {
        let m = state.hess.at(node);
        let det = m.det();
        c0 = c0.min(det);
        c1 = c1.max(det);
        min_tr = min_tr.min(m.trace_inv().unwrap_or(f64::NAN));
    }
    let m0 = u.sup_over(&(0..grid.node_count()).collect::<Vec<_>>());
    let mut sub_defect: f64 = 0.0;
    let mut majorant_defect: f64 = 0.0;
    for node in 0..grid.node_count() {
        sub_defect = sub_defect.max(p.subsolution.get(node) - u.get(node));
        majorant_defect = majorant_defect.max(u.get(node) - h_majorant.get(node));
    }
    Ok(BoundsReport {
        t: state.t,
        m0,
        sub_defect,
        majorant_defect,
        c0,
        c1,
        sup_grad: sup_gradient(grid, u)?,
        sup_hess: sup_real_hessian(grid, u)?,
        trace_margin: min_tr - n * c1.powf(-1.0 / n),
    })
}

/// Evaluates one trace row (functionals with base point `base`).
pub fn trace_row(state: &FlowState, p: &Problem, base: &BasePoint) -> Result<TraceRow> {
    let grid = &p.grid;
    let e = base.evaluate(
        grid,
        &state.u,
        &state.hess,
        Some((&p.source, state.t)),
        p.simpson_nodes,
    )?;
    let y = dissipation_from(grid, &state.hess, &state.udot)?;
    let (mut det_min, mut det_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &node in grid.interior() {
        let d = state.hess.at(node).det();
        det_min = det_min.min(d);
        det_max = det_max.max(d);
    }
    let sup_err_vs_ref = p.reference.as_ref().map(|r| {
        (0..grid.node_count())
            .map(|n| (state.u.get(n) - r.get(n)).abs())
            .fold(0.0, f64::max)
    });
    Ok(TraceRow {
        t: state.t,
        f: e.f.expect("source given"),
        f0: e.f0,
        i: e.i,
        j: e.j,
        y,
        det_min,
        det_max,
        sup_udot: state.sup_udot(grid),
        sup_grad: sup_gradient(grid, &state.u)?,
        sup_hess: sup_real_hessian(grid, &state.u)?,
        sup_err_vs_ref,
    })
}

/// Result of [`run_flow`].
#[derive(Debug, Clone)]
pub struct FlowOutcome {
    pub state: FlowState,
    pub trace: Vec<TraceRow>,
    pub bounds: Vec<BoundsReport>,
    pub compatibility: Option<CompatibilityReport>,
    pub subsolution: SubsolutionReport,
    pub converged: bool,
    /// Lyapunov tolerance used for the F column.
    pub tol_f: f64,
    /// `sup |det − e^{−f}|` over interior nodes of the final state.
    pub stationarity_residual: f64,
}

/// Options of [`run_flow`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Trace cadence in steps (≥ 1).
    pub snapshot_every: usize,
    /// Run even when the subsolution check fails.
    pub override_subsolution: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            snapshot_every: 100,
            override_subsolution: false,
        }
    }
}

/// Runs the flow until the horizon or a steady state, emitting a trace row
/// (and calling `observer`) at t = 0, every `snapshot_every` steps and at the
/// final state.
pub fn run_flow(
    p: &Problem,
    opts: RunOptions,
    mut observer: impl FnMut(&FlowState, &TraceRow) -> Result<()>,
) -> Result<FlowOutcome> {
    let grid = &p.grid;
    if opts.snapshot_every == 0 {
        return Err(Error::InvalidArgument("snapshot cadence must be ≥ 1".into()));
    }
    if p.horizon.is_none() && !p.steady {
        return Err(Error::Config(
            "flow needs a horizon or steady-state termination".into(),
        ));
    }
    let subsolution = check_subsolution(p)?;
    if !subsolution.passed && !opts.override_subsolution {
        return Err(Error::SubsolutionFailed(format!(
            "residual {:e}, initial defect {:e}, boundary defect {:e} (tolerance {:e})",
            subsolution.residual, subsolution.initial_defect, subsolution.boundary_defect, subsolution.tol
        )));
    }
    let compatibility = check_compatibility(p).ok();
    let mut state = FlowState::initial(p)?;
    let base = BasePoint::new(grid, &state.u)?;
    let majorant = harmonic_extension(grid, &p.phi)?;
    let scale = field_scale(&[&state.u, &p.phi]);
    let tol_f = p.tolerances.tol_f.unwrap_or_else(|| tol_f(grid, scale));
    let steady_tol = p.steady_tol();

    let mut trace = Vec::new();
    let mut bounds = Vec::new();
    let mut record = |state: &FlowState, trace: &mut Vec<TraceRow>| -> Result<()> {
        let row = trace_row(state, p, &base)?;
        if p.source.b == 0.0 {
            if let Some(prev) = trace.last() {
                let rise = row.f - prev.f;
                if rise > tol_f {
                    return Err(Error::LyapunovViolation {
                        row: trace.len(),
                        rise,
                        tol: tol_f,
                    });
                }
            }
        }
        bounds.push(monitor_bounds(state, p, &majorant)?);
        observer(state, &row)?;
        trace.push(row);
        Ok(())
    };
    record(&state, &mut trace)?;

    let mut dt_next = p.stepping.dt0;
    let mut converged = false;
    loop {
        let is_steady = p.steady && state.sup_udot(grid) <= steady_tol;
        let at_end = remaining(p, state.t) <= 0.0;
        if is_steady || at_end {
            converged = is_steady;
            break;
        }
        if state.step >= p.stepping.max_steps {
            break;
        }
        state = match p.stepping.scheme {
            Scheme::Explicit => step(&state, p)?,
            Scheme::Implicit => {
                let mut dt = dt_next.min(p.stepping.dt_max);
                loop {
                    let trial = dt.min(remaining(p, state.t));
                    match step_implicit(&state, p, trial) {
                        Ok(next) => break next,
                        Err(e) => {
                            dt *= 0.5;
                            if dt < 1e-14 {
                                return Err(e);
                            }
                        }
                    }
                }
            }
        };
        dt_next = state.dt * p.stepping.dt_growth;
        if state.step % opts.snapshot_every == 0 {
            record(&state, &mut trace)?;
        }
    }
    if state.step % opts.snapshot_every != 0 {
        record(&state, &mut trace)?;
    }
    if p.steady && !converged {
        return Err(Error::NotSteady {
            t: state.t,
            sup_udot: state.sup_udot(grid),
        });
    }
    let stationarity_residual = grid
        .interior()
        .iter()
        .map(|&n| {
            let det = state.hess.at(n).det();
            (det - (-p.source.eval(n, state.t, state.u.get(n))).exp()).abs()
        })
        .fold(0.0, f64::max);
    Ok(FlowOutcome {
        state,
        trace,
        bounds,
        compatibility,
        subsolution,
        converged,
        tol_f,
        stationarity_residual,
    })
}
