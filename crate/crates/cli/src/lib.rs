//! Run dispatch behind the `maflow` binary.

use std::fs;
use std::path::{Path, PathBuf};

use maflow_core::config::{Mode, RunConfig};
use maflow_core::elliptic::newton_solve;
use maflow_core::flow::{run_flow, BoundsReport, RunOptions};
use maflow_core::functionals::functional_report;
use maflow_core::snapshot::{format_trace, write_snapshot, TraceRow};
use maflow_core::verify::run_suites;
use maflow_core::{Error, ErrorClass, Result};
use serde_json::json;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err.class() {
        ErrorClass::Config => EXIT_CONFIG,
        ErrorClass::Numerical => EXIT_NUMERICAL,
        ErrorClass::Invariant => EXIT_INVARIANT,
    }
}

pub const MONITOR_HEADER: &str = "t,m0,sub_defect,majorant_defect,c0,c1,sup_grad,sup_hess,trace_margin";

pub fn format_monitors(rows: &[BoundsReport]) -> String {
    let mut out = String::from(MONITOR_HEADER);
    out.push('\n');
    for r in rows {
        let vals = [
            r.t,
            r.m0,
            r.sub_defect,
            r.majorant_defect,
            r.c0,
            r.c1,
            r.sup_grad,
            r.sup_hess,
            r.trace_margin,
        ];
        let line: Vec<String> = vals.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    write(path, text)
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// What a run produced; `status` is the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub status: i32,
    pub out: PathBuf,
    pub message: String,
}

/// Runs `mode` and writes its artifacts under `out`. Errors surface as a
/// nonzero status with the message; artifacts written before the failure
/// are kept.
pub fn run(mode: Mode, config: &RunConfig, out: &Path, seed: Option<u64>) -> RunOutcome {
    let res = mkdir(out).and_then(|_| match mode {
        Mode::Flow => run_flow_mode(config, out),
        Mode::Elliptic => run_elliptic(config, out),
        Mode::Functionals => run_functionals(config, out),
        Mode::Verify => run_verify(config, out, seed.unwrap_or(config.seed)),
    });
    match res {
        Ok((status, message)) => RunOutcome {
            status,
            out: out.to_path_buf(),
            message,
        },
        Err(e) => RunOutcome {
            status: exit_code(&e),
            out: out.to_path_buf(),
            message: e.to_string(),
        },
    }
}

fn run_flow_mode(config: &RunConfig, out: &Path) -> Result<(i32, String)> {
    let p = config.problem_spec().materialize()?;
    let snaps = out.join("snapshots");
    mkdir(&snaps)?;
    let mut rows: Vec<TraceRow> = Vec::new();
    let opts = RunOptions {
        snapshot_every: config.snapshot_every,
        override_subsolution: config.flow.override_subsolution,
    };
    let res = run_flow(&p, opts, |state, row| {
        write_snapshot(&snaps.join(format!("u_{:08}.bin", state.step)), &p.grid, "u", &state.u)?;
        rows.push(row.clone());
        Ok(())
    });
    write(&out.join("trace.csv"), format_trace(&rows)?)?;
    let outcome = match res {
        Ok(o) => o,
        Err(e) => {
            let row = match &e {
                Error::LyapunovViolation { row, .. } => json!(row),
                _ => json!(null),
            };
            write_json(
                &out.join("summary.json"),
                &json!({
                    "mode": "flow",
                    "status": exit_code(&e),
                    "error": e.to_string(),
                    "offending_trace_row": row,
                    "rows_written": rows.len(),
                }),
            )?;
            return Err(e);
        }
    };
    write(&out.join("monitors.csv"), format_monitors(&outcome.bounds))?;
    write_snapshot(&out.join("u_final.bin"), &p.grid, "u", &outcome.state.u)?;
    let last = outcome.trace.last().expect("trace has the initial row");
    write_json(
        &out.join("summary.json"),
        &json!({
            "mode": "flow",
            "status": EXIT_OK,
            "converged": outcome.converged,
            "t": outcome.state.t,
            "steps": outcome.state.step,
            "sup_udot": last.sup_udot,
            "F_initial": outcome.trace[0].f,
            "F_final": last.f,
            "tol_F": outcome.tol_f,
            "stationarity_residual": outcome.stationarity_residual,
            "sup_err_vs_ref": last.sup_err_vs_ref,
            "compatibility": outcome.compatibility,
            "subsolution": outcome.subsolution,
        }),
    )?;
    Ok((
        EXIT_OK,
        format!(
            "flow: {} steps to t = {:.6e}, sup|u̇| = {:.3e}",
            outcome.state.step, outcome.state.t, last.sup_udot
        ),
    ))
}

fn run_elliptic(config: &RunConfig, out: &Path) -> Result<(i32, String)> {
    let p = config.problem_spec().materialize()?;
    let init = match &config.elliptic.init {
        Some(e) => e.materialize(&p.grid)?,
        None => p.subsolution.clone(),
    };
    let (v, report) = newton_solve(&p, &init)?;
    write_snapshot(&out.join("v_star.bin"), &p.grid, "v_star", &v)?;
    let value = serde_json::to_value(&report).map_err(|e| Error::Config(e.to_string()))?;
    write_json(&out.join("newton_report.json"), &value)?;
    let residual = report.residual_history.last().copied().unwrap_or(f64::NAN);
    Ok((
        EXIT_OK,
        format!("elliptic: {} Newton steps, residual {residual:.3e}", report.iterations),
    ))
}

fn run_functionals(config: &RunConfig, out: &Path) -> Result<(i32, String)> {
    let p = config.problem_spec().materialize()?;
    let f = &config.functionals;
    let u = match &f.u {
        Some(e) => e.materialize(&p.grid)?,
        None => p.u0.clone(),
    };
    let v = match &f.v {
        Some(e) => e.materialize(&p.grid)?,
        None => p.subsolution.clone(),
    };
    let udot = f.udot.as_ref().map(|e| e.materialize(&p.grid)).transpose()?;
    let report = functional_report(&p.grid, &u, &v, &p.source, udot.as_ref(), f.simpson_nodes)?;
    let value = serde_json::to_value(&report).map_err(|e| Error::Config(e.to_string()))?;
    write_json(&out.join("functionals.json"), &value)?;
    Ok((
        EXIT_OK,
        format!("functionals: I = {:.12e}, J = {:.12e}, F0 = {:.12e}", report.i, report.j, report.f0),
    ))
}

fn run_verify(config: &RunConfig, out: &Path, seed: u64) -> Result<(i32, String)> {
    let report = run_suites(&config.verify_options(seed))?;
    let value = serde_json::to_value(&report).map_err(|e| Error::Config(e.to_string()))?;
    write_json(&out.join("verify_report.json"), &value)?;
    let failed: Vec<String> = report
        .suites
        .iter()
        .filter(|s| !s.passed)
        .map(|s| format!("{} ({})", s.suite, s.grid))
        .collect();
    if failed.is_empty() {
        Ok((EXIT_OK, format!("verify: {} suites passed", report.suites.len())))
    } else {
        Ok((EXIT_INVARIANT, format!("verify: failed {}", failed.join(", "))))
    }
}
