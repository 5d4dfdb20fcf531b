//! Snapshot files and trace CSV output.
//!
//! A snapshot is one JSON header line followed by the node values as
//! little-endian `f64`, row-major with the last real axis fastest:
//!
//! ```text
//! {"n":1,"shape":"radial","extents":[[0.0,1.0]],"h":[0.25],"field":"u","nodes":5}\n
//! <5 × 8 bytes>
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DomainSpec, Grid, GridField, Shape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Radial,
    Box,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotHeader {
    pub n: usize,
    pub shape: ShapeKind,
    /// `[lower, upper]` per real axis (`[[0, R]]` for radial grids).
    pub extents: Vec<[f64; 2]>,
    /// Mesh size per axis (`[Δr]` for radial grids).
    pub h: Vec<f64>,
    pub field: String,
    pub nodes: usize,
}

impl SnapshotHeader {
    pub fn for_grid(grid: &Grid, field: &str) -> Self {
        let spec = grid.spec();
        let (shape, extents, h) = match &spec.shape {
            Shape::Radial { radius, .. } => (
                ShapeKind::Radial,
                vec![[0.0, *radius]],
                vec![grid.min_spacing()],
            ),
            Shape::Box { lower, upper, h } => (
                ShapeKind::Box,
                lower.iter().zip(upper).map(|(l, u)| [*l, *u]).collect(),
                h.clone(),
            ),
        };
        SnapshotHeader {
            n: spec.dim,
            shape,
            extents,
            h,
            field: field.to_string(),
            nodes: grid.node_count(),
        }
    }

    /// The domain this header describes.
    pub fn domain(&self) -> Result<DomainSpec> {
        match self.shape {
            ShapeKind::Radial => {
                if self.extents.len() != 1 || self.extents[0][0] != 0.0 {
                    return Err(Error::Snapshot("radial extents must be [[0, R]]".into()));
                }
                Ok(DomainSpec::radial(self.n, self.extents[0][1], self.nodes))
            }
            ShapeKind::Box => Ok(DomainSpec::boxed(
                self.n,
                self.extents.iter().map(|e| e[0]).collect(),
                self.extents.iter().map(|e| e[1]).collect(),
                self.h.clone(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn of(grid: &Grid, name: &str, field: &GridField) -> Result<Self> {
        if field.tag() != grid.tag() {
            return Err(Error::GridMismatch);
        }
        Ok(Snapshot {
            header: SnapshotHeader::for_grid(grid, name),
            values: field.values().to_vec(),
        })
    }

    /// Binds the values to `grid`, which must have the recorded domain.
    pub fn into_field(self, grid: &Grid) -> Result<GridField> {
        let domain = self.header.domain()?;
        if &domain != grid.spec() {
            return Err(Error::Snapshot(format!(
                "snapshot grid {:?} does not match the run grid {:?}",
                domain,
                grid.spec()
            )));
        }
        GridField::new(grid, self.values)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(&self.header).expect("header serializes");
        out.push(b'\n');
        out.reserve(8 * self.values.len());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }
}

/// Parses snapshot bytes; rejects malformed headers, inconsistent grids,
/// truncated or trailing payload bytes and non-finite values.
pub fn decode_snapshot(bytes: &[u8]) -> Result<Snapshot> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Snapshot("missing header line".into()))?;
    let header: SnapshotHeader = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| Error::Snapshot(format!("bad header: {e}")))?;
    let domain = header.domain()?;
    let grid = crate::grid::build_grid(&domain).map_err(|e| Error::Snapshot(e.to_string()))?;
    if grid.node_count() != header.nodes {
        return Err(Error::Snapshot(format!(
            "header declares {} nodes, grid has {}",
            header.nodes,
            grid.node_count()
        )));
    }
    let payload = &bytes[newline + 1..];
    let expected = header
        .nodes
        .checked_mul(8)
        .ok_or_else(|| Error::Snapshot("node count overflows".into()))?;
    if payload.len() != expected {
        return Err(Error::Snapshot(format!(
            "payload has {} bytes, expected {expected}",
            payload.len()
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Snapshot(format!("non-finite value at node {i}")));
    }
    Ok(Snapshot { header, values })
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_snapshot(&bytes).map_err(|e| match e {
        Error::Snapshot(msg) => Error::Snapshot(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_snapshot(path: &Path, grid: &Grid, name: &str, field: &GridField) -> Result<()> {
    let snap = Snapshot::of(grid, name, field)?;
    fs::write(path, snap.encode()).map_err(|e| Error::io(path, e))
}

/// Columns of the trace CSV.
pub const TRACE_HEADER: &str =
    "t,F,F0,I,J,Y,det_min,det_max,sup_udot,sup_grad,sup_hess,sup_err_vs_ref";

/// One trace record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "F0")]
    pub f0: f64,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "Y")]
    pub y: f64,
    pub det_min: f64,
    pub det_max: f64,
    pub sup_udot: f64,
    pub sup_grad: f64,
    pub sup_hess: f64,
    pub sup_err_vs_ref: Option<f64>,
}

impl TraceRow {
    pub fn is_finite(&self) -> bool {
        [
            self.t,
            self.f,
            self.f0,
            self.i,
            self.j,
            self.y,
            self.det_min,
            self.det_max,
            self.sup_udot,
            self.sup_grad,
            self.sup_hess,
        ]
        .iter()
        .chain(self.sup_err_vs_ref.iter())
        .all(|v| v.is_finite())
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Formats rows as CSV (header always present).
pub fn format_trace(rows: &[TraceRow]) -> Result<String> {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for (k, r) in rows.iter().enumerate() {
        if !r.is_finite() {
            return Err(Error::InvalidArgument(format!("trace row {k} is not finite")));
        }
        let cols = [
            r.t, r.f, r.f0, r.i, r.j, r.y, r.det_min, r.det_max, r.sup_udot, r.sup_grad, r.sup_hess,
        ];
        let mut line: Vec<String> = cols.iter().map(|&v| num(v)).collect();
        line.push(r.sup_err_vs_ref.map(num).unwrap_or_default());
        out.push_str(&line.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let text = format_trace(rows)?;
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Parses a trace CSV produced by [`format_trace`].
pub fn parse_trace(text: &str) -> Result<Vec<TraceRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_HEADER) {
        return Err(Error::InvalidArgument("trace header mismatch".into()));
    }
    lines
        .enumerate()
        .map(|(k, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 12 {
                return Err(Error::InvalidArgument(format!("trace row {k}: expected 12 columns")));
            }
            let p = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::InvalidArgument(format!("trace row {k}: {e}")))
            };
            Ok(TraceRow {
                t: p(cols[0])?,
                f: p(cols[1])?,
                f0: p(cols[2])?,
                i: p(cols[3])?,
                j: p(cols[4])?,
                y: p(cols[5])?,
                det_min: p(cols[6])?,
                det_max: p(cols[7])?,
                sup_udot: p(cols[8])?,
                sup_grad: p(cols[9])?,
                sup_hess: p(cols[10])?,
                sup_err_vs_ref: if cols[11].is_empty() {
                    None
                } else {
                    Some(p(cols[11])?)
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        for spec in [
            DomainSpec::radial(2, 1.0, 9),
            DomainSpec::cube(1, -1.0, 1.0, 0.25),
            DomainSpec::boxed(1, vec![0.0, -0.5], vec![0.3, 0.5], vec![0.1, 0.25]),
        ] {
            let g = build_grid(&spec).unwrap();
            let f = GridField::from_fn(&g, |c| (c[0] * 3.1).sin() / 7.0 + 1e-300).unwrap();
            let bytes = Snapshot::of(&g, "u", &f).unwrap().encode();
            let back = decode_snapshot(&bytes).unwrap();
            assert_eq!(back.header.field, "u");
            let f2 = back.into_field(&g).unwrap();
            assert!(f
                .values()
                .iter()
                .zip(f2.values())
                .all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn rejects_trailing_and_truncated_bytes() {
        let g = build_grid(&DomainSpec::radial(1, 1.0, 5)).unwrap();
        let mut bytes = Snapshot::of(&g, "u", &GridField::zeros(&g)).unwrap().encode();
        bytes.push(0);
        assert!(decode_snapshot(&bytes).is_err());
        bytes.truncate(bytes.len() - 2);
        assert!(decode_snapshot(&bytes).is_err());
        assert!(decode_snapshot(b"{}\n").is_err());
        assert!(decode_snapshot(b"no newline").is_err());
    }

    #[test]
    fn rejects_other_grid() {
        let g = build_grid(&DomainSpec::radial(1, 1.0, 5)).unwrap();
        let g2 = build_grid(&DomainSpec::radial(1, 2.0, 5)).unwrap();
        let snap = Snapshot::of(&g, "u", &GridField::zeros(&g)).unwrap();
        assert!(snap.into_field(&g2).is_err());
    }

    #[test]
    fn trace_formatting() {
        assert_eq!(format_trace(&[]).unwrap(), format!("{TRACE_HEADER}\n"));
        let row = TraceRow {
            t: 0.0,
            f: std::f64::consts::PI,
            f0: -0.5,
            i: 0.0,
            j: 0.0,
            y: 0.0,
            det_min: 1.0,
            det_max: 1.0,
            sup_udot: 0.0,
            sup_grad: 2.0,
            sup_hess: 2.0,
            sup_err_vs_ref: None,
        };
        let text = format_trace(std::slice::from_ref(&row)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("0.0000000000000000e0,3.1415926535897931e0,"));
        assert!(lines[1].ends_with(','));
        assert_eq!(parse_trace(&text).unwrap(), vec![row]);
    }
}
