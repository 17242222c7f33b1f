//! Deterministic artifact writers: CSV tables, binary grid snapshots, and
//! flat key=value summaries.
//!
//! Every writer is a pure function of its inputs — identical data produces
//! byte-identical files, which is what makes reruns diffable. CSV files are
//! comma-separated with a header row, `.` decimal separator, LF line
//! endings, and floats in full-precision scientific notation.
//!
//! Grid snapshots use the `KGW1` container: a 32-byte header (magic
//! `KGW1`, `u32` dims, `f64` spacings, zero padding, all little-endian)
//! followed by row-major nodes of four `f32`s each — the `(ψ₊, ψ₋)`
//! components as single-precision complex pairs. Scalar reconstruction
//! tiles reuse the container with the value in the real part of the first
//! component and the remaining slots zero.

use crate::inversion::ReconstructionGrid;
use crate::lineflux::{FluxRecord, XRaySample};
use crate::scattering::PhasePair;
use crate::solver::{MeasuredPhase, SolverRun, WaveState};
use thiserror::Error;

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("writing {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("reading {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: not a KGW1 grid snapshot")]
    BadMagic { path: String },
    #[error("{path}: truncated grid snapshot ({have} of {need} bytes)")]
    Truncated { path: String, have: usize, need: usize },
}

fn write_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::Write { path: path.display().to_string(), source }
}

fn read_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::Read { path: path.display().to_string(), source }
}

/// Full-precision scientific float formatting shared by all CSV writers.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.12e}")
}

/// Writes a CSV table: header row plus data rows, LF endings.
pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), IoError> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| write_err(path, e))
}

fn class_columns(n_handles: usize) -> Vec<String> {
    (1..=n_handles).map(|k| format!("h{k}")).collect()
}

fn class_cells(class: &[i64], n_handles: usize) -> Vec<String> {
    (0..n_handles)
        .map(|k| class.get(k).copied().unwrap_or(0).to_string())
        .collect()
}

/// Batch X-ray table: line base and direction, winding class, and the two
/// decoupled integrals with their quadrature error estimate.
pub fn write_xray_table(path: &Path, samples: &[XRaySample]) -> Result<(), IoError> {
    let n_handles = samples.iter().map(|s| s.line.class.len()).max().unwrap_or(0);
    let mut header: Vec<String> =
        ["x1", "x2", "x3", "v1", "v2", "v3"].iter().map(|s| s.to_string()).collect();
    header.extend(class_columns(n_handles));
    header.extend(["int_A", "int_A0", "err"].iter().map(|s| s.to_string()));
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows = samples.iter().map(|s| {
        let mut row = vec![
            fmt_num(s.line.base.x),
            fmt_num(s.line.base.y),
            fmt_num(s.line.base.z),
            fmt_num(s.line.dir.x),
            fmt_num(s.line.dir.y),
            fmt_num(s.line.dir.z),
        ];
        row.extend(class_cells(&s.line.class, n_handles));
        row.extend([fmt_num(s.int_a), fmt_num(s.int_a0), fmt_num(s.err)]);
        row
    });
    write_csv(path, &header_refs, rows)
}

/// High-momenta phase table: one row per line with its winding class and
/// the pair phases.
pub fn write_phase_table(path: &Path, pairs: &[PhasePair]) -> Result<(), IoError> {
    let n_handles = pairs.iter().map(|p| p.line.class.len()).max().unwrap_or(0);
    let mut header: Vec<String> =
        ["x1", "x2", "x3", "v1", "v2", "v3"].iter().map(|s| s.to_string()).collect();
    header.extend(class_columns(n_handles));
    header.extend(["theta_plus", "theta_minus"].iter().map(|s| s.to_string()));
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows = pairs.iter().map(|p| {
        let mut row = vec![
            fmt_num(p.line.base.x),
            fmt_num(p.line.base.y),
            fmt_num(p.line.base.z),
            fmt_num(p.line.dir.x),
            fmt_num(p.line.dir.y),
            fmt_num(p.line.dir.z),
        ];
        row.extend(class_cells(&p.line.class, n_handles));
        row.extend([fmt_num(p.theta_plus), fmt_num(p.theta_minus)]);
        row
    });
    write_csv(path, &header_refs, rows)
}

/// Flux report rows: class, hole flux, long-range flux, direction.
pub fn write_flux_table(path: &Path, records: &[FluxRecord]) -> Result<(), IoError> {
    let n_handles = records.iter().map(|r| r.class.len()).max().unwrap_or(0);
    let mut header = class_columns(n_handles);
    header.extend(
        ["hole_flux", "long_range_flux", "v1", "v2", "v3"].iter().map(|s| s.to_string()),
    );
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows = records.iter().map(|r| {
        let mut row = class_cells(&r.class, n_handles);
        row.extend([
            fmt_num(r.hole_flux),
            fmt_num(r.long_range_flux),
            fmt_num(r.dir.x),
            fmt_num(r.dir.y),
            fmt_num(r.dir.z),
        ]);
        row
    });
    write_csv(path, &header_refs, rows)
}

fn solver_row(rec: &MeasuredPhase) -> Vec<String> {
    vec![
        fmt_num(rec.v),
        fmt_num(rec.measured.0),
        fmt_num(rec.measured.1),
        fmt_num(rec.predicted.0),
        fmt_num(rec.predicted.1),
        fmt_num(rec.abs_err()),
        fmt_num(rec.overlap_mag[0].min(rec.overlap_mag[1])),
    ]
}

/// Convergence-run table: measured and predicted phases per momentum with
/// the per-record error and the worst-channel overlap magnitude.
pub fn write_solver_run(path: &Path, run: &SolverRun) -> Result<(), IoError> {
    write_csv(
        path,
        &[
            "v",
            "theta_plus_measured",
            "theta_minus_measured",
            "theta_plus_predicted",
            "theta_minus_predicted",
            "abs_err",
            "overlap_mag",
        ],
        run.records.iter().map(solver_row),
    )
}

/// Reconstruction tile as `(x, y, value)` triples in plane coordinates,
/// row-major over the tile.
pub fn write_recon_grid_csv(path: &Path, grid: &ReconstructionGrid) -> Result<(), IoError> {
    let n = grid.tile.n;
    let rows = (0..n).flat_map(|i| {
        (0..n).map(move |j| (i, j))
    });
    write_csv(
        path,
        &["x", "y", "value"],
        rows.map(|(i, j)| {
            vec![fmt_num(grid.tile.coord(i)), fmt_num(grid.tile.coord(j)), fmt_num(grid.at(i, j))]
        }),
    )
}

/// Flat `key=value` summary file, one entry per line in the given order.
pub fn write_key_values(path: &Path, entries: &[(String, String)]) -> Result<(), IoError> {
    let mut out = String::new();
    for (k, v) in entries {
        out.push_str(k);
        out.push('=');
        out.push_str(v);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| write_err(path, e))
}

const KGW1_MAGIC: &[u8; 4] = b"KGW1";
const KGW1_HEADER: usize = 32;

fn kgw1_header(nx: u32, ny: u32, hx: f64, hy: f64) -> [u8; KGW1_HEADER] {
    let mut h = [0u8; KGW1_HEADER];
    h[0..4].copy_from_slice(KGW1_MAGIC);
    h[4..8].copy_from_slice(&nx.to_le_bytes());
    h[8..12].copy_from_slice(&ny.to_le_bytes());
    h[12..20].copy_from_slice(&hx.to_le_bytes());
    h[20..28].copy_from_slice(&hy.to_le_bytes());
    h
}

/// A decoded `KGW1` snapshot: dims, spacings, and the raw node data —
/// four `f32`s per node (`Re ψ₊, Im ψ₊, Re ψ₋, Im ψ₋`), row-major.
#[derive(Debug, Clone)]
pub struct GridSnapshot {
    pub nx: u32,
    pub ny: u32,
    pub hx: f64,
    pub hy: f64,
    pub data: Vec<f32>,
}

/// Writes a solver state as a `KGW1` snapshot (single precision — these
/// are debugging artifacts, not restart files).
pub fn write_wave_snapshot(path: &Path, state: &WaveState) -> Result<(), IoError> {
    let n = state.spec.n;
    let h = state.spec.h();
    let mut file = fs::File::create(path).map_err(|e| write_err(path, e))?;
    file.write_all(&kgw1_header(n as u32, n as u32, h, h))
        .map_err(|e| write_err(path, e))?;
    let mut buf = Vec::with_capacity(n * n * 16);
    for (p, m) in state.plus.as_slice().iter().zip(state.minus.as_slice()) {
        for v in [p.re as f32, p.im as f32, m.re as f32, m.im as f32] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    file.write_all(&buf).map_err(|e| write_err(path, e))
}

/// Writes a scalar reconstruction tile in the same container: the value
/// sits in `Re ψ₊`, the other three slots are zero.
pub fn write_recon_grid_binary(path: &Path, grid: &ReconstructionGrid) -> Result<(), IoError> {
    let n = grid.tile.n;
    let h = if n < 2 { 0.0 } else { 2.0 * grid.tile.half_width / (n - 1) as f64 };
    let mut file = fs::File::create(path).map_err(|e| write_err(path, e))?;
    file.write_all(&kgw1_header(n as u32, n as u32, h, h))
        .map_err(|e| write_err(path, e))?;
    let mut buf = Vec::with_capacity(n * n * 16);
    for &v in &grid.values {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
        buf.extend_from_slice(&[0u8; 12]);
    }
    file.write_all(&buf).map_err(|e| write_err(path, e))
}

/// Reads a `KGW1` snapshot back (either layout).
pub fn read_grid_snapshot(path: &Path) -> Result<GridSnapshot, IoError> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| read_err(path, e))?;
    if bytes.len() < KGW1_HEADER || &bytes[0..4] != KGW1_MAGIC {
        return Err(IoError::BadMagic { path: path.display().to_string() });
    }
    let nx = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let ny = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let hx = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let hy = f64::from_le_bytes(bytes[20..28].try_into().unwrap());
    let need = KGW1_HEADER + (nx as usize) * (ny as usize) * 16;
    if bytes.len() < need {
        return Err(IoError::Truncated {
            path: path.display().to_string(),
            have: bytes.len(),
            need,
        });
    }
    let data = bytes[KGW1_HEADER..need]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(GridSnapshot { nx, ny, hx, hy, data })
}
