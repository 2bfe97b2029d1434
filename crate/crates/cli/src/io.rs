//! Field CSV, JSON output and atomic writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sphere_concavity::solver::{GridField, PolarGrid, RadialField};
use sphere_concavity::verify::PairSample;
use tempfile::NamedTempFile;

const HEADER: [&str; 3] = ["r", "theta", "u"];

/// Relative slack when matching CSV coordinates against the configured grid.
const COORD_TOL: f64 = 1e-9;

fn number(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes through a temporary file in the destination directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = NamedTempFile::new_in(&dir)
        .with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes JSON to `path`, or to stdout when no path is given.
pub fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let bytes = to_json(value)?;
    match path {
        Some(p) => write_atomic(p, &bytes),
        None => {
            std::io::stdout().write_all(&bytes)?;
            Ok(())
        }
    }
}

fn csv_bytes(rows: impl Iterator<Item = [f64; 3]>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER)?;
    for row in rows {
        w.write_record(row.map(number))?;
    }
    w.into_inner().context("flushing csv")
}

/// One row per node, pole first with `theta = 0`.
pub fn grid_csv(field: &GridField) -> Result<Vec<u8>> {
    let grid = field.grid();
    csv_bytes((0..grid.num_nodes()).map(|k| {
        let (r, theta) = grid.polar(k);
        [r, theta, field.values()[k]]
    }))
}

/// One row per radius, all with `theta = 0`.
pub fn radial_csv(field: &RadialField) -> Result<Vec<u8>> {
    csv_bytes((0..=field.nr()).map(|i| [field.r(i), 0.0, field.values()[i]]))
}

pub fn pairs_csv(samples: &[PairSample]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x0", "x1", "x2", "y0", "y1", "y2", "Z"])?;
    for s in samples {
        let row: Vec<String> =
            s.x.iter()
                .chain(&s.y)
                .chain([&s.value])
                .map(|v| number(*v))
                .collect();
        w.write_record(&row)?;
    }
    w.into_inner().context("flushing csv")
}

pub fn read_rows(path: &Path) -> Result<Vec<[f64; 3]>> {
    let text = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let mut reader = csv::Reader::from_reader(text.as_slice());
    let headers = reader.headers()?.clone();
    if headers.iter().map(str::trim).ne(HEADER) {
        bail!(
            "{}: expected header r,theta,u, found {:?}",
            path.display(),
            headers
        );
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = [0.0f64; 3];
        for (slot, text) in row.iter_mut().zip(record.iter()) {
            *slot = text.trim().parse().with_context(|| {
                format!("{}: row {}: bad number {text:?}", path.display(), line + 1)
            })?;
        }
        if record.len() != 3 || row.iter().any(|v| !v.is_finite()) {
            bail!(
                "{}: row {} is not three finite numbers",
                path.display(),
                line + 1
            );
        }
        rows.push(row);
    }
    Ok(rows)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= COORD_TOL * a.abs().max(b.abs()).max(1.0)
}

fn check_row(k: usize, row: &[f64; 3], r: f64, theta: f64) -> Result<()> {
    if !close(row[0], r) || !close(row[1], theta) {
        bail!(
            "row {}: node (r, theta) = ({}, {}) does not match the grid node ({r}, {theta})",
            k + 1,
            row[0],
            row[1]
        );
    }
    Ok(())
}

/// Rebuilds a 2-D field; the rows must list the nodes of `grid` in order.
pub fn grid_from_rows(rows: &[[f64; 3]], grid: PolarGrid) -> Result<GridField> {
    if rows.len() != grid.num_nodes() {
        bail!(
            "field has {} rows but the grid Nr={}, Ntheta={} has {} nodes",
            rows.len(),
            grid.nr(),
            grid.ntheta(),
            grid.num_nodes()
        );
    }
    for (k, row) in rows.iter().enumerate() {
        let (r, theta) = grid.polar(k);
        check_row(k, row, r, theta)?;
    }
    Ok(GridField::new(grid, rows.iter().map(|r| r[2]).collect())?)
}

/// Rebuilds a radial profile with `nr + 1` rows at `theta = 0`.
pub fn radial_from_rows(rows: &[[f64; 3]], grid: PolarGrid) -> Result<RadialField> {
    if rows.len() != grid.nr() + 1 {
        bail!(
            "radial field has {} rows but Nr={} needs {}",
            rows.len(),
            grid.nr(),
            grid.nr() + 1
        );
    }
    for (i, row) in rows.iter().enumerate() {
        check_row(i, row, grid.r(i), 0.0)?;
    }
    Ok(RadialField::new(
        grid.radius(),
        rows.iter().map(|r| r[2]).collect(),
    )?)
}
