//! CSV and binary writers for computed artifacts.
//!
//! CSV files are comma separated with a header row; reals are written with
//! 17 significant digits.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::conjugacy::Conjugacy;
use crate::dimension::DimensionEstimate;
use crate::equilibrium::OrbitEnsemble;
use crate::error::{Error, Result};
use crate::leaves::{Holonomy, LeafSegment};
use crate::periodic::PeriodicSet;
use crate::product::LeafMeasure;

/// A real with 17 significant digits.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("write failed: {e}"))
}

fn table<W: Write>(out: W, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(io_err)?;
    for r in rows {
        w.write_record(&r).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Columns n, index, x1, x2, residual.
pub fn periodic_csv<W: Write>(out: W, set: &PeriodicSet) -> Result<()> {
    let residuals = set.residuals();
    table(
        out,
        &["n", "index", "x1", "x2", "residual"],
        set.points
            .iter()
            .zip(&residuals)
            .enumerate()
            .map(|(i, (p, r))| {
                vec![
                    set.period.to_string(),
                    i.to_string(),
                    real(p.x1()),
                    real(p.x2()),
                    real(*r),
                ]
            }),
    )
}

/// Columns x1, x2, weight.
pub fn ensemble_csv<W: Write>(out: W, e: &OrbitEnsemble) -> Result<()> {
    table(
        out,
        &["x1", "x2", "weight"],
        e.points
            .iter()
            .zip(&e.weights)
            .map(|(p, w)| vec![real(p.x1()), real(p.x2()), real(*w)]),
    )
}

/// Columns param, x1, x2.
pub fn leaf_segment_csv<W: Write>(out: W, s: &LeafSegment) -> Result<()> {
    table(
        out,
        &["param", "x1", "x2"],
        s.params
            .iter()
            .zip(&s.points)
            .map(|(t, p)| vec![real(*t), real(p.x1()), real(p.x2())]),
    )
}

/// Columns param_from, param_to.
pub fn holonomy_csv<W: Write>(out: W, h: &Holonomy) -> Result<()> {
    table(
        out,
        &["param_from", "param_to"],
        h.param_from
            .iter()
            .zip(&h.param_to)
            .map(|(a, b)| vec![real(*a), real(*b)]),
    )
}

/// Columns param, mass: bin midpoints and bin masses.
pub fn leaf_measure_csv<W: Write>(out: W, m: &LeafMeasure, bins: usize) -> Result<()> {
    table(
        out,
        &["param", "mass"],
        m.atoms(bins)
            .into_iter()
            .map(|(t, w)| vec![real(t), real(w)]),
    )
}

/// Columns center_x1, center_x2, radius, mass.
pub fn dimension_csv<W: Write>(out: W, estimates: &[DimensionEstimate]) -> Result<()> {
    table(
        out,
        &["center_x1", "center_x2", "radius", "mass"],
        estimates.iter().flat_map(|e| {
            e.radii.iter().zip(&e.masses).map(move |(r, m)| {
                vec![real(e.center.x1()), real(e.center.x2()), real(*r), real(*m)]
            })
        }),
    )
}

/// One-row summary: grid_n, residual, converged, iterations, off_grid_error.
pub fn conjugacy_summary_csv<W: Write>(out: W, c: &Conjugacy) -> Result<()> {
    table(
        out,
        &[
            "grid_n",
            "residual",
            "converged",
            "iterations",
            "off_grid_error",
        ],
        std::iter::once(vec![
            c.grid_n.to_string(),
            real(c.residual),
            c.converged.to_string(),
            c.iterations.to_string(),
            real(c.off_grid_error),
        ]),
    )
}

/// Header (grid_n as u64, residual as f64) followed by the row-major
/// u⁺ and u⁻ grids, all little-endian.
pub fn write_conjugacy_grid<W: Write>(mut out: W, c: &Conjugacy) -> Result<()> {
    out.write_u64::<LittleEndian>(c.grid_n as u64)
        .map_err(io_err)?;
    out.write_f64::<LittleEndian>(c.residual).map_err(io_err)?;
    for v in c.u_plus.iter().chain(&c.u_minus) {
        out.write_f64::<LittleEndian>(*v).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Decoded binary conjugacy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugacyGrid {
    pub grid_n: usize,
    pub residual: f64,
    pub u_plus: Vec<f64>,
    pub u_minus: Vec<f64>,
}

pub fn read_conjugacy_grid<R: Read>(mut input: R) -> Result<ConjugacyGrid> {
    let grid_n = input.read_u64::<LittleEndian>().map_err(io_err)? as usize;
    let residual = input.read_f64::<LittleEndian>().map_err(io_err)?;
    let cells = grid_n
        .checked_mul(grid_n)
        .ok_or_else(|| Error::Overflow("grid size".into()))?;
    let mut read = |n: usize| -> Result<Vec<f64>> {
        let mut v = vec![0.0; n];
        input
            .read_f64_into::<LittleEndian>(&mut v)
            .map_err(io_err)?;
        Ok(v)
    };
    let u_plus = read(cells)?;
    let u_minus = read(cells)?;
    Ok(ConjugacyGrid {
        grid_n,
        residual,
        u_plus,
        u_minus,
    })
}
