//! Regular 2-D evaluation grids.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::linalg::Matrix;

pub const GRID_HEADER: &str = "x1,x2,log_density";

/// Axis-aligned box `[x1_lo, x1_hi] × [x2_lo, x2_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridBounds {
    pub x1: (f64, f64),
    pub x2: (f64, f64),
}

impl GridBounds {
    pub fn new(x1: (f64, f64), x2: (f64, f64)) -> Result<Self> {
        for (lo, hi) in [x1, x2] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!("invalid grid range [{lo}, {hi}]")));
            }
        }
        Ok(Self { x1, x2 })
    }

    /// Area of one cell when the grid has `resolution` points per axis
    /// including both endpoints.
    pub fn cell_area(&self, resolution: usize) -> f64 {
        let steps = (resolution.max(2) - 1) as f64;
        (self.x1.1 - self.x1.0) / steps * (self.x2.1 - self.x2.0) / steps
    }
}

fn axis(range: (f64, f64), resolution: usize, i: usize) -> f64 {
    if i + 1 == resolution {
        range.1
    } else {
        range.0 + (range.1 - range.0) * i as f64 / (resolution - 1) as f64
    }
}

/// `resolution²` points, both axes including their endpoints; `x1` varies
/// slowest.
pub fn grid_points(bounds: GridBounds, resolution: usize) -> Result<Matrix> {
    if resolution < 2 {
        return Err(Error::Config("grid resolution must be at least 2".into()));
    }
    let mut out = Matrix::zeros(resolution * resolution, 2);
    for i in 0..resolution {
        for j in 0..resolution {
            let row = out.row_mut(i * resolution + j);
            row[0] = axis(bounds.x1, resolution, i);
            row[1] = axis(bounds.x2, resolution, j);
        }
    }
    Ok(out)
}

/// Evaluates `log_density` on the grid. Output order does not depend on `mode`.
pub fn render_grid<F>(
    bounds: GridBounds,
    resolution: usize,
    dim: usize,
    mode: ExecMode,
    log_density: F,
) -> Result<(Matrix, Vec<f64>)>
where
    F: Fn(&[f64]) -> Result<f64> + Sync + Send,
{
    if dim != 2 {
        return Err(Error::Input(format!(
            "grid rendering needs 2-D data, got {dim} dimensions"
        )));
    }
    let points = grid_points(bounds, resolution)?;
    let values = exec::try_map_indexed(mode, points.rows(), |i| log_density(points.row(i)))?;
    Ok((points, values))
}

pub fn format_grid_csv(points: &Matrix, values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 48);
    out.push_str(GRID_HEADER);
    out.push('\n');
    for (p, v) in points.iter_rows().zip(values) {
        writeln!(out, "{},{},{}", p[0], p[1], v).unwrap();
    }
    out
}
