use std::io::Write;
use std::path::Path;

use super::config::GridSpec;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::galerkin::SpectralEstimate;

/// Named numeric columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header)?;
        for row in &self.rows {
            out.write_record(row.iter().map(|v| format!("{v:?}")))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

fn axis(lo: f64, hi: f64, r: usize) -> Vec<f64> {
    if r == 1 {
        return vec![lo];
    }
    (0..r).map(|i| lo + (hi - lo) * i as f64 / (r - 1) as f64).collect()
}

/// Eigenfunctions `indices` on a regular grid, first coordinate varying fastest.
///
/// Columns are `x1, x2, f<i>...`. A resolution of 1 places the single node at `mins`.
pub fn export_eigenfunction_grid(est: &SpectralEstimate, indices: &[usize], grid: &GridSpec) -> Result<Table> {
    if est.landmarks.d() != 2 {
        return Err(Error::config(format!(
            "grid export supports d = 2 only, estimate has d = {}",
            est.landmarks.d()
        )));
    }
    if grid.resolution.contains(&0) {
        return Err(Error::config("grid resolution must be >= 1"));
    }
    if grid.mins.iter().chain(&grid.maxs).any(|v| !v.is_finite()) {
        return Err(Error::config("grid bounds must be finite"));
    }
    if let Some(&i) = indices.iter().find(|&&i| i >= est.len()) {
        return Err(Error::Index {
            index: i,
            len: est.len(),
        });
    }
    let xs = axis(grid.mins[0], grid.maxs[0], grid.resolution[0]);
    let ys = axis(grid.mins[1], grid.maxs[1], grid.resolution[1]);
    let mut coords = Vec::with_capacity(xs.len() * ys.len() * 2);
    for &y in &ys {
        for &x in &xs {
            coords.extend([x, y]);
        }
    }
    let points = Dataset::from_row_major(xs.len() * ys.len(), 2, coords)?;
    let rows_of = est.left.select_rows(indices);
    let values = &rows_of * crate::kernels::cross_gram(&est.kernel, &est.landmarks, &points)?;
    let mut header = vec!["x1".to_string(), "x2".to_string()];
    header.extend(indices.iter().map(|i| format!("f{i}")));
    let rows = (0..points.n())
        .map(|j| {
            let mut row = points.point(j).to_vec();
            row.extend((0..indices.len()).map(|r| values[(r, j)]));
            row
        })
        .collect();
    Ok(Table { header, rows })
}

/// Fraction of points where the sign of `values` matches the label, under
/// the better of the two global sign choices.
pub fn sign_agreement(values: &[f64], labels: &[u8]) -> Result<f64> {
    if values.len() != labels.len() || values.is_empty() {
        return Err(Error::input(format!(
            "need equal non-empty lengths, got {} values and {} labels",
            values.len(),
            labels.len()
        )));
    }
    let hits = values
        .iter()
        .zip(labels)
        .filter(|(v, l)| (**v > 0.0) == (**l == 0))
        .count();
    let frac = hits as f64 / values.len() as f64;
    Ok(frac.max(1.0 - frac))
}
