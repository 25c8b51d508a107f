use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galerkin::{decompose, DecomposeOptions};
use crate::ground_truth::sample_sphere;
use crate::kernels::KernelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub n: usize,
    pub d: usize,
    pub p: usize,
    /// Fastest of the repeats; data generation excluded.
    pub seconds: f64,
}

/// Wall-clock time of [`decompose`] on sphere data over an `n x d` grid.
pub fn time_scaling_report(
    kernel: &KernelSpec,
    p: usize,
    n_grid: &[usize],
    d_grid: &[usize],
    seed: u64,
    repeats: usize,
) -> Result<Vec<TimingRow>> {
    kernel.validate()?;
    if repeats == 0 {
        return Err(Error::config("repeats must be >= 1"));
    }
    let mut rows = Vec::new();
    for &d in d_grid {
        for &n in n_grid {
            if p > n {
                return Err(Error::config(format!("p = {p} exceeds n = {n}")));
            }
            let data = sample_sphere(n, d, seed)?;
            let opts = DecomposeOptions {
                p: Some(p),
                seed,
                ..Default::default()
            };
            let mut best = f64::INFINITY;
            for _ in 0..repeats {
                let t = Instant::now();
                decompose(&data, kernel, &opts)?;
                best = best.min(t.elapsed().as_secs_f64());
            }
            rows.push(TimingRow { n, d, p, seconds: best });
        }
    }
    Ok(rows)
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::input("need at least two paired points"));
    }
    if x.iter().chain(y).any(|v| v.is_nan() || *v <= 0.0) {
        return Err(Error::input("log-log fit needs positive values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::input("x values are all equal"));
    }
    Ok(sxy / sxx)
}
