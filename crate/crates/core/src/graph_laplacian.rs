//! Dense graph-Laplacian baseline, projected onto the same Nystrom basis as the
//! Galerkin estimator.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{dot, Dataset};
use crate::error::{Error, Result};
use crate::galerkin::{
    check_samples, select_landmarks, solve_estimate, warn_if_degenerate, GramTriplet, SpectralEstimate,
};
use crate::kernels::{cross_gram, expanded_sq_dist, KernelSpec};

/// How unnormalized weights `w~_ij` are formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum WeightScheme {
    /// `exp(-alpha |x_i - x_j|^2)`
    Gaussian { alpha: f64 },
    /// `k(x_i, x_j)` for the given kernel.
    Kernel { kernel: KernelSpec },
}

impl WeightScheme {
    /// The scale `sigma` mapped to `alpha = 1 / (2 sigma^2)`.
    pub fn from_sigma(sigma: f64) -> Self {
        WeightScheme::Gaussian {
            alpha: 1.0 / (2.0 * sigma * sigma),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            WeightScheme::Gaussian { alpha } if !(*alpha > 0.0 && alpha.is_finite()) => {
                Err(Error::input(format!("alpha must be finite and > 0, got {alpha}")))
            }
            WeightScheme::Kernel { kernel } => kernel.validate(),
            _ => Ok(()),
        }
    }
}

/// Symmetric normalized weights `D^{-1/2} W~ D^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphWeights {
    pub w: DMatrix<f64>,
    pub scheme: WeightScheme,
}

impl GraphWeights {
    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    /// Row sums of the normalized weights.
    pub fn degrees(&self) -> Vec<f64> {
        self.w.column_iter().map(|c| c.sum()).collect()
    }
}

pub fn weight_matrix(data: &Dataset, alpha: f64) -> Result<GraphWeights> {
    weight_matrix_with(data, WeightScheme::Gaussian { alpha })
}

pub fn weight_matrix_with(data: &Dataset, scheme: WeightScheme) -> Result<GraphWeights> {
    scheme.validate()?;
    let n = data.n();
    if n < 2 {
        return Err(Error::input("graph weights need at least two points"));
    }
    let sq = data.sq_norms();
    let mut w = DMatrix::<f64>::zeros(n, n);
    // Column j of a symmetric matrix is row j; columns are contiguous.
    w.as_mut_slice().par_chunks_mut(n).enumerate().for_each(|(j, col)| {
        let xj = data.point(j);
        for (i, out) in col.iter_mut().enumerate() {
            let xi = data.point(i);
            *out = match scheme {
                WeightScheme::Gaussian { alpha } => {
                    if i == j {
                        1.0
                    } else {
                        (-alpha * expanded_sq_dist(sq[i], sq[j], dot(xi, xj))).exp()
                    }
                }
                WeightScheme::Kernel { kernel } => crate::kernels::kernel_eval(&kernel, xi, xj).unwrap_or(f64::NAN),
            };
        }
    });
    if let Some(v) = w.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::config(format!(
            "weights must be finite and nonnegative, found {v}"
        )));
    }
    let deg: Vec<f64> = w.column_iter().map(|c| c.sum()).collect();
    if let Some(i) = deg.iter().position(|&d| d <= 0.0) {
        return Err(Error::config(format!("point {i} has zero total weight")));
    }
    let inv: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    w.as_mut_slice().par_chunks_mut(n).enumerate().for_each(|(j, col)| {
        for (i, out) in col.iter_mut().enumerate() {
            *out *= inv[i] * inv[j];
        }
    });
    let t = w.transpose();
    w += t;
    w *= 0.5;
    Ok(GraphWeights { w, scheme })
}

/// `L_g = 2 (D_w - W)`, so that `f^T L_g f = sum_ij w_ij (f_i - f_j)^2`.
pub fn graph_energy_matrix(weights: &GraphWeights) -> DMatrix<f64> {
    let mut l = &weights.w * -2.0;
    for (i, d) in weights.degrees().into_iter().enumerate() {
        l[(i, i)] += 2.0 * d;
    }
    l
}

/// `(1/n) E^T L_g E` for `E = basis^T`, without forming `L_g`.
///
/// `basis` is `p x n` with rows the basis functions at the data.
pub fn projected_graph_energy(weights: &GraphWeights, basis: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    projected_blocked(weights, basis, 512)
}

/// With `W = U + U^T`, `U` the upper triangle of `W` with halved diagonal,
/// `K (D - W) K^T = T + T^T` for `T = (K D / 2 - K U) K^T`. Only the upper
/// block triangle of `W` is multiplied.
fn projected_blocked(weights: &GraphWeights, basis: &DMatrix<f64>, block: usize) -> Result<DMatrix<f64>> {
    let n = weights.n();
    if basis.ncols() != n {
        return Err(Error::input(format!(
            "basis has {} columns, weights are {n}x{n}",
            basis.ncols()
        )));
    }
    let p = basis.nrows();
    let deg = weights.degrees();
    let mut left = DMatrix::from_fn(p, n, |i, k| 0.5 * basis[(i, k)] * deg[k]);
    for j0 in (0..n).step_by(block) {
        let bj = block.min(n - j0);
        let mut diag = weights.w.view((j0, j0), (bj, bj)).into_owned();
        for c in 0..bj {
            diag[(c, c)] *= 0.5;
            for r in c + 1..bj {
                diag[(r, c)] = 0.0;
            }
        }
        let mut out = left.columns_mut(j0, bj);
        out.gemm(-1.0, &basis.columns(j0, bj), &diag, 1.0);
        let above = weights.w.view((0, j0), (j0, bj));
        // Tiny scales underflow to exact zeros off the diagonal.
        if j0 > 0 && above.iter().any(|&v| v != 0.0) {
            out.gemm(-1.0, &basis.columns(0, j0), &above, 1.0);
        }
    }
    let mut l = left * basis.transpose();
    let t = l.transpose();
    l += t;
    l *= 2.0 / n as f64;
    Ok(l)
}

/// Options for [`graph_decompose`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphOptions {
    pub p: Option<usize>,
    pub epsilon: Option<f64>,
    pub seed: u64,
    /// Largest `n` for which the dense `n x n` weight matrix is built.
    pub max_n: usize,
}

pub const DEFAULT_MAX_N: usize = 20_000;

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions {
            p: None,
            epsilon: None,
            seed: 0,
            max_n: DEFAULT_MAX_N,
        }
    }
}

pub(crate) fn check_cap(n: usize, max_n: usize) -> Result<()> {
    if n > max_n {
        let gb = (n * n * 8) as f64 / 1e9;
        return Err(Error::config(format!(
            "n = {n} exceeds the graph baseline cap of {max_n}: the dense weight matrix \
             needs O(n^2) memory ({gb:.1} GB)"
        )));
    }
    Ok(())
}

/// Galerkin projection of the graph Laplacian onto `k_{landmark_i}`, `i < p`.
///
/// Eigenvalues carry the graph's arbitrary scale; see [`rescale_eigenvalues`].
pub fn graph_decompose(
    data: &Dataset,
    kernel: &KernelSpec,
    scheme: WeightScheme,
    opts: &GraphOptions,
) -> Result<SpectralEstimate> {
    kernel.validate()?;
    check_cap(data.n(), opts.max_n)?;
    let p = opts.p.unwrap_or_else(|| crate::galerkin::default_p(data.n()));
    let landmarks = data.select(&select_landmarks(data.n(), p, opts.seed)?)?;
    warn_if_degenerate(&landmarks);
    let weights = weight_matrix_with(data, scheme)?;
    let basis = cross_gram(kernel, &landmarks, data)?;
    check_samples(&basis)?;
    let l = projected_graph_energy(&weights, &basis)?;
    let mut psi = &basis * basis.transpose() / data.n() as f64;
    let t = psi.transpose();
    psi += t;
    psi *= 0.5;
    let gram = GramTriplet {
        l,
        phi: psi.clone(),
        psi,
        n_samples: data.n(),
    };
    solve_estimate(&gram, landmarks, *kernel, opts.epsilon)
}

/// `values * C / sum(values[..k])`.
pub fn rescale_eigenvalues(values: &[f64], true_sum: f64, k: usize) -> Result<Vec<f64>> {
    if k == 0 || k > values.len() {
        return Err(Error::input(format!("need 1 <= k <= {}, got {k}", values.len())));
    }
    let sum: f64 = values[..k].iter().sum();
    if sum.is_nan() || sum <= 0.0 {
        return Err(Error::input(format!("first {k} values sum to {sum}, cannot rescale")));
    }
    let c = true_sum / sum;
    Ok(values.iter().map(|v| v * c).collect())
}
