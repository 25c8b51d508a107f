use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gram::{build_gram_laplacian, GramTriplet};
use super::solve::Whitener;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{cross_gram, GradientGeometry, KernelSpec};

/// Eigenpairs over the Nystrom basis `k_{landmark_j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    /// Ascending.
    pub values: Vec<f64>,
    /// `t x p`; row `i` expands eigenfunction `i` in the basis.
    #[serde(with = "crate::io::matrix_rows")]
    pub left: DMatrix<f64>,
    /// Equal to `left` for symmetric problems.
    #[serde(with = "crate::io::matrix_rows")]
    pub right: DMatrix<f64>,
    pub landmarks: Dataset,
    pub kernel: KernelSpec,
    pub epsilon: f64,
}

impl SpectralEstimate {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// All eigenfunctions at every point of `data`, as `t x m`.
    pub fn evaluate(&self, data: &Dataset) -> Result<DMatrix<f64>> {
        Ok(&self.left * cross_gram(&self.kernel, &self.landmarks, data)?)
    }
}

/// Options for [`decompose`]. `None` fields take their documented defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DecomposeOptions {
    /// Landmark count; default `ceil(sqrt(n))`.
    pub p: Option<usize>,
    /// Ridge on `Psi`; default `1e-8 * trace(Psi) / p`.
    pub epsilon: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub geometry: GradientGeometry,
}

pub fn default_p(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).clamp(1, n.max(1))
}

pub fn default_epsilon(psi: &DMatrix<f64>) -> f64 {
    1e-8 * psi.trace() / psi.nrows().max(1) as f64
}

/// First `p` indices of a seeded Fisher-Yates shuffle of `0..n`.
///
/// The draw for position `i` does not depend on `p`, so the landmark set for a
/// smaller `p` is a prefix of the one for a larger `p`.
pub fn select_landmarks(n: usize, p: usize, seed: u64) -> Result<Vec<usize>> {
    if p == 0 || p > n {
        return Err(Error::config(format!("need 1 <= p <= n, got p={p}, n={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..p {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(p);
    Ok(idx)
}

pub(crate) fn warn_if_degenerate(landmarks: &Dataset) {
    let first = landmarks.point(0);
    if landmarks.n() > 1 && landmarks.points().all(|x| x == first) {
        log::warn!("all {} landmarks coincide; the basis spans one function", landmarks.n());
    }
}

/// Landmarks and Gram triplet for a Dirichlet-energy problem.
pub fn assemble(
    data: &Dataset,
    kernel: &KernelSpec,
    p: usize,
    seed: u64,
    geometry: GradientGeometry,
) -> Result<(Dataset, GramTriplet)> {
    kernel.validate()?;
    let landmarks = data.select(&select_landmarks(data.n(), p, seed)?)?;
    warn_if_degenerate(&landmarks);
    let gram = build_gram_laplacian(kernel, geometry, &landmarks, data)?;
    Ok((landmarks, gram))
}

/// Solve the pencil on the numerical range of `Psi` (see [`Whitener`]) and wrap
/// the result; the estimate has one eigenpair per retained direction.
pub fn solve_estimate(
    gram: &GramTriplet,
    landmarks: Dataset,
    kernel: KernelSpec,
    epsilon: Option<f64>,
) -> Result<SpectralEstimate> {
    let epsilon = epsilon.unwrap_or_else(|| default_epsilon(&gram.psi));
    let g = Whitener::new(&gram.psi, epsilon)?.solve(&gram.l)?;
    if let Some(bad) = g.values.iter().find(|v| !v.is_finite()) {
        return Err(Error::solver(format!("non-finite eigenvalue {bad}")));
    }
    Ok(SpectralEstimate {
        values: g.values,
        right: g.vectors.clone(),
        left: g.vectors,
        landmarks,
        kernel,
        epsilon,
    })
}

/// Dirichlet-energy eigenpairs of `data` over a seeded Nystrom basis.
pub fn decompose(data: &Dataset, kernel: &KernelSpec, opts: &DecomposeOptions) -> Result<SpectralEstimate> {
    let p = opts.p.unwrap_or_else(|| default_p(data.n()));
    let (landmarks, gram) = assemble(data, kernel, p, opts.seed, opts.geometry)?;
    solve_estimate(&gram, landmarks, *kernel, opts.epsilon)
}

/// `sum_j A_ij k(landmark_j, x)`.
pub fn evaluate_eigenfunction(est: &SpectralEstimate, i: usize, x: &[f64]) -> Result<f64> {
    if i >= est.len() {
        return Err(Error::Index {
            index: i,
            len: est.len(),
        });
    }
    if x.len() != est.landmarks.d() {
        return Err(Error::input(format!(
            "point has dimension {}, landmarks have {}",
            x.len(),
            est.landmarks.d()
        )));
    }
    let point = Dataset::from_row_major(1, x.len(), x.to_vec())?;
    let k = cross_gram(&est.kernel, &est.landmarks, &point)?;
    Ok(est.left.row(i).iter().zip(k.iter()).map(|(a, b)| a * b).sum())
}

/// `(1/m) sum_x f(x) f(x)^T` for the first `k` eigenfunctions.
pub fn empirical_orthogonality(est: &SpectralEstimate, data: &Dataset, k: usize) -> Result<DMatrix<f64>> {
    if k > est.len() {
        return Err(Error::Index {
            index: k,
            len: est.len(),
        });
    }
    let basis = cross_gram(&est.kernel, &est.landmarks, data)?;
    let f = est.left.rows(0, k) * basis;
    Ok(&f * f.transpose() / data.n() as f64)
}

/// Largest off-diagonal magnitude of a square matrix.
pub fn max_off_diagonal(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                worst = worst.max(m[(i, j)].abs());
            }
        }
    }
    worst
}
