//! Least-squares fits to values and gradients over a Nystrom kernel basis.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::galerkin::{build_gram_laplacian, default_p, select_landmarks, warn_if_degenerate};
use crate::kernels::{cross_gram, distances, inner_products, kernel_grad, GradientGeometry, KernelSpec};

/// Targets `f(x_k) = y_k` and `grad f(x_k) = t_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteProblem {
    data: Dataset,
    values: Vec<f64>,
    /// `n x d`, row-major.
    gradients: Vec<f64>,
}

impl HermiteProblem {
    pub fn new(data: Dataset, values: Vec<f64>, gradients: Vec<f64>) -> Result<Self> {
        let (n, d) = (data.n(), data.d());
        if values.len() != n {
            return Err(Error::input(format!("expected {n} values, got {}", values.len())));
        }
        if gradients.len() != n * d {
            return Err(Error::input(format!(
                "expected {} gradient entries, got {}",
                n * d,
                gradients.len()
            )));
        }
        if values.iter().chain(&gradients).any(|v| !v.is_finite()) {
            return Err(Error::input("targets must be finite"));
        }
        Ok(HermiteProblem {
            data,
            values,
            gradients,
        })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gradient(&self, k: usize) -> &[f64] {
        let d = self.data.d();
        &self.gradients[k * d..(k + 1) * d]
    }

    pub fn gradients_row_major(&self) -> &[f64] {
        &self.gradients
    }

    /// Same points and targets scaled by `c`.
    pub fn scaled(&self, c: f64) -> HermiteProblem {
        HermiteProblem {
            data: self.data.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            gradients: self.gradients.iter().map(|v| v * c).collect(),
        }
    }
}

/// `f(x) = sum_i alpha_i k(landmark_i, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteModel {
    pub alpha: Vec<f64>,
    pub landmarks: Dataset,
    pub kernel: KernelSpec,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Landmark count; default `ceil(sqrt(n))`.
    pub p: Option<usize>,
    /// Ridge on the raw-sum system; default `1e-10 * trace(A) / p`.
    pub epsilon: Option<f64>,
    pub seed: u64,
}

fn landmarks_for(data: &Dataset, opts: &FitOptions) -> Result<Dataset> {
    let p = opts.p.unwrap_or_else(|| default_p(data.n()));
    let lm = data.select(&select_landmarks(data.n(), p, opts.seed)?)?;
    warn_if_degenerate(&lm);
    Ok(lm)
}

/// `sum_k <grad k_{landmark_i}(x_k), t_k>` for every landmark.
fn gradient_rhs(kernel: &KernelSpec, landmarks: &Dataset, problem: &HermiteProblem) -> DVector<f64> {
    let data = &problem.data;
    let (n, d) = (data.n(), data.d());
    let t = DMatrix::from_row_slice(n, d, &problem.gradients);
    // lt_ik = landmark_i^T t_k
    let lt = landmarks.to_matrix() * t.transpose();
    let x = inner_products(landmarks, data);
    let weights = if kernel.is_dot_product() {
        x.map(|v| kernel.q_prime(v))
    } else {
        let dist = distances(&x, &landmarks.sq_norms(), &data.sq_norms());
        dist.map(|v| kernel.q_prime_over_t(v))
    };
    let mut b = DVector::zeros(landmarks.n());
    if kernel.is_dot_product() {
        for k in 0..n {
            for i in 0..landmarks.n() {
                b[i] += weights[(i, k)] * lt[(i, k)];
            }
        }
    } else {
        for k in 0..n {
            let xt: f64 = data.point(k).iter().zip(problem.gradient(k)).map(|(a, b)| a * b).sum();
            for i in 0..landmarks.n() {
                b[i] += weights[(i, k)] * (xt - lt[(i, k)]);
            }
        }
    }
    b
}

fn solve_ridge(mut a: DMatrix<f64>, b: &DVector<f64>, epsilon: Option<f64>) -> Result<(Vec<f64>, f64)> {
    let p = a.nrows();
    let epsilon = epsilon.unwrap_or_else(|| 1e-10 * a.trace() / p as f64);
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::input(format!("epsilon must be finite and >= 0, got {epsilon}")));
    }
    for i in 0..p {
        a[(i, i)] += epsilon;
    }
    let chol = a.cholesky().ok_or_else(|| {
        Error::solver(format!(
            "normal equations are singular (eps = {epsilon:e}); use a larger epsilon"
        ))
    })?;
    // Reject pivots at round-off level: the factorization then carries no information.
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = (diag.min(), diag.max());
    if lo.is_nan() || lo * lo <= p as f64 * f64::EPSILON * hi * hi {
        return Err(Error::solver(format!(
            "normal equations are numerically singular (eps = {epsilon:e}); use a larger epsilon"
        )));
    }
    let alpha = chol.solve(b);
    if alpha.iter().any(|v| !v.is_finite()) {
        return Err(Error::solver("non-finite coefficients; use a larger epsilon"));
    }
    Ok((alpha.iter().copied().collect(), epsilon))
}

/// Minimizes `sum_k (f(x_k) - y_k)^2 + |grad f(x_k) - t_k|^2 + eps |alpha|^2`.
///
/// `A = L + Psi` and `b` are raw sums over the data, so `eps` acts on that scale.
pub fn hermite_fit(problem: &HermiteProblem, kernel: &KernelSpec, opts: &FitOptions) -> Result<HermiteModel> {
    kernel.validate()?;
    let data = &problem.data;
    let landmarks = landmarks_for(data, opts)?;
    let gram = build_gram_laplacian(kernel, GradientGeometry::Euclidean, &landmarks, data)?;
    let n = data.n() as f64;
    let a = (&gram.l + &gram.psi) * n;
    let k = cross_gram(kernel, &landmarks, data)?;
    let b = &k * DVector::from_column_slice(&problem.values) + gradient_rhs(kernel, &landmarks, problem);
    let (alpha, epsilon) = solve_ridge(a, &b, opts.epsilon)?;
    Ok(HermiteModel {
        alpha,
        landmarks,
        kernel: *kernel,
        epsilon,
    })
}

/// Kernel ridge regression on values only: `A = K K^T`, `b = K y`.
pub fn plain_ridge_fit(data: &Dataset, values: &[f64], kernel: &KernelSpec, opts: &FitOptions) -> Result<HermiteModel> {
    kernel.validate()?;
    if values.len() != data.n() {
        return Err(Error::input(format!(
            "expected {} values, got {}",
            data.n(),
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("targets must be finite"));
    }
    let landmarks = landmarks_for(data, opts)?;
    let k = cross_gram(kernel, &landmarks, data)?;
    let mut a = &k * k.transpose();
    let t = a.transpose();
    a += t;
    a *= 0.5;
    let b = &k * DVector::from_column_slice(values);
    let (alpha, epsilon) = solve_ridge(a, &b, opts.epsilon)?;
    Ok(HermiteModel {
        alpha,
        landmarks,
        kernel: *kernel,
        epsilon,
    })
}

pub fn hermite_predict(model: &HermiteModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.landmarks.d() {
        return Err(Error::input(format!(
            "point has dimension {}, model expects {}",
            x.len(),
            model.landmarks.d()
        )));
    }
    let point = Dataset::from_row_major(1, x.len(), x.to_vec())?;
    Ok(predict_many(model, &point)?[0])
}

pub fn predict_many(model: &HermiteModel, data: &Dataset) -> Result<Vec<f64>> {
    let k = cross_gram(&model.kernel, &model.landmarks, data)?;
    let f = k.transpose() * DVector::from_column_slice(&model.alpha);
    Ok(f.iter().copied().collect())
}

/// Gradient of the fitted function at `x`.
pub fn predict_gradient(model: &HermiteModel, x: &[f64]) -> Result<Vec<f64>> {
    let mut g = vec![0.0; x.len()];
    for (i, a) in model.alpha.iter().enumerate() {
        for (gj, v) in g
            .iter_mut()
            .zip(kernel_grad(&model.kernel, model.landmarks.point(i), x)?)
        {
            *gj += a * v;
        }
    }
    Ok(g)
}

/// The penalized least-squares objective `hermite_fit` minimizes, evaluated
/// pointwise for the given coefficients.
pub fn objective(model: &HermiteModel, problem: &HermiteProblem) -> Result<f64> {
    let f = predict_many(model, &problem.data)?;
    let mut total = model.epsilon * model.alpha.iter().map(|a| a * a).sum::<f64>();
    for (k, fk) in f.iter().enumerate() {
        total += (fk - problem.values[k]).powi(2);
        let g = predict_gradient(model, problem.data.point(k))?;
        total += g
            .iter()
            .zip(problem.gradient(k))
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>();
    }
    Ok(total)
}

/// Root mean squared deviation of predictions from `targets`.
pub fn rmse(model: &HermiteModel, data: &Dataset, targets: &[f64]) -> Result<f64> {
    let f = predict_many(model, data)?;
    if f.len() != targets.len() {
        return Err(Error::input("target length mismatch"));
    }
    let s: f64 = f.iter().zip(targets).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((s / f.len() as f64).sqrt())
}
