use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{dot, Dataset};
use crate::error::{Error, Result};
use crate::kernels::{distances, grad_inner_with, inner_products, GradientGeometry, KernelSpec};

/// Empirical bilinear forms over a pair of bases, averaged over the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramTriplet {
    /// `L_ij = mean_k H(phi_i, psi_j, x_k)`
    #[serde(with = "crate::io::matrix_rows")]
    pub l: DMatrix<f64>,
    /// `Phi_ij = mean_k phi_i(x_k) phi_j(x_k)`
    #[serde(with = "crate::io::matrix_rows")]
    pub phi: DMatrix<f64>,
    /// `Psi_ij = mean_k psi_i(x_k) psi_j(x_k)`
    #[serde(with = "crate::io::matrix_rows")]
    pub psi: DMatrix<f64>,
    pub n_samples: usize,
}

impl GramTriplet {
    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Leading `p x p` blocks. With nested landmarks this is the triplet of the
    /// first `p` basis functions.
    pub fn leading(&self, p: usize) -> GramTriplet {
        let p = p.min(self.dim());
        GramTriplet {
            l: self.l.view((0, 0), (p, p)).into_owned(),
            phi: self.phi.view((0, 0), (p, p)).into_owned(),
            psi: self.psi.view((0, 0), (p, p)).into_owned(),
            n_samples: self.n_samples,
        }
    }
}

/// A bilinear energy `H(f, g, x)` restricted to two finite bases.
///
/// Bilinearity in `(f, g)` is the implementor's responsibility; assembly only
/// ever evaluates basis indices.
pub trait HFunction: Sync {
    fn phi_len(&self) -> usize;
    fn psi_len(&self) -> usize;
    fn phi(&self, i: usize, x: &[f64]) -> f64;
    fn psi(&self, j: usize, x: &[f64]) -> f64;
    /// `H(phi_i, psi_j, x)`
    fn h(&self, i: usize, j: usize, x: &[f64]) -> f64;
}

/// Dirichlet energy over the Nystrom basis `phi_i = psi_i = k_{landmark_i}`,
/// evaluated pointwise. This is the slow reference the structured assemblies are
/// checked against.
pub struct KernelDirichlet<'a> {
    pub kernel: KernelSpec,
    pub landmarks: &'a Dataset,
    pub geometry: GradientGeometry,
}

impl HFunction for KernelDirichlet<'_> {
    fn phi_len(&self) -> usize {
        self.landmarks.n()
    }

    fn psi_len(&self) -> usize {
        self.landmarks.n()
    }

    fn phi(&self, i: usize, x: &[f64]) -> f64 {
        let y = self.landmarks.point(i);
        if self.kernel.is_dot_product() {
            self.kernel.q(dot(x, y))
        } else {
            crate::kernels::kernel_eval(&self.kernel, x, y).unwrap_or(f64::NAN)
        }
    }

    fn psi(&self, j: usize, x: &[f64]) -> f64 {
        self.phi(j, x)
    }

    fn h(&self, i: usize, j: usize, x: &[f64]) -> f64 {
        grad_inner_with(
            &self.kernel,
            self.geometry,
            self.landmarks.point(i),
            self.landmarks.point(j),
            x,
        )
        .unwrap_or(f64::NAN)
    }
}

const CHUNK: usize = 256;

/// Triple-loop assembly for an arbitrary `H`, `O(n p^2)` evaluations.
///
/// Data are split in fixed chunks of 256 points; partial sums are reduced in
/// chunk order, so the result does not depend on the thread schedule.
pub fn build_gram_generic<H: HFunction + ?Sized>(h: &H, data: &Dataset) -> Result<GramTriplet> {
    let (p, r) = (h.phi_len(), h.psi_len());
    if p == 0 || r == 0 {
        return Err(Error::input("basis must contain at least one function"));
    }
    let n = data.n();
    let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
    let partials: Vec<Result<[DMatrix<f64>; 3]>> = starts
        .par_iter()
        .map(|&start| {
            let mut l = DMatrix::zeros(p, r);
            let mut phi = DMatrix::zeros(p, p);
            let mut psi = DMatrix::zeros(r, r);
            let mut fv = vec![0.0; p];
            let mut gv = vec![0.0; r];
            for k in start..(start + CHUNK).min(n) {
                let x = data.point(k);
                for (i, f) in fv.iter_mut().enumerate() {
                    *f = h.phi(i, x);
                    if !f.is_finite() {
                        return Err(Error::Assembly { i, j: i, k });
                    }
                }
                for (j, g) in gv.iter_mut().enumerate() {
                    *g = h.psi(j, x);
                    if !g.is_finite() {
                        return Err(Error::Assembly { i: j, j, k });
                    }
                }
                for i in 0..p {
                    for j in 0..r {
                        let v = h.h(i, j, x);
                        if !v.is_finite() {
                            return Err(Error::Assembly { i, j, k });
                        }
                        l[(i, j)] += v;
                    }
                    for j in 0..p {
                        phi[(i, j)] += fv[i] * fv[j];
                    }
                }
                for i in 0..r {
                    for j in 0..r {
                        psi[(i, j)] += gv[i] * gv[j];
                    }
                }
            }
            Ok([l, phi, psi])
        })
        .collect();

    let mut l = DMatrix::zeros(p, r);
    let mut phi = DMatrix::zeros(p, p);
    let mut psi = DMatrix::zeros(r, r);
    for part in partials {
        let [pl, pphi, ppsi] = part?;
        l += pl;
        phi += pphi;
        psi += ppsi;
    }
    let inv = 1.0 / n as f64;
    Ok(GramTriplet {
        l: l * inv,
        phi: phi * inv,
        psi: psi * inv,
        n_samples: n,
    })
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Dirichlet-energy triplet for a dot-product kernel in `O(npd + np^2)`.
///
/// With `X_ik = landmark_i^T x_k` and `G_ij = landmark_i^T landmark_j`:
/// `Psi = q(X) q(X)^T / n` and `L = (q'(X) q'(X)^T / n) * G` elementwise.
pub fn build_gram_laplacian_dot(kernel: &KernelSpec, landmarks: &Dataset, data: &Dataset) -> Result<GramTriplet> {
    build_gram_laplacian_dot_with(kernel, GradientGeometry::Euclidean, landmarks, data)
}

pub fn build_gram_laplacian_dot_with(
    kernel: &KernelSpec,
    geometry: GradientGeometry,
    landmarks: &Dataset,
    data: &Dataset,
) -> Result<GramTriplet> {
    kernel.validate()?;
    if !kernel.is_dot_product() {
        return Err(Error::config(format!("{kernel} is not a dot-product kernel")));
    }
    landmarks.check_same_dim(data)?;
    let n = data.n();
    let inv = 1.0 / n as f64;

    let lm = landmarks.to_matrix();
    let x = &lm * data.to_matrix().transpose();
    let g = &lm * lm.transpose();
    let q = x.map(|t| kernel.q(t));
    let qp = x.map(|t| kernel.q_prime(t));
    check_samples(&q)?;
    check_samples(&qp)?;

    let mut psi = &q * q.transpose() * inv;
    let mut l = (&qp * qp.transpose() * inv).component_mul(&g);
    if geometry == GradientGeometry::Sphere {
        let norms: Vec<f64> = data.sq_norms().into_iter().map(f64::sqrt).collect();
        let radial = DMatrix::from_fn(x.nrows(), n, |i, k| {
            if norms[k] > 0.0 {
                qp[(i, k)] * x[(i, k)] / norms[k]
            } else {
                0.0
            }
        });
        l -= &radial * radial.transpose() * inv;
    }
    symmetrize(&mut l);
    symmetrize(&mut psi);
    check_sums(&l, n)?;
    check_sums(&psi, n)?;
    Ok(GramTriplet {
        l,
        phi: psi.clone(),
        psi,
        n_samples: n,
    })
}

/// Dirichlet-energy triplet for a distance kernel in `O(npd + np^2)`.
///
/// With `N_ik = |landmark_i - x_k|`, `T = q'(N) / N` and
/// `gamma_ij^(k) = D_k - X_ik - X_jk + G_ij = (x_k - landmark_i)^T (x_k - landmark_j)`,
/// `L_ij = mean_k gamma_ij^(k) T_ik T_jk`. The sum over `k` is split into
/// `T diag(D) T^T - C - C^T + G * (T T^T)` with `C = (T * X) T^T`.
pub fn build_gram_laplacian_dist(kernel: &KernelSpec, landmarks: &Dataset, data: &Dataset) -> Result<GramTriplet> {
    build_gram_laplacian_dist_with(kernel, GradientGeometry::Euclidean, landmarks, data)
}

pub fn build_gram_laplacian_dist_with(
    kernel: &KernelSpec,
    geometry: GradientGeometry,
    landmarks: &Dataset,
    data: &Dataset,
) -> Result<GramTriplet> {
    kernel.validate()?;
    if kernel.is_dot_product() {
        return Err(Error::config(format!("{kernel} is not a distance kernel")));
    }
    landmarks.check_same_dim(data)?;
    let n = data.n();
    let p = landmarks.n();
    let inv = 1.0 / n as f64;

    let lm = landmarks.to_matrix();
    let x = inner_products(landmarks, data);
    let g = &lm * lm.transpose();
    let data_sq = data.sq_norms();
    let dist = distances(&x, &landmarks.sq_norms(), &data_sq);
    let q = dist.map(|t| kernel.q(t));
    let t = dist.map(|t| kernel.q_prime_over_t(t));
    drop(dist);
    check_samples(&q)?;
    check_samples(&t)?;

    let mut psi = &q * q.transpose() * inv;
    drop(q);

    let td = DMatrix::from_fn(p, n, |i, k| t[(i, k)] * data_sq[k]);
    let mut l = &td * t.transpose();
    drop(td);
    let tx = t.component_mul(&x);
    let c = &tx * t.transpose();
    drop(tx);
    l -= &c;
    l -= c.transpose();
    l += (&t * t.transpose()).component_mul(&g);
    if geometry == GradientGeometry::Sphere {
        let radial = DMatrix::from_fn(p, n, |i, k| {
            if data_sq[k] > 0.0 {
                t[(i, k)] * (data_sq[k] - x[(i, k)]) / data_sq[k].sqrt()
            } else {
                0.0
            }
        });
        l -= &radial * radial.transpose();
    }
    l *= inv;
    symmetrize(&mut l);
    symmetrize(&mut psi);
    check_sums(&l, n)?;
    check_sums(&psi, n)?;
    Ok(GramTriplet {
        l,
        phi: psi.clone(),
        psi,
        n_samples: n,
    })
}

/// First non-finite entry of a `p x n` per-sample factor.
pub(crate) fn check_samples(m: &DMatrix<f64>) -> Result<()> {
    match m.iter().position(|v| !v.is_finite()) {
        Some(pos) => {
            let (i, k) = (pos % m.nrows(), pos / m.nrows());
            Err(Error::Assembly { i, j: i, k })
        }
        None => Ok(()),
    }
}

/// Overflow in the sum over samples, reported with `k = n`.
fn check_sums(m: &DMatrix<f64>, n: usize) -> Result<()> {
    match m.iter().position(|v| !v.is_finite()) {
        Some(pos) => Err(Error::Assembly {
            i: pos % m.nrows(),
            j: pos / m.nrows(),
            k: n,
        }),
        None => Ok(()),
    }
}

/// Structured Dirichlet-energy assembly for whichever family `kernel` belongs to.
pub fn build_gram_laplacian(
    kernel: &KernelSpec,
    geometry: GradientGeometry,
    landmarks: &Dataset,
    data: &Dataset,
) -> Result<GramTriplet> {
    if kernel.is_dot_product() {
        build_gram_laplacian_dot_with(kernel, geometry, landmarks, data)
    } else {
        build_gram_laplacian_dist_with(kernel, geometry, landmarks, data)
    }
}
