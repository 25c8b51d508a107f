//! Kernel profiles and their gradients.
//!
//! Every kernel here is either a dot-product kernel `k_y(x) = q(x^T y)` or a
//! distance kernel `k_y(x) = q(|x - y|)`. Gradients of kernel sections only ever
//! enter through `q'`, which is what makes the structured Gram assemblies in
//! [`crate::galerkin`] possible.
//!
//! Squared distances are always formed as `|x|^2 - 2 x^T y + |y|^2`, the same
//! expansion the matrix code paths use, so pointwise and batched evaluations
//! agree to rounding.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{dot, Dataset};
use crate::error::{Error, Result};

/// Below this relative size a squared distance built from the expansion is rounding noise.
const COINCIDENT_RTOL: f64 = 64.0 * f64::EPSILON;
const COINCIDENT_ABS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr", into = "KernelRepr")]
pub enum KernelSpec {
    /// `q(t) = (offset + scale * t)^degree`
    PolynomialDot { degree: u32, offset: f64, scale: f64 },
    /// `q(t) = exp(-t / sigma)`
    ExponentialDist { sigma: f64 },
    /// `q(t) = exp(-t^2 / (2 sigma^2))`
    GaussianDist { sigma: f64 },
}

/// Which gradient enters `H0(f, g, x) = <grad f(x), grad g(x)>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientGeometry {
    /// Full gradient in `R^d`.
    #[default]
    Euclidean,
    /// Gradient projected on the tangent space of the centered sphere through `x`,
    /// `P_x = I - x x^T / |x|^2`. This is the Dirichlet form of the Laplace-Beltrami
    /// operator when the data live on a sphere.
    Sphere,
}

#[derive(Serialize, Deserialize)]
struct KernelRepr {
    family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    degree: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
}

impl TryFrom<KernelRepr> for KernelSpec {
    type Error = Error;

    fn try_from(r: KernelRepr) -> Result<Self> {
        let spec = match r.family.as_str() {
            "poly" => KernelSpec::PolynomialDot {
                degree: r
                    .degree
                    .ok_or_else(|| Error::config("polynomial kernel needs \"degree\""))?,
                offset: r.offset.unwrap_or(1.0),
                scale: r.scale.unwrap_or(1.0),
            },
            "exp" => KernelSpec::ExponentialDist {
                sigma: r
                    .sigma
                    .ok_or_else(|| Error::config("exponential kernel needs \"sigma\""))?,
            },
            "gauss" => KernelSpec::GaussianDist {
                sigma: r
                    .sigma
                    .ok_or_else(|| Error::config("gaussian kernel needs \"sigma\""))?,
            },
            other => return Err(Error::config(format!("unknown kernel family {other:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<KernelSpec> for KernelRepr {
    fn from(k: KernelSpec) -> Self {
        match k {
            KernelSpec::PolynomialDot { degree, offset, scale } => KernelRepr {
                family: "poly".into(),
                degree: Some(degree),
                offset: Some(offset),
                scale: Some(scale),
                sigma: None,
            },
            KernelSpec::ExponentialDist { sigma } => KernelRepr {
                family: "exp".into(),
                degree: None,
                offset: None,
                scale: None,
                sigma: Some(sigma),
            },
            KernelSpec::GaussianDist { sigma } => KernelRepr {
                family: "gauss".into(),
                degree: None,
                offset: None,
                scale: None,
                sigma: Some(sigma),
            },
        }
    }
}

impl std::fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelSpec::PolynomialDot { degree, offset, scale } => {
                write!(f, "poly(s={degree}, c0={offset}, c1={scale})")
            }
            KernelSpec::ExponentialDist { sigma } => write!(f, "exp(sigma={sigma})"),
            KernelSpec::GaussianDist { sigma } => write!(f, "gauss(sigma={sigma})"),
        }
    }
}

impl std::str::FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl KernelSpec {
    /// `(1 + t)^degree`.
    pub fn polynomial(degree: u32) -> Self {
        KernelSpec::PolynomialDot {
            degree,
            offset: 1.0,
            scale: 1.0,
        }
    }

    pub fn polynomial_with(degree: u32, offset: f64, scale: f64) -> Self {
        KernelSpec::PolynomialDot { degree, offset, scale }
    }

    pub fn exponential(sigma: f64) -> Self {
        KernelSpec::ExponentialDist { sigma }
    }

    pub fn gaussian(sigma: f64) -> Self {
        KernelSpec::GaussianDist { sigma }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::PolynomialDot { degree, offset, scale } => {
                if degree == 0 {
                    return Err(Error::config("polynomial degree must be >= 1"));
                }
                if !offset.is_finite() || !scale.is_finite() {
                    return Err(Error::config("polynomial offset/scale must be finite"));
                }
            }
            KernelSpec::ExponentialDist { sigma } | KernelSpec::GaussianDist { sigma } => {
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::config(format!("bandwidth must be positive, got {sigma}")));
                }
            }
        }
        Ok(())
    }

    pub fn is_dot_product(&self) -> bool {
        matches!(self, KernelSpec::PolynomialDot { .. })
    }

    /// The profile `q`, unchecked.
    #[inline]
    pub fn q(&self, t: f64) -> f64 {
        match *self {
            KernelSpec::PolynomialDot { degree, offset, scale } => (offset + scale * t).powi(degree as i32),
            KernelSpec::ExponentialDist { sigma } => (-t / sigma).exp(),
            KernelSpec::GaussianDist { sigma } => (-t * t / (2.0 * sigma * sigma)).exp(),
        }
    }

    /// The derivative `q'`, unchecked.
    #[inline]
    pub fn q_prime(&self, t: f64) -> f64 {
        match *self {
            KernelSpec::PolynomialDot { degree, offset, scale } => {
                degree as f64 * scale * (offset + scale * t).powi(degree as i32 - 1)
            }
            KernelSpec::ExponentialDist { sigma } => -(-t / sigma).exp() / sigma,
            KernelSpec::GaussianDist { sigma } => -(t / (sigma * sigma)) * (-t * t / (2.0 * sigma * sigma)).exp(),
        }
    }

    /// `q'(t) / t` for distance kernels. Zero at coincident points for the
    /// exponential kernel (symmetric subgradient); the Gaussian ratio is computed
    /// in closed form and has no singularity.
    #[inline]
    pub(crate) fn q_prime_over_t(&self, t: f64) -> f64 {
        match *self {
            KernelSpec::GaussianDist { sigma } => -(-t * t / (2.0 * sigma * sigma)).exp() / (sigma * sigma),
            KernelSpec::ExponentialDist { sigma } => {
                if t == 0.0 {
                    0.0
                } else {
                    -(-t / sigma).exp() / (sigma * t)
                }
            }
            KernelSpec::PolynomialDot { .. } => unreachable!("dot-product kernel has no distance ratio"),
        }
    }

    fn check_t(&self, t: f64) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::input(format!("non-finite kernel argument {t}")));
        }
        if !self.is_dot_product() && t < 0.0 {
            return Err(Error::input(format!("distance kernel argument must be >= 0, got {t}")));
        }
        Ok(())
    }
}

/// `q(t)` with argument checks.
pub fn q_eval(kernel: &KernelSpec, t: f64) -> Result<f64> {
    kernel.validate()?;
    kernel.check_t(t)?;
    Ok(kernel.q(t))
}

/// `q'(t)` with argument checks.
pub fn q_prime(kernel: &KernelSpec, t: f64) -> Result<f64> {
    kernel.validate()?;
    kernel.check_t(t)?;
    Ok(kernel.q_prime(t))
}

/// Squared distance from `|x|^2`, `|y|^2` and `x^T y`; rounding noise at coincident
/// points is mapped to an exact zero and small negatives are clamped.
#[inline]
pub(crate) fn expanded_sq_dist(xx: f64, yy: f64, xy: f64) -> f64 {
    let sq = xx - 2.0 * xy + yy;
    if sq <= COINCIDENT_RTOL * (xx + yy) || sq < COINCIDENT_ABS * COINCIDENT_ABS {
        0.0
    } else {
        sq
    }
}

fn check_dims(vs: &[&[f64]]) -> Result<usize> {
    let d = vs[0].len();
    if vs.iter().any(|v| v.len() != d) {
        return Err(Error::input("dimension mismatch between kernel arguments"));
    }
    Ok(d)
}

/// `k_x(y)`.
pub fn kernel_eval(kernel: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    kernel.validate()?;
    check_dims(&[x, y])?;
    let xy = dot(x, y);
    Ok(if kernel.is_dot_product() {
        kernel.q(xy)
    } else {
        kernel.q(expanded_sq_dist(dot(x, x), dot(y, y), xy).sqrt())
    })
}

/// `grad_x k_y(x)`.
pub fn kernel_grad(kernel: &KernelSpec, y: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    kernel.validate()?;
    check_dims(&[y, x])?;
    if kernel.is_dot_product() {
        let c = kernel.q_prime(dot(x, y));
        Ok(y.iter().map(|yi| c * yi).collect())
    } else {
        let n = expanded_sq_dist(dot(x, x), dot(y, y), dot(x, y)).sqrt();
        let c = kernel.q_prime_over_t(n);
        Ok(x.iter().zip(y).map(|(xi, yi)| c * (xi - yi)).collect())
    }
}

/// `H0(k_y, k_z, x) = <grad k_y(x), grad k_z(x)>` with Euclidean gradients.
pub fn grad_inner(kernel: &KernelSpec, y: &[f64], z: &[f64], x: &[f64]) -> Result<f64> {
    grad_inner_with(kernel, GradientGeometry::Euclidean, y, z, x)
}

/// [`grad_inner`] under the chosen gradient geometry.
pub fn grad_inner_with(
    kernel: &KernelSpec,
    geometry: GradientGeometry,
    y: &[f64],
    z: &[f64],
    x: &[f64],
) -> Result<f64> {
    kernel.validate()?;
    check_dims(&[y, z, x])?;
    let xx = dot(x, x);
    let xy = dot(x, y);
    let xz = dot(x, z);
    let yz = dot(y, z);
    let project = geometry == GradientGeometry::Sphere && xx > 0.0;
    if kernel.is_dot_product() {
        let mut g = yz;
        if project {
            g -= xy * xz / xx;
        }
        Ok(kernel.q_prime(xy) * kernel.q_prime(xz) * g)
    } else {
        let ny = expanded_sq_dist(xx, dot(y, y), xy).sqrt();
        let nz = expanded_sq_dist(xx, dot(z, z), xz).sqrt();
        // (x - y)^T (x - z), written so that swapping y and z is bit-exact
        let mut gamma = xx - (xy + xz) + yz;
        if project {
            gamma -= (xx - xy) * (xx - xz) / xx;
        }
        Ok(kernel.q_prime_over_t(ny) * kernel.q_prime_over_t(nz) * gamma)
    }
}

/// `<grad k_y(x), t>`.
pub fn grad_dot(kernel: &KernelSpec, y: &[f64], x: &[f64], t: &[f64]) -> Result<f64> {
    kernel.validate()?;
    check_dims(&[y, x, t])?;
    let xy = dot(x, y);
    if kernel.is_dot_product() {
        Ok(kernel.q_prime(xy) * dot(y, t))
    } else {
        let n = expanded_sq_dist(dot(x, x), dot(y, y), xy).sqrt();
        Ok(kernel.q_prime_over_t(n) * (dot(x, t) - dot(y, t)))
    }
}

/// Inner products `landmark_i^T data_k` as a `p x n` matrix.
pub(crate) fn inner_products(landmarks: &Dataset, data: &Dataset) -> DMatrix<f64> {
    landmarks.to_matrix() * data.to_matrix().transpose()
}

/// Distances `|landmark_i - data_k|` from the inner products.
pub(crate) fn distances(x: &DMatrix<f64>, lm_sq: &[f64], data_sq: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, k| {
        expanded_sq_dist(lm_sq[i], data_sq[k], x[(i, k)]).sqrt()
    })
}

/// `K_ik = k_{landmark_i}(data_k)`, a `p x n` matrix.
pub fn cross_gram(kernel: &KernelSpec, landmarks: &Dataset, data: &Dataset) -> Result<DMatrix<f64>> {
    kernel.validate()?;
    landmarks.check_same_dim(data)?;
    let x = inner_products(landmarks, data);
    Ok(if kernel.is_dot_product() {
        x.map(|t| kernel.q(t))
    } else {
        distances(&x, &landmarks.sq_norms(), &data.sq_norms()).map(|t| kernel.q(t))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn families() -> Vec<KernelSpec> {
        vec![
            KernelSpec::polynomial(3),
            KernelSpec::polynomial_with(4, 0.5, 0.5),
            KernelSpec::exponential(1.3),
            KernelSpec::gaussian(0.8),
        ]
    }

    fn fd_grad(kernel: &KernelSpec, y: &[f64], x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|l| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[l] += h;
                xm[l] -= h;
                (kernel_eval(kernel, &xp, y).unwrap() - kernel_eval(kernel, &xm, y).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    fn rand_vec(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
        (0..d).map(|_| rng.random_range(-scale..scale)).collect()
    }

    #[test]
    fn profile_examples() {
        let poly3 = KernelSpec::polynomial(3);
        assert_eq!(q_eval(&poly3, 1.0).unwrap(), 8.0);
        assert_eq!(q_eval(&KernelSpec::gaussian(1.0), 0.0).unwrap(), 1.0);
        let e = q_eval(&KernelSpec::exponential(2.0), 2.0).unwrap();
        assert!((e - (-1.0f64).exp()).abs() < 1e-15);
        assert!((e - 0.367879).abs() < 1e-6);

        assert_eq!(q_prime(&poly3, 1.0).unwrap(), 12.0);
        assert_eq!(q_prime(&KernelSpec::gaussian(1.0), 0.0).unwrap(), 0.0);
        // central difference of (1 + t)^2 at 0, h = 1e-6
        let poly2 = KernelSpec::polynomial(2);
        let h = 1e-6;
        let fd = (poly2.q(h) - poly2.q(-h)) / (2.0 * h);
        assert!((fd - 2.0).abs() < 1e-8);
        assert!((q_prime(&poly2, 0.0).unwrap() - fd).abs() < 1e-8);
    }

    #[test]
    fn argument_errors() {
        assert!(q_eval(&KernelSpec::gaussian(1.0), f64::NAN).is_err());
        assert!(q_eval(&KernelSpec::gaussian(1.0), -1.0).is_err());
        assert!(q_eval(&KernelSpec::polynomial(2), -1.0).is_ok());
        assert!(q_eval(&KernelSpec::gaussian(0.0), 1.0).is_err());
        assert!(q_eval(&KernelSpec::polynomial(0), 1.0).is_err());
        assert!(kernel_eval(&KernelSpec::gaussian(1.0), &[1.0], &[1.0, 2.0]).is_err());
        assert!(grad_inner(&KernelSpec::gaussian(1.0), &[1.0], &[1.0], &[1.0, 2.0]).is_err());
        assert!(grad_dot(&KernelSpec::gaussian(1.0), &[1.0], &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn kernel_eval_examples() {
        let g = KernelSpec::gaussian(1.0);
        assert_eq!(kernel_eval(&g, &[0.3, -2.0], &[0.3, -2.0]).unwrap(), 1.0);
        assert_eq!(
            kernel_eval(&KernelSpec::polynomial(3), &[1.0, 0.0], &[1.0, 0.0]).unwrap(),
            8.0
        );
        let e = kernel_eval(&KernelSpec::exponential(1.0), &[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((e - (-5.0f64).exp()).abs() < 1e-15);
        assert!((e - 0.0067379).abs() < 1e-7);
    }

    #[test]
    fn grad_inner_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lin = KernelSpec::polynomial(1);
        for _ in 0..10 {
            let (x, y, z) = (
                rand_vec(&mut rng, 4, 2.0),
                rand_vec(&mut rng, 4, 2.0),
                rand_vec(&mut rng, 4, 2.0),
            );
            let v = grad_inner(&lin, &y, &z, &x).unwrap();
            assert!((v - dot(&y, &z)).abs() < 1e-14);
        }
        let v = grad_inner(&KernelSpec::polynomial(2), &[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0]).unwrap();
        assert_eq!(v, 0.0);

        let g = KernelSpec::gaussian(1.0);
        let (x, y) = ([1.0, 0.0], [0.0, 0.0]);
        let v = grad_inner(&g, &y, &y, &x).unwrap();
        let fd = fd_grad(&g, &y, &x, 1e-5);
        let fd_v = dot(&fd, &fd);
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - fd_v).abs() < 1e-9);
        assert!((v - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn grad_dot_examples() {
        for k in families() {
            assert_eq!(grad_dot(&k, &[0.2, 0.4], &[1.0, -1.0], &[0.0, 0.0]).unwrap(), 0.0);
        }
        let v = grad_dot(&KernelSpec::polynomial(1), &[1.0, 0.0], &[0.4, 0.9], &[1.0, 0.0]).unwrap();
        assert_eq!(v, 1.0);
        let g = KernelSpec::gaussian(1.0);
        let v = grad_dot(&g, &[0.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]).unwrap();
        let fd = fd_grad(&g, &[0.0, 0.0], &[1.0, 0.0], 1e-5);
        assert!((v - fd[0]).abs() < 1e-9);
        assert!((v + (-0.5f64).exp()).abs() < 1e-15);
        assert!((v + 0.606531).abs() < 1e-6);
    }

    #[test]
    fn exponential_at_coincident_points_is_zero() {
        let e = KernelSpec::exponential(1.0);
        let x = [0.1, 0.7, -0.3];
        let z = [1.0, 0.0, 0.0];
        assert_eq!(grad_inner(&e, &x, &z, &x).unwrap(), 0.0);
        assert_eq!(grad_dot(&e, &x, &x, &z).unwrap(), 0.0);
        assert!(kernel_grad(&e, &x, &x).unwrap().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn q_prime_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-6;
        for k in families() {
            for _ in 0..100 {
                let t: f64 = if k.is_dot_product() {
                    rng.random_range(-0.9..2.0)
                } else {
                    rng.random_range(1e-3..3.0)
                };
                let fd = (k.q(t + h) - k.q(t - h)) / (2.0 * h);
                let qp = k.q_prime(t);
                assert!((qp - fd).abs() <= 1e-5 * (1.0 + qp.abs()), "{k} t={t}: {qp} vs {fd}");
            }
        }
    }

    #[test]
    fn grad_inner_matches_finite_difference_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in families() {
            for d in [2, 5, 10] {
                for _ in 0..100 {
                    let x = rand_vec(&mut rng, d, 0.6);
                    let y = rand_vec(&mut rng, d, 0.6);
                    let z = rand_vec(&mut rng, d, 0.6);
                    let gy = fd_grad(&k, &y, &x, 1e-5);
                    let gz = fd_grad(&k, &z, &x, 1e-5);
                    let oracle = dot(&gy, &gz);
                    let v = grad_inner(&k, &y, &z, &x).unwrap();
                    let scale = dot(&gy, &gy).sqrt() * dot(&gz, &gz).sqrt();
                    assert!(
                        (v - oracle).abs() <= 1e-6 * scale.max(v.abs()).max(1e-300),
                        "{k} d={d}: {v} vs {oracle}"
                    );
                }
            }
        }
    }

    #[test]
    fn sphere_geometry_drops_radial_part() {
        // On the unit circle, k_y(x) = x^T y with y = x has a purely radial gradient.
        let lin = KernelSpec::polynomial(1);
        let x = [0.6, 0.8];
        let v = grad_inner_with(&lin, GradientGeometry::Sphere, &x, &x, &x).unwrap();
        assert!(v.abs() < 1e-15);
        let t = [-0.8, 0.6];
        let v = grad_inner_with(&lin, GradientGeometry::Sphere, &t, &t, &x).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cross_gram_examples() {
        let data = Dataset::from_rows(&[[0.0, 1.0], [2.0, -1.0], [0.5, 0.5]]).unwrap();
        let g = cross_gram(&KernelSpec::gaussian(1.0), &data, &data).unwrap();
        for i in 0..3 {
            assert_eq!(g[(i, i)], 1.0);
        }
        let origin = Dataset::from_rows(&[[0.0, 0.0]]).unwrap();
        let e1 = Dataset::from_rows(&[[1.0, 0.0]]).unwrap();
        assert_eq!(
            cross_gram(&KernelSpec::polynomial(3), &origin, &e1).unwrap()[(0, 0)],
            1.0
        );

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lm = Dataset::from_row_major(3, 2, rand_vec(&mut rng, 6, 1.0)).unwrap();
        let pts = Dataset::from_row_major(5, 2, rand_vec(&mut rng, 10, 1.0)).unwrap();
        for k in families() {
            let m = cross_gram(&k, &lm, &pts).unwrap();
            for i in 0..3 {
                for j in 0..5 {
                    let v = kernel_eval(&k, lm.point(i), pts.point(j)).unwrap();
                    assert!((m[(i, j)] - v).abs() <= 1e-12);
                }
            }
        }
        assert!(cross_gram(&KernelSpec::polynomial(2), &lm, &Dataset::from_rows(&[[1.0]]).unwrap()).is_err());
    }

    #[test]
    fn json_shape() {
        let k: KernelSpec = r#"{"family":"poly","degree":3}"#.parse().unwrap();
        assert_eq!(k, KernelSpec::polynomial(3));
        let k: KernelSpec = r#"{"family":"gauss","sigma":0.5}"#.parse().unwrap();
        assert_eq!(k, KernelSpec::gaussian(0.5));
        assert!(r#"{"family":"exp"}"#.parse::<KernelSpec>().is_err());
        assert!(r#"{"family":"exp","sigma":-1}"#.parse::<KernelSpec>().is_err());
        assert!(r#"{"family":"laplace","sigma":1}"#.parse::<KernelSpec>().is_err());
        let s = serde_json::to_string(&KernelSpec::exponential(2.0)).unwrap();
        assert_eq!(s, r#"{"family":"exp","sigma":2.0}"#);
    }

    proptest! {
        #[test]
        fn grad_inner_is_symmetric(
            y in prop::collection::vec(-2.0f64..2.0, 3),
            z in prop::collection::vec(-2.0f64..2.0, 3),
            x in prop::collection::vec(-2.0f64..2.0, 3),
            fam in 0usize..4,
            sphere in any::<bool>(),
        ) {
            let k = families()[fam];
            let geo = if sphere { GradientGeometry::Sphere } else { GradientGeometry::Euclidean };
            let a = grad_inner_with(&k, geo, &y, &z, &x).unwrap();
            let b = grad_inner_with(&k, geo, &z, &y, &x).unwrap();
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }

        #[test]
        fn grad_dot_is_linear_in_t(
            y in prop::collection::vec(-1.0f64..1.0, 4),
            x in prop::collection::vec(-1.0f64..1.0, 4),
            t1 in prop::collection::vec(-1.0f64..1.0, 4),
            t2 in prop::collection::vec(-1.0f64..1.0, 4),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            fam in 0usize..4,
        ) {
            let k = families()[fam];
            let t: Vec<f64> = t1.iter().zip(&t2).map(|(u, v)| a * u + b * v).collect();
            let lhs = grad_dot(&k, &y, &x, &t).unwrap();
            let rhs = a * grad_dot(&k, &y, &x, &t1).unwrap() + b * grad_dot(&k, &y, &x, &t2).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }
}
