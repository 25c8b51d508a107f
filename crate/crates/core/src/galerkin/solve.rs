use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solution of the symmetric-definite pencil `L a = lambda (Psi + eps I) a`.
#[derive(Debug, Clone)]
pub struct Gevd {
    /// Ascending.
    pub values: Vec<f64>,
    /// Row `i` holds the coefficients of eigenvector `i`; `A (Psi + eps I) A^T = I`.
    pub vectors: DMatrix<f64>,
}

/// Generalized singular triplets `A L B^T = diag(values)`, descending.
#[derive(Debug, Clone)]
pub struct Gsvd {
    pub values: Vec<f64>,
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
}

fn check_square(name: &str, m: &DMatrix<f64>, p: usize) -> Result<()> {
    if m.nrows() != p || m.ncols() != p {
        return Err(Error::input(format!(
            "{name} is {}x{}, expected {p}x{p}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::input(format!("{name} has non-finite entries")));
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::input(format!("epsilon must be finite and >= 0, got {epsilon}")));
    }
    Ok(())
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn regularized(m: &DMatrix<f64>, epsilon: f64) -> DMatrix<f64> {
    let mut b = sym(m);
    for i in 0..b.nrows() {
        b[(i, i)] += epsilon;
    }
    b
}

/// Inverse lower Cholesky factor of `Psi + eps I`.
fn inverse_factor(psi: &DMatrix<f64>, epsilon: f64) -> Result<DMatrix<f64>> {
    let p = psi.nrows();
    check_square("Psi", psi, p)?;
    check_epsilon(epsilon)?;
    let chol = regularized(psi, epsilon).cholesky().ok_or_else(|| {
        Error::solver(format!(
            "Psi + eps I is not positive definite (eps = {epsilon:e}); try a larger epsilon"
        ))
    })?;
    let mut linv = DMatrix::identity(p, p);
    if !chol.l_dirty().solve_lower_triangular_mut(&mut linv) {
        return Err(Error::solver("singular Cholesky factor; try a larger epsilon"));
    }
    linv.fill_upper_triangle(0.0, 1);
    Ok(linv)
}

/// Inverse factor and the whitened `L`.
fn whiten(l: &DMatrix<f64>, psi: &DMatrix<f64>, epsilon: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_square("L", l, psi.nrows())?;
    let linv = inverse_factor(psi, epsilon)?;
    let m = sym(&(&linv * sym(l) * linv.transpose()));
    Ok((linv, m))
}

fn ascending_order(values: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order
}

/// `L a = lambda (Psi + eps I) a` by Cholesky whitening and a symmetric EVD.
pub fn gevd(l: &DMatrix<f64>, psi: &DMatrix<f64>, epsilon: f64) -> Result<Gevd> {
    let (linv, m) = whiten(l, psi, epsilon)?;
    let eig = m.symmetric_eigen();
    let order = ascending_order(&eig.eigenvalues);
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    // a_i = L^{-T} v_i, stored as rows: A = V^T L^{-1}.
    let vt = DMatrix::from_fn(order.len(), order.len(), |r, c| eig.eigenvectors[(c, order[r])]);
    Ok(Gevd {
        values,
        vectors: vt * linv,
    })
}

/// Eigenvalues only, ascending, as [`gevd`].
pub fn gevd_values(l: &DMatrix<f64>, psi: &DMatrix<f64>, epsilon: f64) -> Result<Vec<f64>> {
    let (_, m) = whiten(l, psi, epsilon)?;
    let mut values: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Whitening of `Psi + eps I` on the numerical range of `Psi`, reusable across
/// several `L` sharing the same `Psi`.
///
/// Eigen-directions of `Psi` with `mu <= p * EPS * mu_max` are dropped, so a
/// rank-`r` `Psi` yields `r` eigenpairs. Basis functions that vanish on the data
/// carry no information, and keeping them only adds eigenvalues of size
/// `rounding / eps`.
#[derive(Debug, Clone)]
pub struct Whitener {
    /// `p x r`, columns `u_i / sqrt(mu_i + eps)`.
    w: DMatrix<f64>,
    epsilon: f64,
}

impl Whitener {
    pub fn new(psi: &DMatrix<f64>, epsilon: f64) -> Result<Self> {
        check_square("Psi", psi, psi.nrows())?;
        check_epsilon(epsilon)?;
        let eig = sym(psi).symmetric_eigen();
        let top = eig.eigenvalues.max();
        let cut = psi.nrows() as f64 * f64::EPSILON * top;
        let keep: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&i| eig.eigenvalues[i] > cut && eig.eigenvalues[i] > 0.0)
            .collect();
        if keep.is_empty() {
            return Err(Error::solver(
                "Psi has no positive eigenvalues; the basis vanishes on the data",
            ));
        }
        let w = DMatrix::from_fn(psi.nrows(), keep.len(), |r, c| {
            eig.eigenvectors[(r, keep[c])] / (eig.eigenvalues[keep[c]] + epsilon).sqrt()
        });
        Ok(Whitener { w, epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Retained rank `r`.
    pub fn rank(&self) -> usize {
        self.w.ncols()
    }

    fn whitened(&self, l: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_square("L", l, self.w.nrows())?;
        Ok(sym(&(self.w.transpose() * sym(l) * &self.w)))
    }

    /// Ascending eigenvalues of the restricted pencil.
    pub fn values(&self, l: &DMatrix<f64>) -> Result<Vec<f64>> {
        let mut values: Vec<f64> = self.whitened(l)?.symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(f64::total_cmp);
        Ok(values)
    }

    /// Eigenpairs of the restricted pencil; `vectors` is `r x p` with
    /// `A (Psi + eps I) A^T = I`.
    pub fn solve(&self, l: &DMatrix<f64>) -> Result<Gevd> {
        let eig = self.whitened(l)?.symmetric_eigen();
        let order = ascending_order(&eig.eigenvalues);
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vt = DMatrix::from_fn(order.len(), order.len(), |r, c| eig.eigenvectors[(c, order[r])]);
        Ok(Gevd {
            values,
            vectors: vt * self.w.transpose(),
        })
    }
}

/// Pseudo-inverse square root of `m + eps I`, as `p x r` with `r` the retained rank.
fn inv_sqrt(m: &DMatrix<f64>, epsilon: f64) -> DMatrix<f64> {
    let eig = regularized(m, epsilon).symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let cut = m.nrows() as f64 * f64::EPSILON * top;
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > cut && eig.eigenvalues[i] > 0.0)
        .collect();
    DMatrix::from_fn(m.nrows(), keep.len(), |r, c| {
        eig.eigenvectors[(r, keep[c])] / eig.eigenvalues[keep[c]].sqrt()
    })
}

/// Generalized SVD of `L` relative to `(Phi + eps I, Psi + eps I)`.
///
/// With `W_Phi`, `W_Psi` the pseudo-inverse square roots and
/// `W_Phi^T L W_Psi = X S Y^T`, returns `A = X^T W_Phi^T`, `B = Y^T W_Psi^T`.
/// Directions where the regularized Gram is numerically singular are dropped.
pub fn gsvd(l: &DMatrix<f64>, phi: &DMatrix<f64>, psi: &DMatrix<f64>, epsilon: f64) -> Result<Gsvd> {
    let p = l.nrows();
    check_square("L", l, p)?;
    check_square("Phi", phi, p)?;
    check_square("Psi", psi, p)?;
    check_epsilon(epsilon)?;
    let wphi = inv_sqrt(phi, epsilon);
    let wpsi = inv_sqrt(psi, epsilon);
    if wphi.ncols() == 0 || wpsi.ncols() == 0 {
        return Err(Error::solver(
            "basis Gram matrix is numerically zero; try a larger epsilon",
        ));
    }
    let m = wphi.transpose() * l * &wpsi;
    let svd = m.svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::solver("SVD did not converge")),
    };
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let r = order.len();
    let x = DMatrix::from_fn(u.nrows(), r, |i, c| u[(i, order[c])]);
    let yt = DMatrix::from_fn(r, vt.ncols(), |c, j| vt[(order[c], j)]);
    Ok(Gsvd {
        values: order.iter().map(|&i| s[i]).collect(),
        left: x.transpose() * wphi.transpose(),
        right: yt * wpsi.transpose(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let g = DMatrix::from_fn(p, p + 3, |_, _| rng.random_range(-1.0..1.0));
        &g * g.transpose() / p as f64
    }

    fn max_abs_off_identity(m: &DMatrix<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((m[(i, j)] - target).abs());
            }
        }
        worst
    }

    #[test]
    fn diagonal_pencil() {
        let l = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        let g = gevd(&l, &DMatrix::identity(2, 2), 0.0).unwrap();
        assert!((g.values[0] - 1.0).abs() < 1e-15 && (g.values[1] - 2.0).abs() < 1e-15);
        assert!((g.vectors[(0, 1)].abs() - 1.0).abs() < 1e-15);
        assert!(g.vectors[(0, 0)].abs() < 1e-15);
    }

    #[test]
    fn identical_pencil_gives_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_spd(8, &mut rng);
        let g = gevd(&s, &s, 0.0).unwrap();
        assert!(g.values.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn scale_cancels() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let l = random_spd(10, &mut rng);
        let psi = random_spd(10, &mut rng);
        let base = gevd_values(&l, &psi, 0.0).unwrap();
        for c in [1e-3, 1.0, 1e3] {
            let scaled = gevd_values(&(&l * c), &(&psi * c), 0.0).unwrap();
            for (a, b) in base.iter().zip(&scaled) {
                assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{c}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn contract_on_random_pencils() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in [1, 2, 7, 20, 50] {
            let l = random_spd(p, &mut rng);
            let psi = random_spd(p, &mut rng);
            let eps = 1e-6;
            let g = gevd(&l, &psi, eps).unwrap();
            let a = &g.vectors;
            let gram = a * regularized(&psi, eps) * a.transpose();
            assert!(max_abs_off_identity(&gram) < 1e-8, "p={p}");
            let lam = a * &l * a.transpose();
            for i in 0..p {
                for j in 0..p {
                    let target = if i == j { g.values[i] } else { 0.0 };
                    assert!((lam[(i, j)] - target).abs() < 1e-8);
                }
            }
            assert!(g.values.windows(2).all(|w| w[0] <= w[1]));
            let only = gevd_values(&l, &psi, eps).unwrap();
            for (x, y) in only.iter().zip(&g.values) {
                assert!((x - y).abs() < 1e-12 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn not_definite_is_solver_error() {
        let zero = DMatrix::zeros(3, 3);
        assert!(matches!(gevd(&zero, &zero, 0.0), Err(Error::Solver(_))));
        assert!(gevd(&zero, &zero, 1e-3).is_ok());
        assert!(matches!(gevd(&zero, &zero, -1.0), Err(Error::Input(_))));
    }

    #[test]
    fn gsvd_matches_gevd_on_symmetric_pencils() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for p in [3, 12, 30] {
            let l = random_spd(p, &mut rng);
            let psi = random_spd(p, &mut rng);
            let mut ev = gevd_values(&l, &psi, 0.0).unwrap();
            let s = gsvd(&l, &psi, &psi, 0.0).unwrap();
            ev.reverse();
            assert_eq!(s.values.len(), p);
            for (a, b) in s.values.iter().zip(&ev) {
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} vs {b}");
            }
            let d = &s.left * &l * s.right.transpose();
            for i in 0..p {
                for j in 0..p {
                    let target = if i == j { s.values[i] } else { 0.0 };
                    assert!((d[(i, j)] - target).abs() < 1e-8);
                }
            }
            assert!(max_abs_off_identity(&(&s.left * &psi * s.left.transpose())) < 1e-8);
        }
    }

    #[test]
    fn gsvd_trivial_cases() {
        let id = DMatrix::<f64>::identity(4, 4);
        let s = gsvd(&id, &id, &id, 0.0).unwrap();
        assert!(s.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
        assert!(max_abs_off_identity(&(&s.left * s.left.transpose())) < 1e-14);
        let s = gsvd(&DMatrix::zeros(4, 4), &id, &id, 0.0).unwrap();
        assert!(s.values.iter().all(|&v| v == 0.0));
    }
}
