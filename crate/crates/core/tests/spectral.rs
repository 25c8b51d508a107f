use galerkin_core::galerkin::{
    build_gram_generic, build_gram_laplacian, decompose, empirical_orthogonality, evaluate_eigenfunction, gevd,
    DecomposeOptions, KernelDirichlet,
};
use galerkin_core::ground_truth::{sample_gaussian, sample_sphere};
use galerkin_core::io::Container;
use galerkin_core::kernels::cross_gram;
use galerkin_core::{Dataset, GradientGeometry, KernelSpec, SpectralEstimate};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn kernel_strategy() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        (1u32..=5, 0.5f64..2.0, 0.5f64..2.0).prop_map(|(s, c0, c1)| KernelSpec::polynomial_with(s, c0, c1)),
        (0.5f64..3.0).prop_map(KernelSpec::exponential),
        (0.5f64..3.0).prop_map(KernelSpec::gaussian),
    ]
}

/// Largest `(|x|^2 + |y|^2) / |x - y|^2` over distinct landmark-point pairs.
fn expansion_ratio(landmarks: &Dataset, data: &Dataset) -> f64 {
    let mut worst = 0.0f64;
    for y in landmarks.points() {
        for x in data.points() {
            let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            if sq > 0.0 {
                let norms: f64 = x.iter().chain(y).map(|v| v * v).sum();
                worst = worst.max(norms / sq);
            }
        }
    }
    worst
}

fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn structured_assembly_matches_pointwise(
        kernel in kernel_strategy(),
        d in prop::sample::select(vec![2usize, 5, 10]),
        sphere in any::<bool>(),
        seed in 0u64..1000,
    ) {
        let draw = |n, seed| if sphere { sample_sphere(n, d, seed).unwrap() } else { sample_gaussian(n, d, seed).unwrap() };
        // Landmarks drawn apart from the data: at an exact coincidence the expansion
        // leaves |x|^2 EPS of rounding against a true gradient of zero.
        let data = draw(60, seed);
        let lm = draw(8, seed + 5000);
        let geometry = if sphere { GradientGeometry::Sphere } else { GradientGeometry::Euclidean };
        let fast = build_gram_laplacian(&kernel, geometry, &lm, &data).unwrap();
        let slow = build_gram_generic(&KernelDirichlet { kernel, landmarks: &lm, geometry }, &data).unwrap();
        // Distances from the norm expansion lose relative accuracy |x|^2 EPS / |x - y|^2.
        let tol = if kernel.is_dot_product() { 1e-10 } else { 1e-10 + 64.0 * f64::EPSILON * expansion_ratio(&lm, &data) };
        prop_assert!(rel_diff(&fast.l, &slow.l) <= tol);
        prop_assert!(rel_diff(&fast.psi, &slow.psi) <= tol);
    }

    #[test]
    fn assembled_energy_is_psd(kernel in kernel_strategy(), seed in 0u64..1000) {
        let data = sample_gaussian(80, 3, seed).unwrap();
        let g = build_gram_laplacian(&kernel, GradientGeometry::Euclidean, &data.head(10).unwrap(), &data).unwrap();
        let min = g.l.clone().symmetric_eigenvalues().min();
        prop_assert!(min >= -1e-10 * g.l.amax());
    }

    #[test]
    fn eigenvalues_are_scale_invariant(seed in 0u64..1000, c in prop::sample::select(vec![1e-3, 1.0, 1e3])) {
        let data = sample_sphere(100, 3, seed).unwrap();
        let g = build_gram_laplacian(&KernelSpec::gaussian(1.0), GradientGeometry::Euclidean, &data.head(8).unwrap(), &data).unwrap();
        let a = gevd(&g.l, &g.psi, 0.0).unwrap().values;
        let b = gevd(&(&g.l * c), &(&g.psi * c), 0.0).unwrap().values;
        let top = a.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
        let mu = g.psi.clone().symmetric_eigenvalues();
        let tol = 1e-12f64.max(64.0 * f64::EPSILON * mu.max() / mu.min()) * top;
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= tol);
        }
    }

    #[test]
    fn training_gram_is_identity_without_ridge(kernel in kernel_strategy(), seed in 0u64..1000) {
        let data = sample_gaussian(120, 2, seed).unwrap();
        let opts = DecomposeOptions { p: Some(12), epsilon: Some(0.0), seed, ..Default::default() };
        let est = decompose(&data, &kernel, &opts).unwrap();
        let m = empirical_orthogonality(&est, &data, est.len()).unwrap();
        // Rounding is amplified by the conditioning of Psi on the kept range.
        let k = cross_gram(&kernel, &est.landmarks, &data).unwrap();
        let mu = (&k * k.transpose() / data.n() as f64).symmetric_eigenvalues();
        let top = mu.max();
        let low = mu.iter().filter(|&&v| v > 12.0 * f64::EPSILON * top).fold(top, |a, &b| a.min(b));
        let tol = 1e-10f64.max(1e3 * f64::EPSILON * top / low);
        prop_assert!((m - DMatrix::identity(est.len(), est.len())).amax() <= tol);
    }
}

#[test]
fn same_seed_same_bits() {
    let data = sample_sphere(500, 4, 11).unwrap();
    let opts = DecomposeOptions {
        p: Some(23),
        seed: 5,
        ..Default::default()
    };
    let a = decompose(&data, &KernelSpec::polynomial(3), &opts).unwrap();
    let b = decompose(&data, &KernelSpec::polynomial(3), &opts).unwrap();
    assert_eq!(a, b);
    let other = decompose(&data, &KernelSpec::polynomial(3), &DecomposeOptions { seed: 6, ..opts }).unwrap();
    assert_ne!(a.landmarks, other.landmarks);
}

#[test]
fn one_point_data_has_one_zero_mode() {
    let data = Dataset::from_rows(&vec![[0.3, -0.2, 0.9]; 20]).unwrap();
    let est = decompose(
        &data,
        &KernelSpec::gaussian(1.0),
        &DecomposeOptions {
            p: Some(4),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(est.len(), 1);
    assert!(est.values[0].abs() < 1e-12);
}

#[test]
fn eigenfunction_matches_explicit_sum() {
    let data = sample_gaussian(300, 3, 2).unwrap();
    let kernel = KernelSpec::exponential(1.5);
    let est = decompose(
        &data,
        &kernel,
        &DecomposeOptions {
            p: Some(15),
            seed: 2,
            ..Default::default()
        },
    )
    .unwrap();
    let x = sample_gaussian(5, 3, 99).unwrap();
    let k = cross_gram(&kernel, &est.landmarks, &x).unwrap();
    for j in 0..5 {
        for i in [0, 3, est.len() - 1] {
            let direct: f64 = (0..est.landmarks.n()).map(|l| est.left[(i, l)] * k[(l, j)]).sum();
            let got = evaluate_eigenfunction(&est, i, x.point(j)).unwrap();
            assert!((got - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }
    assert!(evaluate_eigenfunction(&est, est.len(), x.point(0)).is_err());
}

#[test]
fn estimate_survives_container_round_trip() {
    let data = sample_sphere(200, 3, 1).unwrap();
    let est = decompose(
        &data,
        &KernelSpec::polynomial(2),
        &DecomposeOptions {
            p: Some(10),
            ..Default::default()
        },
    )
    .unwrap();
    let mut buf = Vec::new();
    Container::from(&est).write_to(&mut buf).unwrap();
    let back = SpectralEstimate::try_from(&Container::read_from(&mut buf.as_slice()).unwrap()).unwrap();
    assert_eq!(back, est);
    let json = serde_json::to_string(&est).unwrap();
    assert_eq!(serde_json::from_str::<SpectralEstimate>(&json).unwrap(), est);
}
