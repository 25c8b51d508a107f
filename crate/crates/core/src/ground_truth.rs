//! Closed-form sphere spectra, samplers, and the inverse-eigenvalue error metric.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::galerkin::SpectralEstimate;

/// Eigenvalues with multiplicities, strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroundTruthSpectrum {
    pub entries: Vec<(f64, usize)>,
}

impl GroundTruthSpectrum {
    /// Values repeated by multiplicity, ascending.
    pub fn flattened(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|&(v, m)| std::iter::repeat_n(v, m))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

/// Multiplicity of degree-`s` harmonics on the sphere in `R^d`, `s >= 1`.
pub fn harmonic_multiplicity(d: usize, s: usize) -> u128 {
    let (d, s) = (d as u64, s as u64);
    binomial(s + d - 3, s - 1) * (2 * s + d - 2) as u128 / s as u128
}

/// The first `k` nonzero Laplace-Beltrami eigenvalues of the unit sphere in `R^d`.
///
/// Degree `s` contributes `s (s + d - 2)` with multiplicity [`harmonic_multiplicity`];
/// the constant mode is excluded and the last block is truncated to reach `k`.
pub fn sphere_spectrum(d: usize, k: usize) -> Result<GroundTruthSpectrum> {
    if d < 2 {
        return Err(Error::input(format!("sphere needs d >= 2, got {d}")));
    }
    let mut entries = Vec::new();
    let mut left = k;
    let mut s = 1usize;
    while left > 0 {
        let m = harmonic_multiplicity(d, s).min(left as u128) as usize;
        entries.push(((s * (s + d - 2)) as f64, m));
        left -= m;
        s += 1;
    }
    Ok(GroundTruthSpectrum { entries })
}

/// `sum |1/lambda_i - v_i| / sum 1/lambda_i` over the first `k` true values.
///
/// `v = 0` scores exactly 1.
pub fn surrogate_error(truth: &GroundTruthSpectrum, inverses: &[f64], k: usize) -> Result<f64> {
    if inverses.len() != k {
        return Err(Error::input(format!("expected {k} inverses, got {}", inverses.len())));
    }
    let values = truth.flattened();
    if values.len() < k {
        return Err(Error::input(format!(
            "ground truth has {} values, need {k}",
            values.len()
        )));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (lam, v) in values.iter().zip(inverses) {
        num += (1.0 / lam - v).abs();
        den += 1.0 / lam;
    }
    Ok(num / den)
}

/// Inverse eigenvalues prepared for [`surrogate_error`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inverses {
    pub values: Vec<f64>,
    /// Fewer than `k` modes survived and the tail was filled with zeros.
    pub padded: bool,
}

pub fn default_zero_tol(values: &[f64]) -> f64 {
    1e-8 * values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Ascending values with `|lambda| <= zero_tol` removed and negatives clamped to `zero_tol`.
pub fn nonzero_modes(values: &[f64], zero_tol: Option<f64>) -> Vec<f64> {
    let tol = zero_tol.unwrap_or_else(|| default_zero_tol(values));
    let mut kept: Vec<f64> = values.iter().filter(|v| v.abs() > tol).map(|&v| v.max(tol)).collect();
    kept.sort_by(f64::total_cmp);
    kept
}

/// First `k` inverses of the nonzero modes, zero-padded.
pub fn inverses_from_values(values: &[f64], k: usize, zero_tol: Option<f64>) -> Inverses {
    let kept = nonzero_modes(values, zero_tol);
    let mut out: Vec<f64> = kept.iter().take(k).map(|v| 1.0 / v).collect();
    let padded = out.len() < k;
    out.resize(k, 0.0);
    Inverses { values: out, padded }
}

pub fn estimate_to_inverses(est: &SpectralEstimate, k: usize, zero_tol: Option<f64>) -> Inverses {
    inverses_from_values(&est.values, k, zero_tol)
}

/// Uniform on the unit sphere in `R^d`.
pub fn sample_sphere(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    if d < 2 {
        return Err(Error::input(format!("sphere needs d >= 2, got {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n * d);
    let mut row = vec![0.0; d];
    for _ in 0..n {
        loop {
            for v in row.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-150 {
                values.extend(row.iter().map(|v| v / norm));
                break;
            }
        }
    }
    Dataset::from_row_major(n, d, values)
}

/// I.i.d. standard normal.
pub fn sample_gaussian(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    Dataset::from_row_major(n, d, values)
}

/// Two interleaved unit half-circles; the lower one is shifted by `(1, 0.5)`.
///
/// The first `ceil(n/2)` points (label 0) lie on the upper arc.
pub fn sample_two_moons_labeled(n: usize, noise: f64, seed: u64) -> Result<(Dataset, Vec<u8>)> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::input(format!("noise must be finite and >= 0, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let upper = n.div_ceil(2);
    let mut values = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let t = rng.random_range(0.0..std::f64::consts::PI);
        let (x, y, label) = if i < upper {
            (t.cos(), t.sin(), 0)
        } else {
            (1.0 - t.cos(), 0.5 - t.sin(), 1)
        };
        let ex: f64 = rng.sample(StandardNormal);
        let ey: f64 = rng.sample(StandardNormal);
        values.push(x + noise * ex);
        values.push(y + noise * ey);
        labels.push(label);
    }
    Ok((Dataset::from_row_major(n, 2, values)?, labels))
}

pub fn sample_two_moons(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    sample_two_moons_labeled(n, noise, seed).map(|r| r.0)
}

/// Sampler by name: `sphere`, `gaussian`, or `moons`.
pub fn sample_named(name: &str, n: usize, d: usize, seed: u64) -> Result<Dataset> {
    match name {
        "sphere" => sample_sphere(n, d, seed),
        "gaussian" => sample_gaussian(n, d, seed),
        "moons" | "two_moons" => {
            if d != 2 {
                return Err(Error::config(format!("two moons live in d=2, got {d}")));
            }
            sample_two_moons(n, 0.05, seed)
        }
        other => Err(Error::config(format!("unknown sampler {other:?}"))),
    }
}
