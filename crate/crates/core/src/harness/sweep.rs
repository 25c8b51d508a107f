use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Task, WeightChoice};
use super::export::export_eigenfunction_grid;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::galerkin::{
    build_gram_laplacian, check_samples, decompose, default_epsilon, empirical_orthogonality, max_off_diagonal,
    select_landmarks, DecomposeOptions, SpectralEstimate, Whitener,
};
use crate::graph_laplacian::{
    projected_graph_energy, rescale_eigenvalues, weight_matrix_with, GraphWeights, WeightScheme,
};
use crate::ground_truth::{
    inverses_from_values, nonzero_modes, sample_named, sample_two_moons, sphere_spectrum, surrogate_error,
    GroundTruthSpectrum,
};
use crate::hermite::{hermite_fit, plain_ridge_fit, rmse, FitOptions, HermiteProblem};
use crate::kernels::{cross_gram, GradientGeometry, KernelSpec};

/// Kernel, `p` and graph weight identifying a grid point.
type GridKey = (KernelSpec, usize, Option<WeightChoice>);

/// One grid point of one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub run: usize,
    pub task: Task,
    pub n: usize,
    pub d: usize,
    pub repetition: usize,
    pub seed: u64,
    pub kernel: KernelSpec,
    pub p: usize,
    pub weight: Option<WeightChoice>,
    /// Surrogate error for the sphere tasks, held-out RMSE for the Hermite demo.
    pub error: Option<f64>,
    /// Plain ridge RMSE in the Hermite demo.
    pub baseline_error: Option<f64>,
    /// Fewer than `k` nonzero eigenvalues were available.
    pub padded: bool,
    /// Seconds spent in assembly and solve. Assembly at the largest `p` is shared
    /// by all `p` of a kernel and counted in each.
    pub wall_time: f64,
    /// First `k` nonzero eigenvalues, rescaled for the graph task.
    pub eigenvalues: Vec<f64>,
    pub orthogonality_defect: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub n: usize,
    pub d: usize,
    /// Minimum over grid points of the error averaged over repetitions.
    pub best_error: Option<f64>,
    pub best_kernel: Option<KernelSpec>,
    pub best_p: Option<usize>,
    pub best_weight: Option<WeightChoice>,
    /// Minimum over grid points within each repetition.
    pub repetition_best: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub task: Task,
    pub entries: Vec<SummaryEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamItem {
    Record(ResultRecord),
    Summary(Summary),
}

/// Worker pool capped by `GALERKIN_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("GALERKIN_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("GALERKIN_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(Error::config("GALERKIN_THREADS must be >= 1"));
        }
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::config(format!("thread pool: {e}")))
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    n: usize,
    d: usize,
    repetition: usize,
    seed: u64,
}

/// A record before the run index is assigned.
struct Partial {
    kernel: KernelSpec,
    p: usize,
    weight: Option<WeightChoice>,
    outcome: std::result::Result<Outcome, String>,
}

#[derive(Default)]
struct Outcome {
    error: Option<f64>,
    baseline_error: Option<f64>,
    padded: bool,
    wall_time: f64,
    eigenvalues: Vec<f64>,
    orthogonality_defect: Option<f64>,
}

const HOLDOUT_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// Every grid point times every repetition, followed by one summary.
///
/// Repetition `r` draws data and landmarks from seed `base_seed + r`.
/// Per-run failures are recorded, not returned.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<StreamItem>> {
    let mut out = Vec::new();
    run_experiment_with(config, |item| {
        out.push(item.clone());
        Ok(())
    })?;
    Ok(out)
}

/// As [`run_experiment`], handing items to `sink` in run order as each
/// `(n, d, repetition)` cell completes.
pub fn run_experiment_with<F>(config: &ExperimentConfig, mut sink: F) -> Result<()>
where
    F: FnMut(&StreamItem) -> Result<()>,
{
    config.validate()?;
    if matches!(config.task, Task::GalerkinSphere | Task::GraphSphere) && config.sampler != "sphere" {
        return Err(Error::config("sphere tasks need the sphere sampler"));
    }
    let pool = thread_pool()?;
    let mut cells = Vec::new();
    for &n in &config.n {
        for &d in &config.d {
            for repetition in 0..config.repetitions {
                let seed = config.base_seed.wrapping_add(repetition as u64);
                cells.push(Cell { n, d, repetition, seed });
            }
        }
    }
    let mut records = Vec::new();
    for cell in cells {
        let partials = pool.install(|| run_cell(config, cell))?;
        for part in partials {
            let rec = finish(config, cell, records.len(), part);
            sink(&StreamItem::Record(rec.clone()))?;
            records.push(rec);
        }
    }
    sink(&StreamItem::Summary(summarize(config, &records)))
}

fn finish(config: &ExperimentConfig, cell: Cell, run: usize, part: Partial) -> ResultRecord {
    let (o, failure) = match part.outcome {
        Ok(o) => (o, None),
        Err(e) => (Outcome::default(), Some(e)),
    };
    ResultRecord {
        run,
        task: config.task,
        n: cell.n,
        d: cell.d,
        repetition: cell.repetition,
        seed: cell.seed,
        kernel: part.kernel,
        p: part.p,
        weight: part.weight,
        error: o.error,
        baseline_error: o.baseline_error,
        padded: o.padded,
        wall_time: o.wall_time,
        eigenvalues: o.eigenvalues,
        orthogonality_defect: o.orthogonality_defect,
        failure,
    }
}

fn sample(config: &ExperimentConfig, n: usize, d: usize, seed: u64) -> Result<Dataset> {
    if matches!(config.sampler.as_str(), "moons" | "two_moons") {
        if d != 2 {
            return Err(Error::config("two moons live in d = 2"));
        }
        return sample_two_moons(n, config.noise, seed);
    }
    sample_named(&config.sampler, n, d, seed)
}

fn run_cell(config: &ExperimentConfig, cell: Cell) -> Result<Vec<Partial>> {
    let data = sample(config, cell.n, cell.d, cell.seed)?;
    let ps = config.p_grid_for(cell.n);
    let pmax = *ps.last().expect("validated non-empty p grid");
    let idx = select_landmarks(cell.n, pmax, cell.seed)?;
    let landmarks = data.select(&idx)?;
    let per_kernel: Vec<Vec<Partial>> = match config.task {
        Task::GalerkinSphere => {
            let truth = sphere_spectrum(cell.d, config.k)?;
            let holdout = if config.orthogonality {
                Some(sample(
                    config,
                    cell.n,
                    cell.d,
                    cell.seed.wrapping_add(HOLDOUT_SEED_OFFSET),
                )?)
            } else {
                None
            };
            config
                .kernels
                .par_iter()
                .map(|kernel| galerkin_kernel(config, &data, &landmarks, kernel, &ps, &truth, holdout.as_ref()))
                .collect()
        }
        Task::GraphSphere => {
            let truth = sphere_spectrum(cell.d, config.k)?;
            graph_cell(config, &data, &landmarks, &ps, &truth)?
        }
        Task::HermiteDemo => {
            let test = sample(config, cell.n, cell.d, cell.seed.wrapping_add(HOLDOUT_SEED_OFFSET))?;
            config
                .kernels
                .par_iter()
                .map(|kernel| hermite_kernel(config, &data, &test, kernel, &ps, cell.seed))
                .collect()
        }
        Task::EigenfunctionExport => config
            .kernels
            .par_iter()
            .enumerate()
            .map(|(ki, kernel)| export_kernel(config, &data, kernel, &ps, cell, ki))
            .collect(),
    };
    Ok(per_kernel.into_iter().flatten().collect())
}

fn score(truth: &GroundTruthSpectrum, k: usize, values: &[f64]) -> Result<(f64, bool, Vec<f64>)> {
    let inv = inverses_from_values(values, k, None);
    let err = surrogate_error(truth, &inv.values, k)?;
    let shown = nonzero_modes(values, None).into_iter().take(k).collect();
    Ok((err, inv.padded, shown))
}

fn fail_all(kernel: &KernelSpec, ps: &[usize], weight: Option<WeightChoice>, e: &Error) -> Vec<Partial> {
    ps.iter()
        .map(|&p| Partial {
            kernel: *kernel,
            p,
            weight,
            outcome: Err(e.to_string()),
        })
        .collect()
}

fn leading(m: &DMatrix<f64>, p: usize) -> DMatrix<f64> {
    m.view((0, 0), (p, p)).into_owned()
}

fn galerkin_kernel(
    config: &ExperimentConfig,
    data: &Dataset,
    landmarks: &Dataset,
    kernel: &KernelSpec,
    ps: &[usize],
    truth: &GroundTruthSpectrum,
    holdout: Option<&Dataset>,
) -> Vec<Partial> {
    let t0 = Instant::now();
    let gram = match build_gram_laplacian(kernel, config.geometry(), landmarks, data) {
        Ok(g) => g,
        Err(e) => return fail_all(kernel, ps, None, &e),
    };
    let assembly = t0.elapsed().as_secs_f64();
    ps.iter()
        .map(|&p| {
            let outcome = (|| -> Result<Outcome> {
                let t1 = Instant::now();
                let g = gram.leading(p);
                let eps = config.epsilon.unwrap_or_else(|| default_epsilon(&g.psi));
                let (values, defect) = match holdout {
                    Some(h) => {
                        let sol = Whitener::new(&g.psi, eps)?.solve(&g.l)?;
                        let est = SpectralEstimate {
                            values: sol.values.clone(),
                            right: sol.vectors.clone(),
                            left: sol.vectors,
                            landmarks: landmarks.head(p)?,
                            kernel: *kernel,
                            epsilon: eps,
                        };
                        let m = empirical_orthogonality(&est, h, config.k.min(est.len()))?;
                        (sol.values, Some(max_off_diagonal(&m)))
                    }
                    None => (Whitener::new(&g.psi, eps)?.values(&g.l)?, None),
                };
                let wall_time = assembly + t1.elapsed().as_secs_f64();
                let (err, padded, eigenvalues) = score(truth, config.k, &values)?;
                Ok(Outcome {
                    error: Some(err),
                    padded,
                    wall_time,
                    eigenvalues,
                    orthogonality_defect: defect,
                    ..Default::default()
                })
            })();
            Partial {
                kernel: *kernel,
                p,
                weight: None,
                outcome: outcome.map_err(|e| e.to_string()),
            }
        })
        .collect()
}

/// Cached Gaussian weights are kept only while they fit comfortably in memory.
const WEIGHT_CACHE_BYTES: usize = 1 << 30;

fn graph_cell(
    config: &ExperimentConfig,
    data: &Dataset,
    landmarks: &Dataset,
    ps: &[usize],
    truth: &GroundTruthSpectrum,
) -> Result<Vec<Vec<Partial>>> {
    let n = data.n();
    let sigmas: Vec<f64> = config
        .weights
        .iter()
        .filter_map(|w| match w {
            WeightChoice::Sigma(s) => Some(*s),
            WeightChoice::Same => None,
        })
        .collect();
    let cache: Vec<(f64, GraphWeights, f64)> = if sigmas.len() * n * n * 8 <= WEIGHT_CACHE_BYTES {
        sigmas
            .iter()
            .map(|&s| {
                let t = Instant::now();
                let w = weight_matrix_with(data, WeightScheme::from_sigma(s))?;
                Ok((s, w, t.elapsed().as_secs_f64()))
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    Ok(config
        .kernels
        .par_iter()
        .map(|kernel| graph_kernel(config, data, landmarks, kernel, ps, truth, &cache))
        .collect())
}

fn graph_kernel(
    config: &ExperimentConfig,
    data: &Dataset,
    landmarks: &Dataset,
    kernel: &KernelSpec,
    ps: &[usize],
    truth: &GroundTruthSpectrum,
    cache: &[(f64, GraphWeights, f64)],
) -> Vec<Partial> {
    let mut out = Vec::new();
    let t0 = Instant::now();
    let basis = match cross_gram(kernel, landmarks, data).and_then(|b| check_samples(&b).map(|_| b)) {
        Ok(b) => b,
        Err(e) => {
            for &w in &config.weights {
                out.extend(fail_all(kernel, ps, Some(w), &e));
            }
            return out;
        }
    };
    let mut psi = &basis * basis.transpose() / data.n() as f64;
    let t = psi.transpose();
    psi += t;
    psi *= 0.5;
    let whiteners: Vec<Result<Whitener>> = ps
        .iter()
        .map(|&p| {
            let block = leading(&psi, p);
            let eps = config.epsilon.unwrap_or_else(|| default_epsilon(&block));
            Whitener::new(&block, eps)
        })
        .collect();
    let shared = t0.elapsed().as_secs_f64();
    let truth_values = truth.flattened();

    for &choice in &config.weights {
        let t1 = Instant::now();
        let (owned, cached_time) = match choice {
            WeightChoice::Sigma(s) => match cache.iter().find(|(cs, _, _)| *cs == s) {
                Some((_, w, secs)) => (None, Some((w, *secs))),
                None => (Some(weight_matrix_with(data, WeightScheme::from_sigma(s))), None),
            },
            WeightChoice::Same => (
                Some(weight_matrix_with(data, WeightScheme::Kernel { kernel: *kernel })),
                None,
            ),
        };
        let (weights, weight_time) = match (&owned, cached_time) {
            (_, Some((w, secs))) => (w, secs),
            (Some(Ok(w)), None) => (w, t1.elapsed().as_secs_f64()),
            (Some(Err(e)), None) => {
                let e = Error::Config(e.to_string());
                out.extend(fail_all(kernel, ps, Some(choice), &e));
                continue;
            }
            (None, None) => unreachable!(),
        };
        let t2 = Instant::now();
        let l = match projected_graph_energy(weights, &basis) {
            Ok(l) => l,
            Err(e) => {
                out.extend(fail_all(kernel, ps, Some(choice), &e));
                continue;
            }
        };
        let projection = t2.elapsed().as_secs_f64();
        for (&p, wh) in ps.iter().zip(&whiteners) {
            let outcome = (|| -> Result<Outcome> {
                let wh = wh.as_ref().map_err(|e| Error::Solver(e.to_string()))?;
                let t3 = Instant::now();
                let values = wh.values(&leading(&l, p))?;
                let modes = nonzero_modes(&values, None);
                let m = modes.len().min(config.k);
                let rescaled = if m == 0 {
                    modes
                } else {
                    rescale_eigenvalues(&modes, truth_values[..m].iter().sum(), m)?
                };
                let wall_time = shared + weight_time + projection + t3.elapsed().as_secs_f64();
                let (err, padded, eigenvalues) = score(truth, config.k, &rescaled)?;
                Ok(Outcome {
                    error: Some(err),
                    padded,
                    wall_time,
                    eigenvalues,
                    ..Default::default()
                })
            })();
            out.push(Partial {
                kernel: *kernel,
                p,
                weight: Some(choice),
                outcome: outcome.map_err(|e| e.to_string()),
            });
        }
    }
    out
}

fn hermite_kernel(
    config: &ExperimentConfig,
    data: &Dataset,
    test: &Dataset,
    kernel: &KernelSpec,
    ps: &[usize],
    seed: u64,
) -> Vec<Partial> {
    // Constant target: f = 1, grad f = 0.
    let n = data.n();
    let problem = match HermiteProblem::new(data.clone(), vec![1.0; n], vec![0.0; n * data.d()]) {
        Ok(p) => p,
        Err(e) => return fail_all(kernel, ps, None, &e),
    };
    let truth = vec![1.0; test.n()];
    ps.iter()
        .map(|&p| {
            let outcome = (|| -> Result<Outcome> {
                let opts = FitOptions {
                    p: Some(p),
                    epsilon: config.epsilon,
                    seed,
                };
                let t = Instant::now();
                let h = hermite_fit(&problem, kernel, &opts)?;
                let wall_time = t.elapsed().as_secs_f64();
                let plain = plain_ridge_fit(data, problem.values(), kernel, &opts)?;
                Ok(Outcome {
                    error: Some(rmse(&h, test, &truth)?),
                    baseline_error: Some(rmse(&plain, test, &truth)?),
                    wall_time,
                    ..Default::default()
                })
            })();
            Partial {
                kernel: *kernel,
                p,
                weight: None,
                outcome: outcome.map_err(|e| e.to_string()),
            }
        })
        .collect()
}

fn export_kernel(
    config: &ExperimentConfig,
    data: &Dataset,
    kernel: &KernelSpec,
    ps: &[usize],
    cell: Cell,
    kernel_index: usize,
) -> Vec<Partial> {
    ps.iter()
        .enumerate()
        .map(|(pi, &p)| {
            let outcome = (|| -> Result<Outcome> {
                let opts = DecomposeOptions {
                    p: Some(p),
                    epsilon: config.epsilon,
                    seed: cell.seed,
                    geometry: config.geometry.unwrap_or(GradientGeometry::Euclidean),
                };
                let t = Instant::now();
                let est = decompose(data, kernel, &opts)?;
                let wall_time = t.elapsed().as_secs_f64();
                if let Some(spec) = &config.export {
                    let table = export_eigenfunction_grid(&est, &spec.indices, &spec.grid)?;
                    let tag = format!("n{}_d{}_r{}_k{}_p{}", cell.n, cell.d, cell.repetition, kernel_index, pi);
                    table.save(std::path::Path::new(&spec.out.replace("{run}", &tag)))?;
                }
                Ok(Outcome {
                    wall_time,
                    eigenvalues: nonzero_modes(&est.values, None).into_iter().take(config.k).collect(),
                    ..Default::default()
                })
            })();
            Partial {
                kernel: *kernel,
                p,
                weight: None,
                outcome: outcome.map_err(|e| e.to_string()),
            }
        })
        .collect()
}

fn summarize(config: &ExperimentConfig, records: &[ResultRecord]) -> Summary {
    let mut entries = Vec::new();
    for &n in &config.n {
        for &d in &config.d {
            let cell: Vec<&ResultRecord> = records.iter().filter(|r| r.n == n && r.d == d).collect();
            // Grid points in first-seen order.
            let mut keys: Vec<(KernelSpec, usize, Option<WeightChoice>)> = Vec::new();
            for r in &cell {
                let key = (r.kernel, r.p, r.weight);
                if !keys.contains(&key) {
                    keys.push(key);
                }
            }
            let mut best: Option<(f64, GridKey)> = None;
            for key in keys {
                let errs: Vec<f64> = cell
                    .iter()
                    .filter(|r| (r.kernel, r.p, r.weight) == key)
                    .filter_map(|r| r.error)
                    .collect();
                if errs.is_empty() {
                    continue;
                }
                let mean = errs.iter().sum::<f64>() / errs.len() as f64;
                if best.as_ref().is_none_or(|(b, _)| mean < *b) {
                    best = Some((mean, key));
                }
            }
            let repetition_best = (0..config.repetitions)
                .map(|rep| {
                    cell.iter()
                        .filter(|r| r.repetition == rep)
                        .filter_map(|r| r.error)
                        .min_by(f64::total_cmp)
                })
                .collect();
            entries.push(SummaryEntry {
                n,
                d,
                best_error: best.as_ref().map(|b| b.0),
                best_kernel: best.as_ref().map(|b| b.1 .0),
                best_p: best.as_ref().map(|b| b.1 .1),
                best_weight: best.as_ref().and_then(|b| b.1 .2),
                repetition_best,
            });
        }
    }
    Summary {
        task: config.task,
        entries,
    }
}

/// One JSON object per line.
pub fn write_jsonl<W: Write>(w: &mut W, item: &StreamItem) -> Result<()> {
    serde_json::to_writer(&mut *w, item)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub const CSV_HEADER: [&str; 16] = [
    "type",
    "run",
    "task",
    "n",
    "d",
    "repetition",
    "seed",
    "kernel",
    "p",
    "weight",
    "error",
    "baseline_error",
    "padded",
    "wall_time",
    "orthogonality_defect",
    "eigenvalues",
];

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Flat CSV rows; summary rows carry the best grid point in the record columns
/// and the failure column is folded into `error` as text.
pub fn csv_rows(item: &StreamItem) -> Vec<Vec<String>> {
    let task = |t: Task| {
        serde_json::to_value(t)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default()
    };
    match item {
        StreamItem::Record(r) => vec![vec![
            "record".into(),
            r.run.to_string(),
            task(r.task),
            r.n.to_string(),
            r.d.to_string(),
            r.repetition.to_string(),
            r.seed.to_string(),
            serde_json::to_string(&r.kernel).unwrap_or_default(),
            r.p.to_string(),
            r.weight.map(|w| w.to_string()).unwrap_or_default(),
            match (&r.error, &r.failure) {
                (Some(e), _) => num(*e),
                (None, Some(f)) => format!("failed: {f}"),
                (None, None) => String::new(),
            },
            opt(r.baseline_error),
            r.padded.to_string(),
            num(r.wall_time),
            opt(r.orthogonality_defect),
            r.eigenvalues.iter().map(|v| num(*v)).collect::<Vec<_>>().join(";"),
        ]],
        StreamItem::Summary(s) => s
            .entries
            .iter()
            .map(|e| {
                vec![
                    "summary".into(),
                    String::new(),
                    task(s.task),
                    e.n.to_string(),
                    e.d.to_string(),
                    String::new(),
                    String::new(),
                    e.best_kernel
                        .map(|k| serde_json::to_string(&k).unwrap_or_default())
                        .unwrap_or_default(),
                    e.best_p.map(|p| p.to_string()).unwrap_or_default(),
                    e.best_weight.map(|w| w.to_string()).unwrap_or_default(),
                    opt(e.best_error),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    e.repetition_best.iter().map(|v| opt(*v)).collect::<Vec<_>>().join(";"),
                ]
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(task: Task) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(task, vec![200], vec![3]);
        cfg.kernels = vec![KernelSpec::polynomial(3)];
        cfg.p = vec![30];
        cfg.k = 10;
        cfg.weights = vec![WeightChoice::Sigma(1.0)];
        cfg
    }

    #[test]
    fn one_point_one_record_plus_summary() {
        let items = run_experiment(&small(Task::GalerkinSphere)).unwrap();
        assert_eq!(items.len(), 2);
        let StreamItem::Record(r) = &items[0] else {
            panic!("expected a record")
        };
        assert!(r.failure.is_none());
        assert_eq!(r.eigenvalues.len(), 10);
        let StreamItem::Summary(s) = &items[1] else {
            panic!("expected a summary")
        };
        assert_eq!(s.entries[0].best_error, r.error);
    }

    #[test]
    fn identical_seeds_identical_streams() {
        let mut cfg = small(Task::GraphSphere);
        cfg.repetitions = 2;
        cfg.kernels.push(KernelSpec::gaussian(1.0));
        cfg.weights.push(WeightChoice::Same);
        let strip = |items: Vec<StreamItem>| -> Vec<StreamItem> {
            items
                .into_iter()
                .map(|mut it| {
                    if let StreamItem::Record(r) = &mut it {
                        r.wall_time = 0.0;
                    }
                    it
                })
                .collect()
        };
        let a = strip(run_experiment(&cfg).unwrap());
        let b = strip(run_experiment(&cfg).unwrap());
        assert_eq!(a.len(), 2 * 2 * 2 + 1);
        assert_eq!(a, b);
        let runs: Vec<usize> = a
            .iter()
            .filter_map(|it| match it {
                StreamItem::Record(r) => Some(r.run),
                _ => None,
            })
            .collect();
        assert_eq!(runs, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn summary_is_min_of_means() {
        let mut cfg = small(Task::GalerkinSphere);
        cfg.repetitions = 3;
        cfg.p = vec![20, 40];
        let items = run_experiment(&cfg).unwrap();
        let recs: Vec<&ResultRecord> = items
            .iter()
            .filter_map(|it| match it {
                StreamItem::Record(r) => Some(r),
                _ => None,
            })
            .collect();
        let mean = |p: usize| {
            let v: Vec<f64> = recs.iter().filter(|r| r.p == p).map(|r| r.error.unwrap()).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let StreamItem::Summary(s) = items.last().unwrap() else {
            panic!()
        };
        assert_eq!(s.entries[0].best_error.unwrap(), mean(20).min(mean(40)));
        assert_eq!(s.entries[0].repetition_best.len(), 3);
    }

    #[test]
    fn failures_are_recorded() {
        let mut cfg = small(Task::GalerkinSphere);
        // (1 + t)^1100 overflows on the sphere.
        cfg.kernels = vec![KernelSpec::polynomial(1100)];
        let items = run_experiment(&cfg).unwrap();
        let StreamItem::Record(r) = &items[0] else { panic!() };
        assert!(r.failure.is_some(), "{r:?}");
        assert!(r.error.is_none());
        let StreamItem::Summary(s) = &items[1] else { panic!() };
        assert_eq!(s.entries[0].best_error, None);
    }

    #[test]
    fn hermite_demo_reports_both_errors() {
        let mut cfg = small(Task::HermiteDemo);
        cfg.kernels = vec![KernelSpec::gaussian(1.0)];
        cfg.d = vec![1];
        let items = run_experiment(&cfg).unwrap();
        let StreamItem::Record(r) = &items[0] else { panic!() };
        assert!(r.error.is_some() && r.baseline_error.is_some(), "{r:?}");
    }

    #[test]
    fn csv_rows_have_header_width() {
        for item in run_experiment(&small(Task::GalerkinSphere)).unwrap() {
            for row in csv_rows(&item) {
                assert_eq!(row.len(), CSV_HEADER.len());
            }
        }
    }
}
