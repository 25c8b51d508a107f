use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{GradientGeometry, KernelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Galerkin estimate on the uniform sphere, scored against the harmonic spectrum.
    GalerkinSphere,
    /// Projected graph Laplacian on the sphere, rescaled, same score.
    GraphSphere,
    /// Hermite vs plain ridge on a constant target over Gaussian data.
    HermiteDemo,
    /// One decomposition per grid point, eigenfunctions tabulated on a 2-d grid.
    EigenfunctionExport,
}

/// Graph weight option: Gaussian weights at scale `sigma`, or the basis kernel itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightChoice {
    Sigma(f64),
    Same,
}

impl std::fmt::Display for WeightChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WeightChoice::Sigma(s) => write!(f, "sigma={s}"),
            WeightChoice::Same => f.write_str("same"),
        }
    }
}

/// Regular 2-d grid for eigenfunction export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub mins: [f64; 2],
    pub maxs: [f64; 2],
    pub resolution: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportSpec {
    pub grid: GridSpec,
    /// Eigenfunction indices, ascending-eigenvalue order.
    pub indices: Vec<usize>,
    /// CSV path per decomposition; `{run}` is replaced by a tag naming the
    /// cell, kernel index and `p` index.
    pub out: String,
}

fn default_sampler() -> String {
    "sphere".into()
}

fn default_k() -> usize {
    25
}

fn default_reps() -> usize {
    1
}

fn default_noise() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    #[serde(default = "default_sampler")]
    pub sampler: String,
    pub n: Vec<usize>,
    pub d: Vec<usize>,
    /// Two-moons noise level.
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "default_kernel_grid")]
    pub kernels: Vec<KernelSpec>,
    #[serde(default = "default_p_grid")]
    pub p: Vec<usize>,
    #[serde(default = "default_weight_grid")]
    pub weights: Vec<WeightChoice>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Defaults to `sphere` for the sphere tasks and `euclidean` otherwise.
    #[serde(default)]
    pub geometry: Option<GradientGeometry>,
    /// Measure `max |off-diagonal|` of the empirical Gram on fresh data.
    #[serde(default)]
    pub orthogonality: bool,
    #[serde(default)]
    pub export: Option<ExportSpec>,
    #[serde(default = "default_max_n")]
    pub graph_max_n: usize,
}

fn default_max_n() -> usize {
    crate::graph_laplacian::DEFAULT_MAX_N
}

/// Polynomial degrees 2..=6, exponential and Gaussian at five scales each.
pub fn default_kernel_grid() -> Vec<KernelSpec> {
    let mut out: Vec<KernelSpec> = (2..=6).map(KernelSpec::polynomial).collect();
    out.extend([0.1, 1.0, 10.0, 100.0, 1000.0].map(KernelSpec::exponential));
    out.extend([0.01, 0.1, 1.0, 10.0, 100.0].map(KernelSpec::gaussian));
    out
}

/// Five values log-spaced between 30 and 1000.
pub fn default_p_grid() -> Vec<usize> {
    (0..5)
        .map(|i| (30.0 * (1000.0f64 / 30.0).powf(i as f64 / 4.0)).round() as usize)
        .collect()
}

/// Gaussian weights at five scales plus the basis kernel.
pub fn default_weight_grid() -> Vec<WeightChoice> {
    let mut out: Vec<WeightChoice> = [0.01, 0.1, 1.0, 10.0, 100.0].map(WeightChoice::Sigma).to_vec();
    out.push(WeightChoice::Same);
    out
}

impl ExperimentConfig {
    /// Defaults for `task` at the given sizes.
    pub fn new(task: Task, n: Vec<usize>, d: Vec<usize>) -> Self {
        ExperimentConfig {
            task,
            sampler: match task {
                Task::HermiteDemo => "gaussian".into(),
                Task::EigenfunctionExport => "moons".into(),
                _ => default_sampler(),
            },
            n,
            d,
            noise: default_noise(),
            kernels: default_kernel_grid(),
            p: default_p_grid(),
            weights: default_weight_grid(),
            k: default_k(),
            epsilon: None,
            repetitions: 1,
            base_seed: 0,
            geometry: None,
            orthogonality: false,
            export: None,
            graph_max_n: default_max_n(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn geometry(&self) -> GradientGeometry {
        self.geometry.unwrap_or(match self.task {
            Task::GalerkinSphere | Task::GraphSphere => GradientGeometry::Sphere,
            _ => GradientGeometry::Euclidean,
        })
    }

    /// The `p` grid restricted to `p <= n`, ascending, deduplicated.
    pub fn p_grid_for(&self, n: usize) -> Vec<usize> {
        let mut ps: Vec<usize> = self.p.iter().copied().filter(|&p| p >= 1 && p <= n).collect();
        ps.sort_unstable();
        ps.dedup();
        ps
    }

    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() || self.d.is_empty() || self.kernels.is_empty() || self.p.is_empty() {
            return Err(Error::config("n, d, kernel and p grids must be non-empty"));
        }
        if self.task == Task::GraphSphere && self.weights.is_empty() {
            return Err(Error::config("graph task needs a non-empty weight grid"));
        }
        if self.repetitions == 0 {
            return Err(Error::config("repetitions must be >= 1"));
        }
        if self.k == 0 {
            return Err(Error::config("k must be >= 1"));
        }
        for kernel in &self.kernels {
            kernel.validate()?;
        }
        for w in &self.weights {
            if let WeightChoice::Sigma(s) = w {
                if !(*s > 0.0 && s.is_finite()) {
                    return Err(Error::config(format!("weight scale must be > 0, got {s}")));
                }
            }
        }
        if let Some(e) = self.epsilon {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(Error::config(format!("epsilon must be >= 0, got {e}")));
            }
        }
        let min_n = *self.n.iter().min().unwrap();
        if self.p_grid_for(min_n).is_empty() {
            return Err(Error::config(format!(
                "no p in the grid satisfies 1 <= p <= n = {min_n}"
            )));
        }
        for &d in &self.d {
            if d == 0 {
                return Err(Error::config("d must be >= 1"));
            }
            if matches!(self.task, Task::GalerkinSphere | Task::GraphSphere) && d < 2 {
                return Err(Error::config("sphere tasks need d >= 2"));
            }
        }
        if self.task == Task::EigenfunctionExport && self.d.iter().any(|&d| d != 2) {
            return Err(Error::config("eigenfunction export is only supported for d = 2"));
        }
        if self.task == Task::GraphSphere {
            if let Some(&n) = self.n.iter().find(|&&n| n > self.graph_max_n) {
                return Err(Error::config(format!(
                    "n = {n} exceeds the graph baseline cap of {}",
                    self.graph_max_n
                )));
            }
        }
        Ok(())
    }
}
