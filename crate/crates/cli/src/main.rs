use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use galerkin_core::galerkin::{decompose, DecomposeOptions, SpectralEstimate};
use galerkin_core::graph_laplacian::{graph_decompose, rescale_eigenvalues, GraphOptions, WeightScheme};
use galerkin_core::ground_truth::{
    inverses_from_values, nonzero_modes, sample_named, sample_two_moons, sphere_spectrum, surrogate_error,
};
use galerkin_core::harness::{
    export_eigenfunction_grid, run_experiment_with, sweep, time_scaling_report, ExperimentConfig, GridSpec, StreamItem,
};
use galerkin_core::hermite::{hermite_fit, plain_ridge_fit, rmse, FitOptions, HermiteProblem};
use galerkin_core::io::{load_dataset, read_hermite_csv, Container};
use galerkin_core::{Dataset, Error, GradientGeometry, KernelSpec, Result};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "galerkin",
    version,
    about = "Spectral decomposition of kernel Dirichlet forms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues of the Galerkin estimate.
    Decompose(DecomposeArgs),
    /// Eigenvalues of the projected graph Laplacian.
    GraphBaseline(GraphArgs),
    /// Hermite regression with gradient targets.
    Hermite(HermiteArgs),
    /// Run an experiment grid from a JSON config.
    Sweep(SweepArgs),
    /// Tabulate eigenfunctions on a regular 2-d grid.
    ExportGrid(ExportArgs),
    /// Time decompose over n and d.
    TimeReport(TimeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

#[derive(Clone, Copy, ValueEnum)]
enum Geometry {
    Euclidean,
    Sphere,
}

impl From<Geometry> for GradientGeometry {
    fn from(g: Geometry) -> Self {
        match g {
            Geometry::Euclidean => GradientGeometry::Euclidean,
            Geometry::Sphere => GradientGeometry::Sphere,
        }
    }
}

#[derive(Args)]
struct DataArgs {
    /// CSV or container file, or `sampler:sphere|gaussian|moons`.
    #[arg(long)]
    data: String,
    /// Sample size for samplers.
    #[arg(long)]
    n: Option<usize>,
    /// Dimension for samplers.
    #[arg(long)]
    d: Option<usize>,
    /// Two-moons noise level.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct OutArgs {
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Jsonl)]
    format: Format,
}

#[derive(Args)]
struct SolveArgs {
    /// Kernel as JSON, e.g. `{"family":"poly","degree":3}`.
    #[arg(long)]
    kernel: String,
    /// Landmark count; default ceil(sqrt(n)).
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Number of eigenvalues reported.
    #[arg(long, default_value_t = 25)]
    k: usize,
    /// Score against the unit-sphere spectrum.
    #[arg(long)]
    truth_sphere: bool,
}

#[derive(Args)]
struct DecomposeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    solve: SolveArgs,
    #[arg(long, value_enum, default_value_t = Geometry::Euclidean)]
    geometry: Geometry,
    /// Save the estimate (`.glkn` container, otherwise JSON).
    #[arg(long)]
    save: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct GraphArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    solve: SolveArgs,
    /// Gaussian weights `exp(-alpha |x - y|^2)`; the basis kernel is used when omitted.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = galerkin_core::graph_laplacian::DEFAULT_MAX_N)]
    max_n: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct HermiteArgs {
    /// Training CSV with columns `x.., y, grad..`, or a sampler for the constant-target demo.
    #[arg(long)]
    data: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    /// Held-out CSV in the training format.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    kernel: String,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Save the fitted model as JSON.
    #[arg(long)]
    save: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// ExperimentConfig JSON file.
    config: PathBuf,
    /// Override the config's repetitions.
    #[arg(long)]
    reps: Option<usize>,
    /// Override the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct ExportArgs {
    /// Saved estimate; otherwise one is computed from `--data`.
    #[arg(long, conflicts_with = "data")]
    estimate: Option<PathBuf>,
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Comma-separated eigenfunction indices.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    indices: Vec<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-1.5, -1.0])]
    mins: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [2.5, 1.5])]
    maxs: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [50, 50])]
    resolution: Vec<usize>,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TimeArgs {
    #[arg(long)]
    kernel: String,
    #[arg(long, default_value_t = 177)]
    p: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    d: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Repeats per point; the fastest is reported.
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[command(flatten)]
    out: OutArgs,
}

fn parse_kernel(text: &str) -> Result<KernelSpec> {
    let k: KernelSpec = text.parse()?;
    k.validate()?;
    Ok(k)
}

fn load(args: &DataArgs) -> Result<Dataset> {
    load_data(&args.data, args.n, args.d, args.noise, args.seed)
}

fn load_data(spec: &str, n: Option<usize>, d: Option<usize>, noise: f64, seed: u64) -> Result<Dataset> {
    match spec.strip_prefix("sampler:") {
        Some(name) => {
            let n = n.ok_or_else(|| Error::Config("--n is required with a sampler".into()))?;
            if matches!(name, "moons" | "two_moons") {
                return sample_two_moons(n, noise, seed);
            }
            let d = d.ok_or_else(|| Error::Config("--d is required with this sampler".into()))?;
            sample_named(name, n, d, seed)
        }
        None => load_dataset(Path::new(spec)),
    }
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// `(type, index, value)` rows shared by the single-run subcommands.
struct Rows {
    w: Box<dyn Write>,
    format: Format,
}

impl Rows {
    fn new(out: &OutArgs) -> Result<Self> {
        let mut w = open_out(&out.out)?;
        if let Format::Csv = out.format {
            writeln!(w, "type,index,value")?;
        }
        Ok(Rows { w, format: out.format })
    }

    fn row(&mut self, kind: &str, index: Option<usize>, value: f64) -> Result<()> {
        match self.format {
            Format::Csv => writeln!(
                self.w,
                "{kind},{},{value:?}",
                index.map(|i| i.to_string()).unwrap_or_default()
            )?,
            Format::Jsonl => writeln!(self.w, "{}", json!({"type": kind, "index": index, "value": value}))?,
        }
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

fn report_values(rows: &mut Rows, values: &[f64], k: usize) -> Result<()> {
    for (i, v) in nonzero_modes(values, None).iter().take(k).enumerate() {
        rows.row("eigenvalue", Some(i), *v)?;
    }
    Ok(())
}

fn sphere_error(d: usize, values: &[f64], k: usize) -> Result<f64> {
    let truth = sphere_spectrum(d, k)?;
    surrogate_error(&truth, &inverses_from_values(values, k, None).values, k)
}

fn save_estimate(est: &SpectralEstimate, path: &Path) -> Result<()> {
    if path.extension().is_some_and(|e| e == "glkn") {
        Container::from(est).save(path)
    } else {
        serde_json::to_writer(BufWriter::new(File::create(path)?), est)?;
        Ok(())
    }
}

fn load_estimate(path: &Path) -> Result<SpectralEstimate> {
    if path.extension().is_some_and(|e| e == "glkn") {
        SpectralEstimate::try_from(&Container::load(path)?)
    } else {
        Ok(serde_json::from_reader(io::BufReader::new(File::open(path)?))?)
    }
}

fn run_decompose(a: DecomposeArgs) -> Result<()> {
    let data = load(&a.data)?;
    let kernel = parse_kernel(&a.solve.kernel)?;
    let opts = DecomposeOptions {
        p: a.solve.p,
        epsilon: a.solve.epsilon,
        seed: a.data.seed,
        geometry: a.geometry.into(),
    };
    let est = decompose(&data, &kernel, &opts)?;
    if let Some(path) = &a.save {
        save_estimate(&est, path)?;
    }
    let mut rows = Rows::new(&a.out)?;
    report_values(&mut rows, &est.values, a.solve.k)?;
    if a.solve.truth_sphere {
        rows.row("surrogate_error", None, sphere_error(data.d(), &est.values, a.solve.k)?)?;
    }
    rows.finish()
}

fn run_graph(a: GraphArgs) -> Result<()> {
    let data = load(&a.data)?;
    let kernel = parse_kernel(&a.solve.kernel)?;
    let scheme = match a.alpha {
        Some(alpha) => WeightScheme::Gaussian { alpha },
        None => WeightScheme::Kernel { kernel },
    };
    let opts = GraphOptions {
        p: a.solve.p,
        epsilon: a.solve.epsilon,
        seed: a.data.seed,
        max_n: a.max_n,
    };
    let est = graph_decompose(&data, &kernel, scheme, &opts)?;
    let mut rows = Rows::new(&a.out)?;
    if a.solve.truth_sphere {
        // Graph eigenvalues carry an arbitrary scale; match the first k to the truth.
        let k = a.solve.k;
        let truth = sphere_spectrum(data.d(), k)?.flattened();
        let modes = nonzero_modes(&est.values, None);
        let m = modes.len().min(k);
        if m == 0 {
            return Err(Error::Solver("no nonzero eigenvalues to rescale".into()));
        }
        let scaled = rescale_eigenvalues(&modes, truth[..m].iter().sum(), m)?;
        report_values(&mut rows, &scaled, k)?;
        rows.row("surrogate_error", None, sphere_error(data.d(), &scaled, k)?)?;
    } else {
        report_values(&mut rows, &est.values, a.solve.k)?;
    }
    rows.finish()
}

fn run_hermite(a: HermiteArgs) -> Result<()> {
    let kernel = parse_kernel(&a.kernel)?;
    let opts = FitOptions {
        p: a.p,
        epsilon: a.epsilon,
        seed: a.seed,
    };
    let (problem, demo) = match a.data.strip_prefix("sampler:") {
        Some(_) => {
            let data = load_data(&a.data, a.n, a.d, 0.05, a.seed)?;
            let (n, d) = (data.n(), data.d());
            (HermiteProblem::new(data, vec![1.0; n], vec![0.0; n * d])?, true)
        }
        None => (read_hermite_csv(Path::new(&a.data))?, false),
    };
    let test = match (&a.test, demo) {
        (Some(path), _) => Some(read_hermite_csv(path)?),
        (None, true) => {
            let data = load_data(&a.data, a.n, a.d, 0.05, a.seed.wrapping_add(1))?;
            let (n, d) = (data.n(), data.d());
            Some(HermiteProblem::new(data, vec![1.0; n], vec![0.0; n * d])?)
        }
        (None, false) => None,
    };
    let model = hermite_fit(&problem, &kernel, &opts)?;
    if let Some(path) = &a.save {
        serde_json::to_writer(BufWriter::new(File::create(path)?), &model)?;
    }
    let mut rows = Rows::new(&a.out)?;
    rows.row("train_rmse", None, rmse(&model, problem.data(), problem.values())?)?;
    if let Some(test) = test {
        rows.row("test_rmse", None, rmse(&model, test.data(), test.values())?)?;
        let plain = plain_ridge_fit(problem.data(), problem.values(), &kernel, &opts)?;
        rows.row("plain_test_rmse", None, rmse(&plain, test.data(), test.values())?)?;
    }
    rows.finish()
}

fn run_sweep(a: SweepArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.config)?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(r) = a.reps {
        cfg.repetitions = r;
    }
    if let Some(s) = a.seed {
        cfg.base_seed = s;
    }
    cfg.validate()?;
    let mut w = open_out(&a.out.out)?;
    match a.out.format {
        Format::Jsonl => run_experiment_with(&cfg, |item: &StreamItem| {
            sweep::write_jsonl(&mut w, item)?;
            w.flush()?;
            Ok(())
        }),
        Format::Csv => {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(sweep::CSV_HEADER)?;
            run_experiment_with(&cfg, |item: &StreamItem| {
                for row in sweep::csv_rows(item) {
                    out.write_record(&row)?;
                }
                out.flush()?;
                Ok(())
            })
        }
    }
}

fn run_export(a: ExportArgs) -> Result<()> {
    let est = match (&a.estimate, &a.data) {
        (Some(path), _) => load_estimate(path)?,
        (None, Some(spec)) => {
            let kernel = parse_kernel(
                a.kernel
                    .as_deref()
                    .ok_or_else(|| Error::Config("--kernel is required with --data".into()))?,
            )?;
            let data = load_data(spec, a.n, Some(2), a.noise, a.seed)?;
            let opts = DecomposeOptions {
                p: a.p,
                epsilon: a.epsilon,
                seed: a.seed,
                ..Default::default()
            };
            decompose(&data, &kernel, &opts)?
        }
        (None, None) => return Err(Error::Config("one of --estimate or --data is required".into())),
    };
    for (name, len) in [
        ("--mins", a.mins.len()),
        ("--maxs", a.maxs.len()),
        ("--resolution", a.resolution.len()),
    ] {
        if len != 2 {
            return Err(Error::Config(format!(
                "{name} takes two comma-separated values, got {len}"
            )));
        }
    }
    let grid = GridSpec {
        mins: [a.mins[0], a.mins[1]],
        maxs: [a.maxs[0], a.maxs[1]],
        resolution: [a.resolution[0], a.resolution[1]],
    };
    let table = export_eigenfunction_grid(&est, &a.indices, &grid)?;
    let mut w = open_out(&a.out)?;
    table.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn run_time(a: TimeArgs) -> Result<()> {
    let kernel = parse_kernel(&a.kernel)?;
    let rows = time_scaling_report(&kernel, a.p, &a.n, &a.d, a.seed, a.reps)?;
    let mut w = open_out(&a.out.out)?;
    match a.out.format {
        Format::Csv => {
            writeln!(w, "n,d,p,seconds")?;
            for r in &rows {
                writeln!(w, "{},{},{},{:?}", r.n, r.d, r.p, r.seconds)?;
            }
        }
        Format::Jsonl => {
            for r in &rows {
                writeln!(w, "{}", serde_json::to_string(r)?)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Decompose(a) => run_decompose(a),
        Command::GraphBaseline(a) => run_graph(a),
        Command::Hermite(a) => run_hermite(a),
        Command::Sweep(a) => run_sweep(a),
        Command::ExportGrid(a) => run_export(a),
        Command::TimeReport(a) => run_time(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
