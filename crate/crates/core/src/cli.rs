//! Command-line front end: argument parsing, run directories and the
//! exit-code contract (0 ok, 1 usage, 2 data, 3 numerical failure).

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Serialize, Serializer};
use serde_json::json;

use crate::density_est::KernelKind;
use crate::error::Error;
use crate::estimation::{estimate_intensity, write_estimate, Bandwidth, EstimatorConfig, MeanMethod};
use crate::experiments::{
    density_or_uniform, exp_warp, ingest_spike_trains, power_lin_warp, run_classification, run_scenario,
    sim1_warp_parameters, sine_intensity, triangle_intensity, warped_trials, write_class_means,
    write_warps, ScenarioName, ScenarioSpec,
};
use crate::grid_fn::{GridFunction, WarpingFunction, DEFAULT_GRID_SIZE};
use crate::io::{read_grid_csv, read_trials, write_curves_csv, write_json, write_trials_jsonl};
use crate::karcher::{Aligner, DEFAULT_DP_PENALTY};
use crate::phase_metrics::{distance_matrix, Metric};
use crate::point_process::TrialSet;

#[derive(Debug, Parser)]
#[command(
    name = "ppwarp",
    version,
    about = "Intensity estimation for Poisson processes observed under random time warping"
)]
pub struct Cli {
    /// Worker threads for trial- and seed-level loops [default: available cores]
    #[arg(long, global = true, value_name = "K")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate warped Poisson trials
    Simulate(SimulateArgs),
    /// Estimate the intensity from a trial file
    Estimate(EstimateArgs),
    /// Pairwise distance matrix between trial densities
    Distance(DistanceArgs),
    /// Nearest-mean classification of labeled trials
    Classify(ClassifyArgs),
    /// Rerun a reference scenario
    Reproduce(ReproduceArgs),
}

/// Per-trial density options shared by the estimating subcommands.
#[derive(Debug, Args, Serialize)]
pub struct DensityArgs {
    /// Kernel family
    #[arg(long, value_enum, default_value_t = KernelKind::TruncatedGaussian)]
    pub kernel: KernelKind,

    /// Fixed kernel support half-width in (0, 1] [default: plug-in rule per trial]
    #[arg(long, value_name = "H", conflicts_with = "plug_in")]
    pub bandwidth: Option<f64>,

    /// Per-trial rule-of-thumb bandwidth (the default)
    #[arg(long)]
    pub plug_in: bool,

    /// Number of grid points on [0, 1]
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    pub grid_size: usize,
}

impl DensityArgs {
    fn bandwidth(&self) -> Bandwidth {
        match self.bandwidth {
            Some(h) => Bandwidth::Fixed(h),
            None => Bandwidth::PlugIn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignerKind {
    /// Quantile composition `F₂⁻¹ ∘ F₁`
    #[value(name = "closed_form")]
    ClosedForm,
    /// Penalized dynamic programming
    Dp,
}

/// Options of the mean across trials.
#[derive(Debug, Args, Serialize)]
pub struct MeanArgs {
    /// Mean of the per-trial densities
    #[arg(long, value_enum, default_value_t = MeanMethod::Proposed)]
    pub method: MeanMethod,

    /// Allow densities that vanish on stretches of [0, 1]
    #[arg(long)]
    pub nonneg: bool,

    /// Pairwise warps of the proposed mean
    #[arg(long, value_enum, default_value_t = AlignerKind::ClosedForm)]
    pub aligner: AlignerKind,

    /// Roughness penalty of the dynamic-programming alignment
    #[arg(long, default_value_t = DEFAULT_DP_PENALTY)]
    pub penalty: f64,

    /// Index of the template among the nonempty trials; the closed-form mean does not depend on it
    #[arg(long, default_value_t = 0)]
    pub template: usize,
}

fn estimator_config(d: &DensityArgs, m: &MeanArgs) -> EstimatorConfig {
    EstimatorConfig {
        kernel: d.kernel,
        bandwidth: d.bandwidth(),
        grid_size: d.grid_size,
        mean_method: m.method,
        nonneg_mode: m.nonneg,
        dp_penalty: m.penalty,
        template: m.template,
        aligner: match m.aligner {
            AlignerKind::ClosedForm => Aligner::ClosedForm,
            AlignerKind::Dp => Aligner::Dp { penalty: m.penalty },
        },
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Intensity: builtin:sine, builtin:triangle or a t,value CSV
    #[arg(long, value_name = "SOURCE")]
    pub intensity: IntensitySource,

    /// Number of trials
    #[arg(long)]
    pub n: usize,

    /// Warp: id, exp:a=<real>, exp:range=<real>, power-lin:e=<real> or file:<csv>
    #[arg(long, value_name = "SPEC", default_value = "id")]
    pub warp: WarpSpec,

    /// Master seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Number of grid points on [0, 1]
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    pub grid_size: usize,

    /// Output directory
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,

    /// Write into a non-empty output directory
    #[arg(long)]
    #[serde(skip)]
    pub force: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    /// Trial file (JSON lines or plain text)
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,

    #[command(flatten)]
    #[serde(flatten)]
    pub mean: MeanArgs,

    #[command(flatten)]
    #[serde(flatten)]
    pub density: DensityArgs,

    /// True intensity for error norms: builtin:sine, builtin:triangle or a CSV
    #[arg(long, value_name = "SOURCE")]
    pub truth: Option<IntensitySource>,

    /// Output directory
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,

    /// Write into a non-empty output directory
    #[arg(long)]
    #[serde(skip)]
    pub force: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct DistanceArgs {
    /// Trial file (JSON lines or plain text)
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,

    /// Distance between trial densities
    #[arg(long, value_enum, default_value_t = Metric::Ext)]
    pub metric: Metric,

    #[command(flatten)]
    #[serde(flatten)]
    pub density: DensityArgs,

    /// Output CSV; the configuration goes next to it as <stem>.config.json
    #[arg(long, value_name = "CSV")]
    #[serde(skip)]
    pub out: PathBuf,

    /// Overwrite existing output files
    #[arg(long)]
    #[serde(skip)]
    pub force: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ClassifyArgs {
    /// Labeled training trials
    #[arg(long, value_name = "FILE")]
    pub train: PathBuf,

    /// Test trials; labels, when present, give the accuracy
    #[arg(long, value_name = "FILE")]
    pub test: PathBuf,

    /// Distance from a test density to the class means
    #[arg(long, value_enum, default_value_t = Metric::Ext)]
    pub metric: Metric,

    /// Event times are seconds in [0, T]; rescale them onto [0, 1]
    #[arg(long, value_name = "T")]
    pub normalize_to: Option<f64>,

    #[command(flatten)]
    #[serde(flatten)]
    pub mean: MeanArgs,

    #[command(flatten)]
    #[serde(flatten)]
    pub density: DensityArgs,

    /// Output directory
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,

    /// Write into a non-empty output directory
    #[arg(long)]
    #[serde(skip)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Scenario to run
    #[arg(long, value_enum)]
    pub scenario: ScenarioName,

    /// Master seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Number of grid points on [0, 1]
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    pub grid_size: usize,

    /// Output directory
    #[arg(long)]
    pub out: PathBuf,

    /// Write into a non-empty output directory
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IntensitySource {
    Sine,
    Triangle,
    File(PathBuf),
}

impl FromStr for IntensitySource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "builtin:sine" => Ok(Self::Sine),
            "builtin:triangle" => Ok(Self::Triangle),
            _ if s.starts_with("builtin:") => Err(format!("unknown builtin intensity {s:?}")),
            _ if s.is_empty() => Err("empty intensity source".into()),
            _ => Ok(Self::File(s.into())),
        }
    }
}

impl fmt::Display for IntensitySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Sine => f.write_str("builtin:sine"),
            Self::Triangle => f.write_str("builtin:triangle"),
            Self::File(p) => write!(f, "{}", p.display()),
        }
    }
}

impl Serialize for IntensitySource {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl IntensitySource {
    fn load(&self, n: usize) -> Result<GridFunction, Failure> {
        match self {
            Self::Sine => Ok(sine_intensity(n)),
            Self::Triangle => Ok(triangle_intensity(n)),
            Self::File(p) => {
                let f = read_grid_csv(p).map_err(Failure::from_data)?;
                if f.min() < 0.0 {
                    return Err(Failure::Data(format!("{}: intensity takes negative values", p.display())));
                }
                Ok(f.resample(n))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WarpSpec {
    Identity,
    /// One exponential warp for every trial.
    Exp(f64),
    /// Trial `i` of `n` gets the exponential warp with `aᵢ` equally spaced
    /// over `[−r, r]`.
    ExpRange(f64),
    PowerLin(f64),
    File(PathBuf),
}

impl FromStr for WarpSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let real = |v: &str| {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("bad number {v:?} in warp spec {s:?}"))
        };
        if s == "id" {
            Ok(Self::Identity)
        } else if let Some(v) = s.strip_prefix("exp:a=") {
            Ok(Self::Exp(real(v)?))
        } else if let Some(v) = s.strip_prefix("exp:range=") {
            Ok(Self::ExpRange(real(v)?))
        } else if let Some(v) = s.strip_prefix("power-lin:e=") {
            let e = real(v)?;
            if e <= 0.0 {
                return Err(format!("power-lin exponent must be > 0, got {e}"));
            }
            Ok(Self::PowerLin(e))
        } else if let Some(p) = s.strip_prefix("file:") {
            Ok(Self::File(p.into()))
        } else {
            Err(format!(
                "unknown warp spec {s:?}; expected id, exp:a=<real>, exp:range=<real>, power-lin:e=<real> or file:<csv>"
            ))
        }
    }
}

impl fmt::Display for WarpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => f.write_str("id"),
            Self::Exp(a) => write!(f, "exp:a={a}"),
            Self::ExpRange(r) => write!(f, "exp:range={r}"),
            Self::PowerLin(e) => write!(f, "power-lin:e={e}"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl Serialize for WarpSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl WarpSpec {
    fn warps(&self, trials: usize, n: usize) -> Result<Vec<WarpingFunction>, Failure> {
        let same = |g: WarpingFunction| vec![g; trials];
        Ok(match self {
            Self::Identity => same(WarpingFunction::identity(n)),
            Self::Exp(a) => same(exp_warp(*a, n)),
            Self::ExpRange(r) => sim1_warp_parameters(*r, trials)
                .into_iter()
                .map(|a| exp_warp(a, n))
                .collect(),
            Self::PowerLin(e) => same(power_lin_warp(*e, n).map_err(Failure::from_runtime)?),
            Self::File(p) => {
                let g = read_grid_csv(p).map_err(Failure::from_data)?;
                let w = WarpingFunction::new(g.into_values())
                    .map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
                same(w.resample(n))
            }
        })
    }
}

/// A failed invocation and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn from_data(e: Error) -> Self {
        Failure::Data(e.to_string())
    }

    /// Errors raised after the arguments have been validated: problems with
    /// the input content are data errors, everything else is numerical.
    fn from_runtime(e: Error) -> Self {
        match e {
            Error::Empty(_) | Error::InvalidParameter(_) => Failure::Data(e.to_string()),
            _ if e.is_data_error() => Failure::Data(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage: {m}"),
            Failure::Data(m) => write!(f, "data: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.jobs {
        Some(0) => Err(Failure::Usage("--jobs must be at least 1".into())),
        Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
            Ok(pool) => pool.install(|| execute(cli.command)),
            Err(e) => Err(Failure::Usage(format!("cannot start {k} workers: {e}"))),
        },
        None => execute(cli.command),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}

fn execute(cmd: Command) -> CliResult {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Distance(a) => distance(a),
        Command::Classify(a) => classify(a),
        Command::Reproduce(a) => reproduce(a),
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn check_grid(n: usize) -> CliResult {
    if n < 64 {
        return Err(Failure::Usage(format!("--grid-size must be >= 64, got {n}")));
    }
    Ok(())
}

/// Creates `dir` if needed; an existing non-empty directory needs `force`.
fn prepare_dir(dir: &Path, force: bool) -> CliResult {
    if dir.exists() {
        if !dir.is_dir() {
            return Err(Failure::Usage(format!("{} exists and is not a directory", dir.display())));
        }
        let nonempty = fs::read_dir(dir)
            .map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?
            .next()
            .is_some();
        if nonempty && !force {
            return Err(Failure::Usage(format!(
                "output directory {} is not empty; pass --force to overwrite",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))
}

fn prepare_file(path: &Path, force: bool) -> CliResult {
    if path.is_dir() {
        return Err(Failure::Usage(format!("{} is a directory", path.display())));
    }
    if path.exists() && !force {
        return Err(Failure::Usage(format!(
            "{} exists; pass --force to overwrite",
            path.display()
        )));
    }
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            fs::create_dir_all(p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))
        }
        _ => Ok(()),
    }
}

fn write_config(path: &Path, command: &str, args: &impl Serialize, extra: serde_json::Value) -> CliResult {
    let mut v = json!({ "command": command, "args": args });
    if let (Some(obj), serde_json::Value::Object(more)) = (v.as_object_mut(), extra) {
        obj.extend(more);
    }
    write_json(path, &v).map_err(Failure::from_data)
}

fn load_trials(path: &Path) -> CliResult<TrialSet> {
    read_trials(path).map_err(Failure::from_data)
}

fn simulate(a: SimulateArgs) -> CliResult {
    check_grid(a.grid_size)?;
    if a.n == 0 {
        return Err(Failure::Usage("--n must be at least 1".into()));
    }
    prepare_dir(&a.out, a.force)?;
    let lambda = a.intensity.load(a.grid_size)?;
    let warps = a.warp.warps(a.n, a.grid_size)?;
    let trials = warped_trials(&lambda, &warps, a.seed).map_err(Failure::from_runtime)?;
    write_trials_jsonl(&a.out.join("trials.jsonl"), &trials).map_err(Failure::from_data)?;
    write_curves_csv(&a.out.join("intensity.csv"), &["intensity"], &[&lambda]).map_err(Failure::from_data)?;
    write_warps(&a.out.join("warps.csv"), &warps).map_err(Failure::from_data)?;
    write_config(
        &a.out.join("config.json"),
        "simulate",
        &a,
        json!({ "total_intensity": lambda.integrate() }),
    )
}

fn estimate(a: EstimateArgs) -> CliResult {
    let cfg = estimator_config(&a.density, &a.mean);
    cfg.validate().map_err(usage)?;
    let trials = load_trials(&a.input)?;
    let truth = a.truth.as_ref().map(|t| t.load(cfg.grid_size)).transpose()?;
    prepare_dir(&a.out, a.force)?;
    let est = estimate_intensity(&trials, &cfg).map_err(|e| match e {
        Error::Empty(_) => Failure::Data(format!("{}: every trial is empty", a.input.display())),
        e => Failure::from_runtime(e),
    })?;
    write_estimate(&a.out, &trials, &est, &cfg, truth.as_ref()).map_err(Failure::from_data)?;
    write_config(&a.out.join("config.json"), "estimate", &a, json!({ "estimator": cfg }))
}

fn distance(a: DistanceArgs) -> CliResult {
    let cfg = EstimatorConfig {
        kernel: a.density.kernel,
        bandwidth: a.density.bandwidth(),
        grid_size: a.density.grid_size,
        ..EstimatorConfig::default()
    };
    cfg.validate().map_err(usage)?;
    let trials = load_trials(&a.input)?;
    prepare_file(&a.out, a.force)?;
    let fs = trials
        .trials
        .iter()
        .map(|x| density_or_uniform(x, &cfg))
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::from_runtime)?;
    let d = distance_matrix(&fs, a.metric).map_err(Failure::from_runtime)?;
    let mut w = csv::Writer::from_path(&a.out).map_err(|e| Failure::Data(format!("{}: {e}", a.out.display())))?;
    let write_err = |e: csv::Error| Failure::Data(format!("{}: {e}", a.out.display()));
    let mut header = vec!["trial_id".to_string()];
    header.extend(trials.ids.iter().cloned());
    w.write_record(&header).map_err(write_err)?;
    for (id, row) in trials.ids.iter().zip(&d) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec).map_err(write_err)?;
    }
    w.flush().map_err(|e| Failure::Data(format!("{}: {e}", a.out.display())))?;
    let stem = a.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let cfg_path = a.out.with_file_name(format!("{stem}.config.json"));
    write_config(&cfg_path, "distance", &a, json!({ "estimator": cfg }))
}

fn classify(a: ClassifyArgs) -> CliResult {
    let cfg = estimator_config(&a.density, &a.mean);
    cfg.validate().map_err(usage)?;
    if let Some(t) = a.normalize_to {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Failure::Usage(format!("--normalize-to must be > 0, got {t}")));
        }
    }
    let load = |p: &Path| -> CliResult<(TrialSet, usize)> {
        match a.normalize_to {
            Some(t) => ingest_spike_trains(p, t).map_err(Failure::from_data),
            None => load_trials(p).map(|ts| (ts, 0)),
        }
    };
    let (train, clamped_train) = load(&a.train)?;
    let (test, clamped_test) = load(&a.test)?;
    if train.labels.is_none() {
        return Err(Failure::Data(format!("{}: training trials carry no labels", a.train.display())));
    }
    prepare_dir(&a.out, a.force)?;
    let report = run_classification(&train, &test, &cfg, a.metric).map_err(Failure::from_runtime)?;
    write_class_means(&a.out.join("class_means.csv"), &report.classes, &report.means).map_err(Failure::from_data)?;
    write_json(&a.out.join("report.json"), &report).map_err(Failure::from_data)?;
    write_config(
        &a.out.join("config.json"),
        "classify",
        &a,
        json!({ "estimator": cfg, "clamped_events": { "train": clamped_train, "test": clamped_test } }),
    )
}

fn reproduce(a: ReproduceArgs) -> CliResult {
    check_grid(a.grid_size)?;
    prepare_dir(&a.out, a.force)?;
    let spec = ScenarioSpec::defaults(a.scenario, a.seed);
    run_scenario(&spec, a.grid_size, &a.out).map_err(Failure::from_runtime)?;
    Ok(())
}
