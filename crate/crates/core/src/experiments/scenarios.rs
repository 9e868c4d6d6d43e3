use std::path::Path;

use rand::Rng as _;
use serde::Serialize;
use serde_json::json;

use crate::density_est::{DensityEstimate, KernelKind};
use crate::error::Result;
use crate::estimation::{
    estimate_intensity, intensity_errors, Bandwidth, ErrorNorms, EstimatorConfig, IntensityEstimate,
    MeanMethod,
};
use crate::grid_fn::{node, GridFunction, WarpingFunction};
use crate::io::write_curves_csv;
use crate::karcher::{karcher_mean_densities, mean_objective, nonneg_alignments, FlatStructure};
use crate::phase_metrics::d_ext;
use crate::point_process::{simulate_pp, warp_events, TrialSet};
use crate::rng::{derive_seed, rng_from_seed};

use super::{exp_warp, power_lin_warp, sine_intensity, triangle_intensity, write_warps};

/// Support half-width of the truncated Gaussian kernel in the sine simulation.
pub const SIM1_BANDWIDTH: f64 = 0.08;

/// `aᵢ` equally spaced over `[−range, range]`, endpoints included.
pub fn sim1_warp_parameters(range: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n)
        .map(|i| -range + 2.0 * range * i as f64 / (n - 1) as f64)
        .collect()
}

/// Observed trials: `Sᵢ = γᵢ⁻¹(Rᵢ)` with `Rᵢ ~ PP(λ)` drawn from sub-seed `i`.
pub fn warped_trials(lambda: &GridFunction, warps: &[WarpingFunction], seed: u64) -> Result<TrialSet> {
    let trials = warps
        .iter()
        .enumerate()
        .map(|(i, g)| Ok(warp_events(&simulate_pp(lambda, derive_seed(seed, i as u64))?, g)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialSet::new(trials))
}

#[derive(Debug, Clone, Serialize)]
pub struct Sim1Row {
    pub method: MeanMethod,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

pub struct Sim1Output {
    pub warp_range: f64,
    pub warps: Vec<WarpingFunction>,
    pub truth: GridFunction,
    pub trials: TrialSet,
    pub config: EstimatorConfig,
    pub estimates: Vec<(MeanMethod, IntensityEstimate)>,
    pub table: Vec<Sim1Row>,
}

impl Sim1Output {
    pub fn row(&self, m: MeanMethod) -> &Sim1Row {
        self.table.iter().find(|r| r.method == m).expect("all methods are run")
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(dir.join("table2.csv"))?;
        w.write_record(["method", "l1", "l2", "linf"])?;
        for r in &self.table {
            w.write_record([
                r.method.name().to_string(),
                r.l1.to_string(),
                r.l2.to_string(),
                r.linf.to_string(),
            ])?;
        }
        w.flush().map_err(|e| crate::Error::io(dir.join("table2.csv"), e))?;
        let mut names = vec!["truth"];
        let mut curves = vec![&self.truth];
        for (m, e) in &self.estimates {
            names.push(m.name());
            curves.push(&e.intensity);
        }
        write_curves_csv(&dir.join("intensities.csv"), &names, &curves)?;
        write_warps(&dir.join("warps.csv"), &self.warps)?;
        let proposed = &self.estimates[0].1;
        let trial_pdfs: Vec<&GridFunction> =
            proposed.per_trial.iter().flatten().map(|t| t.density.pdf()).collect();
        let trial_names: Vec<String> = (1..=trial_pdfs.len()).map(|i| format!("trial_{i}")).collect();
        let refs: Vec<&str> = trial_names.iter().map(String::as_str).collect();
        write_curves_csv(&dir.join("trial_densities.csv"), &refs, &trial_pdfs)
    }

    pub fn config(&self) -> serde_json::Value {
        json!({
            "warp_range": self.warp_range,
            "warp_parameters": sim1_warp_parameters(self.warp_range, self.warps.len()),
            "n_trials": self.trials.len(),
            "estimator": self.config,
        })
    }
}

pub fn run_sim1(severe: bool, seed: u64, grid_size: usize) -> Result<Sim1Output> {
    run_sim1_range(if severe { 4.0 } else { 2.0 }, seed, grid_size)
}

pub fn run_sim1_range(range: f64, seed: u64, grid_size: usize) -> Result<Sim1Output> {
    let config = EstimatorConfig {
        bandwidth: Bandwidth::Fixed(SIM1_BANDWIDTH),
        grid_size,
        ..EstimatorConfig::default()
    };
    run_sim1_with(range, seed, &config)
}

/// Twenty trials of the sine intensity under the fixed exponential warps,
/// estimated with every mean method (truncated Gaussian kernel, fixed width).
pub fn run_sim1_with(range: f64, seed: u64, config: &EstimatorConfig) -> Result<Sim1Output> {
    let grid_size = config.grid_size;
    let config = config.clone();
    let truth = sine_intensity(grid_size);
    let warps: Vec<WarpingFunction> = sim1_warp_parameters(range, 20)
        .into_iter()
        .map(|a| exp_warp(a, grid_size))
        .collect();
    let trials = warped_trials(&truth, &warps, seed)?;
    let mut estimates = Vec::new();
    let mut table = Vec::new();
    for m in MeanMethod::ALL {
        let cfg = EstimatorConfig {
            mean_method: m,
            ..config.clone()
        };
        let est = estimate_intensity(&trials, &cfg)?;
        let ErrorNorms { l1, l2, linf } = intensity_errors(&est.intensity, &truth);
        table.push(Sim1Row { method: m, l1, l2, linf });
        estimates.push((m, est));
    }
    Ok(Sim1Output {
        warp_range: range,
        warps,
        truth,
        trials,
        config,
        estimates,
        table,
    })
}

/// `eᵢ = 1/(2 − 0.2(i − 1))` for `i ≤ 6`, `0.2(i − 6) + 1` above.
pub fn sim2_exponents() -> Vec<f64> {
    (1..=11)
        .map(|i| {
            if i <= 6 {
                1.0 / (2.0 - 0.2 * (i - 1) as f64)
            } else {
                0.2 * (i - 6) as f64 + 1.0
            }
        })
        .collect()
}

pub fn sim2_warps(grid_size: usize) -> Result<Vec<WarpingFunction>> {
    sim2_exponents().into_iter().map(|e| power_lin_warp(e, grid_size)).collect()
}

/// Largest deviation of `g` from the chord across each flat span.
pub fn flat_linearity_residual(g: &WarpingFunction, flats: &FlatStructure) -> f64 {
    let v = g.values();
    let n = v.len();
    let mut worst: f64 = 0.0;
    for &(a, b) in flats.spans() {
        let (ta, tb) = (node(a, n), node(b, n));
        for k in a..=b {
            let w = (node(k, n) - ta) / (tb - ta);
            worst = worst.max((v[k] - (v[a] + w * (v[b] - v[a]))).abs());
        }
    }
    worst
}

pub struct Sim2Output {
    pub warps: Vec<WarpingFunction>,
    pub truth: GridFunction,
    pub trials: TrialSet,
    pub config: EstimatorConfig,
    pub estimate: IntensityEstimate,
    pub naive: IntensityEstimate,
    pub peak: f64,
    pub flats: Vec<(f64, f64)>,
    pub mass_outside: f64,
    pub errors: ErrorNorms,
    pub linearity_residual: f64,
}

impl Sim2Output {
    pub fn summary(&self) -> serde_json::Value {
        json!({
            "peak": self.peak,
            "flats": self.flats,
            "mass_outside_0.23_0.77": self.mass_outside,
            "errors": self.errors,
            "naive_errors": intensity_errors(&self.naive.intensity, &self.truth),
            "flat_linearity_residual": self.linearity_residual,
            "total_intensity": self.estimate.total,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_curves_csv(
            &dir.join("intensities.csv"),
            &["truth", "proposed", "cross_sectional"],
            &[&self.truth, &self.estimate.intensity, &self.naive.intensity],
        )?;
        write_warps(&dir.join("warps.csv"), &self.warps)?;
        let pdfs: Vec<&GridFunction> =
            self.estimate.per_trial.iter().flatten().map(|t| t.density.pdf()).collect();
        let names: Vec<String> = (1..=pdfs.len()).map(|i| format!("trial_{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        write_curves_csv(&dir.join("trial_densities.csv"), &refs, &pdfs)
    }

    pub fn config(&self) -> serde_json::Value {
        json!({
            "exponents": sim2_exponents(),
            "n_trials": self.trials.len(),
            "estimator": self.config,
        })
    }
}

/// Eleven trials of the triangular intensity under the linearized power
/// warps, estimated in nonnegative mode with a fixed truncated Gaussian kernel.
pub fn run_sim2(seed: u64, bandwidth: f64, grid_size: usize) -> Result<Sim2Output> {
    let truth = triangle_intensity(grid_size);
    let warps = sim2_warps(grid_size)?;
    let trials = warped_trials(&truth, &warps, seed)?;
    let config = EstimatorConfig {
        kernel: KernelKind::TruncatedGaussian,
        bandwidth: Bandwidth::Fixed(bandwidth),
        grid_size,
        nonneg_mode: true,
        ..EstimatorConfig::default()
    };
    let estimate = estimate_intensity(&trials, &config)?;
    let naive = estimate_intensity(
        &trials,
        &EstimatorConfig {
            mean_method: MeanMethod::CrossSectional,
            ..config.clone()
        },
    )?;
    let pdf = estimate.density.pdf();
    let peak = pdf.node(pdf.argmax());
    let inside = pdf.zip_with(&GridFunction::identity(grid_size), |v, t| {
        if (0.23..=0.77).contains(&t) {
            v
        } else {
            0.0
        }
    });
    let mass_outside = (1.0 - inside.integrate()).max(0.0);
    let fs: Vec<DensityEstimate> = estimate.per_trial.iter().flatten().map(|t| t.density.clone()).collect();
    let (flats, aligned) = nonneg_alignments(&fs)?;
    let linearity_residual = aligned
        .iter()
        .map(|g| flat_linearity_residual(g, &flats[0]))
        .fold(0.0, f64::max);
    let errors = intensity_errors(&estimate.intensity, &truth);
    let flats_mean = crate::karcher::detect_flats(&estimate.density).intervals();
    Ok(Sim2Output {
        warps,
        truth,
        trials,
        config,
        estimate,
        naive,
        peak,
        flats: flats_mean,
        mass_outside,
        errors,
        linearity_residual,
    })
}

pub const BETA_PARAMETERS: [(f64, f64); 10] = [
    (1.0, 4.0),
    (1.0, 3.0),
    (1.5, 3.0),
    (2.0, 2.5),
    (2.0, 2.0),
    (2.5, 2.0),
    (3.0, 1.5),
    (3.0, 1.0),
    (4.0, 1.0),
    (5.0, 2.0),
];

pub(crate) const BETA_FLOOR: f64 = 1e-3;

/// The ten Beta densities on the grid, floored at `floor` and renormalized so
/// they are strictly positive up to the endpoints.
pub fn beta_densities(grid_size: usize, floor: f64) -> Result<Vec<DensityEstimate>> {
    BETA_PARAMETERS
        .iter()
        .map(|&(a, b)| {
            let norm = statrs::function::beta::beta(a, b);
            let pdf = GridFunction::from_fn(grid_size, |t| {
                t.powf(a - 1.0) * (1.0 - t).powf(b - 1.0) / norm + floor
            })?;
            DensityEstimate::from_pdf(pdf)
        })
        .collect()
}

pub struct BetaMeans {
    pub inputs: Vec<DensityEstimate>,
    pub mean: DensityEstimate,
    pub objective_mean: f64,
    pub objective_inputs: Vec<f64>,
}

impl BetaMeans {
    pub fn summary(&self) -> serde_json::Value {
        json!({
            "objective_at_mean": self.objective_mean,
            "objective_at_inputs": self.objective_inputs,
            "mean_mass": self.mean.pdf().integrate(),
            "mean_min": self.mean.pdf().min(),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_curves_csv(
            &dir.join("mean_density.csv"),
            &["pdf", "cdf"],
            &[self.mean.pdf(), self.mean.cdf()],
        )?;
        let names: Vec<String> = BETA_PARAMETERS.iter().map(|(a, b)| format!("beta_{a}_{b}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let curves: Vec<&GridFunction> = self.inputs.iter().map(DensityEstimate::pdf).collect();
        write_curves_csv(&dir.join("inputs.csv"), &refs, &curves)
    }

    pub fn config(&self) -> serde_json::Value {
        json!({ "parameters": BETA_PARAMETERS })
    }
}

pub fn run_beta_means(grid_size: usize, floor: f64) -> Result<BetaMeans> {
    let inputs = beta_densities(grid_size, floor)?;
    let mean = karcher_mean_densities(&inputs)?;
    let objective_mean = mean_objective(&mean, &inputs)?;
    let objective_inputs = inputs
        .iter()
        .map(|f| mean_objective(f, &inputs))
        .collect::<Result<Vec<_>>>()?;
    Ok(BetaMeans {
        inputs,
        mean,
        objective_mean,
        objective_inputs,
    })
}

/// One replicate of the consistency study: `n` trials of `total · f_sine`
/// under exponential warps with `a ~ U[−2, 2]`, returning `d_ext(f̂, f)`.
pub fn consistency_trial(n: usize, total: f64, seed: u64, cfg: &EstimatorConfig) -> Result<f64> {
    let grid = cfg.grid_size;
    let truth = sine_intensity(grid).scale(total / 300.0);
    let mut rng = rng_from_seed(derive_seed(seed, u64::MAX));
    let warps: Vec<WarpingFunction> = (0..n)
        .map(|_| exp_warp(rng.random_range(-2.0..=2.0), grid))
        .collect();
    let trials = warped_trials(&truth, &warps, seed)?;
    let est = estimate_intensity(&trials, cfg)?;
    let f = DensityEstimate::from_pdf(truth)?;
    d_ext(&est.density, &f)
}
