//! Reproduction harness: the sine-intensity simulation under exponential
//! warps, the triangular intensity with flat stretches, the Karcher mean of
//! Beta densities, and nearest-mean classification of spike trains.

mod classify;
mod scenarios;

pub use classify::{
    class_means, density_or_uniform, ingest_spike_trains, run_classification, surrogate_config, surrogate_trials,
    synthetic_classification, write_class_means, ClassificationReport, SyntheticClassification,
    SPIKE_KERNEL_WIDTH,
};
pub use scenarios::{
    beta_densities, consistency_trial, flat_linearity_residual, run_beta_means, run_sim1,
    run_sim1_range, run_sim1_with, run_sim2, SIM1_BANDWIDTH,
    sim1_warp_parameters, sim2_exponents, sim2_warps, warped_trials, BetaMeans, Sim1Output, Sim1Row, Sim2Output,
    BETA_PARAMETERS,
};

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_fn::{GridFunction, WarpingFunction};
use crate::io::{write_curves_csv, write_json, write_trials_jsonl};

/// `λ(t) = 100 (3 + 2 sin((8t − 1/2) π))`.
pub fn sine_intensity(n: usize) -> GridFunction {
    GridFunction::from_fn(n, sine_intensity_at).expect("grid size >= 2")
}

pub fn sine_intensity_at(t: f64) -> f64 {
    100.0 * (3.0 + 2.0 * ((8.0 * t - 0.5) * std::f64::consts::PI).sin())
}

/// `λ(t) = 4000 − 16000 |t − 1/2|` on `[1/4, 3/4]`, zero elsewhere.
pub fn triangle_intensity(n: usize) -> GridFunction {
    GridFunction::from_fn(n, triangle_intensity_at).expect("grid size >= 2")
}

pub fn triangle_intensity_at(t: f64) -> f64 {
    if (0.25..=0.75).contains(&t) {
        4000.0 - 16000.0 * (t - 0.5).abs()
    } else {
        0.0
    }
}

/// `γ(t) = (e^{at} − 1)/(e^a − 1)`; the identity at `a = 0`.
pub fn exp_warp(a: f64, n: usize) -> WarpingFunction {
    if a.abs() < 1e-12 {
        return WarpingFunction::identity(n);
    }
    let d = a.exp_m1();
    WarpingFunction::from_fn(n, |t| (a * t).exp_m1() / d).expect("finite samples")
}

/// `γ̃(t) = (sign(2t − 1)|2t − 1|^e + 1)/2`, linearized at the knots
/// `0, 1/4, 1/2, 3/4, 1`.
pub fn power_lin_warp(e: f64, n: usize) -> Result<WarpingFunction> {
    if !(e > 0.0) || !e.is_finite() {
        return Err(Error::InvalidParameter(format!("power-lin exponent must be > 0, got {e}")));
    }
    let raw = |t: f64| {
        let u: f64 = 2.0 * t - 1.0;
        (u.signum() * u.abs().powf(e) + 1.0) / 2.0
    };
    let knots = [0.0, 0.25, 0.5, 0.75, 1.0];
    let vals: Vec<f64> = knots.iter().map(|&t| raw(t)).collect();
    WarpingFunction::from_fn(n, |t| {
        let k = ((t * 4.0).floor() as usize).min(3);
        let w = (t - knots[k]) / 0.25;
        vals[k] + w * (vals[k + 1] - vals[k])
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    Sim1,
    #[value(name = "sim1_severe")]
    Sim1Severe,
    Sim2,
    #[value(name = "beta_means")]
    BetaMeans,
    #[value(name = "classify_synthetic")]
    ClassifySynthetic,
}

/// Name, size, seed and the numeric parameters a scenario runs with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: ScenarioName,
    pub n_trials: usize,
    pub seed: u64,
    pub params: BTreeMap<String, f64>,
}

impl ScenarioSpec {
    pub fn defaults(name: ScenarioName, seed: u64) -> Self {
        let p = |kv: &[(&str, f64)]| kv.iter().map(|&(k, v)| (k.to_string(), v)).collect();
        let (n_trials, params) = match name {
            ScenarioName::Sim1 => (20, p(&[("warp_range", 2.0)])),
            ScenarioName::Sim1Severe => (20, p(&[("warp_range", 4.0)])),
            ScenarioName::Sim2 => (11, p(&[("bandwidth", 0.01)])),
            ScenarioName::BetaMeans => (10, p(&[("density_floor", scenarios::BETA_FLOOR)])),
            ScenarioName::ClassifySynthetic => (
                240,
                p(&[
                    ("classes", 4.0),
                    ("train_per_class", 30.0),
                    ("test_per_class", 30.0),
                    ("total_intensity", 150.0),
                    ("warp_range", 1.0),
                    ("dp_penalty", 0.01),
                ]),
            ),
        };
        Self {
            name,
            n_trials,
            seed,
            params,
        }
    }

    fn required(&self) -> &'static [&'static str] {
        match self.name {
            ScenarioName::Sim1 | ScenarioName::Sim1Severe => &["warp_range"],
            ScenarioName::Sim2 => &["bandwidth"],
            ScenarioName::BetaMeans => &["density_floor"],
            ScenarioName::ClassifySynthetic => &[
                "classes",
                "train_per_class",
                "test_per_class",
                "total_intensity",
                "warp_range",
                "dp_penalty",
            ],
        }
    }

    /// Every parameter the scenario reads must be present.
    pub fn validate(&self) -> Result<()> {
        for key in self.required() {
            if !self.params.contains_key(*key) {
                return Err(Error::InvalidParameter(format!(
                    "scenario {:?} is missing parameter {key}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn param(&self, key: &str) -> f64 {
        self.params[key]
    }
}

/// Runs a scenario and writes its run directory: `config.json` (the spec,
/// grid size and scenario details), `summary.json` and the curve files.
/// Returns the summary.
pub fn run_scenario(spec: &ScenarioSpec, grid_size: usize, out: &Path) -> Result<serde_json::Value> {
    spec.validate()?;
    let (details, summary) = match spec.name {
        ScenarioName::Sim1 | ScenarioName::Sim1Severe => {
            let s = run_sim1_range(spec.param("warp_range"), spec.seed, grid_size)?;
            write_trials_jsonl(&out.join("trials.jsonl"), &s.trials)?;
            s.write(out)?;
            (s.config(), serde_json::to_value(&s.table)?)
        }
        ScenarioName::Sim2 => {
            let s = run_sim2(spec.seed, spec.param("bandwidth"), grid_size)?;
            write_trials_jsonl(&out.join("trials.jsonl"), &s.trials)?;
            s.write(out)?;
            (s.config(), s.summary())
        }
        ScenarioName::BetaMeans => {
            let b = run_beta_means(grid_size, spec.param("density_floor"))?;
            b.write(out)?;
            (b.config(), b.summary())
        }
        ScenarioName::ClassifySynthetic => {
            let c = synthetic_classification(spec, grid_size)?;
            c.write(out)?;
            (c.config(), c.summary())
        }
    };
    write_json(
        &out.join("config.json"),
        &serde_json::json!({ "spec": spec, "grid_size": grid_size, "scenario": details }),
    )?;
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

pub(crate) fn write_warps(path: &Path, warps: &[WarpingFunction]) -> Result<()> {
    let names: Vec<String> = (1..=warps.len()).map(|i| format!("gamma_{i}")).collect();
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let curves: Vec<&GridFunction> = warps.iter().map(WarpingFunction::as_grid).collect();
    write_curves_csv(path, &name_refs, &curves)
}
