use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::density_est::{DensityEstimate, KernelKind};
use crate::error::{Error, Result};
use crate::estimation::{combine, Bandwidth, EstimatorConfig, MeanMethod};
use crate::grid_fn::GridFunction;
use crate::io::{read_raw_trials, trials_from_raw, write_curves_csv, write_json, write_trials_jsonl};
use crate::phase_metrics::Metric;
use crate::point_process::{simulate_pp, warp_events, EventSequence, TrialSet};
use crate::rng::{derive_seed, rng_from_seed};

use super::{exp_warp, ScenarioSpec};

/// A 41.67 ms kernel on a 5 s trial, in units of the unit interval.
pub const SPIKE_KERNEL_WIDTH: f64 = 41.67 / 5000.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub method: MeanMethod,
    pub metric: Metric,
    pub classes: Vec<String>,
    pub predictions: Vec<String>,
    /// Rows are true classes, columns predicted classes. Absent when the test
    /// set carries no labels.
    pub confusion: Option<Vec<Vec<usize>>>,
    pub accuracy: Option<f64>,
    pub per_class_accuracy: Option<Vec<f64>>,
    /// Class means, in the order of `classes`.
    #[serde(skip)]
    pub means: Vec<DensityEstimate>,
}

/// Density of one trial; a trial without events gets the uniform density,
/// which is what the positivity mixture gives for `m = 0`.
pub fn density_or_uniform(x: &EventSequence, cfg: &EstimatorConfig) -> Result<DensityEstimate> {
    if x.is_empty() {
        return DensityEstimate::from_pdf(GridFunction::constant(cfg.grid_size, 1.0));
    }
    Ok(cfg.trial_density(x)?.0)
}

/// Per-class mean of the training densities under the configured method.
pub fn class_means(train: &TrialSet, cfg: &EstimatorConfig) -> Result<(Vec<String>, Vec<DensityEstimate>)> {
    let labels = train
        .labels
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("training set has no labels".into()))?;
    let classes = train.classes();
    if classes.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let means = classes
        .iter()
        .map(|c| {
            let fs = train
                .trials
                .par_iter()
                .zip(labels)
                .filter(|(x, l)| *l == c && !x.is_empty())
                .map(|(x, _)| density_or_uniform(x, cfg))
                .collect::<Result<Vec<_>>>()?;
            if fs.is_empty() {
                return Err(Error::InvalidParameter(format!("class {c:?} has no nonempty training trials")));
            }
            combine(&fs, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((classes, means))
}

/// Labels every test trial by its nearest class mean under `metric`; ties go
/// to the class seen first in the training set.
pub fn run_classification(
    train: &TrialSet,
    test: &TrialSet,
    cfg: &EstimatorConfig,
    metric: Metric,
) -> Result<ClassificationReport> {
    cfg.validate()?;
    let (classes, means) = class_means(train, cfg)?;
    let predicted = test
        .trials
        .par_iter()
        .map(|x| {
            let f = density_or_uniform(x, cfg)?;
            let mut best = (f64::INFINITY, 0);
            for (k, m) in means.iter().enumerate() {
                let d = metric.distance(&f, m)?;
                if d < best.0 {
                    best = (d, k);
                }
            }
            Ok(best.1)
        })
        .collect::<Result<Vec<usize>>>()?;
    let c = classes.len();
    let (confusion, accuracy, per_class_accuracy) = match &test.labels {
        Some(labels) => {
            let mut conf = vec![vec![0usize; c]; c];
            for (l, &p) in labels.iter().zip(&predicted) {
                let truth = classes.iter().position(|k| k == l).ok_or_else(|| {
                    Error::InvalidParameter(format!("test label {l:?} does not occur in training"))
                })?;
                conf[truth][p] += 1;
            }
            let total: usize = conf.iter().flatten().sum();
            let hits: usize = (0..c).map(|k| conf[k][k]).sum();
            let per: Vec<f64> = conf
                .iter()
                .enumerate()
                .map(|(k, row)| {
                    let n: usize = row.iter().sum();
                    if n == 0 {
                        0.0
                    } else {
                        row[k] as f64 / n as f64
                    }
                })
                .collect();
            let acc = if total == 0 { 0.0 } else { hits as f64 / total as f64 };
            (Some(conf), Some(acc), Some(per))
        }
        None => (None, None, None),
    };
    Ok(ClassificationReport {
        method: cfg.mean_method,
        metric,
        predictions: predicted.iter().map(|&k| classes[k].clone()).collect(),
        classes,
        confusion,
        accuracy,
        per_class_accuracy,
        means,
    })
}

/// Reads spike times in seconds and rescales them onto `[0, 1]`. Times past
/// `normalize_to` (or below zero) are clamped; the count of clamped events is
/// returned alongside the trials.
pub fn ingest_spike_trains(path: &Path, normalize_to: f64) -> Result<(TrialSet, usize)> {
    if !(normalize_to > 0.0) {
        return Err(Error::InvalidParameter(format!("normalize_to must be > 0, got {normalize_to}")));
    }
    let mut raw = read_raw_trials(path)?;
    let mut clamped = 0;
    for r in raw.iter_mut() {
        for e in r.events.iter_mut() {
            let v = *e / normalize_to;
            if !(0.0..=1.0).contains(&v) {
                clamped += 1;
            }
            *e = v.clamp(0.0, 1.0);
        }
    }
    Ok((trials_from_raw(path, raw)?, clamped))
}

/// Two-bump class templates `(μ₁, μ₂, weight of the first bump)`.
const SURROGATE_CLASSES: [(f64, f64, f64); 4] = [
    (0.2, 0.5, 0.5),
    (0.5, 0.8, 0.5),
    (0.25, 0.75, 0.75),
    (0.25, 0.75, 0.25),
];
const SURROGATE_WIDTH: f64 = 0.05;

fn surrogate_intensity(k: usize, total: f64, n: usize) -> Result<GridFunction> {
    let (m1, m2, w) = SURROGATE_CLASSES[k % SURROGATE_CLASSES.len()];
    let bump = |t: f64, m: f64| (-(t - m).powi(2) / (2.0 * SURROGATE_WIDTH * SURROGATE_WIDTH)).exp();
    let raw = GridFunction::from_fn(n, |t| w * bump(t, m1) + (1.0 - w) * bump(t, m2))?;
    let mass = raw.integrate();
    Ok(raw.scale(total / mass))
}

/// Simulated train and test sets: class `k` trials are Poisson draws from
/// its template, each under its own exponential warp with `a ~ U[−r, r]`.
pub fn surrogate_trials(spec: &ScenarioSpec, grid_size: usize) -> Result<(TrialSet, TrialSet)> {
    let classes = spec.param("classes") as usize;
    let per = [spec.param("train_per_class") as usize, spec.param("test_per_class") as usize];
    let total = spec.param("total_intensity");
    let range = spec.param("warp_range");
    if classes == 0 || classes > SURROGATE_CLASSES.len() {
        return Err(Error::InvalidParameter(format!(
            "surrogate supports 1..={} classes, got {classes}",
            SURROGATE_CLASSES.len()
        )));
    }
    let mut sets = Vec::new();
    for (split, &count) in per.iter().enumerate() {
        let mut trials = Vec::new();
        let mut labels = Vec::new();
        for k in 0..classes {
            let lambda = surrogate_intensity(k, total, grid_size)?;
            let stream = derive_seed(spec.seed, (split * 16 + k) as u64);
            for j in 0..count {
                let s = derive_seed(stream, j as u64);
                let a = rng_from_seed(derive_seed(s, 1)).random_range(-range..=range);
                let r = simulate_pp(&lambda, s)?;
                trials.push(warp_events(&r, &exp_warp(a, grid_size)));
                labels.push(format!("class_{}", k + 1));
            }
        }
        sets.push(TrialSet::with_labels(trials, labels)?);
    }
    let test = sets.pop().expect("two splits");
    let train = sets.pop().expect("two splits");
    Ok((train, test))
}

/// Default estimator for the surrogate: plug-in truncated Gaussian kernel.
pub fn surrogate_config(grid_size: usize, dp_penalty: f64, method: MeanMethod) -> EstimatorConfig {
    EstimatorConfig {
        kernel: KernelKind::TruncatedGaussian,
        bandwidth: Bandwidth::PlugIn,
        grid_size,
        mean_method: method,
        dp_penalty,
        ..EstimatorConfig::default()
    }
}

pub struct SyntheticClassification {
    pub train: TrialSet,
    pub test: TrialSet,
    pub reports: Vec<ClassificationReport>,
    pub configs: Vec<EstimatorConfig>,
}

impl SyntheticClassification {
    pub fn accuracy(&self, m: MeanMethod) -> f64 {
        self.reports
            .iter()
            .find(|r| r.method == m)
            .and_then(|r| r.accuracy)
            .expect("all methods are run on labeled data")
    }

    pub fn summary(&self) -> serde_json::Value {
        let acc: serde_json::Map<String, serde_json::Value> = self
            .reports
            .iter()
            .map(|r| (r.method.name().to_string(), json!(r.accuracy)))
            .collect();
        json!({ "accuracy": acc })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_trials_jsonl(&dir.join("train.jsonl"), &self.train)?;
        write_trials_jsonl(&dir.join("test.jsonl"), &self.test)?;
        for r in &self.reports {
            write_json(&dir.join(format!("report_{}.json", r.method.name())), r)?;
        }
        Ok(())
    }

    pub fn config(&self) -> serde_json::Value {
        json!({ "estimators": self.configs, "metric": Metric::Ext })
    }
}

/// The four-class surrogate evaluated with the proposed mean and the
/// cross-sectional and Fisher-Rao baselines, all classified by `d_ext`.
pub fn synthetic_classification(spec: &ScenarioSpec, grid_size: usize) -> Result<SyntheticClassification> {
    spec.validate()?;
    let (train, test) = surrogate_trials(spec, grid_size)?;
    let penalty = spec.param("dp_penalty");
    let mut reports = Vec::new();
    let mut configs = Vec::new();
    for m in [MeanMethod::Proposed, MeanMethod::CrossSectional, MeanMethod::FisherRao] {
        let cfg = surrogate_config(grid_size, penalty, m);
        reports.push(run_classification(&train, &test, &cfg, Metric::Ext)?);
        configs.push(cfg);
    }
    Ok(SyntheticClassification {
        train,
        test,
        reports,
        configs,
    })
}

/// Class means as curves, for inspection.
pub fn write_class_means(path: &Path, classes: &[String], means: &[DensityEstimate]) -> Result<()> {
    let refs: Vec<&str> = classes.iter().map(String::as_str).collect();
    let curves: Vec<&GridFunction> = means.iter().map(DensityEstimate::pdf).collect();
    write_curves_csv(path, &refs, &curves)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ingest_rescales_and_clamps() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.txt");
        std::fs::write(&p, "0.5 1.0 4.9\n\n6.0\n").unwrap();
        let (ts, clamped) = ingest_spike_trains(&p, 5.0).unwrap();
        assert_eq!(ts.len(), 3);
        let e = ts.trials[0].events();
        assert!((e[0] - 0.1).abs() < 1e-15 && (e[1] - 0.2).abs() < 1e-15 && (e[2] - 0.98).abs() < 1e-15);
        assert!(ts.trials[1].is_empty());
        assert_eq!(ts.trials[2].events(), &[1.0]);
        assert_eq!(clamped, 1);
    }

    #[test]
    fn single_class_is_always_right() {
        let train = TrialSet::with_labels(
            vec![EventSequence::new(vec![0.2, 0.3, 0.5, 0.6]).unwrap(); 3],
            vec!["only".into(); 3],
        )
        .unwrap();
        let cfg = surrogate_config(201, 0.01, MeanMethod::CrossSectional);
        let r = run_classification(&train, &train, &cfg, Metric::Ext).unwrap();
        assert_eq!(r.accuracy, Some(1.0));
        assert_eq!(r.confusion, Some(vec![vec![3]]));
    }

    #[test]
    fn unknown_test_label_is_an_error() {
        let x = EventSequence::new(vec![0.2, 0.3, 0.5]).unwrap();
        let train = TrialSet::with_labels(vec![x.clone()], vec!["a".into()]).unwrap();
        let test = TrialSet::with_labels(vec![x], vec!["b".into()]).unwrap();
        let cfg = surrogate_config(201, 0.01, MeanMethod::CrossSectional);
        assert!(run_classification(&train, &test, &cfg, Metric::Ext).is_err());
    }
}
