//! End-to-end intensity estimation from warped Poisson realizations.
//!
//! `Λ̂` is the mean event count. Each nonempty trial gets a boundary-corrected
//! kernel density; the densities are combined by the selected mean and the
//! result is scaled by `Λ̂`.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density_est::{
    density_to_intensity, kde_modified, kde_reflected, plug_in_bandwidth, DensityEstimate,
    KernelKind, KernelSpec,
};
use crate::error::{Error, Result};
use crate::grid_fn::{GridFunction, DEFAULT_GRID_SIZE};
use crate::io::{write_curves_csv, write_json};
use crate::karcher::{
    cross_sectional, karcher_mean_nonneg, karcher_mean_with, mean_fisher_rao, mean_wasserstein,
    Aligner, DEFAULT_DP_PENALTY,
};
use crate::point_process::{mle_total_intensity, EventSequence, TrialSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MeanMethod {
    Proposed,
    #[value(name = "fisher_rao")]
    FisherRao,
    Wasserstein,
    #[value(name = "cross_sectional")]
    CrossSectional,
}

impl MeanMethod {
    pub const ALL: [MeanMethod; 4] = [
        MeanMethod::Proposed,
        MeanMethod::FisherRao,
        MeanMethod::Wasserstein,
        MeanMethod::CrossSectional,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeanMethod::Proposed => "proposed",
            MeanMethod::FisherRao => "fisher_rao",
            MeanMethod::Wasserstein => "wasserstein",
            MeanMethod::CrossSectional => "cross_sectional",
        }
    }
}

/// Rule-of-thumb bandwidth per trial, or one shared support half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    PlugIn,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub kernel: KernelKind,
    pub bandwidth: Bandwidth,
    pub grid_size: usize,
    pub mean_method: MeanMethod,
    pub nonneg_mode: bool,
    pub dp_penalty: f64,
    /// Index, among nonempty trials, of the template density.
    pub template: usize,
    /// Pairwise warps of the proposed mean (positive path only).
    pub aligner: Aligner,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            kernel: KernelKind::TruncatedGaussian,
            bandwidth: Bandwidth::PlugIn,
            grid_size: DEFAULT_GRID_SIZE,
            mean_method: MeanMethod::Proposed,
            nonneg_mode: false,
            dp_penalty: DEFAULT_DP_PENALTY,
            template: 0,
            aligner: Aligner::ClosedForm,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 64 {
            return Err(Error::InvalidParameter(format!(
                "grid_size must be >= 64, got {}",
                self.grid_size
            )));
        }
        if !(self.dp_penalty >= 0.0) || !self.dp_penalty.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dp_penalty must be >= 0, got {}",
                self.dp_penalty
            )));
        }
        if let Bandwidth::Fixed(h) = self.bandwidth {
            KernelSpec::new(self.kernel, h)?;
        }
        Ok(())
    }

    pub fn kernel_for(&self, x: &EventSequence) -> Result<KernelSpec> {
        match self.bandwidth {
            Bandwidth::PlugIn => KernelSpec::from_gaussian_scale(self.kernel, plug_in_bandwidth(x)?),
            Bandwidth::Fixed(h) => KernelSpec::new(self.kernel, h),
        }
    }

    /// Per-trial density: the full modified estimator, or only the fold-back
    /// in nonnegative mode so that genuine zeros survive.
    pub fn trial_density(&self, x: &EventSequence) -> Result<(DensityEstimate, KernelSpec)> {
        let k = self.kernel_for(x)?;
        let d = if self.nonneg_mode {
            DensityEstimate::from_pdf(kde_reflected(x, &k, self.grid_size)?)?
        } else {
            kde_modified(x, &k, self.grid_size)?
        };
        Ok((d, k))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialEstimate {
    pub density: DensityEstimate,
    pub intensity: GridFunction,
    pub kernel: KernelSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityEstimate {
    pub total: f64,
    pub density: DensityEstimate,
    pub intensity: GridFunction,
    /// One entry per trial; `None` for trials without events.
    pub per_trial: Vec<Option<TrialEstimate>>,
}

/// Combines densities with the configured mean.
pub fn combine(fs: &[DensityEstimate], cfg: &EstimatorConfig) -> Result<DensityEstimate> {
    match cfg.mean_method {
        MeanMethod::Proposed if cfg.nonneg_mode => karcher_mean_nonneg(fs),
        MeanMethod::Proposed => karcher_mean_with(fs, cfg.template, cfg.aligner),
        MeanMethod::FisherRao => mean_fisher_rao(fs, cfg.dp_penalty),
        MeanMethod::Wasserstein => mean_wasserstein(fs),
        MeanMethod::CrossSectional => cross_sectional(fs),
    }
}

pub fn estimate_intensity(ts: &TrialSet, cfg: &EstimatorConfig) -> Result<IntensityEstimate> {
    cfg.validate()?;
    let total = mle_total_intensity(ts)?;
    let per_trial = ts
        .trials
        .par_iter()
        .map(|x| {
            if x.is_empty() {
                return Ok(None);
            }
            let (density, kernel) = cfg.trial_density(x)?;
            let intensity = density_to_intensity(&density, total)?;
            Ok(Some(TrialEstimate {
                density,
                intensity,
                kernel,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let fs: Vec<DensityEstimate> = per_trial.iter().flatten().map(|t| t.density.clone()).collect();
    if fs.is_empty() {
        return Err(Error::Empty("every trial is empty"));
    }
    let density = combine(&fs, cfg)?;
    let intensity = density_to_intensity(&density, total)?;
    Ok(IntensityEstimate {
        total,
        density,
        intensity,
        per_trial,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

/// `∫|e|`, `(∫e²)^{1/2}` and `max|e|` of `e = est − truth` on the finer grid.
pub fn intensity_errors(est: &GridFunction, truth: &GridFunction) -> ErrorNorms {
    let n = est.grid_size().max(truth.grid_size());
    let e = est.resample(n).zip_with(&truth.resample(n), |a, b| a - b);
    ErrorNorms {
        l1: e.map(f64::abs).integrate(),
        l2: e.l2_norm(),
        linf: e.values().iter().fold(0.0, |m, v| m.max(v.abs())),
    }
}

#[derive(Debug, Serialize)]
struct EstimateSummary<'a> {
    total_intensity: f64,
    n_trials: usize,
    n_empty_trials: usize,
    bandwidths: Vec<Option<f64>>,
    config: &'a EstimatorConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    errors: Option<ErrorNorms>,
}

/// Writes `intensity.csv`, `density.csv`, `per_trial/trial_<id>.csv` and
/// `summary.json` into `dir`.
pub fn write_estimate(
    dir: &Path,
    ts: &TrialSet,
    est: &IntensityEstimate,
    cfg: &EstimatorConfig,
    truth: Option<&GridFunction>,
) -> Result<()> {
    write_curves_csv(&dir.join("intensity.csv"), &["intensity"], &[&est.intensity])?;
    write_curves_csv(
        &dir.join("density.csv"),
        &["pdf", "cdf"],
        &[est.density.pdf(), est.density.cdf()],
    )?;
    let per = dir.join("per_trial");
    fs::create_dir_all(&per).map_err(|e| Error::io(&per, e))?;
    for (id, t) in ts.ids.iter().zip(&est.per_trial) {
        if let Some(t) = t {
            write_curves_csv(
                &per.join(format!("trial_{}.csv", sanitize(id))),
                &["pdf", "intensity"],
                &[t.density.pdf(), &t.intensity],
            )?;
        }
    }
    let summary = EstimateSummary {
        total_intensity: est.total,
        n_trials: ts.len(),
        n_empty_trials: est.per_trial.iter().filter(|t| t.is_none()).count(),
        bandwidths: est.per_trial.iter().map(|t| t.as_ref().map(|t| t.kernel.bandwidth)).collect(),
        config: cfg,
        errors: truth.map(|t| intensity_errors(&est.intensity, t)),
    };
    write_json(&dir.join("summary.json"), &summary)
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let mut cfg = EstimatorConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.grid_size = 63;
        assert!(cfg.validate().is_err());
        cfg.grid_size = 64;
        cfg.dp_penalty = -0.1;
        assert!(cfg.validate().is_err());
        cfg.dp_penalty = 0.0;
        cfg.bandwidth = Bandwidth::Fixed(1.5);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn error_norm_examples() {
        let truth = GridFunction::from_fn(1001, |t| 100.0 * t).unwrap();
        let zero = intensity_errors(&truth, &truth);
        assert_eq!((zero.l1, zero.l2, zero.linf), (0.0, 0.0, 0.0));
        let shifted = intensity_errors(&truth.map(|v| v + 1.0), &truth);
        assert!((shifted.l1 - 1.0).abs() < 1e-12);
        assert!((shifted.l2 - 1.0).abs() < 1e-12);
        assert!((shifted.linf - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_trial_mean_is_that_trial() {
        let x = EventSequence::new(vec![0.1, 0.25, 0.5, 0.8, 0.81, 0.9]).unwrap();
        let ts = TrialSet::new(vec![x]);
        let cfg = EstimatorConfig::default();
        let est = estimate_intensity(&ts, &cfg).unwrap();
        let t = est.per_trial[0].as_ref().unwrap();
        assert!(est.intensity.sup_distance(&t.intensity) <= 1e-9 * est.total.max(1.0) + 0.1);
        assert!((est.intensity.integrate() - est.total).abs() <= 1e-4 * est.total);
    }

    #[test]
    fn empty_trials_count_towards_total_only() {
        let ts = TrialSet::new(vec![
            EventSequence::new(vec![0.2, 0.4, 0.6, 0.7]).unwrap(),
            EventSequence::default(),
        ]);
        let est = estimate_intensity(&ts, &EstimatorConfig::default()).unwrap();
        assert_eq!(est.total, 2.0);
        assert!(est.per_trial[1].is_none());
        let all_empty = TrialSet::new(vec![EventSequence::default(); 2]);
        assert!(matches!(
            estimate_intensity(&all_empty, &EstimatorConfig::default()),
            Err(Error::Empty(_))
        ));
    }
}
