//! Karcher means of densities under the phase distance, the extension to
//! densities with flat CDF stretches, dynamic-programming alignment and the
//! baseline means used for comparison.

mod baselines;
mod dp;
mod nonneg;

pub use baselines::{cross_sectional, mean_fisher_rao, mean_wasserstein, FISHER_RAO_ITERATIONS};
pub use dp::{dp_align, dp_align_on_lattice, DEFAULT_DP_LATTICE};
pub use nonneg::{
    detect_flats, karcher_mean_nonneg, nonneg_alignments, optimal_warp_nonneg, snap_flats, FlatStructure,
    NonnegAlignment, EPS_FLAT, EPS_LEVEL,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density_est::DensityEstimate;
use crate::error::{Error, Result};
use crate::grid_fn::{GridFunction, WarpingFunction};
use crate::phase_metrics::{d_ext, ensure_all_positive, optimal_warp};
use crate::warping::{act_area, karcher_mean_warps};

/// Default penalty of the DP alignment.
pub const DEFAULT_DP_PENALTY: f64 = 0.01;

/// How the pairwise warps of the mean are found.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Aligner {
    /// `γ* = F₂⁻¹ ∘ F₁`.
    ClosedForm,
    Dp { penalty: f64 },
}

impl Aligner {
    /// A warp `γ` with `a ≈ (b; γ)`.
    pub fn align(self, a: &DensityEstimate, b: &DensityEstimate) -> Result<WarpingFunction> {
        match self {
            Aligner::ClosedForm => optimal_warp(a, b),
            Aligner::Dp { penalty } => dp_align(a, b, penalty),
        }
    }
}

/// Karcher mean with the first density as template and closed-form warps.
pub fn karcher_mean_densities(fs: &[DensityEstimate]) -> Result<DensityEstimate> {
    karcher_mean_with(fs, 0, Aligner::ClosedForm)
}

/// Template `f₀ = fs[template]`; warps `γᵢ⁻¹` with `f₀ = (fᵢ; γᵢ⁻¹)`; their
/// extrinsic mean `γ̄`; result `(f₀; γ̄⁻¹)` renormalized.
pub fn karcher_mean_with(
    fs: &[DensityEstimate],
    template: usize,
    aligner: Aligner,
) -> Result<DensityEstimate> {
    if fs.is_empty() {
        return Err(Error::Empty("karcher mean of an empty set of densities"));
    }
    if template >= fs.len() {
        return Err(Error::InvalidParameter(format!(
            "template index {template} out of range for {} densities",
            fs.len()
        )));
    }
    if aligner == Aligner::ClosedForm {
        ensure_all_positive(fs)?;
    }
    let n = fs.iter().map(DensityEstimate::grid_size).max().unwrap();
    let fs: Vec<DensityEstimate> = fs.iter().map(|f| f.resample(n)).collect();
    if aligner == Aligner::ClosedForm {
        return Ok(mean_at_quantile_nodes(&fs));
    }
    let f0 = &fs[template];
    let inverse_warps = fs
        .par_iter()
        .map(|fi| aligner.align(f0, fi))
        .collect::<Result<Vec<_>>>()?;
    let mean = karcher_mean_warps(&inverse_warps)?;
    DensityEstimate::from_pdf(act_area(f0.pdf(), &mean.inverse()))
}

/// Closed-form path of [`karcher_mean_with`]. The warps `γᵢ⁻¹ = Fᵢ⁻¹ ∘ F₀`
/// are sampled at the template nodes `t_k = F₀⁻¹(u_k)`, where they equal
/// `Fᵢ⁻¹(u_k)`. On each segment the mean SRVF squared times `Δt` is then
/// `(Σᵢ √ΔQᵢ)²` up to normalization, so `F₀` cancels and the template only
/// fixes the parameterization. Sampling the template on its own grid instead
/// loses the resolution wherever `f₀` is small.
fn mean_at_quantile_nodes(fs: &[DensityEstimate]) -> DensityEstimate {
    let n = fs[0].grid_size();
    let quantiles: Vec<Vec<f64>> = fs.iter().map(|f| f.quantile().into_values()).collect();
    let mut steps: Vec<f64> = (0..n - 1)
        .map(|k| {
            let s: f64 = quantiles.iter().map(|q| (q[k + 1] - q[k]).max(0.0).sqrt()).sum();
            s * s
        })
        .collect();
    let total: f64 = steps.iter().sum();
    steps.iter_mut().for_each(|v| *v /= total);

    // the mean quantile is linear on each segment, so the density is
    // constant there
    let du = 1.0 / (n - 1) as f64;
    let mut ends = Vec::with_capacity(n - 1);
    let mut heights = Vec::with_capacity(n - 1);
    let mut x = 0.0;
    for &s in &steps {
        x += s;
        if s > 0.0 {
            ends.push(x);
            heights.push(du / s);
        }
    }
    let last = heights.len() - 1;
    let pdf = GridFunction::from_fn(n, |t| heights[ends.partition_point(|&e| e < t).min(last)])
        .expect("grid has at least two nodes");
    DensityEstimate::from_pdf(pdf).expect("mean of positive densities is positive")
}

/// `Σᵢ d_ext(f, fᵢ)²`.
pub fn mean_objective(f: &DensityEstimate, fs: &[DensityEstimate]) -> Result<f64> {
    fs.par_iter()
        .map(|fi| d_ext(f, fi).map(|d| d * d))
        .collect::<Result<Vec<f64>>>()
        .map(|v| v.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    const N: usize = 1001;

    fn bump(c: f64, w: f64) -> DensityEstimate {
        DensityEstimate::from_pdf(
            GridFunction::from_fn(N, |t| 0.3 + (-(t - c).powi(2) / w).exp()).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn mean_of_equal_inputs_is_the_input() {
        let f = bump(0.4, 0.01);
        let m = karcher_mean_densities(&vec![f.clone(); 5]).unwrap();
        assert!(m.pdf().sup_distance(f.pdf()) <= 10.0 / (N - 1) as f64);
    }

    #[test]
    fn single_member_and_errors() {
        let f = bump(0.7, 0.02);
        let m = karcher_mean_densities(std::slice::from_ref(&f)).unwrap();
        assert!(m.pdf().sup_distance(f.pdf()) <= 10.0 / (N - 1) as f64);
        assert!(matches!(karcher_mean_densities(&[]), Err(Error::Empty(_))));
        let zero = DensityEstimate::from_pdf(GridFunction::from_fn(N, |t| t).unwrap()).unwrap();
        assert!(matches!(
            karcher_mean_densities(&[f.clone(), zero]),
            Err(Error::NotStrictlyPositive { index: 1, .. })
        ));
        assert!(karcher_mean_with(&[f], 3, Aligner::ClosedForm).is_err());
    }

    #[test]
    fn mean_beats_its_inputs() {
        let fs: Vec<_> = [0.3, 0.45, 0.5, 0.62].iter().map(|&c| bump(c, 0.01)).collect();
        let m = karcher_mean_densities(&fs).unwrap();
        let at_mean = mean_objective(&m, &fs).unwrap();
        for f in &fs {
            assert!(at_mean <= mean_objective(f, &fs).unwrap() + 1e-6);
        }
        assert!((m.pdf().integrate() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn template_choice_barely_matters() {
        let fs: Vec<_> = [0.3, 0.45, 0.5, 0.62].iter().map(|&c| bump(c, 0.01)).collect();
        let a = karcher_mean_with(&fs, 0, Aligner::ClosedForm).unwrap();
        let b = karcher_mean_with(&fs, 3, Aligner::ClosedForm).unwrap();
        let tol = 5.0 * 10.0 / (N - 1) as f64;
        assert!(a.pdf().sup_distance(b.pdf()) <= tol);
    }
}
