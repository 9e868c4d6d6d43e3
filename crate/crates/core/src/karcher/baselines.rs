//! Comparison means: aligned square-root average, quantile average and the
//! unregistered pointwise average.

use rayon::prelude::*;

use crate::density_est::DensityEstimate;
use crate::error::{Error, Result};
use crate::grid_fn::{generalized_inverse, node, GridFunction};
use crate::warping::act_energy;

use super::dp::dp_align;

pub const FISHER_RAO_ITERATIONS: usize = 5;

fn common_grid(fs: &[DensityEstimate], what: &'static str) -> Result<Vec<DensityEstimate>> {
    let n = fs.iter().map(DensityEstimate::grid_size).max().ok_or(Error::Empty(what))?;
    Ok(fs.iter().map(|f| f.resample(n)).collect())
}

fn average(curves: &[GridFunction]) -> GridFunction {
    let n = curves[0].grid_size();
    let mut sum = vec![0.0; n];
    for c in curves {
        for (s, v) in sum.iter_mut().zip(c.values()) {
            *s += v;
        }
    }
    let inv = 1.0 / curves.len() as f64;
    GridFunction::from_raw(sum.into_iter().map(|v| v * inv).collect())
}

/// Iteratively DP-aligns every `√fᵢ` to the current template and averages
/// the aligned square roots; the template is the normalized square of that
/// average. Stops after [`FISHER_RAO_ITERATIONS`] rounds or once the average
/// moves less than `1e-6`.
pub fn mean_fisher_rao(fs: &[DensityEstimate], penalty: f64) -> Result<DensityEstimate> {
    let fs = common_grid(fs, "fisher-rao mean of an empty set")?;
    let roots: Vec<GridFunction> = fs.iter().map(|f| f.pdf().map(f64::sqrt)).collect();
    let mut qbar = average(&roots);
    for _ in 0..FISHER_RAO_ITERATIONS {
        let template = DensityEstimate::from_pdf(qbar.map(|v| v * v))?;
        let aligned = fs
            .par_iter()
            .zip(&roots)
            .map(|(f, q)| dp_align(&template, f, penalty).map(|g| act_energy(q, &g)))
            .collect::<Result<Vec<_>>>()?;
        let next = average(&aligned);
        let moved = next.l2_distance(&qbar);
        qbar = next;
        if moved < 1e-6 {
            break;
        }
    }
    DensityEstimate::from_pdf(qbar.map(|v| v * v))
}

/// Pointwise average of quantile functions, inverted back to a CDF and
/// differentiated.
pub fn mean_wasserstein(fs: &[DensityEstimate]) -> Result<DensityEstimate> {
    let fs = common_grid(fs, "wasserstein mean of an empty set")?;
    let qs: Vec<GridFunction> = fs.iter().map(DensityEstimate::quantile).collect();
    let qbar = average(&qs);
    let n = qbar.grid_size();
    let cdf: Vec<f64> = (0..n)
        .map(|k| generalized_inverse(qbar.values(), node(k, n)))
        .collect();
    let pdf = GridFunction::from_raw(cdf).derivative();
    DensityEstimate::from_pdf_clipped(pdf)
}

/// Pointwise average of the densities, no registration.
pub fn cross_sectional(fs: &[DensityEstimate]) -> Result<DensityEstimate> {
    let fs = common_grid(fs, "cross-sectional mean of an empty set")?;
    let pdfs: Vec<GridFunction> = fs.iter().map(|f| f.pdf().clone()).collect();
    DensityEstimate::from_pdf(average(&pdfs))
}
