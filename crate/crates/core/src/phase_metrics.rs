//! Distances between densities on `[0, 1]`.
//!
//! Besides the classical Wasserstein, Bhattacharyya, Hellinger and Fisher-Rao
//! distances, two phase distances are built on the unique warp `γ* = F₂⁻¹ ∘ F₁`
//! carrying one strictly positive density onto another: the extrinsic
//! `‖1 − √γ̇*‖` and the intrinsic `arccos⟨1, √γ̇*⟩`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density_est::DensityEstimate;
use crate::error::{Error, Result};
use crate::grid_fn::{node, GridFunction, WarpingFunction};
use crate::warping::to_srvf;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseAlignment {
    pub gamma_star: WarpingFunction,
    pub distance_ext: f64,
    pub distance_int: f64,
}

fn common(f1: &DensityEstimate, f2: &DensityEstimate) -> (DensityEstimate, DensityEstimate) {
    let n = f1.grid_size().max(f2.grid_size());
    (f1.resample(n), f2.resample(n))
}

/// `γ* = F₂⁻¹ ∘ F₁`, so that `F₁ = F₂ ∘ γ*` and `f₁ = (f₂; γ*)`.
pub fn optimal_warp(f1: &DensityEstimate, f2: &DensityEstimate) -> Result<WarpingFunction> {
    f1.require_positive(0)?;
    f2.require_positive(1)?;
    let (f1, f2) = common(f1, f2);
    let n = f1.grid_size();
    let mut v: Vec<f64> = f1.cdf().values().iter().map(|&y| f2.quantile_at(y)).collect();
    v[0] = 0.0;
    v[n - 1] = 1.0;
    WarpingFunction::project(v)
}

/// `‖1 − √γ̇‖` for a warp.
pub fn warp_distance_ext(g: &WarpingFunction) -> f64 {
    let q = to_srvf(g);
    q.as_grid().map(|v| 1.0 - v).l2_norm()
}

/// `arccos⟨1, √γ̇⟩` for a warp, with the inner product clamped into `[-1, 1]`.
pub fn warp_distance_int(g: &WarpingFunction) -> f64 {
    to_srvf(g).as_grid().integrate().clamp(-1.0, 1.0).acos()
}

/// The graph of `γ*` as the curve `(F₁⁻¹(u), F₂⁻¹(u))`, sampled on the
/// uniform `u`-grid; swapping the densities mirrors it.
fn warp_graph(f1: &DensityEstimate, f2: &DensityEstimate) -> Vec<(f64, f64)> {
    let (f1, f2) = common(f1, f2);
    let n = f1.grid_size();
    (0..n)
        .map(|k| {
            let u = node(k, n);
            (f1.quantile_at(u), f2.quantile_at(u))
        })
        .collect()
}

/// `(‖1 − √γ̇*‖², ⟨1, √γ̇*⟩)` with `γ*` linear between the curve samples: a
/// segment with increments `Δx, Δy` contributes `(√Δx − √Δy)²` and `√(Δx Δy)`.
fn phase_integrals(f1: &DensityEstimate, f2: &DensityEstimate) -> (f64, f64) {
    warp_graph(f1, f2).windows(2).fold((0.0, 0.0), |(sq, inner), w| {
        let dx = (w[1].0 - w[0].0).max(0.0);
        let dy = (w[1].1 - w[0].1).max(0.0);
        (sq + (dx.sqrt() - dy.sqrt()).powi(2), inner + (dx * dy).sqrt())
    })
}

pub fn phase_align(f1: &DensityEstimate, f2: &DensityEstimate) -> Result<PhaseAlignment> {
    let gamma_star = optimal_warp(f1, f2)?;
    let (sq, inner) = phase_integrals(f1, f2);
    Ok(PhaseAlignment {
        distance_ext: sq.sqrt(),
        distance_int: inner.clamp(-1.0, 1.0).acos(),
        gamma_star,
    })
}

pub fn d_ext(f1: &DensityEstimate, f2: &DensityEstimate) -> Result<f64> {
    f1.require_positive(0)?;
    f2.require_positive(1)?;
    Ok(phase_integrals(f1, f2).0.sqrt())
}

pub fn d_int(f1: &DensityEstimate, f2: &DensityEstimate) -> Result<f64> {
    f1.require_positive(0)?;
    f2.require_positive(1)?;
    Ok(phase_integrals(f1, f2).1.clamp(-1.0, 1.0).acos())
}

/// `‖F₁⁻¹ − F₂⁻¹‖`.
pub fn d_wasserstein(f1: &DensityEstimate, f2: &DensityEstimate) -> f64 {
    let (f1, f2) = common(f1, f2);
    f1.quantile().l2_distance(&f2.quantile())
}

/// `∫ √(f₁ f₂)`, clamped into `(0, 1]`.
pub fn bhattacharyya_coefficient(f1: &DensityEstimate, f2: &DensityEstimate) -> f64 {
    let (f1, f2) = common(f1, f2);
    let bc = f1.pdf().zip_with(f2.pdf(), |a, b| (a * b).sqrt()).integrate();
    bc.clamp(f64::MIN_POSITIVE, 1.0)
}

pub fn d_bhattacharyya(f1: &DensityEstimate, f2: &DensityEstimate) -> f64 {
    -bhattacharyya_coefficient(f1, f2).ln()
}

/// `‖√f₁ − √f₂‖ / √2`.
pub fn d_hellinger(f1: &DensityEstimate, f2: &DensityEstimate) -> f64 {
    let (f1, f2) = common(f1, f2);
    f1.pdf().map(f64::sqrt).l2_distance(&f2.pdf().map(f64::sqrt)) / std::f64::consts::SQRT_2
}

pub fn d_fisher_rao(f1: &DensityEstimate, f2: &DensityEstimate) -> f64 {
    bhattacharyya_coefficient(f1, f2).acos()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Ext,
    Int,
    Wasserstein,
    Hellinger,
    Bhattacharyya,
    #[value(name = "fisher_rao")]
    FisherRao,
}

impl Metric {
    pub fn distance(self, f1: &DensityEstimate, f2: &DensityEstimate) -> Result<f64> {
        Ok(match self {
            Metric::Ext => d_ext(f1, f2)?,
            Metric::Int => d_int(f1, f2)?,
            Metric::Wasserstein => d_wasserstein(f1, f2),
            Metric::Hellinger => d_hellinger(f1, f2),
            Metric::Bhattacharyya => d_bhattacharyya(f1, f2),
            Metric::FisherRao => d_fisher_rao(f1, f2),
        })
    }
}

/// Symmetric matrix of pairwise distances; the upper triangle is computed in parallel.
pub fn distance_matrix(fs: &[DensityEstimate], metric: Metric) -> Result<Vec<Vec<f64>>> {
    let n = fs.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| metric.distance(&fs[i], &fs[j]))
        .collect::<Result<Vec<f64>>>()?;
    let mut out = vec![vec![0.0; n]; n];
    for (&(i, j), d) in pairs.iter().zip(values) {
        out[i][j] = d;
        out[j][i] = d;
    }
    Ok(out)
}

/// Sup-norm distance of a warp from the identity.
pub fn distance_from_identity(g: &WarpingFunction) -> f64 {
    let n = g.grid_size();
    g.values()
        .iter()
        .enumerate()
        .map(|(k, v)| (v - node(k, n)).abs())
        .fold(0.0, f64::max)
}

/// Quadrature helper: `‖1 − √ġ‖` from an analytic derivative sampled on `n` nodes.
pub fn ext_from_derivative(n: usize, dg: impl Fn(f64) -> f64) -> Result<f64> {
    let q = GridFunction::from_fn(n, |t| 1.0 - dg(t).sqrt())?;
    Ok(q.l2_norm())
}

pub(crate) fn ensure_all_positive(fs: &[DensityEstimate]) -> Result<()> {
    for (i, f) in fs.iter().enumerate() {
        if !f.is_strictly_positive() {
            return Err(Error::NotStrictlyPositive {
                index: i,
                min: f.pdf().min(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warping::act_area;

    const N: usize = 1001;

    fn density(f: impl Fn(f64) -> f64) -> DensityEstimate {
        DensityEstimate::from_pdf(GridFunction::from_fn(N, f).unwrap()).unwrap()
    }

    fn bump(c: f64) -> DensityEstimate {
        density(move |t| 0.2 + (-(t - c).powi(2) / 0.02).exp())
    }

    #[test]
    fn optimal_warp_between_equal_densities_is_identity() {
        let f = bump(0.3);
        let g = optimal_warp(&f, &f).unwrap();
        assert!(distance_from_identity(&g) <= 10.0 / (N - 1) as f64);
    }

    #[test]
    fn optimal_warp_recovers_constructed_warp() {
        let f2 = bump(0.6);
        let gamma = WarpingFunction::from_fn(N, |t| t.powf(1.3)).unwrap();
        let f1 = DensityEstimate::from_pdf(act_area(f2.pdf(), &gamma)).unwrap();
        let g = optimal_warp(&f1, &f2).unwrap();
        assert!(g.sup_distance(&gamma) <= 10.0 / (N - 1) as f64);
    }

    #[test]
    fn optimal_warp_beta_to_uniform_is_beta_cdf() {
        let beta = density(|t| 6.0 * t * (1.0 - t) + 1e-9);
        let uniform = density(|_| 1.0);
        let g = optimal_warp(&beta, &uniform).unwrap();
        let cdf = GridFunction::from_fn(N, |t| 3.0 * t * t - 2.0 * t * t * t).unwrap();
        assert!(g.as_grid().sup_distance(&cdf) <= 10.0 / (N - 1) as f64);
    }

    #[test]
    fn optimal_warp_rejects_non_positive() {
        let zeroed = density(|t| t);
        let ok = bump(0.5);
        assert!(matches!(
            optimal_warp(&zeroed, &ok),
            Err(Error::NotStrictlyPositive { index: 0, .. })
        ));
        assert!(matches!(
            optimal_warp(&ok, &zeroed),
            Err(Error::NotStrictlyPositive { index: 1, .. })
        ));
    }

    #[test]
    fn phase_align_of_equal_densities() {
        let f = bump(0.4);
        let a = phase_align(&f, &f).unwrap();
        assert!(a.distance_ext < 1e-4);
        assert!(a.distance_int < 1e-2);
    }

    #[test]
    fn phase_align_invariants() {
        let a = phase_align(&bump(0.3), &bump(0.7)).unwrap();
        // the curve-length quadrature against the grid SRVF of the warp
        let by_srvf = warp_distance_ext(&a.gamma_star);
        assert!((a.distance_ext - by_srvf).abs() < 1e-3, "{} vs {by_srvf}", a.distance_ext);
        let inner = to_srvf(&a.gamma_star).as_grid().integrate().clamp(-1.0, 1.0);
        assert!((a.distance_int - inner.acos()).abs() < 1e-3);
        assert!((2.0 * (a.distance_int / 2.0).sin() - a.distance_ext).abs() < 1e-9);
        let b = phase_align(&bump(0.7), &bump(0.3)).unwrap();
        assert!((a.distance_ext - b.distance_ext).abs() < 1e-12);
    }

    #[test]
    fn distance_ext_for_exponential_warp_matches_quadrature() {
        let f2 = bump(0.5);
        let e2 = 2f64.exp() - 1.0;
        let gamma = WarpingFunction::from_fn(N, |t| ((2.0 * t).exp() - 1.0) / e2).unwrap();
        let f1 = DensityEstimate::from_pdf(act_area(f2.pdf(), &gamma)).unwrap();
        let oracle = ext_from_derivative(200_001, |t| 2.0 * (2.0 * t).exp() / e2).unwrap();
        assert!((d_ext(&f1, &f2).unwrap() - oracle).abs() < 1e-4);
    }

    #[test]
    fn classical_distances_vanish_on_identical_inputs() {
        let f = bump(0.25);
        assert!(d_bhattacharyya(&f, &f) < 1e-6);
        assert!(d_hellinger(&f, &f) < 1e-6);
        assert!(d_fisher_rao(&f, &f) < 1e-6);
        assert!(d_wasserstein(&f, &f) < 1e-4);
    }

    #[test]
    fn bhattacharyya_uniform_vs_beta() {
        let n = 10_001;
        let u = DensityEstimate::from_pdf(GridFunction::constant(n, 1.0)).unwrap();
        let b = DensityEstimate::from_pdf(GridFunction::from_fn(n, |t| 6.0 * t * (1.0 - t)).unwrap()).unwrap();
        // ∫√(6t(1-t)) = √6 π / 8
        let oracle = -(6f64.sqrt() * std::f64::consts::PI / 8.0).ln();
        assert!((d_bhattacharyya(&u, &b) - oracle).abs() < 1e-5);
    }

    #[test]
    fn wasserstein_to_concentrated_density() {
        let uniform = density(|_| 1.0);
        let spike = density(|t| 1e-6 + (-(t - 0.5).powi(2) / 2e-7).exp());
        let expected = (1.0f64 / 12.0).sqrt();
        assert!((d_wasserstein(&uniform, &spike) - expected).abs() < 5e-3);
    }

    #[test]
    fn metric_dispatch_and_matrix() {
        let fs = vec![bump(0.2), bump(0.5), bump(0.8)];
        let m = distance_matrix(&fs, Metric::Ext).unwrap();
        for i in 0..3 {
            assert_eq!(m[i][i], 0.0);
            for j in 0..3 {
                assert_eq!(m[i][j], m[j][i]);
            }
        }
        assert!((m[0][1] - d_ext(&fs[0], &fs[1]).unwrap()).abs() < 1e-15);
    }
}
