//! The warping group: square-root velocity representation, the three right
//! actions on functions, and the closed-form extrinsic mean of warps.

use crate::error::{Error, Result};
use crate::grid_fn::{cumulative_trapezoid, GridFunction, WarpingFunction};

/// Square-root velocity function `√γ̇` of a warp.
#[derive(Debug, Clone, PartialEq)]
pub struct Srvf {
    base: GridFunction,
    norm: f64,
}

impl Srvf {
    pub fn as_grid(&self) -> &GridFunction {
        &self.base
    }

    pub fn into_grid(self) -> GridFunction {
        self.base
    }

    /// ℒ² norm; 1 up to discretization for any valid warp.
    pub fn norm(&self) -> f64 {
        self.norm
    }
}

pub fn to_srvf(g: &WarpingFunction) -> Srvf {
    let base = g.derivative_clamped().map(f64::sqrt);
    let norm = base.l2_norm();
    Srvf { base, norm }
}

fn common_grid(f: &GridFunction, g: &WarpingFunction) -> (GridFunction, WarpingFunction) {
    let n = f.grid_size().max(g.grid_size());
    (f.resample(n), g.resample(n))
}

/// `f ∘ γ`.
pub fn act_amplitude(f: &GridFunction, g: &WarpingFunction) -> GridFunction {
    let (f, g) = common_grid(f, g);
    g.as_grid().map(|s| f.eval_clamped(s))
}

/// `(f; γ) = (f ∘ γ) γ̇`, the action that preserves area.
pub fn act_area(f: &GridFunction, g: &WarpingFunction) -> GridFunction {
    let (f, g) = common_grid(f, g);
    let dg = g.derivative_clamped();
    g.as_grid().zip_with(&dg, |s, d| f.eval_clamped(s) * d)
}

/// `(f, γ) = (f ∘ γ) √γ̇`, the action that preserves the ℒ² norm.
pub fn act_energy(f: &GridFunction, g: &WarpingFunction) -> GridFunction {
    let (f, g) = common_grid(f, g);
    let dg = g.derivative_clamped();
    g.as_grid().zip_with(&dg, |s, d| f.eval_clamped(s) * d.sqrt())
}

/// Rebuilds a warp from an SRVF: `γ(t) = ∫_0^t q²`, rescaled so `γ(1) = 1`.
pub fn warp_from_srvf(q: &GridFunction) -> WarpingFunction {
    let sq: Vec<f64> = q.values().iter().map(|v| v * v).collect();
    let mut cum = cumulative_trapezoid(&sq);
    let n = cum.len();
    let total = cum[n - 1];
    if !(total > 0.0) {
        return WarpingFunction::identity(n);
    }
    for c in cum.iter_mut() {
        *c /= total;
    }
    cum[0] = 0.0;
    cum[n - 1] = 1.0;
    WarpingFunction::project_raw(cum)
}

/// Normalized sum of SRVFs, `Σ√γ̇ᵢ / ‖Σ√γ̇ᵢ‖`, on the largest input grid.
pub fn karcher_mean_srvf(gs: &[WarpingFunction]) -> Result<GridFunction> {
    let n = gs
        .iter()
        .map(WarpingFunction::grid_size)
        .max()
        .ok_or(Error::Empty("karcher mean of an empty set of warps"))?;
    let mut sum = vec![0.0; n];
    for g in gs {
        let q = to_srvf(&g.resample(n));
        for (s, v) in sum.iter_mut().zip(q.as_grid().values()) {
            *s += v;
        }
    }
    let sum = GridFunction::from_raw(sum);
    let norm = sum.l2_norm();
    Ok(sum.scale(1.0 / norm))
}

/// Extrinsic Karcher mean of warping functions (closed form).
pub fn karcher_mean_warps(gs: &[WarpingFunction]) -> Result<WarpingFunction> {
    Ok(warp_from_srvf(&karcher_mean_srvf(gs)?))
}

/// `Σᵢ ‖q − √γ̇ᵢ‖²` for a candidate SRVF `q`.
pub fn warp_mean_objective(q: &GridFunction, gs: &[WarpingFunction]) -> f64 {
    gs.iter()
        .map(|g| {
            let qi = to_srvf(&g.resample(q.grid_size()));
            let d = q.l2_distance(qi.as_grid());
            d * d
        })
        .sum()
}
