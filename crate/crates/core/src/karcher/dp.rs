//! Dynamic-programming alignment of square-root densities.
//!
//! The search runs on an `M × M` lattice over `[0, 1]²`. A path moves from
//! node `(i, j)` to `(i + di, j + dj)` with coprime `1 ≤ di, dj ≤ 10`, so every
//! segment has slope in `[1/10, 10]`. Segment costs are integrated against the
//! full-resolution square-root densities; the optimal path is then sampled on
//! the input grid.

use crate::density_est::DensityEstimate;
use crate::error::{Error, Result};
use crate::grid_fn::{interp, node, WarpingFunction};

pub const DEFAULT_DP_LATTICE: usize = 101;

const MAX_STEP: usize = 10;

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn steps() -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for di in 1..=MAX_STEP {
        for dj in 1..=MAX_STEP {
            if gcd(di, dj) == 1 {
                out.push((di, dj));
            }
        }
    }
    out
}

/// Warp `γ` minimizing `‖√f₁ − (√f₂ ∘ γ)√γ̇‖² + penalty·‖1 − √γ̇‖²`, so that
/// `f₁ ≈ (f₂; γ)`.
pub fn dp_align(f1: &DensityEstimate, f2: &DensityEstimate, penalty: f64) -> Result<WarpingFunction> {
    dp_align_on_lattice(f1, f2, penalty, DEFAULT_DP_LATTICE)
}

pub fn dp_align_on_lattice(
    f1: &DensityEstimate,
    f2: &DensityEstimate,
    penalty: f64,
    lattice: usize,
) -> Result<WarpingFunction> {
    if !(penalty >= 0.0) || !penalty.is_finite() {
        return Err(Error::InvalidParameter(format!("dp penalty must be >= 0, got {penalty}")));
    }
    if lattice < 2 {
        return Err(Error::InvalidParameter(format!("dp lattice needs >= 2 nodes, got {lattice}")));
    }
    let n = f1.grid_size().max(f2.grid_size());
    let q1: Vec<f64> = f1.pdf().resample(n).values().iter().map(|v| v.sqrt()).collect();
    let q2: Vec<f64> = f2.pdf().resample(n).values().iter().map(|v| v.sqrt()).collect();
    let m = lattice;
    let h = 1.0 / (m - 1) as f64;
    let steps = steps();

    // Along a segment of step (di, dj) with k = max(di, dj) quadrature
    // points, √f₁ is sampled at (i + p·di/k)·h and √f₂ at (j + p·dj/k)·h.
    // Both tables depend on one lattice coordinate only.
    let stride = MAX_STEP + 1;
    let ns = steps.len();
    let mut a_tab = vec![0.0; m * ns * stride];
    let mut b_tab = vec![0.0; m * ns * stride];
    for i in 0..m {
        for (si, &(di, dj)) in steps.iter().enumerate() {
            let k = di.max(dj);
            let base = (i * ns + si) * stride;
            for p in 0..=k {
                let frac = p as f64 / k as f64;
                a_tab[base + p] = interp(&q1, ((i as f64 + frac * di as f64) * h).min(1.0));
                b_tab[base + p] = interp(&q2, ((i as f64 + frac * dj as f64) * h).min(1.0));
            }
        }
    }
    let consts: Vec<(f64, f64, f64)> = steps
        .iter()
        .map(|&(di, dj)| {
            let rs = (dj as f64 / di as f64).sqrt();
            let dt = di as f64 * h / di.max(dj) as f64;
            (rs, dt, penalty * (1.0 - rs).powi(2) * di as f64 * h)
        })
        .collect();
    let edge_cost = |i: usize, j: usize, si: usize| -> f64 {
        let (di, dj) = steps[si];
        let k = di.max(dj);
        let (rs, dt, pen) = consts[si];
        let a = &a_tab[(i * ns + si) * stride..][..=k];
        let b = &b_tab[(j * ns + si) * stride..][..=k];
        let mut acc = 0.0;
        for p in 0..=k {
            let e = a[p] - rs * b[p];
            acc += e * e;
        }
        let e0 = a[0] - rs * b[0];
        let ek = a[k] - rs * b[k];
        acc -= 0.5 * (e0 * e0 + ek * ek);
        acc * dt + pen
    };

    let idx = |i: usize, j: usize| i * m + j;
    let mut cost = vec![f64::INFINITY; m * m];
    let mut back = vec![u32::MAX; m * m];
    cost[0] = 0.0;
    for i in 1..m {
        for j in 1..m {
            let mut best = f64::INFINITY;
            let mut arg = u32::MAX;
            for (si, &(di, dj)) in steps.iter().enumerate() {
                if di > i || dj > j {
                    continue;
                }
                let prev = cost[idx(i - di, j - dj)];
                if !prev.is_finite() {
                    continue;
                }
                let c = prev + edge_cost(i - di, j - dj, si);
                if c < best {
                    best = c;
                    arg = si as u32;
                }
            }
            cost[idx(i, j)] = best;
            back[idx(i, j)] = arg;
        }
    }

    let mut path = vec![(m - 1, m - 1)];
    let (mut i, mut j) = (m - 1, m - 1);
    while i > 0 || j > 0 {
        let s = back[idx(i, j)];
        debug_assert_ne!(s, u32::MAX, "lattice corner always reachable");
        let (di, dj) = steps[s as usize];
        i -= di;
        j -= dj;
        path.push((i, j));
    }
    path.reverse();

    let ts: Vec<f64> = path.iter().map(|&(i, _)| i as f64 * h).collect();
    let ss: Vec<f64> = path.iter().map(|&(_, j)| j as f64 * h).collect();
    let mut v = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        let t = node(k, n);
        while seg + 2 < ts.len() && ts[seg + 1] < t {
            seg += 1;
        }
        let (a, b) = (ts[seg], ts[seg + 1]);
        let frac = ((t - a) / (b - a)).clamp(0.0, 1.0);
        v.push(ss[seg] + frac * (ss[seg + 1] - ss[seg]));
    }
    v[0] = 0.0;
    v[n - 1] = 1.0;
    WarpingFunction::project(v)
}
