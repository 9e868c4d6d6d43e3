#![allow(dead_code)]

use std::sync::{Mutex, MutexGuard};

use ppwarp::density_est::{kde_modified, plug_in_bandwidth, DensityEstimate, KernelKind, KernelSpec};
use ppwarp::experiments::exp_warp;
use ppwarp::point_process::EventSequence;
use ppwarp::rng::Rng;
use ppwarp::{GridFunction, WarpingFunction};
use rand::Rng as _;

pub const N: usize = 1001;

pub fn tau_inv() -> f64 {
    5.0 / (N - 1) as f64
}

pub fn tau_align() -> f64 {
    10.0 / (N - 1) as f64
}

/// Serializes tests that time themselves.
pub fn exclusive() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k % 2 == 1 {
        s[k / 2]
    } else {
        (s[k / 2 - 1] + s[k / 2]) / 2.0
    }
}

/// A sample from a random two-bump mixture with a uniform floor.
pub fn random_events(rng: &mut Rng, m: usize) -> EventSequence {
    let c1: f64 = rng.random_range(0.1..0.9);
    let c2: f64 = rng.random_range(0.1..0.9);
    let w1: f64 = rng.random_range(0.03..0.2);
    let w2: f64 = rng.random_range(0.03..0.2);
    let events = (0..m)
        .map(|_| loop {
            let u: f64 = rng.random();
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            let x = if u < 0.1 {
                rng.random()
            } else if u < 0.55 {
                c1 + w1 * z
            } else {
                c2 + w2 * z
            };
            if (0.0..=1.0).contains(&x) {
                break x;
            }
        })
        .collect();
    EventSequence::new(events).unwrap()
}

/// Plug-in modified KDE of a random sample; strictly positive.
pub fn random_kde(rng: &mut Rng) -> DensityEstimate {
    let m = rng.random_range(20..200);
    let x = random_events(rng, m);
    let k = KernelSpec::from_gaussian_scale(KernelKind::TruncatedGaussian, plug_in_bandwidth(&x).unwrap()).unwrap();
    kde_modified(&x, &k, N).unwrap()
}

/// Smooth warp with slopes well inside `[1/10, 10]`: an exponential warp
/// composed with a convex blend of the identity and another one.
pub fn random_warp(rng: &mut Rng, n: usize) -> WarpingFunction {
    let a: f64 = rng.random_range(-1.5..1.5);
    let b: f64 = rng.random_range(-2.0..2.0);
    let w: f64 = rng.random_range(0.0..1.0);
    let inner = exp_warp(b, n);
    let blend = WarpingFunction::new(
        inner
            .values()
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let t = k as f64 / (n - 1) as f64;
                (1.0 - w) * t + w * v
            })
            .collect(),
    )
    .unwrap();
    exp_warp(a, n).compose(&blend)
}

/// Smooth function with values of either sign.
pub fn random_function(rng: &mut Rng, n: usize) -> GridFunction {
    let c: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    GridFunction::from_fn(n, |t| {
        c[0] + c[1] * (2.0 * std::f64::consts::PI * t).sin() + c[2] * (5.0 * t).cos() + c[3] * t * t
    })
    .unwrap()
}

pub fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}
