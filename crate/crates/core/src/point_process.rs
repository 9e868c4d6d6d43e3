//! Realizations of (warped) nonhomogeneous Poisson processes on `[0, 1]`.

use rand::Rng as _;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_fn::{GridFunction, WarpingFunction};
use crate::rng::{derive_seed, rng_from_seed, Rng};

/// Sorted event times of one realization.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventSequence {
    events: Vec<f64>,
}

impl EventSequence {
    /// Sorts the events; fails on values outside `[0, 1]` or NaN.
    pub fn new(mut events: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = events.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::OutOfDomain(bad));
        }
        events.sort_by(f64::total_cmp);
        Ok(Self { events })
    }

    pub fn events(&self) -> &[f64] {
        &self.events
    }

    pub fn count(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// A collection of trials with optional identifiers and class labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialSet {
    pub trials: Vec<EventSequence>,
    pub ids: Vec<String>,
    pub labels: Option<Vec<String>>,
}

impl TrialSet {
    pub fn new(trials: Vec<EventSequence>) -> Self {
        let ids = (0..trials.len()).map(|i| i.to_string()).collect();
        Self {
            trials,
            ids,
            labels: None,
        }
    }

    pub fn with_labels(trials: Vec<EventSequence>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != trials.len() {
            return Err(Error::InvalidParameter(format!(
                "{} labels for {} trials",
                labels.len(),
                trials.len()
            )));
        }
        let mut ts = Self::new(trials);
        ts.labels = Some(labels);
        Ok(ts)
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.trials.iter().map(EventSequence::count).collect()
    }

    /// Distinct labels in order of first appearance.
    pub fn classes(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for l in self.labels.iter().flatten() {
            if !out.contains(l) {
                out.push(l.clone());
            }
        }
        out
    }
}

/// One realization of `PP(λ)`: `K ~ Poisson(Λ)`, then `K` i.i.d. draws from
/// `λ/Λ` by exact inverse-CDF sampling of the piecewise-linear intensity.
pub fn simulate_pp(lambda: &GridFunction, seed: u64) -> Result<EventSequence> {
    simulate_pp_with(lambda, &mut rng_from_seed(seed))
}

pub fn simulate_pp_with(lambda: &GridFunction, rng: &mut Rng) -> Result<EventSequence> {
    if lambda.min() < 0.0 {
        return Err(Error::InvalidParameter("intensity must be nonnegative".into()));
    }
    let sampler = InverseCdfSampler::new(lambda)?;
    let count = Poisson::new(sampler.total)
        .map_err(|e| Error::InvalidParameter(format!("poisson mean {}: {e}", sampler.total)))?
        .sample(rng) as usize;
    let mut events: Vec<f64> = (0..count).map(|_| sampler.sample(rng.random())).collect();
    events.sort_by(f64::total_cmp);
    Ok(EventSequence { events })
}

/// `n` independent realizations; trial `i` uses `derive_seed(seed, i)`.
pub fn simulate_trials(lambda: &GridFunction, n: usize, seed: u64) -> Result<Vec<EventSequence>> {
    (0..n)
        .map(|i| simulate_pp(lambda, derive_seed(seed, i as u64)))
        .collect()
}

struct InverseCdfSampler<'a> {
    lambda: &'a [f64],
    cum: Vec<f64>,
    total: f64,
    h: f64,
}

impl<'a> InverseCdfSampler<'a> {
    fn new(lambda: &'a GridFunction) -> Result<Self> {
        let cum = lambda.cumulative_integral();
        let total = *cum.last().expect("grid has at least two nodes");
        if !(total > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "total intensity must be positive, got {total}"
            )));
        }
        Ok(Self {
            lambda: lambda.values(),
            cum,
            total,
            h: lambda.step(),
        })
    }

    /// Maps `u ∈ [0, 1)` through the inverse of the exact CDF of the
    /// piecewise-linear intensity (a quadratic inside each cell).
    fn sample(&self, u: f64) -> f64 {
        let target = u * self.total;
        let n = self.cum.len();
        let k = self.cum.partition_point(|&c| c <= target).clamp(1, n - 1) - 1;
        let r = target - self.cum[k];
        let a = self.lambda[k];
        let b = self.lambda[k + 1];
        let slope = (b - a) / self.h;
        // a s + slope s² / 2 = r
        let s = if r <= 0.0 {
            0.0
        } else if slope.abs() < 1e-12 * a.abs().max(1e-300) {
            if a > 0.0 {
                r / a
            } else {
                0.0
            }
        } else {
            let disc = (a * a + 2.0 * slope * r).max(0.0);
            2.0 * r / (a + disc.sqrt())
        };
        let t = k as f64 * self.h + s.clamp(0.0, self.h);
        t.clamp(0.0, 1.0)
    }
}

/// `Sᵢ = γ⁻¹(Rⁱ)`: maps every event through the inverse warp.
pub fn warp_events(r: &EventSequence, g: &WarpingFunction) -> EventSequence {
    let mut events: Vec<f64> = r.events.iter().map(|&e| g.inverse_at(e)).collect();
    events.sort_by(f64::total_cmp);
    EventSequence { events }
}

/// `Λ̂ = (1/n) Σ kᵢ`.
pub fn mle_total_intensity(ts: &TrialSet) -> Result<f64> {
    if ts.is_empty() {
        return Err(Error::Empty("total intensity of an empty trial set"));
    }
    Ok(ts.counts().iter().sum::<usize>() as f64 / ts.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_sequence_sorts_and_validates() {
        let s = EventSequence::new(vec![0.5, 0.1, 1.0, 0.0]).unwrap();
        assert_eq!(s.events(), &[0.0, 0.1, 0.5, 1.0]);
        assert!(EventSequence::new(vec![1.5]).is_err());
        assert!(EventSequence::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn zero_intensity_is_rejected() {
        let lam = GridFunction::constant(101, 0.0);
        assert!(matches!(simulate_pp(&lam, 1), Err(Error::InvalidParameter(_))));
        let neg = GridFunction::constant(101, -1.0);
        assert!(simulate_pp(&neg, 1).is_err());
    }

    #[test]
    fn simulation_is_deterministic() {
        let lam = GridFunction::from_fn(101, |t| 50.0 + 40.0 * t).unwrap();
        assert_eq!(simulate_pp(&lam, 42).unwrap(), simulate_pp(&lam, 42).unwrap());
        assert_ne!(simulate_pp(&lam, 42).unwrap(), simulate_pp(&lam, 43).unwrap());
    }

    #[test]
    fn constant_intensity_mean_count() {
        let lam = GridFunction::constant(11, 5.0);
        let n = 10_000;
        let total: usize = (0..n).map(|s| simulate_pp(&lam, s).unwrap().count()).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 5.0).abs() < 0.1, "mean count {mean}");
    }

    #[test]
    fn inverse_cdf_is_exact_for_linear_intensity() {
        // λ(t) = 2t: CDF t², inverse √u
        let lam = GridFunction::from_fn(3, |t| 2.0 * t).unwrap();
        let s = InverseCdfSampler::new(&lam).unwrap();
        for &u in &[0.0, 0.01, 0.2, 0.5, 0.77, 0.999] {
            assert!((s.sample(u) - f64::sqrt(u)).abs() < 1e-12, "u={u}");
        }
    }

    #[test]
    fn warp_identity_and_round_trip() {
        let r = EventSequence::new(vec![0.05, 0.3, 0.31, 0.9]).unwrap();
        let id = WarpingFunction::identity(1001);
        assert_eq!(warp_events(&r, &id), r);
        let g = WarpingFunction::from_fn(1001, |t| t * t).unwrap();
        let back = warp_events(&warp_events(&r, &g), &g.inverse());
        for (a, b) in back.events().iter().zip(r.events()) {
            assert!((a - b).abs() <= crate::grid_fn::tau_inv(1001));
        }
        assert_eq!(warp_events(&r, &g).count(), r.count());
    }

    #[test]
    fn mle_examples() {
        let one = TrialSet::new(vec![EventSequence::new(vec![0.1, 0.2, 0.3]).unwrap()]);
        assert_eq!(mle_total_intensity(&one).unwrap(), 3.0);
        let zeros = TrialSet::new(vec![EventSequence::default(); 3]);
        assert_eq!(mle_total_intensity(&zeros).unwrap(), 0.0);
        assert!(mle_total_intensity(&TrialSet::default()).is_err());
    }

    #[test]
    fn labels_must_match_trials() {
        assert!(TrialSet::with_labels(vec![EventSequence::default()], vec![]).is_err());
        let ts = TrialSet::with_labels(
            vec![EventSequence::default(); 3],
            vec!["b".into(), "a".into(), "b".into()],
        )
        .unwrap();
        assert_eq!(ts.classes(), vec!["b".to_string(), "a".to_string()]);
    }
}
