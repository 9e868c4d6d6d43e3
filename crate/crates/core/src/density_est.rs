//! Boundary-corrected kernel density estimation on `[0, 1]`.
//!
//! The estimator runs in three steps: an ordinary kernel estimate on the real
//! line with a compactly supported kernel, a fold-back of the mass that leaked
//! past either boundary (`f̃(t) + f̃(-t) + f̃(2-t)`), and a mixture with the
//! uniform density at weight `1/(m+1)` which keeps the result strictly
//! positive.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::grid_fn::{cumulative_trapezoid, generalized_inverse, node, GridFunction, WarpingFunction};
use crate::point_process::EventSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// Standard normal restricted to `[-3, 3]`, rescaled onto `[-1, 1]`.
    #[value(name = "truncated_gaussian")]
    TruncatedGaussian,
    /// Beta(3, 3) density shifted and scaled onto `[-1, 1]`.
    Beta,
}

const TRUNC: f64 = 3.0;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

impl KernelKind {
    /// Kernel value at `u`; zero outside `[-1, 1]`.
    pub fn eval(self, u: f64) -> f64 {
        if u.abs() > 1.0 {
            return 0.0;
        }
        match self {
            KernelKind::TruncatedGaussian => {
                let z = TRUNC * u;
                TRUNC * INV_SQRT_2PI * (-0.5 * z * z).exp() / truncated_mass()
            }
            KernelKind::Beta => {
                let w = 1.0 - u * u;
                15.0 / 16.0 * w * w
            }
        }
    }

    /// `∫_{-1}^{u} K`.
    pub fn cdf(self, u: f64) -> f64 {
        let u = u.clamp(-1.0, 1.0);
        match self {
            KernelKind::TruncatedGaussian => {
                let phi = |z: f64| 0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2));
                (phi(TRUNC * u) - phi(-TRUNC)) / truncated_mass()
            }
            KernelKind::Beta => {
                15.0 / 16.0 * (u - 2.0 * u.powi(3) / 3.0 + u.powi(5) / 5.0 + 8.0 / 15.0)
            }
        }
    }

    /// Standard deviation of the kernel on its `[-1, 1]` support.
    pub fn std_dev(self) -> f64 {
        match self {
            KernelKind::TruncatedGaussian => {
                let var = 1.0 - 2.0 * TRUNC * INV_SQRT_2PI * (-0.5 * TRUNC * TRUNC).exp() / truncated_mass();
                var.sqrt() / TRUNC
            }
            KernelKind::Beta => (1.0f64 / 7.0).sqrt(),
        }
    }
}

fn truncated_mass() -> f64 {
    erf(TRUNC / std::f64::consts::SQRT_2)
}

/// Kernel choice plus bandwidth `h` (half-width of the support).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, bandwidth: f64) -> Result<Self> {
        let spec = Self { kind, bandwidth };
        spec.validate()?;
        Ok(spec)
    }

    /// Converts a Gaussian-scale bandwidth (as produced by rule-of-thumb
    /// selectors) into this kernel's support half-width, capped at 1.
    pub fn from_gaussian_scale(kind: KernelKind, sigma: f64) -> Result<Self> {
        Self::new(kind, (sigma / kind.std_dev()).min(1.0))
    }

    fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth
            )));
        }
        if self.bandwidth > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "bandwidth {} exceeds 1; reflection needs h <= 1",
                self.bandwidth
            )));
        }
        Ok(())
    }
}

/// A density on the grid with its running-trapezoid CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pdf: GridFunction,
    cdf: GridFunction,
    strictly_positive: bool,
}

impl DensityEstimate {
    /// Normalizes a nonnegative sampled function to unit mass.
    pub fn from_pdf(pdf: GridFunction) -> Result<Self> {
        let min = pdf.min();
        if min < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "density samples must be nonnegative, min is {min}"
            )));
        }
        let mut cum = cumulative_trapezoid(pdf.values());
        let total = *cum.last().expect("grid has at least two nodes");
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("density has zero mass".into()));
        }
        for c in cum.iter_mut() {
            *c /= total;
        }
        let n = cum.len();
        cum[n - 1] = 1.0;
        let pdf = pdf.scale(1.0 / total);
        Ok(Self {
            strictly_positive: pdf.min() > 0.0,
            pdf,
            cdf: GridFunction::from_raw(cum),
        })
    }

    /// Like [`from_pdf`](Self::from_pdf) but clips small negative round-off to zero.
    pub(crate) fn from_pdf_clipped(pdf: GridFunction) -> Result<Self> {
        Self::from_pdf(pdf.map(|v| v.max(0.0)))
    }

    pub fn pdf(&self) -> &GridFunction {
        &self.pdf
    }

    pub fn cdf(&self) -> &GridFunction {
        &self.cdf
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.strictly_positive
    }

    pub fn grid_size(&self) -> usize {
        self.pdf.grid_size()
    }

    /// The CDF as a warping function; only defined for strictly positive densities.
    pub fn cdf_warp(&self) -> Result<WarpingFunction> {
        self.require_positive(0)?;
        WarpingFunction::project(self.cdf.values().to_vec())
    }

    pub(crate) fn require_positive(&self, index: usize) -> Result<()> {
        if self.strictly_positive {
            Ok(())
        } else {
            Err(Error::NotStrictlyPositive {
                index,
                min: self.pdf.min(),
            })
        }
    }

    /// Quantile function `F⁻¹` sampled on the grid (left-continuous inverse).
    pub fn quantile(&self) -> GridFunction {
        let n = self.grid_size();
        let v = self.cdf.values();
        let mut q: Vec<f64> = (0..n).map(|k| generalized_inverse(v, node(k, n))).collect();
        q[n - 1] = q[n - 1].max(q[n - 2]);
        GridFunction::from_raw(q)
    }

    /// `F⁻¹(y)` for a single level.
    pub fn quantile_at(&self, y: f64) -> f64 {
        generalized_inverse(self.cdf.values(), y)
    }

    pub fn resample(&self, n: usize) -> DensityEstimate {
        if n == self.grid_size() {
            return self.clone();
        }
        Self::from_pdf(self.pdf.resample(n)).expect("resampling keeps a valid density")
    }
}

/// Steps 1 and 2: kernel estimate on ℝ folded back into `[0, 1]`, sampled on
/// an `n`-point grid. The result is rescaled to unit trapezoidal mass.
pub fn kde_reflected(x: &EventSequence, k: &KernelSpec, grid_size: usize) -> Result<GridFunction> {
    if x.is_empty() {
        return Err(Error::Empty("kernel density estimate of an empty sample"));
    }
    k.validate()?;
    if grid_size < 2 {
        return Err(Error::GridTooSmall(grid_size));
    }
    let n = grid_size;
    let h = k.bandwidth;
    let scale = (n - 1) as f64;
    let mut acc = vec![0.0; n];
    for &xj in x.events() {
        for p in [xj, -xj, 2.0 - xj] {
            let lo = ((p - h) * scale).ceil().max(0.0);
            let hi = ((p + h) * scale).floor().min(scale);
            if lo > hi {
                continue;
            }
            for i in lo as usize..=hi as usize {
                acc[i] += k.kind.eval((node(i, n) - p) / h);
            }
        }
    }
    let norm = 1.0 / (x.count() as f64 * h);
    let raw = GridFunction::from_raw(acc.into_iter().map(|v| v * norm).collect());
    let mass = raw.integrate();
    if !(mass > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bandwidth {h} does not reach any of the {n} grid nodes"
        )));
    }
    Ok(raw.scale(1.0 / mass))
}

/// Exact `∫_0^1 f̃̃` of the folded estimate, from the kernel's CDF.
pub fn reflected_mass(x: &EventSequence, k: &KernelSpec) -> f64 {
    let h = k.bandwidth;
    let m = x.count() as f64;
    x.events()
        .iter()
        .map(|&xj| {
            [xj, -xj, 2.0 - xj]
                .iter()
                .map(|&p| k.kind.cdf((1.0 - p) / h) - k.kind.cdf((0.0 - p) / h))
                .sum::<f64>()
        })
        .sum::<f64>()
        / m
}

/// Full modified estimator: fold-back followed by the uniform mixture at
/// weight `1/(m+1)`. Always strictly positive.
pub fn kde_modified(x: &EventSequence, k: &KernelSpec, grid_size: usize) -> Result<DensityEstimate> {
    let folded = kde_reflected(x, k, grid_size)?;
    let m = x.count() as f64;
    let pdf = folded.map(|v| v * m / (m + 1.0) + 1.0 / (m + 1.0));
    DensityEstimate::from_pdf(pdf)
}

/// Rule-of-thumb bandwidth `1.06 σ̂ m^{-1/5}`, `σ̂ = min(sd, IQR/1.349)`.
///
/// The value is on the Gaussian scale; see [`KernelSpec::from_gaussian_scale`].
/// Samples with a single event or zero spread fall back to `m^{-1/5}/10`.
pub fn plug_in_bandwidth(x: &EventSequence) -> Result<f64> {
    let m = x.count();
    if m == 0 {
        return Err(Error::Empty("bandwidth of an empty sample"));
    }
    let fallback = (m as f64).powf(-0.2) / 10.0;
    if m < 2 {
        return Ok(fallback);
    }
    let e = x.events();
    let mean = e.iter().sum::<f64>() / m as f64;
    let var = e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    let iqr = quantile_sorted(e, 0.75) - quantile_sorted(e, 0.25);
    let sigma = var.sqrt().min(iqr / 1.349);
    if !(sigma > 0.0) {
        return Ok(fallback);
    }
    Ok(1.06 * sigma * (m as f64).powf(-0.2))
}

/// Linear-interpolation sample quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `λ̂ = Λ̂ f̂`.
pub fn density_to_intensity(d: &DensityEstimate, total: f64) -> Result<GridFunction> {
    if !(total >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "total intensity must be nonnegative, got {total}"
        )));
    }
    Ok(d.pdf().scale(total))
}

#[cfg(test)]
mod tests {
    use super::*;

    const N: usize = 1001;

    fn events(v: Vec<f64>) -> EventSequence {
        EventSequence::new(v).unwrap()
    }

    #[test]
    fn kernels_have_unit_mass_and_compact_support() {
        for kind in [KernelKind::TruncatedGaussian, KernelKind::Beta] {
            let g = GridFunction::from_fn(20001, |t| kind.eval(2.0 * t - 1.0) * 2.0).unwrap();
            assert!((g.integrate() - 1.0).abs() < 1e-6, "{kind:?}");
            assert_eq!(kind.eval(1.0001), 0.0);
            assert!((kind.cdf(1.0) - 1.0).abs() < 1e-12);
            assert!(kind.cdf(-1.0).abs() < 1e-12);
            assert!((kind.cdf(0.0) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_std_matches_quadrature() {
        for kind in [KernelKind::TruncatedGaussian, KernelKind::Beta] {
            let g = GridFunction::from_fn(20001, |t| {
                let u = 2.0 * t - 1.0;
                u * u * kind.eval(u) * 2.0
            })
            .unwrap();
            assert!((g.integrate().sqrt() - kind.std_dev()).abs() < 1e-6);
        }
    }

    #[test]
    fn single_event_estimate() {
        let k = KernelSpec::new(KernelKind::TruncatedGaussian, 0.05).unwrap();
        let d = kde_modified(&events(vec![0.5]), &k, N).unwrap();
        assert!(d.is_strictly_positive());
        assert!(d.pdf().min() >= 0.5 * (1.0 - 1e-9));
        assert!((d.pdf().integrate() - 1.0).abs() < 1e-12);
        assert_eq!(d.pdf().argmax(), 500);
    }

    #[test]
    fn reflection_conserves_mass() {
        let x = events(vec![0.0, 0.01, 0.3, 0.97, 1.0]);
        for kind in [KernelKind::TruncatedGaussian, KernelKind::Beta] {
            for h in [0.01, 0.2, 1.0] {
                let k = KernelSpec::new(kind, h).unwrap();
                assert!((reflected_mass(&x, &k) - 1.0).abs() < 1e-6, "{kind:?} h={h}");
            }
        }
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let k = KernelSpec {
            kind: KernelKind::Beta,
            bandwidth: 0.1,
        };
        assert!(matches!(kde_modified(&EventSequence::default(), &k, N), Err(Error::Empty(_))));
        assert!(KernelSpec::new(KernelKind::Beta, 0.0).is_err());
        assert!(KernelSpec::new(KernelKind::Beta, -1.0).is_err());
        assert!(KernelSpec::new(KernelKind::Beta, 1.5).is_err());
    }

    #[test]
    fn plug_in_examples() {
        let uniform: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let h = plug_in_bandwidth(&events(uniform)).unwrap();
        assert!(h > 0.05 && h < 0.25, "h = {h}");

        let degenerate = events(vec![0.4; 32]);
        assert_eq!(plug_in_bandwidth(&degenerate).unwrap(), 32f64.powf(-0.2) / 10.0);
        assert_eq!(plug_in_bandwidth(&events(vec![0.2])).unwrap(), 0.1);
        assert!(plug_in_bandwidth(&EventSequence::default()).is_err());
    }

    #[test]
    fn density_to_intensity_cases() {
        let d = DensityEstimate::from_pdf(GridFunction::constant(N, 1.0)).unwrap();
        let z = density_to_intensity(&d, 0.0).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        assert_eq!(density_to_intensity(&d, 1.0).unwrap(), *d.pdf());
        let lam = density_to_intensity(&d, 2050.0).unwrap();
        assert!(lam.values().iter().all(|&v| (v - 2050.0).abs() < 1e-9));
        assert!((lam.integrate() - 2050.0).abs() < 1e-6 * 2050.0);
        assert!(density_to_intensity(&d, -1.0).is_err());
    }

    #[test]
    fn from_pdf_builds_cdf() {
        let d = DensityEstimate::from_pdf(GridFunction::from_fn(N, |t| 2.0 * t).unwrap()).unwrap();
        assert_eq!(d.cdf().values()[0], 0.0);
        assert_eq!(d.cdf().values()[N - 1], 1.0);
        assert!(!d.is_strictly_positive());
        assert!(d.cdf_warp().is_err());
        let expected = GridFunction::from_fn(N, |t| t * t).unwrap();
        assert!(d.cdf().sup_distance(&expected) < 1e-6);
        assert!(DensityEstimate::from_pdf(GridFunction::constant(N, 0.0)).is_err());
        assert!(DensityEstimate::from_pdf(GridFunction::constant(N, -1.0)).is_err());
    }
}
