//! Functions sampled on a uniform grid over `[0, 1]`.
//!
//! Every curve in the crate (intensities, densities, CDFs, warping functions)
//! is stored as `N` samples at `t_k = k / (N - 1)`. Evaluation between nodes is
//! piecewise linear and integrals use the trapezoidal rule, so all modules
//! agree on the same discrete inner product.

use crate::error::{Error, Result};

/// Default number of grid points.
pub const DEFAULT_GRID_SIZE: usize = 1001;

/// Minimum increment between consecutive samples of a warping function.
pub fn eps_mono(n: usize) -> f64 {
    1e-8 / (n - 1) as f64
}

/// Round-trip tolerance for inversion and composition.
pub fn tau_inv(n: usize) -> f64 {
    5.0 / (n - 1) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::GridTooSmall(values.len()));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(k));
        }
        Ok(Self { values })
    }

    /// Internal constructor for values produced by finite arithmetic on valid grids.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(values.len() >= 2);
        debug_assert!(values.iter().all(|v| v.is_finite()), "non-finite grid value");
        Self { values }
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::GridTooSmall(n));
        }
        Self::new((0..n).map(|k| f(node(k, n))).collect())
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::from_raw(vec![c; n.max(2)])
    }

    pub fn identity(n: usize) -> Self {
        let n = n.max(2);
        Self::from_raw((0..n).map(|k| node(k, n)).collect())
    }

    pub fn grid_size(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Grid spacing `1 / (N - 1)`.
    pub fn step(&self) -> f64 {
        1.0 / (self.values.len() - 1) as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        node(k, self.values.len())
    }

    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::OutOfDomain(t));
        }
        Ok(interp(&self.values, t))
    }

    /// Evaluation with `t` clamped into `[0, 1]`.
    pub(crate) fn eval_clamped(&self, t: f64) -> f64 {
        interp(&self.values, t.clamp(0.0, 1.0))
    }

    pub fn integrate(&self) -> f64 {
        trapezoid(&self.values)
    }

    /// Running trapezoidal integral `∫_0^{t_k} f`, one entry per node.
    pub fn cumulative_integral(&self) -> Vec<f64> {
        cumulative_trapezoid(&self.values)
    }

    /// Central differences in the interior, one-sided differences at both ends.
    pub fn derivative(&self) -> GridFunction {
        let v = &self.values;
        let n = v.len();
        let inv_h = (n - 1) as f64;
        let mut d = Vec::with_capacity(n);
        d.push((v[1] - v[0]) * inv_h);
        for k in 1..n - 1 {
            d.push((v[k + 1] - v[k - 1]) * 0.5 * inv_h);
        }
        d.push((v[n - 1] - v[n - 2]) * inv_h);
        GridFunction::from_raw(d)
    }

    /// Linear-interpolation resampling onto an `n`-point grid.
    pub fn resample(&self, n: usize) -> GridFunction {
        if n == self.values.len() {
            return self.clone();
        }
        let n = n.max(2);
        GridFunction::from_raw((0..n).map(|k| interp(&self.values, node(k, n))).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction::from_raw(self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination; `other` is resampled onto this grid when sizes differ.
    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        let other = other.resample(self.grid_size());
        GridFunction::from_raw(
            self.values
                .iter()
                .zip(other.values.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scale(&self, c: f64) -> GridFunction {
        self.map(|v| c * v)
    }

    pub fn inner(&self, other: &GridFunction) -> f64 {
        self.zip_with(other, |a, b| a * b).integrate()
    }

    pub fn l2_norm(&self) -> f64 {
        trapezoid_map(&self.values, |v| v * v).max(0.0).sqrt()
    }

    pub fn l2_distance(&self, other: &GridFunction) -> f64 {
        self.zip_with(other, |a, b| a - b).l2_norm()
    }

    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.zip_with(other, |a, b| (a - b).abs()).max()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = k;
            }
        }
        best
    }
}

#[inline]
pub(crate) fn node(k: usize, n: usize) -> f64 {
    k as f64 / (n - 1) as f64
}

/// Piecewise-linear interpolation on a uniform `[0, 1]` grid; exact at nodes.
#[inline]
pub(crate) fn interp(v: &[f64], t: f64) -> f64 {
    let n = v.len();
    let x = t * (n - 1) as f64;
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        return v[(r as usize).min(n - 1)];
    }
    let k = (x.floor() as usize).min(n - 2);
    let frac = x - k as f64;
    v[k] + frac * (v[k + 1] - v[k])
}

pub(crate) fn trapezoid(v: &[f64]) -> f64 {
    trapezoid_map(v, |x| x)
}

pub(crate) fn trapezoid_map(v: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let n = v.len();
    let h = 1.0 / (n - 1) as f64;
    let interior: f64 = v[1..n - 1].iter().map(|&x| f(x)).sum();
    h * (0.5 * (f(v[0]) + f(v[n - 1])) + interior)
}

pub(crate) fn cumulative_trapezoid(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let h = 1.0 / (n - 1) as f64;
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..n {
        acc += 0.5 * h * (v[k - 1] + v[k]);
        out.push(acc);
    }
    out
}

/// Orientation-preserving warping function: `γ(0) = 0`, `γ(1) = 1`, strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpingFunction {
    base: GridFunction,
}

impl WarpingFunction {
    /// Strict constructor; rejects samples violating the warp invariants.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let base = GridFunction::new(values)?;
        validate_warp(base.values())?;
        Ok(Self { base })
    }

    pub fn identity(n: usize) -> Self {
        let mut base = GridFunction::identity(n);
        let last = base.values.len() - 1;
        base.values[0] = 0.0;
        base.values[last] = 1.0;
        Self { base }
    }

    /// Samples `f` on the grid and projects the result onto the set of valid warps.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::project(GridFunction::from_fn(n, f)?.into_values())
    }

    /// Projects arbitrary finite samples onto the warp invariants.
    ///
    /// Values that already form a valid warp are returned untouched. Otherwise
    /// decreasing steps are flattened, the curve is rescaled to `[0, 1]`, and a
    /// linear ramp of relative size `2e-8` is mixed in so every increment
    /// clears `eps_mono`.
    pub fn project(values: Vec<f64>) -> Result<Self> {
        let base = GridFunction::new(values)?;
        if validate_warp(base.values()).is_ok() {
            return Ok(Self { base });
        }
        let n = base.grid_size();
        let mut v = base.into_values();
        let v0 = v[0];
        let mut running = 0.0_f64;
        for x in v.iter_mut() {
            running = running.max(*x - v0);
            *x = running;
        }
        let span = v[n - 1];
        if !(span > 0.0) {
            return Ok(Self::identity(n));
        }
        const RAMP: f64 = 2e-8;
        for (k, x) in v.iter_mut().enumerate() {
            *x = (*x / span + RAMP * node(k, n)) / (1.0 + RAMP);
        }
        v[0] = 0.0;
        v[n - 1] = 1.0;
        let out = Self {
            base: GridFunction::from_raw(v),
        };
        debug_assert!(validate_warp(out.values()).is_ok());
        Ok(out)
    }

    pub(crate) fn project_raw(values: Vec<f64>) -> Self {
        Self::project(values).expect("finite samples on a valid grid")
    }

    pub fn as_grid(&self) -> &GridFunction {
        &self.base
    }

    pub fn into_grid(self) -> GridFunction {
        self.base
    }

    pub fn values(&self) -> &[f64] {
        self.base.values()
    }

    pub fn grid_size(&self) -> usize {
        self.base.grid_size()
    }

    pub fn evaluate(&self, t: f64) -> Result<f64> {
        self.base.evaluate(t)
    }

    pub(crate) fn eval_clamped(&self, t: f64) -> f64 {
        self.base.eval_clamped(t)
    }

    /// `γ⁻¹(y)` for a single value, by monotone piecewise-linear inversion.
    pub fn inverse_at(&self, y: f64) -> f64 {
        generalized_inverse(self.values(), y)
    }

    pub fn inverse(&self) -> WarpingFunction {
        let n = self.grid_size();
        let v = self.values();
        let mut out = Vec::with_capacity(n);
        let mut k = 0usize;
        for j in 0..n {
            let y = node(j, n);
            while k + 1 < n - 1 && v[k + 1] < y {
                k += 1;
            }
            out.push(inverse_in_cell(v, k, y));
        }
        out[0] = 0.0;
        out[n - 1] = 1.0;
        WarpingFunction::project_raw(out)
    }

    /// `(self ∘ inner)(t_k) = self(inner(t_k))`, on the finer of the two grids.
    pub fn compose(&self, inner: &WarpingFunction) -> WarpingFunction {
        let n = self.grid_size().max(inner.grid_size());
        let inner = inner.resample(n);
        let mut out: Vec<f64> = inner.values().iter().map(|&s| self.eval_clamped(s)).collect();
        out[0] = 0.0;
        out[n - 1] = 1.0;
        WarpingFunction::project_raw(out)
    }

    pub fn resample(&self, n: usize) -> WarpingFunction {
        if n == self.grid_size() {
            return self.clone();
        }
        let mut v = self.base.resample(n).into_values();
        v[0] = 0.0;
        v[n - 1] = 1.0;
        WarpingFunction::project_raw(v)
    }

    /// Derivative clamped below at `eps_mono · (N - 1)` so square roots stay positive.
    pub fn derivative_clamped(&self) -> GridFunction {
        let floor = eps_mono(self.grid_size()) * (self.grid_size() - 1) as f64;
        self.base.derivative().map(|d| d.max(floor))
    }

    pub fn sup_distance(&self, other: &WarpingFunction) -> f64 {
        self.base.sup_distance(&other.base)
    }
}

fn validate_warp(v: &[f64]) -> Result<()> {
    let n = v.len();
    if v[0] != 0.0 || v[n - 1] != 1.0 {
        return Err(Error::NotMonotone(format!(
            "endpoints are ({}, {}), expected (0, 1)",
            v[0],
            v[n - 1]
        )));
    }
    let min_step = eps_mono(n) * (1.0 - 1e-6);
    if let Some(k) = v.windows(2).position(|w| w[1] - w[0] < min_step) {
        return Err(Error::NotMonotone(format!(
            "increment at index {k} is {:e}, below {:e}",
            v[k + 1] - v[k],
            eps_mono(n)
        )));
    }
    Ok(())
}

/// `x` in cell `[t_k, t_{k+1}]` with `v(x) = y`, by linear interpolation.
#[inline]
fn inverse_in_cell(v: &[f64], k: usize, y: f64) -> f64 {
    let n = v.len();
    let h = 1.0 / (n - 1) as f64;
    let dv = v[k + 1] - v[k];
    let frac = if dv > 0.0 { ((y - v[k]) / dv).clamp(0.0, 1.0) } else { 0.0 };
    (k as f64 + frac) * h
}

/// Smallest-`x` inverse of a nondecreasing sampled curve, linear within cells.
///
/// On plateaus the left end of the plateau is returned; `y` outside the range
/// of `v` maps to the corresponding end of `[0, 1]`.
pub(crate) fn generalized_inverse(v: &[f64], y: f64) -> f64 {
    let n = v.len();
    if y <= v[0] {
        return 0.0;
    }
    if y >= v[n - 1] {
        // first index attaining the maximum
        let k = v.partition_point(|&x| x < v[n - 1]);
        return node(k, n);
    }
    // first index with v[k] >= y; k >= 1 here
    let k = v.partition_point(|&x| x < y);
    inverse_in_cell(v, k - 1, y)
}

/// Inverse of a warping function given as a general grid function.
///
/// Fails when the samples do not fix the endpoints or do not increase by at
/// least `eps_mono` per cell.
pub fn invert_monotone(g: &GridFunction) -> Result<WarpingFunction> {
    validate_warp(g.values())?;
    Ok(WarpingFunction { base: g.clone() }.inverse())
}

pub fn compose(g1: &WarpingFunction, g2: &WarpingFunction) -> WarpingFunction {
    g1.compose(g2)
}
