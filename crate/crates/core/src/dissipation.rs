//! Variation and dissipation (H-variation) of sampled plastic-strain paths.
//!
//! Paths are sampled at increasing times; each sample is a field of
//! deviatoric tensors with integration weights (element areas, or a
//! single unit weight for one material point). The variation is taken
//! over the sample partition, which is exact for the piecewise-constant
//! interpolants produced by the incremental scheme and a lower bound for
//! general inputs.

use crate::constitutive::YieldSurface;
use crate::error::{Error, Result};
use crate::tensor::DevTensor;

#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    times: Vec<f64>,
    values: Vec<Vec<DevTensor>>,
    weights: Vec<f64>,
}

impl SampledPath {
    pub fn new(times: Vec<f64>, values: Vec<Vec<DevTensor>>, weights: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidHistory(format!(
                "{} times for {} samples",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidHistory("times must be strictly increasing".into()));
        }
        if values.iter().any(|v| v.len() != weights.len()) {
            return Err(Error::InvalidHistory("sample shape does not match weights".into()));
        }
        Ok(Self {
            times,
            values,
            weights,
        })
    }

    /// Path of a single material point.
    pub fn single_point(times: Vec<f64>, values: Vec<DevTensor>) -> Result<Self> {
        Self::new(times, values.into_iter().map(|v| vec![v]).collect(), vec![1.0])
    }

    /// Samples `f` at `steps + 1` uniform times on `[t0, t1]`.
    pub fn sample(t0: f64, t1: f64, steps: usize, f: impl Fn(f64) -> DevTensor) -> Result<Self> {
        let times: Vec<f64> = (0..=steps)
            .map(|i| t0 + (t1 - t0) * i as f64 / steps as f64)
            .collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self::single_point(times, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<DevTensor>] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn index_range(&self, a: f64, b: f64) -> Result<(usize, usize)> {
        let (t0, t1) = (self.times[0], *self.times.last().unwrap());
        if !(a <= b) || a < t0 || b > t1 {
            return Err(Error::OutOfRange { a, b, t0, t1 });
        }
        let lo = self.times.partition_point(|&t| t < a);
        let hi = self.times.partition_point(|&t| t <= b);
        Ok((lo, hi))
    }

    fn sum_increments(&self, a: f64, b: f64, density: impl Fn(usize, &DevTensor) -> f64) -> Result<f64> {
        let (lo, hi) = self.index_range(a, b)?;
        let mut total = 0.0;
        for i in lo..hi.saturating_sub(1) {
            for (k, w) in self.weights.iter().enumerate() {
                let d = self.values[i + 1][k] - self.values[i][k];
                total += w * density(k, &d);
            }
        }
        Ok(total)
    }

    /// `Σ ‖f(t_{i+1}) - f(t_i)‖₁` over the samples in `[a, b]`.
    pub fn total_variation(&self, a: f64, b: f64) -> Result<f64> {
        self.sum_increments(a, b, |_, d| d.norm())
    }

    /// `Σ 𝓗(f(t_{i+1}) - f(t_i))` over the samples in `[a, b]`.
    pub fn h_variation(&self, yield_surface: &YieldSurface, a: f64, b: f64) -> Result<f64> {
        self.sum_increments(a, b, |_, d| yield_surface.support(d))
    }

    /// H-variation with a yield surface per weight slot (per element).
    pub fn h_variation_fieldwise(&self, yields: &[YieldSurface], a: f64, b: f64) -> Result<f64> {
        if yields.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: yields.len(),
            });
        }
        self.sum_increments(a, b, |k, d| yields[k].support(d))
    }

    fn full(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }
}

/// Compares the H-variation of `path` on its own partition with the
/// forward (left-endpoint) quadrature of `t ↦ 𝓗(ḟ(t))`, where
/// `derivative` supplies the exact time derivative of the generator.
/// Returns the absolute discrepancy, which vanishes as the sampling is
/// refined.
pub fn check_derivative_formula(
    path: &SampledPath,
    yield_surface: &YieldSurface,
    derivative: impl Fn(f64) -> Vec<DevTensor>,
) -> Result<f64> {
    let (a, b) = path.full();
    let variation = path.h_variation(yield_surface, a, b)?;
    let times = path.times();
    let mut quad = 0.0;
    for w in times.windows(2) {
        let rate = derivative(w[0]);
        if rate.len() != path.weights().len() {
            return Err(Error::DimensionMismatch {
                expected: path.weights().len(),
                got: rate.len(),
            });
        }
        let density: f64 = rate
            .iter()
            .zip(path.weights())
            .map(|(r, wt)| wt * yield_surface.support(r))
            .sum();
        quad += density * (w[1] - w[0]);
    }
    Ok((variation - quad).abs())
}
