//! Strain-driven evolution of a single material point.

use serde::{Deserialize, Serialize};

use crate::constitutive::Material;
use crate::error::{Error, Result};
use crate::tensor::{DevTensor, SymTensor};

/// Total strain samples; piecewise linear in time between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainHistory {
    times: Vec<f64>,
    strains: Vec<SymTensor>,
}

impl StrainHistory {
    pub fn new(times: Vec<f64>, strains: Vec<SymTensor>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidHistory("history is empty".into()));
        }
        if times.len() != strains.len() {
            return Err(Error::InvalidHistory(format!(
                "{} times but {} strain samples",
                times.len(),
                strains.len()
            )));
        }
        if let Some(w) = times.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidHistory(format!(
                "times must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        if times.iter().any(|t| !t.is_finite()) || strains.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidHistory("non-finite sample".into()));
        }
        let dim = strains[0].dim();
        if strains.iter().any(|s| s.dim() != dim) {
            return Err(Error::InvalidHistory("mixed tensor dimensions".into()));
        }
        Ok(Self { times, strains })
    }

    /// Uniform sampling of `f` on `[0, t_final]` with `steps` intervals.
    pub fn sample(t_final: f64, steps: usize, f: impl Fn(f64) -> SymTensor) -> Result<Self> {
        let times: Vec<f64> = (0..=steps)
            .map(|i| t_final * i as f64 / steps as f64)
            .collect();
        let strains = times.iter().map(|&t| f(t)).collect();
        Self::new(times, strains)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn strains(&self) -> &[SymTensor] {
        &self.strains
    }

    pub fn dim(&self) -> usize {
        self.strains[0].dim()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Strain at time `t` by linear interpolation (constant outside the range).
    pub fn strain_at(&self, t: f64) -> SymTensor {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.strains[0];
        }
        if t >= self.times[n - 1] {
            return self.strains[n - 1];
        }
        let i = self.times.partition_point(|&s| s <= t) - 1;
        let th = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        self.strains[i] * (1.0 - th) + self.strains[i + 1] * th
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointState {
    pub t: f64,
    pub eps: SymTensor,
    pub p: DevTensor,
    pub e: SymTensor,
    pub sigma: SymTensor,
    /// Stored energy `Q(e)`.
    pub stored: f64,
    /// Cumulative dissipation `Σ H(Δp)`.
    pub dissipation: f64,
    /// External work `∫ σ : dε` by the trapezoidal rule.
    pub work: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub states: Vec<PointState>,
}

/// Runs the incremental scheme at every sample of `history`, starting
/// from zero plastic strain.
pub fn run_point(material: &Material, history: &StrainHistory) -> Result<PointRecord> {
    let dim = history.dim();
    let mut p_prev = DevTensor::zeros(dim);
    let mut states: Vec<PointState> = Vec::with_capacity(history.len());
    for (&t, eps) in history.times().iter().zip(history.strains()) {
        let up = material.incremental_update(eps, &p_prev)?;
        let (dissipation, work) = match states.last() {
            None => (0.0, 0.0),
            Some(prev) => (
                prev.dissipation + up.dissipation,
                prev.work + 0.5 * (prev.sigma + up.sigma).ddot(&(*eps - prev.eps)),
            ),
        };
        states.push(PointState {
            t,
            eps: *eps,
            p: up.p,
            e: up.e,
            sigma: up.sigma,
            stored: material.quad_q(&up.e),
            dissipation,
            work,
        });
        p_prev = up.p;
    }
    Ok(PointRecord { states })
}

/// `Q_i + D_i - Q_0 - W_i` at every sample.
pub fn energy_residual(record: &PointRecord) -> Vec<f64> {
    let q0 = record.states.first().map_or(0.0, |s| s.stored);
    record
        .states
        .iter()
        .map(|s| s.stored + s.dissipation - q0 - s.work)
        .collect()
}
