use crate::error::{Error, Result};

/// Variance-preserving noise schedule with per-step `β_t` and cumulative
/// `ᾱ_t = ∏_{τ≤t} (1 − β_τ)`. Steps are indexed `1..=T`; `ᾱ_0 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    /// Builds a schedule from user-supplied per-step betas.
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::ParameterDomain {
                name: "steps",
                value: 0.0,
                reason: "schedule needs at least one step",
            });
        }
        let mut alpha_bars = Vec::with_capacity(betas.len());
        let mut prev = 1.0_f64;
        for &beta in &betas {
            if !(beta > 0.0 && beta < 1.0) {
                return Err(Error::ParameterDomain {
                    name: "beta",
                    value: beta,
                    reason: "each beta must lie in (0, 1)",
                });
            }
            let next = prev * (1.0 - beta);
            if !(next < prev) || next <= 0.0 {
                return Err(Error::ParameterDomain {
                    name: "beta",
                    value: beta,
                    reason: "cumulative alpha_bar underflows or stops decreasing",
                });
            }
            alpha_bars.push(next);
            prev = next;
        }
        Ok(Self { betas, alpha_bars })
    }

    /// Number of steps `T`.
    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    /// `β_t` for `1 ≤ t ≤ T`.
    pub fn beta(&self, t: usize) -> f64 {
        assert!(t >= 1 && t <= self.steps(), "step {t} outside 1..={}", self.steps());
        self.betas[t - 1]
    }

    /// `ᾱ_t` for `0 ≤ t ≤ T`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        assert!(t <= self.steps(), "step {t} outside 0..={}", self.steps());
        if t == 0 {
            1.0
        } else {
            self.alpha_bars[t - 1]
        }
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    /// Normalized time `s = t / T`.
    pub fn normalized_time(&self, t: usize) -> f64 {
        t as f64 / self.steps() as f64
    }
}

/// Linearly spaced betas from `beta_start` to `beta_end` inclusive.
pub fn linear_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if steps < 2 {
        return Err(Error::ParameterDomain {
            name: "steps",
            value: steps as f64,
            reason: "at least two steps are required",
        });
    }
    if !(beta_start > 0.0) {
        return Err(Error::ParameterDomain {
            name: "beta_start",
            value: beta_start,
            reason: "must be positive",
        });
    }
    if !(beta_end < 1.0) {
        return Err(Error::ParameterDomain {
            name: "beta_end",
            value: beta_end,
            reason: "must be below 1",
        });
    }
    if !(beta_start <= beta_end) {
        return Err(Error::ParameterDomain {
            name: "beta_end",
            value: beta_end,
            reason: "must not be smaller than beta_start",
        });
    }
    let step = (beta_end - beta_start) / (steps - 1) as f64;
    let betas = (0..steps)
        .map(|i| {
            if i == steps - 1 {
                beta_end
            } else {
                beta_start + i as f64 * step
            }
        })
        .collect();
    NoiseSchedule::from_betas(betas)
}
