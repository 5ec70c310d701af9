//! Deterministic conditional entropy `H(z | x_t)` of a binary class partition
//! for a diffused Gaussian mixture, evaluated by a Riemann sum over `x_t`.
//!
//! All results are in bits. The entropy rate is reported as `dH/ds` where `s`
//! is normalized forward (noising) time; information creation during
//! generation shows up as a positive `dH/ds`, or equivalently a negative
//! rate against generation progress `1 − s`.

use std::f64::consts::LN_2;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math::{log_add_exp, log_sum_exp_indexed, plogp_from_log};
use crate::mixture::DiffusedMixture;
use crate::model::{MixtureModel, NoiseSchedule, Partition, TimeGrid};

/// Number of diffused standard deviations the grid must extend past every
/// diffused mean.
pub const COVERAGE_WIDTH: f64 = 10.0;

/// Default number of quadrature points.
pub const DEFAULT_POINTS: usize = 4096;

pub const MIN_POINTS: usize = 64;

/// `−p log₂ p − (1−p) log₂ (1−p)`.
pub fn binary_entropy_bits(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - p;
    -(plogp_from_log(p.ln()) + plogp_from_log(q.ln())) / LN_2
}

/// Uniform grid `lo = x_0 < … < x_{n−1} = hi` for Riemann sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureGrid {
    lo: f64,
    hi: f64,
    n: usize,
}

impl QuadratureGrid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::ParameterDomain {
                name: "grid bounds",
                value: hi - lo,
                reason: "need finite lo < hi",
            });
        }
        if n < MIN_POINTS {
            return Err(Error::ParameterDomain {
                name: "grid points",
                value: n as f64,
                reason: "at least 64 points are required",
            });
        }
        Ok(Self { lo, hi, n })
    }

    /// Grid spanning every diffused mean ± 10 diffused standard deviations.
    pub fn covering(mixture: &MixtureModel, alpha_bar: f64, n: usize) -> Result<Self> {
        let (lo, hi) = required_bounds(&DiffusedMixture::new(mixture, alpha_bar)?);
        Self::new(lo, hi, n)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }
}

/// How the quadrature grid is chosen at each noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridPolicy {
    /// Bounds re-derived per level from the diffused components.
    Auto { points: usize },
    /// One grid for all levels; must cover every level it is used at.
    Fixed(QuadratureGrid),
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy::Auto {
            points: DEFAULT_POINTS,
        }
    }
}

impl GridPolicy {
    fn grid(&self, mixture: &MixtureModel, alpha_bar: f64) -> Result<QuadratureGrid> {
        match *self {
            GridPolicy::Auto { points } => QuadratureGrid::covering(mixture, alpha_bar, points),
            GridPolicy::Fixed(g) => Ok(g),
        }
    }
}

fn required_bounds(d: &DiffusedMixture) -> (f64, f64) {
    d.coverage(COVERAGE_WIDTH)
}

fn check_coverage(d: &DiffusedMixture, grid: &QuadratureGrid) -> Result<()> {
    let (required_lo, required_hi) = required_bounds(d);
    if grid.lo > required_lo || grid.hi < required_hi {
        return Err(Error::QuadratureDomain {
            lo: grid.lo,
            hi: grid.hi,
            required_lo,
            required_hi,
        });
    }
    Ok(())
}

/// Quadrature of the split form
/// `H(z|x_t) = −Σ_i P(z_i) ∫ p(x_t|z_i) Σ_j P(z_j|x_t) log₂ P(z_j|x_t) dx_t`.
pub fn conditional_entropy_at(
    mixture: &MixtureModel,
    partition: &Partition,
    alpha_bar: f64,
    grid: &QuadratureGrid,
) -> Result<f64> {
    let d = DiffusedMixture::new(mixture, alpha_bar)?;
    check_coverage(&d, grid)?;
    let (m0, m1) = partition.masses();
    let log_union = (m0 + m1).ln();
    let mut joint = vec![0.0; d.len()];
    let (mut acc0, mut acc1) = (0.0, 0.0);
    for i in 0..grid.len() {
        d.log_joint_into(grid.point(i), &mut joint);
        let l0 = log_sum_exp_indexed(&joint, partition.z0());
        let l1 = log_sum_exp_indexed(&joint, partition.z1());
        let lu = log_add_exp(l0, l1);
        if lu == f64::NEG_INFINITY {
            continue;
        }
        let h = -(plogp_from_log(l0 - lu) + plogp_from_log(l1 - lu)) / LN_2;
        // P(z_i) p(x | z_i) = exp(l_i) / Σ_{z_0 ∪ z_1} π_k
        acc0 += (l0 - log_union).exp() * h;
        acc1 += (l1 - log_union).exp() * h;
    }
    let h = (acc0 + acc1) * grid.spacing();
    Ok(h.clamp(0.0, 1.0))
}

/// Jensen–Shannon divergence between `p(x_t|z_0)` and `p(x_t|z_1)` in bits,
/// evaluated in its mixture form
/// `∫ (p_0 + p_1)/2 · [r log r + (1−r) log(1−r)] dx + log 2`, `r = p_0/(p_0+p_1)`.
pub fn jsd_at(
    mixture: &MixtureModel,
    partition: &Partition,
    alpha_bar: f64,
    grid: &QuadratureGrid,
) -> Result<f64> {
    let d = DiffusedMixture::new(mixture, alpha_bar)?;
    check_coverage(&d, grid)?;
    let (m0, m1) = partition.masses();
    let (log_m0, log_m1) = (m0.ln(), m1.ln());
    let mut joint = vec![0.0; d.len()];
    let mut acc = 0.0;
    for i in 0..grid.len() {
        d.log_joint_into(grid.point(i), &mut joint);
        let l0 = log_sum_exp_indexed(&joint, partition.z0()) - log_m0;
        let l1 = log_sum_exp_indexed(&joint, partition.z1()) - log_m1;
        let lm = log_add_exp(l0, l1);
        if lm == f64::NEG_INFINITY {
            continue;
        }
        acc += 0.5 * lm.exp() * (plogp_from_log(l0 - lm) + plogp_from_log(l1 - lm));
    }
    let nats = acc * grid.spacing() + LN_2;
    Ok(nats / LN_2)
}

/// Conditional entropy over a strided time grid, with entropy rate and
/// information transfer.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyProfile {
    pub times: TimeGrid,
    pub alpha_bars: Vec<f64>,
    pub h_bits: Vec<f64>,
    /// `dH/ds`, central differences (one-sided at the ends).
    pub rate_bits: Vec<f64>,
    pub transfer_bits: Vec<f64>,
    pub prior_entropy_bits: f64,
}

impl EntropyProfile {
    pub fn normalized_times(&self) -> Vec<f64> {
        self.times.normalized()
    }

    /// Rate against generation progress `g = 1 − s`, i.e. `dH/dg = −dH/ds`.
    pub fn generation_rate(&self) -> Vec<f64> {
        self.rate_bits.iter().map(|r| -r).collect()
    }

    /// Index, normalized time and value of the largest `dH/ds`.
    pub fn peak_rate(&self) -> Option<(usize, f64, f64)> {
        let s = self.normalized_times();
        self.rate_bits
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_finite())
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, &r)| (i, s[i], r))
    }
}

/// Evaluates `H(z|x_t)` at every `stride`-th step of `schedule` (always
/// including `T`).
pub fn entropy_profile(
    mixture: &MixtureModel,
    partition: &Partition,
    schedule: &NoiseSchedule,
    grid: GridPolicy,
    stride: usize,
) -> Result<EntropyProfile> {
    let times = TimeGrid::strided(schedule.steps(), stride)?;
    let alpha_bars: Vec<f64> = times.steps().iter().map(|&t| schedule.alpha_bar(t)).collect();
    let h_bits = times
        .steps()
        .par_iter()
        .zip(&alpha_bars)
        .map(|(&t, &ab)| {
            grid.grid(mixture, ab)
                .and_then(|g| conditional_entropy_at(mixture, partition, ab, &g))
                .map_err(|e| e.at_step(t))
        })
        .collect::<Result<Vec<f64>>>()?;
    let rate_bits = finite_difference(&times.normalized(), &h_bits);
    let prior_entropy_bits = partition.prior_entropy_bits();
    let mut profile = EntropyProfile {
        times,
        alpha_bars,
        h_bits,
        rate_bits,
        transfer_bits: Vec::new(),
        prior_entropy_bits,
    };
    profile.transfer_bits = information_transfer(&profile);
    Ok(profile)
}

/// `T_t = H(z) − H(z | x_t)` at every profile time.
pub fn information_transfer(profile: &EntropyProfile) -> Vec<f64> {
    profile
        .h_bits
        .iter()
        .map(|h| profile.prior_entropy_bits - h)
        .collect()
}

/// Central differences with one-sided ends; NaN for a single sample.
pub(crate) fn finite_difference(s: &[f64], h: &[f64]) -> Vec<f64> {
    let n = h.len();
    if n < 2 {
        return vec![f64::NAN; n];
    }
    (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            (h[b] - h[a]) / (s[b] - s[a])
        })
        .collect()
}
