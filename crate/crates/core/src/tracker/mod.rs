//! Monte-Carlo estimate of `H(z | x_t)` for models without closed-form
//! densities.
//!
//! Two populations of trajectories are denoised by ancestral sampling, one
//! under each branch's conditional model. Along every trajectory the class
//! posterior `P(z_0 | x_t)` is updated online from the Gaussian reverse
//! transition kernels of both branch models, starting from the prior at
//! `t = T`. Averaging the binary entropy of the tracked posterior within each
//! population and weighting by the priors gives `H(z | x_t)` at every step.
//!
//! Each trajectory owns a ChaCha8 stream derived from `(seed, branch, index)`,
//! so results are independent of thread scheduling.

mod replay;
mod score_model;

use std::f64::consts::LN_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

pub use replay::ReplayScoreModel;
pub use score_model::{GmmScoreModel, ScoreModel};

use crate::entropy::binary_entropy_bits;
use crate::error::{Error, Result};
use crate::math::{log_add_exp, plogp_from_log};
use crate::mixture::Label;
use crate::model::NoiseSchedule;

/// Tracked posteriors are kept inside `[POSTERIOR_CLAMP, 1 − POSTERIOR_CLAMP]`.
pub const POSTERIOR_CLAMP: f64 = 1e-12;

/// Which trajectory population a state belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Z0,
    Z1,
}

impl Branch {
    fn name(self) -> &'static str {
        match self {
            Branch::Z0 => "z0",
            Branch::Z1 => "z1",
        }
    }

    fn stream(self) -> u64 {
        match self {
            Branch::Z0 => 0,
            Branch::Z1 => 1,
        }
    }
}

/// Model labels queried for the two sides of the decision. The `z1` side can
/// be served by the unconditional model when the exact complement model is
/// unavailable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BranchLabels {
    pub z0: Label,
    pub z1: Label,
}

impl Default for BranchLabels {
    fn default() -> Self {
        Self {
            z0: Label::Z0,
            z1: Label::Z1,
        }
    }
}

impl BranchLabels {
    /// `z1` approximated by the null model.
    pub fn null_complement() -> Self {
        Self {
            z0: Label::Z0,
            z1: Label::Null,
        }
    }

    pub fn for_branch(&self, branch: Branch) -> Label {
        match branch {
            Branch::Z0 => self.z0,
            Branch::Z1 => self.z1,
        }
    }
}

/// Scale `κ_t` of the posterior update
/// `log P(z|x_{t−1}) ← log P(z|x_t) − κ_t ‖x_{t−1} − μ_θ(x_t; z)‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PosteriorScale {
    /// `κ_t = 1/(2β_t)`: the Gaussian reverse kernel with variance `β_t`
    /// used by the ancestral sampler.
    #[default]
    TransitionVariance,
    /// `κ_t = 1/(1 − β_t)`.
    InverseAlpha,
}

impl PosteriorScale {
    pub fn coefficient(self, beta: f64) -> f64 {
        match self {
            PosteriorScale::TransitionVariance => 0.5 / beta,
            PosteriorScale::InverseAlpha => 1.0 / (1.0 - beta),
        }
    }
}

/// Which model drives the ancestral step of each population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampler {
    /// Each population is denoised under its own branch model.
    #[default]
    OwnBranch,
    /// Both populations are denoised under the `z0` model.
    Z0Model,
}

/// One trajectory: current sample, tracked log posteriors, step and branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryState {
    pub x: f64,
    pub log_post_z0: f64,
    pub log_post_z1: f64,
    pub t: usize,
    pub branch: Branch,
}

impl TrajectoryState {
    /// State at `t = T` with the posterior set to the prior.
    pub fn initial(x: f64, t: usize, branch: Branch, prior_z0: f64) -> Self {
        Self {
            x,
            log_post_z0: prior_z0.ln(),
            log_post_z1: (-prior_z0).ln_1p(),
            t,
            branch,
        }
    }

    pub fn post_z0(&self) -> f64 {
        self.log_post_z0.exp()
    }

    /// Binary entropy of the tracked posterior, in bits.
    pub fn entropy_bits(&self) -> f64 {
        -(plogp_from_log(self.log_post_z0) + plogp_from_log(self.log_post_z1)) / LN_2
    }
}

/// `μ_θ(x_t; label) = (x_t − β_t/√(1−ᾱ_t) · ε_θ(x_t; label)) / √(1−β_t)`.
pub fn posterior_mean<M: ScoreModel + ?Sized>(
    model: &M,
    x: f64,
    t: usize,
    label: Label,
    schedule: &NoiseSchedule,
) -> Result<f64> {
    if t == 0 || t > schedule.steps() {
        return Err(Error::ParameterDomain {
            name: "t",
            value: t as f64,
            reason: "step outside 1..=T",
        });
    }
    let eps = model.predict_noise(x, t, label)?;
    let beta = schedule.beta(t);
    let mean = (x - beta / (1.0 - schedule.alpha_bar(t)).sqrt() * eps) / (1.0 - beta).sqrt();
    if !eps.is_finite() || !mean.is_finite() {
        return Err(Error::ModelEvaluation {
            x,
            t,
            label: label.to_string(),
            value: eps,
        });
    }
    Ok(mean)
}

/// Moves `state` to `t − 1` given a standard-normal draw `noise`; the draw is
/// ignored at `t = 1`. The tracked posterior is carried over unchanged.
pub fn ancestral_step_with_noise<M: ScoreModel + ?Sized>(
    state: &TrajectoryState,
    model: &M,
    schedule: &NoiseSchedule,
    labels: BranchLabels,
    noise: f64,
) -> Result<TrajectoryState> {
    let t = state.t;
    let mean = posterior_mean(model, state.x, t, labels.for_branch(state.branch), schedule)?;
    let x = if t > 1 {
        mean + schedule.beta(t).sqrt() * noise
    } else {
        mean
    };
    Ok(TrajectoryState {
        x,
        t: t - 1,
        ..*state
    })
}

/// One ancestral sampling step under the trajectory's own branch model.
pub fn ancestral_step<R: Rng + ?Sized, M: ScoreModel + ?Sized>(
    rng: &mut R,
    state: &TrajectoryState,
    model: &M,
    schedule: &NoiseSchedule,
    labels: BranchLabels,
) -> Result<TrajectoryState> {
    let noise = if state.t > 1 {
        rng.sample(StandardNormal)
    } else {
        0.0
    };
    ancestral_step_with_noise(state, model, schedule, labels, noise)
}

/// Online posterior update after observing `x_next`. Returns the renormalized
/// and clamped `(log P(z_0|x_next), log P(z_1|x_next))`.
pub fn posterior_update(
    state: &TrajectoryState,
    x_next: f64,
    mu_z0: f64,
    mu_z1: f64,
    beta_t: f64,
    scale: PosteriorScale,
) -> (f64, f64) {
    let kappa = scale.coefficient(beta_t);
    let d0 = x_next - mu_z0;
    let d1 = x_next - mu_z1;
    let l0 = state.log_post_z0 - kappa * d0 * d0;
    let l1 = state.log_post_z1 - kappa * d1 * d1;
    let norm = log_add_exp(l0, l1);
    clamp_log_pair(l0 - norm, l1 - norm)
}

fn clamp_log_pair(l0: f64, l1: f64) -> (f64, f64) {
    let floor = POSTERIOR_CLAMP.ln();
    if l0.is_nan() || l1.is_nan() {
        // both terms underflowed to -inf; nothing distinguishes the branches
        return (0.5f64.ln(), 0.5f64.ln());
    }
    if l0 < floor {
        (floor, (-POSTERIOR_CLAMP).ln_1p())
    } else if l1 < floor {
        ((-POSTERIOR_CLAMP).ln_1p(), floor)
    } else {
        (l0, l1)
    }
}

/// Advances a trajectory one step and updates its posterior.
fn advance<M: ScoreModel + ?Sized>(
    state: &TrajectoryState,
    model: &M,
    schedule: &NoiseSchedule,
    settings: &EstimatorSettings,
    noise: f64,
) -> Result<TrajectoryState> {
    let t = state.t;
    let mu_z0 = posterior_mean(model, state.x, t, settings.labels.z0, schedule)?;
    let mu_z1 = posterior_mean(model, state.x, t, settings.labels.z1, schedule)?;
    let own = match (settings.sampler, state.branch) {
        (Sampler::OwnBranch, Branch::Z1) => mu_z1,
        _ => mu_z0,
    };
    let x = if t > 1 {
        own + schedule.beta(t).sqrt() * noise
    } else {
        own
    };
    let (log_post_z0, log_post_z1) =
        posterior_update(state, x, mu_z0, mu_z1, schedule.beta(t), settings.scale);
    Ok(TrajectoryState {
        x,
        log_post_z0,
        log_post_z1,
        t: t - 1,
        branch: state.branch,
    })
}

/// Parameters of the Monte-Carlo estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSettings {
    pub prior_z0: f64,
    pub n_z0: usize,
    pub n_z1: usize,
    pub seed: u64,
    pub scale: PosteriorScale,
    pub labels: BranchLabels,
    pub sampler: Sampler,
}

impl EstimatorSettings {
    pub fn new(prior_z0: f64, samples: usize, seed: u64) -> Self {
        Self {
            prior_z0,
            n_z0: samples,
            n_z1: samples,
            seed,
            scale: PosteriorScale::default(),
            labels: BranchLabels::default(),
            sampler: Sampler::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.prior_z0 > 0.0 && self.prior_z0 < 1.0) {
            return Err(Error::ParameterDomain {
                name: "prior_z0",
                value: self.prior_z0,
                reason: "must lie in (0, 1)",
            });
        }
        if self.n_z0 == 0 || self.n_z1 == 0 {
            return Err(Error::ParameterDomain {
                name: "samples",
                value: 0.0,
                reason: "each branch needs at least one trajectory",
            });
        }
        Ok(())
    }
}

/// Monte-Carlo conditional entropy series. Vectors are indexed by step
/// `t = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct McEntropyEstimate {
    pub h_bits: Vec<f64>,
    /// Mean binary entropy (bits) of the tracked posterior over the `z_0`
    /// population.
    pub h_z0_mean: Vec<f64>,
    pub h_z1_mean: Vec<f64>,
    pub n_z0: usize,
    pub n_z1: usize,
    pub seed: u64,
    pub prior_z0: f64,
}

impl McEntropyEstimate {
    pub fn steps(&self) -> usize {
        self.h_bits.len() - 1
    }
}

fn trajectory_rng(seed: u64, branch: Branch, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((branch.stream() << 32) | index as u64);
    rng
}

struct Walker {
    state: TrajectoryState,
    rng: ChaCha8Rng,
}

fn population(settings: &EstimatorSettings, branch: Branch, n: usize, steps: usize) -> Vec<Walker> {
    (0..n)
        .map(|i| {
            let mut rng = trajectory_rng(settings.seed, branch, i);
            let x: f64 = rng.sample(StandardNormal);
            Walker {
                state: TrajectoryState::initial(x, steps, branch, settings.prior_z0),
                rng,
            }
        })
        .collect()
}

fn step_population<M: ScoreModel + ?Sized>(
    walkers: &mut [Walker],
    model: &M,
    schedule: &NoiseSchedule,
    settings: &EstimatorSettings,
) -> Result<f64> {
    let entropies = walkers
        .par_iter_mut()
        .enumerate()
        .map(|(i, w)| {
            let t = w.state.t;
            let noise = if t > 1 {
                w.rng.sample(StandardNormal)
            } else {
                0.0
            };
            w.state = advance(&w.state, model, schedule, settings, noise).map_err(|e| {
                Error::Trajectory {
                    branch: w.state.branch.name(),
                    index: i,
                    t,
                    source: Box::new(e),
                }
            })?;
            Ok(w.state.entropy_bits())
        })
        .collect::<Result<Vec<f64>>>()?;
    // sequential sum keeps the result independent of the thread count
    Ok(entropies.iter().sum::<f64>() / entropies.len() as f64)
}

/// Estimates `H(z | x_t)` for `t = T..0` by ancestral sampling with online
/// posterior tracking.
pub fn estimate_conditional_entropy<M: ScoreModel + ?Sized>(
    model: &M,
    schedule: &NoiseSchedule,
    settings: &EstimatorSettings,
) -> Result<McEntropyEstimate> {
    settings.validate()?;
    let steps = schedule.steps();
    let prior = settings.prior_z0;
    let mut h_bits = vec![0.0; steps + 1];
    let mut h_z0_mean = vec![0.0; steps + 1];
    let mut h_z1_mean = vec![0.0; steps + 1];
    let h_prior = binary_entropy_bits(prior);
    h_bits[steps] = h_prior;
    h_z0_mean[steps] = h_prior;
    h_z1_mean[steps] = h_prior;

    let mut pop0 = population(settings, Branch::Z0, settings.n_z0, steps);
    let mut pop1 = population(settings, Branch::Z1, settings.n_z1, steps);
    for t in (1..=steps).rev() {
        let h0 = step_population(&mut pop0, model, schedule, settings)?;
        let h1 = step_population(&mut pop1, model, schedule, settings)?;
        h_z0_mean[t - 1] = h0;
        h_z1_mean[t - 1] = h1;
        h_bits[t - 1] = prior * h0 + (1.0 - prior) * h1;
    }
    Ok(McEntropyEstimate {
        h_bits,
        h_z0_mean,
        h_z1_mean,
        n_z0: settings.n_z0,
        n_z1: settings.n_z1,
        seed: settings.seed,
        prior_z0: prior,
    })
}

/// Full record of a single trajectory, indexed by step `t = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTrace {
    pub xs: Vec<f64>,
    pub log_post_z0: Vec<f64>,
}

/// Runs trajectory `index` of `branch` exactly as the estimator does and
/// records its path and tracked posterior.
pub fn trace_trajectory<M: ScoreModel + ?Sized>(
    model: &M,
    schedule: &NoiseSchedule,
    settings: &EstimatorSettings,
    branch: Branch,
    index: usize,
) -> Result<TrajectoryTrace> {
    settings.validate()?;
    let steps = schedule.steps();
    let mut rng = trajectory_rng(settings.seed, branch, index);
    let x: f64 = rng.sample(StandardNormal);
    let mut state = TrajectoryState::initial(x, steps, branch, settings.prior_z0);
    let mut xs = vec![0.0; steps + 1];
    let mut log_post_z0 = vec![0.0; steps + 1];
    xs[steps] = state.x;
    log_post_z0[steps] = state.log_post_z0;
    while state.t > 0 {
        let noise = if state.t > 1 {
            rng.sample(StandardNormal)
        } else {
            0.0
        };
        state = advance(&state, model, schedule, settings, noise)?;
        xs[state.t] = state.x;
        log_post_z0[state.t] = state.log_post_z0;
    }
    Ok(TrajectoryTrace { xs, log_post_z0 })
}

/// Recomputes the tracked posterior from a stored path `xs` (indexed by
/// `t = 0..=T`), using only states already visited at each step.
pub fn posterior_along_path<M: ScoreModel + ?Sized>(
    model: &M,
    schedule: &NoiseSchedule,
    settings: &EstimatorSettings,
    xs: &[f64],
) -> Result<Vec<f64>> {
    let steps = schedule.steps();
    if xs.len() != steps + 1 {
        return Err(Error::ParameterDomain {
            name: "path length",
            value: xs.len() as f64,
            reason: "path must hold T + 1 states",
        });
    }
    let mut state = TrajectoryState::initial(xs[steps], steps, Branch::Z0, settings.prior_z0);
    let mut out = vec![0.0; steps + 1];
    out[steps] = state.log_post_z0;
    for t in (1..=steps).rev() {
        let mu_z0 = posterior_mean(model, xs[t], t, settings.labels.z0, schedule)?;
        let mu_z1 = posterior_mean(model, xs[t], t, settings.labels.z1, schedule)?;
        let (l0, l1) =
            posterior_update(&state, xs[t - 1], mu_z0, mu_z1, schedule.beta(t), settings.scale);
        state.log_post_z0 = l0;
        state.log_post_z1 = l1;
        out[t - 1] = l0;
    }
    Ok(out)
}
