use crate::error::{Error, Result};
use crate::mixture::{DiffusedMixture, Label};
use crate::model::{MixtureModel, NoiseSchedule, Partition};

/// A noise-prediction model `ε_θ(x, t; label)`.
///
/// Implementations must be deterministic and return finite values for finite
/// inputs. For a model with exact scores, `ε_θ = −√(1 − ᾱ_t) ∇ log p(x_t | label)`.
pub trait ScoreModel: Sync {
    fn predict_noise(&self, x: f64, t: usize, label: Label) -> Result<f64>;
}

impl<M: ScoreModel + ?Sized> ScoreModel for &M {
    fn predict_noise(&self, x: f64, t: usize, label: Label) -> Result<f64> {
        (**self).predict_noise(x, t, label)
    }
}

/// Exact noise predictions for a diffused Gaussian mixture.
#[derive(Debug, Clone)]
pub struct GmmScoreModel {
    levels: Vec<DiffusedMixture>,
    sqrt_one_minus: Vec<f64>,
    k: usize,
    partition: Option<Partition>,
}

impl GmmScoreModel {
    pub fn new(
        mixture: &MixtureModel,
        schedule: &NoiseSchedule,
        partition: Option<Partition>,
    ) -> Result<Self> {
        let levels = (1..=schedule.steps())
            .map(|t| DiffusedMixture::new(mixture, schedule.alpha_bar(t)).map_err(|e| e.at_step(t)))
            .collect::<Result<Vec<_>>>()?;
        let sqrt_one_minus = (1..=schedule.steps())
            .map(|t| (1.0 - schedule.alpha_bar(t)).sqrt())
            .collect();
        Ok(Self {
            levels,
            sqrt_one_minus,
            k: mixture.len(),
            partition,
        })
    }

    /// Exact score `∇ log p(x_t | label)`.
    pub fn score(&self, x: f64, t: usize, label: Label) -> Result<f64> {
        let level = self.level(t)?;
        let subset = label.components(self.k, self.partition.as_ref())?;
        Ok(level.score_subset(x, &subset))
    }

    fn level(&self, t: usize) -> Result<&DiffusedMixture> {
        if t == 0 || t > self.levels.len() {
            return Err(Error::ParameterDomain {
                name: "t",
                value: t as f64,
                reason: "step outside 1..=T",
            });
        }
        Ok(&self.levels[t - 1])
    }
}

impl ScoreModel for GmmScoreModel {
    fn predict_noise(&self, x: f64, t: usize, label: Label) -> Result<f64> {
        let score = match (label, self.partition.as_ref()) {
            // avoid allocating the index list on the hot path
            (Label::Z0, Some(p)) => self.level(t)?.score_subset(x, p.z0()),
            (Label::Z1, Some(p)) => self.level(t)?.score_subset(x, p.z1()),
            _ => self.score(x, t, label)?,
        };
        Ok(-self.sqrt_one_minus[t - 1] * score)
    }
}
