use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bifurcation::{FixedPointOptions, DEFAULT_DRIFT_COEFFICIENT};
use crate::error::{Error, Result};
use crate::model::{linear_schedule, make_partition, MixtureModel, NoiseSchedule, Partition};
use crate::tracker::{PosteriorScale, Sampler};

/// A complete experiment description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub mixture: MixtureSpec,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub partitions: Vec<PartitionSpec>,
    #[serde(default)]
    pub estimate: EstimateSpec,
    #[serde(default)]
    pub fixed_points: FixedPointSpec,
}

fn default_seed() -> u64 {
    0
}
fn default_samples() -> usize {
    1000
}
fn default_grid() -> usize {
    crate::entropy::DEFAULT_POINTS
}
fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Quadrature,
    MonteCarlo,
    FixedPoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    /// Omitted variances mean point masses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variances: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self {
            steps: 1000,
            beta_start: 1e-4,
            beta_end: 0.02,
        }
    }
}

/// A binary decision, either by explicit index sets or a named preset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PartitionSpec {
    /// Component `a` against component `b`.
    OneVsOne { a: usize, b: usize },
    /// Component `class` against all others.
    OneVsRest { class: usize },
    GroupVsGroup { z0: Vec<usize>, z1: Vec<usize> },
}

impl PartitionSpec {
    pub fn index_sets(&self, k: usize) -> (Vec<usize>, Vec<usize>) {
        match self {
            PartitionSpec::OneVsOne { a, b } => (vec![*a], vec![*b]),
            PartitionSpec::OneVsRest { class } => {
                (vec![*class], (0..k).filter(|i| i != class).collect())
            }
            PartitionSpec::GroupVsGroup { z0, z1 } => (z0.clone(), z1.clone()),
        }
    }

    /// File-name friendly name such as `3v2` or `2-3v0-1`.
    pub fn label(&self, k: usize) -> String {
        let (z0, z1) = self.index_sets(k);
        let join = |v: &[usize]| v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("-");
        format!("{}v{}", join(&z0), join(&z1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScoreSource {
    /// Exact scores of the configured mixture.
    Exact,
    /// Tabulated noise predictions from a CSV file.
    Replay { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Complement {
    /// Score of the `z1` group itself.
    Exact,
    /// Unconditional score in place of the `z1` score.
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleSpec {
    TransitionVariance,
    InverseAlpha,
}

impl From<ScaleSpec> for PosteriorScale {
    fn from(s: ScaleSpec) -> Self {
        match s {
            ScaleSpec::TransitionVariance => PosteriorScale::TransitionVariance,
            ScaleSpec::InverseAlpha => PosteriorScale::InverseAlpha,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerSpec {
    OwnBranch,
    Z0Model,
}

impl From<SamplerSpec> for Sampler {
    fn from(s: SamplerSpec) -> Self {
        match s {
            SamplerSpec::OwnBranch => Sampler::OwnBranch,
            SamplerSpec::Z0Model => Sampler::Z0Model,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateSpec {
    pub score_model: ScoreSource,
    pub complement: Complement,
    pub posterior_scale: ScaleSpec,
    pub sampler: SamplerSpec,
}

impl Default for EstimateSpec {
    fn default() -> Self {
        Self {
            score_model: ScoreSource::Exact,
            complement: Complement::Exact,
            posterior_scale: ScaleSpec::TransitionVariance,
            sampler: SamplerSpec::OwnBranch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedPointSpec {
    pub drift_coefficient: f64,
    pub n_starts: usize,
}

impl Default for FixedPointSpec {
    fn default() -> Self {
        let d = FixedPointOptions::default();
        Self {
            drift_coefficient: DEFAULT_DRIFT_COEFFICIENT,
            n_starts: d.n_starts,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file. Relative replay paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        if let ScoreSource::Replay { path: replay } = &mut config.estimate.score_model {
            if replay.is_relative() {
                if let Some(dir) = path.parent() {
                    *replay = dir.join(&*replay);
                }
            }
        }
        Ok(config)
    }

    pub fn mixture(&self) -> Result<MixtureModel> {
        let m = &self.mixture;
        let variances = m.variances.clone().unwrap_or_else(|| vec![0.0; m.means.len()]);
        MixtureModel::new(m.weights.clone(), m.means.clone(), variances)
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        let s = &self.schedule;
        linear_schedule(s.steps, s.beta_start, s.beta_end)
    }

    pub fn partitions(&self, mixture: &MixtureModel) -> Result<Vec<(String, Partition)>> {
        self.partitions
            .iter()
            .map(|p| {
                let (z0, z1) = p.index_sets(mixture.len());
                Ok((p.label(mixture.len()), make_partition(mixture, &z0, &z1)?))
            })
            .collect()
    }

    pub fn fixed_point_options(&self) -> FixedPointOptions {
        FixedPointOptions {
            drift_coefficient: self.fixed_points.drift_coefficient,
            n_starts: self.fixed_points.n_starts,
            ..FixedPointOptions::default()
        }
    }

    /// Checks everything that can be checked without running an analysis.
    pub fn validate(&self) -> Result<()> {
        let mixture = self.mixture()?;
        self.schedule()?;
        self.partitions(&mixture)?;
        if self.stride == 0 {
            return Err(Error::Config("stride must be positive".into()));
        }
        if self.samples == 0 {
            return Err(Error::Config("samples must be positive".into()));
        }
        if self.grid < crate::entropy::MIN_POINTS {
            return Err(Error::Config(format!(
                "grid must have at least {} points",
                crate::entropy::MIN_POINTS
            )));
        }
        if self.fixed_points.n_starts < 2 || !self.fixed_points.drift_coefficient.is_finite() {
            return Err(Error::Config(
                "fixed_points needs n_starts >= 2 and a finite drift_coefficient".into(),
            ));
        }
        Ok(())
    }
}
