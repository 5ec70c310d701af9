use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A one-dimensional Gaussian mixture `p(x_0) = Σ π_k N(x_0 | μ_k, σ²_k)`.
///
/// Zero variances are allowed and describe delta components.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl MixtureModel {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::InvalidMixture("at least one component is required".into()));
        }
        if means.len() != k || variances.len() != k {
            return Err(Error::InvalidMixture(format!(
                "length mismatch: {} weights, {} means, {} variances",
                k,
                means.len(),
                variances.len()
            )));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::InvalidMixture(format!(
                "weight {i} = {w} is not a non-negative finite number"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidMixture(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        if let Some((i, m)) = means.iter().enumerate().find(|(_, m)| !m.is_finite()) {
            return Err(Error::InvalidMixture(format!("mean {i} = {m} is not finite")));
        }
        if let Some((i, v)) = variances
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidMixture(format!(
                "variance {i} = {v} is not a non-negative finite number"
            )));
        }
        Ok(Self {
            weights,
            means,
            variances,
        })
    }

    /// Mixture of delta components at `means`.
    pub fn deltas(weights: Vec<f64>, means: Vec<f64>) -> Result<Self> {
        let variances = vec![0.0; means.len()];
        Self::new(weights, means, variances)
    }

    /// Equally weighted delta components at `means`.
    pub fn equal_deltas(means: &[f64]) -> Result<Self> {
        let k = means.len();
        Self::deltas(vec![1.0 / k as f64; k], means.to_vec())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// True if some component is a delta.
    pub fn has_deltas(&self) -> bool {
        self.variances.iter().any(|v| *v == 0.0)
    }
}
