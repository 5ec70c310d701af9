use crate::error::{Error, Result};

/// Strictly increasing step indices `t ∈ 1..=T` with normalized time `s = t/T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    steps: Vec<usize>,
    total: usize,
}

impl TimeGrid {
    pub fn new(steps: Vec<usize>, total: usize) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::ParameterDomain {
                name: "steps",
                value: 0.0,
                reason: "time grid must not be empty",
            });
        }
        for w in steps.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::ParameterDomain {
                    name: "steps",
                    value: w[1] as f64,
                    reason: "time grid must be strictly increasing",
                });
            }
        }
        if steps[0] == 0 || *steps.last().unwrap() > total {
            return Err(Error::ParameterDomain {
                name: "steps",
                value: steps[0] as f64,
                reason: "time grid steps must lie in 1..=T",
            });
        }
        Ok(Self { steps, total })
    }

    /// Every `stride`-th step starting at `stride`, always including `T`.
    pub fn strided(total: usize, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::ParameterDomain {
                name: "stride",
                value: 0.0,
                reason: "stride must be positive",
            });
        }
        let mut steps: Vec<usize> = (stride..=total).step_by(stride).collect();
        if steps.last() != Some(&total) {
            steps.push(total);
        }
        Self::new(steps, total)
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn normalized(&self) -> Vec<f64> {
        self.steps
            .iter()
            .map(|&t| t as f64 / self.total as f64)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strided_always_ends_at_total() {
        let g = TimeGrid::strided(10, 3).unwrap();
        assert_eq!(g.steps(), &[3, 6, 9, 10]);
        let s = g.normalized();
        assert_eq!(s.last(), Some(&1.0));
        assert!(TimeGrid::strided(10, 0).is_err());
    }

    #[test]
    fn rejects_unordered() {
        assert!(TimeGrid::new(vec![2, 2], 5).is_err());
        assert!(TimeGrid::new(vec![0, 2], 5).is_err());
        assert!(TimeGrid::new(vec![1, 6], 5).is_err());
    }
}
