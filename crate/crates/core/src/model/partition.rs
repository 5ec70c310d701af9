use crate::error::{Error, Result};

use super::MixtureModel;

/// A binary decision `z ∈ {z_0, z_1}` over two disjoint groups of mixture
/// components. Components outside both groups are ignored; priors are
/// renormalized over the union.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    z0: Vec<usize>,
    z1: Vec<usize>,
    prior_z0: f64,
    mass_z0: f64,
    mass_z1: f64,
}

impl Partition {
    pub fn z0(&self) -> &[usize] {
        &self.z0
    }

    pub fn z1(&self) -> &[usize] {
        &self.z1
    }

    /// Components of `z_0 ∪ z_1`, in ascending order.
    pub fn union(&self) -> Vec<usize> {
        let mut u: Vec<usize> = self.z0.iter().chain(&self.z1).copied().collect();
        u.sort_unstable();
        u
    }

    pub fn prior_z0(&self) -> f64 {
        self.prior_z0
    }

    pub fn prior_z1(&self) -> f64 {
        1.0 - self.prior_z0
    }

    /// Unnormalized mixture weight carried by each group.
    pub fn masses(&self) -> (f64, f64) {
        (self.mass_z0, self.mass_z1)
    }

    /// Binary entropy of the priors, in bits.
    pub fn prior_entropy_bits(&self) -> f64 {
        crate::entropy::binary_entropy_bits(self.prior_z0)
    }

    /// True when the two groups cover every component of a `k`-component mixture.
    pub fn covers(&self, k: usize) -> bool {
        self.z0.len() + self.z1.len() == k
    }
}

/// Validates the two index sets against `mixture` and derives the priors
/// `P(z_i) = Σ_{k∈z_i} π_k / Σ_{k∈z_0∪z_1} π_k`.
pub fn make_partition(mixture: &MixtureModel, z0: &[usize], z1: &[usize]) -> Result<Partition> {
    if z0.is_empty() {
        return Err(Error::Partition {
            index: None,
            reason: "z0 must not be empty",
        });
    }
    if z1.is_empty() {
        return Err(Error::Partition {
            index: None,
            reason: "z1 must not be empty",
        });
    }
    let k = mixture.len();
    let mut seen = vec![false; k];
    for &i in z0.iter().chain(z1) {
        if i >= k {
            return Err(Error::Partition {
                index: Some(i),
                reason: "component index out of range",
            });
        }
        if seen[i] {
            return Err(Error::Partition {
                index: Some(i),
                reason: "index appears twice or in both groups",
            });
        }
        seen[i] = true;
    }
    let mut z0 = z0.to_vec();
    let mut z1 = z1.to_vec();
    z0.sort_unstable();
    z1.sort_unstable();
    let w = mixture.weights();
    let mass_z0: f64 = z0.iter().map(|&i| w[i]).sum();
    let mass_z1: f64 = z1.iter().map(|&i| w[i]).sum();
    if mass_z0 <= 0.0 || mass_z1 <= 0.0 {
        return Err(Error::Partition {
            index: None,
            reason: "each group needs positive prior mass",
        });
    }
    Ok(Partition {
        z0,
        z1,
        prior_z0: mass_z0 / (mass_z0 + mass_z1),
        mass_z0,
        mass_z1,
    })
}
