//! Closed-form variance-preserving diffusion of a Gaussian mixture.
//!
//! Under the forward kernel `p(x_t | x_0) = N(√ᾱ x_0, 1 − ᾱ)` every component
//! stays Gaussian with mean `√ᾱ μ_k` and variance `ᾱ σ²_k + (1 − ᾱ)`, so the
//! marginal, the per-class likelihoods, the class posteriors and the score are
//! all available exactly. Likelihood work is done in log space throughout;
//! separated deltas at low noise underflow otherwise.

use std::fmt;

use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::model::{MixtureModel, Partition};

/// One component after diffusion to noise level `ᾱ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusedComponent {
    pub mean: f64,
    pub variance: f64,
}

/// Diffuses a single component `N(mu, var)` to noise level `alpha_bar`.
pub fn diffuse_component(mu: f64, var: f64, alpha_bar: f64) -> Result<DiffusedComponent> {
    if !(var >= 0.0) || !var.is_finite() {
        return Err(Error::ParameterDomain {
            name: "variance",
            value: var,
            reason: "must be non-negative and finite",
        });
    }
    if !(0.0..=1.0).contains(&alpha_bar) {
        return Err(Error::ParameterDomain {
            name: "alpha_bar",
            value: alpha_bar,
            reason: "must lie in [0, 1]",
        });
    }
    let variance = alpha_bar * var + (1.0 - alpha_bar);
    if variance <= 0.0 {
        return Err(Error::DegenerateDensity { component: 0 });
    }
    Ok(DiffusedComponent {
        mean: alpha_bar.sqrt() * mu,
        variance,
    })
}

/// Which conditional density a score or noise prediction refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Z0,
    Z1,
    /// The unconditional model: all components.
    Null,
    /// A single class.
    Component(usize),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Z0 => f.write_str("z0"),
            Label::Z1 => f.write_str("z1"),
            Label::Null => f.write_str("null"),
            Label::Component(k) => write!(f, "c{k}"),
        }
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "z0" => Ok(Label::Z0),
            "z1" => Ok(Label::Z1),
            "null" => Ok(Label::Null),
            other => other
                .strip_prefix('c')
                .and_then(|k| k.parse().ok())
                .map(Label::Component)
                .ok_or_else(|| Error::Config(format!("unknown label `{other}`"))),
        }
    }
}

impl Label {
    /// Component indices the label refers to.
    pub fn components(&self, k: usize, partition: Option<&Partition>) -> Result<Vec<usize>> {
        match self {
            Label::Null => Ok((0..k).collect()),
            Label::Component(i) if *i < k => Ok(vec![*i]),
            Label::Component(i) => Err(Error::Partition {
                index: Some(*i),
                reason: "component label out of range",
            }),
            Label::Z0 | Label::Z1 => {
                let p = partition.ok_or(Error::Partition {
                    index: None,
                    reason: "z0/z1 labels need a partition",
                })?;
                Ok(if *self == Label::Z0 { p.z0() } else { p.z1() }.to_vec())
            }
        }
    }
}

/// A mixture evaluated at a fixed noise level, with everything needed for
/// repeated density evaluations precomputed.
#[derive(Debug, Clone)]
pub struct DiffusedMixture {
    alpha_bar: f64,
    log_weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
    // −½ log(2π σ²_kt)
    log_norms: Vec<f64>,
}

impl DiffusedMixture {
    pub fn new(mixture: &MixtureModel, alpha_bar: f64) -> Result<Self> {
        let k = mixture.len();
        let mut means = Vec::with_capacity(k);
        let mut variances = Vec::with_capacity(k);
        for (i, (&mu, &var)) in mixture.means().iter().zip(mixture.variances()).enumerate() {
            let c = diffuse_component(mu, var, alpha_bar).map_err(|e| match e {
                Error::DegenerateDensity { .. } => Error::DegenerateDensity { component: i },
                other => other,
            })?;
            means.push(c.mean);
            variances.push(c.variance);
        }
        Ok(Self {
            alpha_bar,
            log_weights: mixture.weights().iter().map(|w| w.ln()).collect(),
            log_norms: variances
                .iter()
                .map(|v| -0.5 * (2.0 * std::f64::consts::PI * v).ln())
                .collect(),
            means,
            variances,
        })
    }

    pub fn alpha_bar(&self) -> f64 {
        self.alpha_bar
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn component(&self, k: usize) -> DiffusedComponent {
        DiffusedComponent {
            mean: self.means[k],
            variance: self.variances[k],
        }
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// `log N(x | μ_kt, σ²_kt)` per component.
    pub fn log_likelihoods_into(&self, x: f64, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let d = x - self.means[k];
            *o = self.log_norms[k] - 0.5 * d * d / self.variances[k];
        }
    }

    /// `log π_k + log N(x | μ_kt, σ²_kt)` per component.
    pub fn log_joint_into(&self, x: f64, out: &mut [f64]) {
        self.log_likelihoods_into(x, out);
        for (o, lw) in out.iter_mut().zip(&self.log_weights) {
            *o += lw;
        }
    }

    pub fn log_marginal(&self, x: f64) -> f64 {
        let mut buf = vec![0.0; self.len()];
        self.log_joint_into(x, &mut buf);
        log_sum_exp(&buf)
    }

    pub fn marginal_pdf(&self, x: f64) -> f64 {
        self.log_marginal(x).exp()
    }

    pub fn posteriors(&self, x: f64) -> Vec<f64> {
        let mut buf = vec![0.0; self.len()];
        self.log_joint_into(x, &mut buf);
        let norm = log_sum_exp(&buf);
        buf.iter().map(|l| (l - norm).exp()).collect()
    }

    /// Score of the sub-mixture over `subset` together with its derivative,
    /// `(∇ log p, ∇² log p)`.
    ///
    /// With within-subset responsibilities `w_k` and per-component scores
    /// `s_k = (μ_kt − x)/σ²_kt`, the score is `Σ w_k s_k` and its derivative
    /// is `−Σ w_k/σ²_kt + Var_w(s)`.
    pub fn score_with_derivative(&self, x: f64, subset: &[usize]) -> (f64, f64) {
        if let [k] = subset {
            let v = self.variances[*k];
            return ((self.means[*k] - x) / v, -1.0 / v);
        }
        let mut max = f64::NEG_INFINITY;
        let mut logs = [0.0_f64; 16];
        let mut heap;
        let logs: &mut [f64] = if subset.len() <= logs.len() {
            &mut logs[..subset.len()]
        } else {
            heap = vec![0.0; subset.len()];
            &mut heap
        };
        for (l, &k) in logs.iter_mut().zip(subset) {
            let d = x - self.means[k];
            *l = self.log_weights[k] + self.log_norms[k] - 0.5 * d * d / self.variances[k];
            max = max.max(*l);
        }
        let mut total = 0.0;
        let mut s1 = 0.0;
        let mut inv = 0.0;
        for (l, &k) in logs.iter_mut().zip(subset) {
            let w = (*l - max).exp();
            let v = self.variances[k];
            *l = w;
            total += w;
            s1 += w * (self.means[k] - x) / v;
            inv += w / v;
        }
        let mean = s1 / total;
        let spread: f64 = logs
            .iter()
            .zip(subset)
            .map(|(&w, &k)| {
                let d = (self.means[k] - x) / self.variances[k] - mean;
                w * d * d
            })
            .sum();
        (mean, (spread - inv) / total)
    }

    /// `∇_x log p(x | subset)`.
    pub fn score_subset(&self, x: f64, subset: &[usize]) -> f64 {
        self.score_with_derivative(x, subset).0
    }

    /// Score of the full mixture.
    pub fn score(&self, x: f64) -> f64 {
        let all: Vec<usize> = (0..self.len()).collect();
        self.score_subset(x, &all)
    }

    /// Smallest interval containing every `μ_kt ± width·σ_kt`.
    pub fn coverage(&self, width: f64) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (&m, &v) in self.means.iter().zip(&self.variances) {
            let sd = v.sqrt();
            lo = lo.min(m - width * sd);
            hi = hi.max(m + width * sd);
        }
        (lo, hi)
    }
}

/// Density of the diffused mixture at `x`.
pub fn marginal_pdf(mixture: &MixtureModel, alpha_bar: f64, x: f64) -> Result<f64> {
    Ok(DiffusedMixture::new(mixture, alpha_bar)?.marginal_pdf(x))
}

/// `log p(x_t | c_k)` for every component.
pub fn class_log_likelihoods(mixture: &MixtureModel, alpha_bar: f64, x: f64) -> Result<Vec<f64>> {
    let d = DiffusedMixture::new(mixture, alpha_bar)?;
    let mut out = vec![0.0; d.len()];
    d.log_likelihoods_into(x, &mut out);
    Ok(out)
}

/// `P(c_k | x_t)` for every component.
pub fn class_posteriors(mixture: &MixtureModel, alpha_bar: f64, x: f64) -> Result<Vec<f64>> {
    Ok(DiffusedMixture::new(mixture, alpha_bar)?.posteriors(x))
}

/// `(P(z_0 | x), P(z_1 | x))` from class posteriors, renormalized over the
/// components the partition uses.
pub fn partition_posterior(partition: &Partition, class_posteriors: &[f64]) -> Result<(f64, f64)> {
    let k = class_posteriors.len();
    if let Some(&i) = partition.union().iter().find(|&&i| i >= k) {
        return Err(Error::Partition {
            index: Some(i),
            reason: "partition index outside the posterior vector",
        });
    }
    let a: f64 = partition.z0().iter().map(|&i| class_posteriors[i]).sum();
    let b: f64 = partition.z1().iter().map(|&i| class_posteriors[i]).sum();
    let total = a + b;
    if !(total > 0.0) {
        return Err(Error::UndefinedPosterior);
    }
    Ok((a / total, b / total))
}

/// `∇_x log p(x_t | label)`.
pub fn score(
    mixture: &MixtureModel,
    partition: Option<&Partition>,
    alpha_bar: f64,
    x: f64,
    label: Label,
) -> Result<f64> {
    let subset = label.components(mixture.len(), partition)?;
    Ok(DiffusedMixture::new(mixture, alpha_bar)?.score_subset(x, &subset))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_partition;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn four_deltas() -> MixtureModel {
        MixtureModel::equal_deltas(&[-8.0, -4.0, 6.0, 8.0]).unwrap()
    }

    #[test]
    fn diffuse_component_examples() {
        assert_eq!(
            diffuse_component(1.0, 0.2, 1.0).unwrap(),
            DiffusedComponent { mean: 1.0, variance: 0.2 }
        );
        assert_eq!(
            diffuse_component(5.0, 0.0, 0.0).unwrap(),
            DiffusedComponent { mean: 0.0, variance: 1.0 }
        );
        assert_eq!(
            diffuse_component(-8.0, 0.0, 0.25).unwrap(),
            DiffusedComponent { mean: -4.0, variance: 0.75 }
        );
        assert!(matches!(
            diffuse_component(0.0, 0.0, 1.0),
            Err(Error::DegenerateDensity { .. })
        ));
        assert!(diffuse_component(0.0, -1.0, 0.5).is_err());
        assert!(diffuse_component(0.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn degenerate_component_is_identified() {
        let m = MixtureModel::new(vec![0.5, 0.5], vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        match marginal_pdf(&m, 1.0, 0.0) {
            Err(Error::DegenerateDensity { component: 1 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn standard_normal_is_preserved() {
        let m = MixtureModel::new(vec![1.0], vec![0.0], vec![1.0]).unwrap();
        for ab in [0.0, 0.3, 0.9, 1.0] {
            assert_abs_diff_eq!(marginal_pdf(&m, ab, 0.0).unwrap(), 0.398_942_280_401_432_7, epsilon = 1e-15);
            let ll = class_log_likelihoods(&m, ab, 0.0).unwrap();
            assert_abs_diff_eq!(ll[0], 0.398_942_280_401_432_7f64.ln(), epsilon = 1e-14);
            for x in [-2.0, 0.5, 3.0] {
                assert_abs_diff_eq!(score(&m, None, ab, x, Label::Null).unwrap(), -x, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn symmetric_deltas() {
        let m = MixtureModel::equal_deltas(&[-1.0, 1.0]).unwrap();
        for x in [0.1, 0.7, 2.5] {
            assert_abs_diff_eq!(
                marginal_pdf(&m, 0.6, x).unwrap(),
                marginal_pdf(&m, 0.6, -x).unwrap(),
                epsilon = 1e-15
            );
        }
        let ll = class_log_likelihoods(&m, 0.6, 0.0).unwrap();
        assert_eq!(ll[0], ll[1]);
        let post = class_posteriors(&m, 0.6, 0.0).unwrap();
        assert_abs_diff_eq!(post[0], 0.5, epsilon = 1e-15);
        assert_eq!(score(&m, None, 0.6, 0.0, Label::Null).unwrap(), 0.0);
    }

    #[test]
    fn equal_likelihoods_return_prior() {
        let m = MixtureModel::deltas(vec![1.0 / 3.0, 2.0 / 3.0], vec![-1.0, 1.0]).unwrap();
        let post = class_posteriors(&m, 0.4, 0.0).unwrap();
        assert_abs_diff_eq!(post[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(post[1], 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn near_delta_concentration() {
        let post = class_posteriors(&four_deltas(), 0.99, 6.0).unwrap();
        assert!(post[2] > 0.999, "{post:?}");
    }

    #[test]
    fn riemann_normalization() {
        let m = four_deltas();
        let d = DiffusedMixture::new(&m, 0.5).unwrap();
        let n = 1 << 14;
        let (lo, hi) = (-20.0, 20.0);
        let dx = (hi - lo) / (n - 1) as f64;
        let total: f64 = (0..n).map(|i| d.marginal_pdf(lo + i as f64 * dx)).sum::<f64>() * dx;
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn partition_posterior_examples() {
        let m = four_deltas();
        let p = make_partition(&m, &[3], &[2]).unwrap();
        assert_eq!(partition_posterior(&p, &[0.25; 4]).unwrap(), (0.5, 0.5));
        let p = make_partition(&m, &[0], &[1, 2, 3]).unwrap();
        let (a, b) = partition_posterior(&p, &[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_abs_diff_eq!(a, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(b, 0.9, epsilon = 1e-15);
        let p = make_partition(&m, &[0], &[1]).unwrap();
        let (a, b) = partition_posterior(&p, &[0.2, 0.3, 0.5, 0.0]).unwrap();
        assert_abs_diff_eq!(a, 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(b, 0.6, epsilon = 1e-15);
        assert!(matches!(
            partition_posterior(&p, &[0.0, 0.0, 0.5, 0.5]),
            Err(Error::UndefinedPosterior)
        ));
    }

    #[test]
    fn score_matches_finite_difference() {
        let m = four_deltas();
        let d = DiffusedMixture::new(&m, 0.5).unwrap();
        let h = 1e-5;
        let x = 1.0;
        let fd = (d.log_marginal(x + h) - d.log_marginal(x - h)) / (2.0 * h);
        assert_abs_diff_eq!(d.score(x), fd, epsilon = 1e-6);

        // derivative of the score against a finite difference of the score
        let all = [0, 1, 2, 3];
        for x in [-6.0, -1.0, 0.3, 5.0, 7.2] {
            let (_, ds) = d.score_with_derivative(x, &all);
            let fd = (d.score_subset(x + h, &all) - d.score_subset(x - h, &all)) / (2.0 * h);
            assert!((ds - fd).abs() < 1e-5 * (1.0 + fd.abs()), "x={x}: {ds} vs {fd}");
        }
    }

    #[test]
    fn bayes_and_marginal_consistency() {
        let m = MixtureModel::new(
            vec![0.1, 0.2, 0.3, 0.4],
            vec![-3.0, -0.5, 1.0, 4.0],
            vec![0.0, 0.3, 1.5, 0.05],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let ab: f64 = rng.gen_range(0.0..0.999);
            let x: f64 = rng.gen_range(-6.0..6.0);
            let ll = class_log_likelihoods(&m, ab, x).unwrap();
            let marg = marginal_pdf(&m, ab, x).unwrap();
            let mix: f64 = ll.iter().zip(m.weights()).map(|(l, w)| w * l.exp()).sum();
            assert!((mix - marg).abs() <= 1e-12 * marg.max(1.0));
            let post = class_posteriors(&m, ab, x).unwrap();
            assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for k in 0..4 {
                let bayes = m.weights()[k] * ll[k].exp() / marg;
                assert!((bayes - post[k]).abs() < 1e-10, "{bayes} vs {}", post[k]);
            }
        }
    }

    #[test]
    fn labels_resolve() {
        let m = four_deltas();
        let p = make_partition(&m, &[0, 1], &[2, 3]).unwrap();
        assert_eq!(Label::Z1.components(4, Some(&p)).unwrap(), vec![2, 3]);
        assert_eq!(Label::Null.components(4, None).unwrap(), vec![0, 1, 2, 3]);
        assert!(Label::Z0.components(4, None).is_err());
        assert!(Label::Component(9).components(4, None).is_err());
        let s_c2 = score(&m, Some(&p), 0.5, 1.0, Label::Component(2)).unwrap();
        let mu = 0.5f64.sqrt() * 6.0;
        assert_abs_diff_eq!(s_c2, (mu - 1.0) / 0.5, epsilon = 1e-14);
    }
}
