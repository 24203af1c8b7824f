//! Noise-free Gaussian-process belief engine over edge costs and node
//! rewards.
//!
//! Both processes use a constant prior mean and an RBF kernel
//! `k(x, x') = s * exp(-||x - x'||^2 / (2 l^2))`. Conditioning is exact:
//! the posterior at any observed input interpolates the observed value with
//! zero variance (up to jitter). Identical feature vectors on distinct graph
//! elements are legal, which makes jitter escalation on the Gram
//! factorization mandatory rather than cosmetic.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radial-basis covariance with unit defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub bandwidth: f64,
    pub signal_variance: f64,
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel {
            bandwidth: 1.0,
            signal_variance: 1.0,
        }
    }
}

impl Kernel {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        self.signal_variance * (-sq / (2.0 * self.bandwidth * self.bandwidth)).exp()
    }
}

/// Constant-mean GP prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpPrior {
    pub mean: f64,
    pub kernel: Kernel,
}

impl GpPrior {
    pub fn new(mean: f64) -> Self {
        GpPrior {
            mean,
            kernel: Kernel::default(),
        }
    }
}

/// Insertion-ordered, deduplicated (input, value) pairs.
///
/// Re-inserting a stored input with the same value is a no-op; with a
/// different value it is a consistency fault of the noise-free model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    inputs: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl ObservationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn position(&self, x: &[f64]) -> Option<usize> {
        self.inputs.iter().position(|i| i.as_slice() == x)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.position(x).is_some()
    }

    pub fn insert(&mut self, x: &[f64], v: f64) -> Result<()> {
        if let Some(idx) = self.position(x) {
            let stored = self.values[idx];
            if stored == v {
                return Ok(());
            }
            return Err(Error::InconsistentObservation { stored, new: v });
        }
        self.inputs.push(x.to_vec());
        self.values.push(v);
        Ok(())
    }
}

/// One side of the traveler's belief (cost or reward process).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpBelief {
    pub prior: GpPrior,
    pub obs: ObservationSet,
}

/// The traveler's full belief: two independently conditioned processes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    pub cost: GpBelief,
    pub reward: GpBelief,
}

impl BeliefState {
    pub fn new(cost_prior: GpPrior, reward_prior: GpPrior) -> Self {
        BeliefState {
            cost: GpBelief {
                prior: cost_prior,
                obs: ObservationSet::new(),
            },
            reward: GpBelief {
                prior: reward_prior,
                obs: ObservationSet::new(),
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("belief serializes")
    }
}

/// Joint posterior over a query set.
#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

/// Determinant of the posterior covariance. Non-negative after the
/// diagonal clamping performed by [`posterior_joint`].
pub fn generalized_variance(summary: &PosteriorSummary) -> f64 {
    debug_assert_eq!(summary.covariance.nrows(), summary.covariance.ncols());
    summary.covariance.determinant().max(0.0)
}

/// Factored posterior: one Cholesky per observation set, any number of
/// queries against it.
pub struct GpPosterior<'a> {
    prior: &'a GpPrior,
    obs: &'a ObservationSet,
    chol: Option<Cholesky<f64, Dyn>>,
    /// K^{-1} (v - mu), precomputed.
    alpha: DVector<f64>,
}

const JITTERS: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];

impl<'a> GpPosterior<'a> {
    pub fn new(prior: &'a GpPrior, obs: &'a ObservationSet) -> Result<Self> {
        let k = obs.len();
        if k == 0 {
            return Ok(GpPosterior {
                prior,
                obs,
                chol: None,
                alpha: DVector::zeros(0),
            });
        }
        let mut gram = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let v = prior.kernel.eval(&obs.inputs()[i], &obs.inputs()[j]);
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        let mean_diag = gram.diagonal().sum() / k as f64;
        let mut chol = None;
        for jitter in JITTERS {
            let mut m = gram.clone();
            for i in 0..k {
                m[(i, i)] += jitter * mean_diag;
            }
            if let Some(c) = Cholesky::new(m) {
                chol = Some(c);
                break;
            }
        }
        let chol = chol.ok_or(Error::Factorization)?;
        let resid = DVector::from_iterator(k, obs.values().iter().map(|v| v - prior.mean));
        let alpha = chol.solve(&resid);
        Ok(GpPosterior {
            prior,
            obs,
            chol: Some(chol),
            alpha,
        })
    }

    fn cross(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.obs.len(),
            self.obs.inputs().iter().map(|i| self.prior.kernel.eval(i, x)),
        )
    }

    /// Posterior mean at a single query input.
    pub fn mean(&self, x: &[f64]) -> f64 {
        if self.chol.is_none() {
            return self.prior.mean;
        }
        self.prior.mean + self.cross(x).dot(&self.alpha)
    }

    /// Posterior mean and variance at a single query input.
    pub fn mean_var(&self, x: &[f64]) -> (f64, f64) {
        let Some(chol) = &self.chol else {
            return (self.prior.mean, self.prior.kernel.signal_variance);
        };
        let ks = self.cross(x);
        let mean = self.prior.mean + ks.dot(&self.alpha);
        let solved = chol.solve(&ks);
        let var = self.prior.kernel.eval(x, x) - ks.dot(&solved);
        (mean, var.max(0.0))
    }

    /// Joint posterior over a nonempty query set.
    pub fn joint(&self, queries: &[&[f64]]) -> Result<PosteriorSummary> {
        if queries.is_empty() {
            return Err(Error::Validation("queries: empty query set".into()));
        }
        let m = queries.len();
        let mut prior_cov = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = self.prior.kernel.eval(queries[i], queries[j]);
                prior_cov[(i, j)] = v;
                prior_cov[(j, i)] = v;
            }
        }
        let (mean, mut cov) = match &self.chol {
            None => (DVector::from_element(m, self.prior.mean), prior_cov),
            Some(chol) => {
                let k = self.obs.len();
                let mut cross = DMatrix::zeros(m, k);
                for i in 0..m {
                    for j in 0..k {
                        cross[(i, j)] =
                            self.prior.kernel.eval(queries[i], &self.obs.inputs()[j]);
                    }
                }
                let mean = DVector::from_element(m, self.prior.mean) + &cross * &self.alpha;
                let solved = chol.solve(&cross.transpose());
                let cov = prior_cov - &cross * solved;
                (mean, cov)
            }
        };
        // Symmetrize and clamp the diagonal at zero.
        for i in 0..m {
            for j in (i + 1)..m {
                let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
            if cov[(i, i)] < 0.0 {
                cov[(i, i)] = 0.0;
            }
        }
        Ok(PosteriorSummary {
            mean,
            covariance: cov,
        })
    }
}

/// Univariate posterior at `x` given `obs`: `(mean, variance)`.
/// With an empty observation set this is the prior exactly.
pub fn posterior_marginal(prior: &GpPrior, obs: &ObservationSet, x: &[f64]) -> Result<(f64, f64)> {
    Ok(GpPosterior::new(prior, obs)?.mean_var(x))
}

/// Joint posterior over `queries` given `obs`.
pub fn posterior_joint(
    prior: &GpPrior,
    obs: &ObservationSet,
    queries: &[&[f64]],
) -> Result<PosteriorSummary> {
    GpPosterior::new(prior, obs)?.joint(queries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn obs_of(pairs: &[(&[f64], f64)]) -> ObservationSet {
        let mut obs = ObservationSet::new();
        for (x, v) in pairs {
            obs.insert(x, *v).unwrap();
        }
        obs
    }

    #[test]
    fn prior_recovery_with_empty_obs() {
        let prior = GpPrior::new(6.75);
        let (m, v) = posterior_marginal(&prior, &ObservationSet::new(), &[1.0, 2.0]).unwrap();
        assert_eq!(m, 6.75);
        assert_eq!(v, 1.0);
    }

    #[test]
    fn noise_free_interpolation() {
        let prior = GpPrior::new(0.0);
        let obs = obs_of(&[(&[1.0, 2.0], 5.0)]);
        let (m, v) = posterior_marginal(&prior, &obs, &[1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(m, 5.0, epsilon = 1e-8);
        assert!(v < 1e-6);
    }

    #[test]
    fn single_observation_closed_form() {
        // Prior mean 0, unit RBF, one observation (0 -> 1): querying at
        // distance d gives mean e^{-d^2/2} and variance 1 - e^{-d^2}.
        let prior = GpPrior::new(0.0);
        let obs = obs_of(&[(&[0.0], 1.0)]);
        let (m, v) = posterior_marginal(&prior, &obs, &[1.0]).unwrap();
        assert_abs_diff_eq!(m, (-0.5f64).exp(), epsilon = 1e-10);
        assert_abs_diff_eq!(v, 1.0 - (-1.0f64).exp(), epsilon = 1e-10);
    }

    #[test]
    fn joint_single_point_reduces_to_marginal() {
        let prior = GpPrior::new(2.0);
        let obs = obs_of(&[(&[0.0, 0.0], 1.0), (&[1.0, 1.0], 3.0)]);
        let q: &[f64] = &[0.3, 0.7];
        let (m, v) = posterior_marginal(&prior, &obs, q).unwrap();
        let joint = posterior_joint(&prior, &obs, &[q]).unwrap();
        assert_abs_diff_eq!(joint.mean[0], m, epsilon = 1e-10);
        assert_abs_diff_eq!(joint.covariance[(0, 0)], v, epsilon = 1e-10);
    }

    #[test]
    fn joint_at_observed_input_interpolates() {
        let prior = GpPrior::new(0.0);
        let obs = obs_of(&[(&[0.0], 2.0), (&[2.0], -1.0)]);
        let joint = posterior_joint(&prior, &obs, &[&[0.0], &[5.0]]).unwrap();
        assert_abs_diff_eq!(joint.mean[0], 2.0, epsilon = 1e-6);
        assert!(joint.covariance[(0, 0)].abs() < 1e-6);
        assert!(joint.covariance[(0, 1)].abs() < 1e-6);
    }

    #[test]
    fn observation_idempotence_and_conflict() {
        let mut obs = ObservationSet::new();
        obs.insert(&[1.0], 2.0).unwrap();
        obs.insert(&[1.0], 2.0).unwrap();
        assert_eq!(obs.len(), 1);
        let err = obs.insert(&[1.0], 3.0).unwrap_err();
        assert!(matches!(err, Error::InconsistentObservation { .. }));
    }

    #[test]
    fn generalized_variance_scalar_and_diagonal() {
        let s1 = PosteriorSummary {
            mean: DVector::from_vec(vec![0.0]),
            covariance: DMatrix::from_vec(1, 1, vec![0.7]),
        };
        assert_abs_diff_eq!(generalized_variance(&s1), 0.7, epsilon = 1e-12);
        let s2 = PosteriorSummary {
            mean: DVector::zeros(2),
            covariance: DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.25])),
        };
        assert_abs_diff_eq!(generalized_variance(&s2), 0.125, epsilon = 1e-12);
    }

    #[test]
    fn duplicate_feature_inputs_across_elements_factorize() {
        // The fixture has distinct nodes with identical features; after
        // dedup only one copy enters the Gram matrix, but near-duplicates
        // must still factor through jitter escalation.
        let prior = GpPrior::new(0.0);
        let obs = obs_of(&[
            (&[1.0, 1.0], 2.0),
            (&[1.0, 1.0 + 1e-9], 2.0),
            (&[3.0, 3.0], 4.0),
        ]);
        let (m, _) = posterior_marginal(&prior, &obs, &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(m, 2.0, epsilon = 1e-3);
    }

    #[test]
    fn variance_reduction_under_more_observations() {
        let prior = GpPrior::new(0.0);
        let small = obs_of(&[(&[0.0], 1.0)]);
        let large = obs_of(&[(&[0.0], 1.0), (&[0.7], 0.4), (&[2.0], 0.1)]);
        for q in [0.1, 0.5, 1.5, 3.0, -2.0] {
            let (_, v_small) = posterior_marginal(&prior, &small, &[q]).unwrap();
            let (_, v_large) = posterior_marginal(&prior, &large, &[q]).unwrap();
            assert!(v_large <= v_small + 1e-8, "q={q}: {v_large} > {v_small}");
        }
    }
}
