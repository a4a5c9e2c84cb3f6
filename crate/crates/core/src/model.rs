//! Ground-truth bandit environment and its stochastic feedback.
//!
//! Constraints are stored in homogeneous form `A π ≤ 0`. A user-facing row
//! `c·π ≤ b` becomes `(c − b·1)·π ≤ 0`, which is equivalent on the simplex.
//! The simplex itself (`Σπ = 1`, `π ≥ 0`) is never stored in `A`; the
//! polytope module adds it.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{PexError, Result};
use crate::polytope::{FeasiblePolytope, Halfspace};

pub const POLICY_SUM_TOL: f64 = 1e-9;

/// A probability vector over arms. Used both for recommended policies and
/// for sampling allocations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy(Vec<f64>);

impl Policy {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < -POLICY_SUM_TOL) {
            return Err(PexError::InvalidArgument(
                "policy weights must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > POLICY_SUM_TOL {
            return Err(PexError::InvalidArgument(format!(
                "policy weights sum to {sum}, expected 1"
            )));
        }
        Ok(Policy(weights))
    }

    /// Wraps weights that are known to lie on the simplex (solver output).
    pub(crate) fn from_vec_unchecked(weights: Vec<f64>) -> Self {
        Policy(weights)
    }

    pub fn uniform(k: usize) -> Self {
        Policy(vec![1.0 / k as f64; k])
    }

    pub fn basis(k: usize, arm: usize) -> Self {
        let mut w = vec![0.0; k];
        w[arm] = 1.0;
        Policy(w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[f64]> for Policy {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// One linear constraint `coeffs · π ≤ rhs` on policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    pub coeffs: Vec<f64>,
    #[serde(default)]
    pub rhs: f64,
}

impl ConstraintSpec {
    /// Row of the homogeneous matrix: `c − b·1`.
    pub fn homogeneous(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c - self.rhs).collect()
    }
}

fn default_sigma2() -> f64 {
    1.0
}

fn default_cost_noise() -> f64 {
    0.1
}

/// Environment description as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub means: Vec<f64>,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
    #[serde(default = "default_cost_noise")]
    pub cost_noise_sd: f64,
    /// Standard deviation of sampled rewards; defaults to `sqrt(sigma2)`.
    /// `sigma2` stays the variance assumed by the learner.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward_noise_sd: Option<f64>,
}

/// Immutable ground truth for one simulated environment.
#[derive(Debug, Clone)]
pub struct BanditInstance {
    means: Vec<f64>,
    sigma2: f64,
    constraints: Vec<Vec<f64>>,
    cost_noise_sd: f64,
    reward_noise_sd: f64,
    r: f64,
    delta: f64,
    slack: Vec<f64>,
    feasible: FeasiblePolytope,
}

impl BanditInstance {
    /// Validates the environment, checks that the true feasible set is
    /// non-empty with a strictly feasible point, and precomputes the slack
    /// vector `Γ_i = max_{π∈Δ} (−A^i π)`.
    pub fn build(env: &EnvironmentSpec, r: f64, delta: f64) -> Result<Self> {
        let k = env.means.len();
        if k < 2 {
            return Err(PexError::InvalidInstance(format!(
                "need at least 2 arms, got {k}"
            )));
        }
        if env.means.iter().any(|m| !m.is_finite()) {
            return Err(PexError::InvalidInstance("means must be finite".into()));
        }
        if !(env.sigma2 > 0.0 && env.sigma2.is_finite()) {
            return Err(PexError::InvalidInstance("sigma2 must be positive".into()));
        }
        if !(env.cost_noise_sd >= 0.0 && env.cost_noise_sd.is_finite()) {
            return Err(PexError::InvalidInstance(
                "cost_noise_sd must be nonnegative".into(),
            ));
        }
        let reward_noise_sd = env.reward_noise_sd.unwrap_or(env.sigma2.sqrt());
        if !(reward_noise_sd >= 0.0 && reward_noise_sd.is_finite()) {
            return Err(PexError::InvalidInstance(
                "reward_noise_sd must be nonnegative".into(),
            ));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(PexError::InvalidInstance(format!(
                "delta must lie in (0,1), got {delta}"
            )));
        }
        if !(r >= 0.0 && r.is_finite()) {
            return Err(PexError::InvalidInstance(format!(
                "r must be nonnegative, got {r}"
            )));
        }
        for (i, c) in env.constraints.iter().enumerate() {
            if c.coeffs.len() != k {
                return Err(PexError::InvalidInstance(format!(
                    "constraint {i} has {} coefficients, expected {k}",
                    c.coeffs.len()
                )));
            }
            if c.coeffs.iter().chain(std::iter::once(&c.rhs)).any(|x| !x.is_finite()) {
                return Err(PexError::InvalidInstance(format!(
                    "constraint {i} has non-finite entries"
                )));
            }
        }
        let constraints: Vec<Vec<f64>> =
            env.constraints.iter().map(ConstraintSpec::homogeneous).collect();
        let feasible = FeasiblePolytope::from_matrix(k, &constraints)?;
        if !feasible.has_strict_interior() {
            return Err(PexError::ZeroSlack);
        }
        let slack = constraints
            .iter()
            .map(|row| row.iter().map(|a| -a).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        Ok(BanditInstance {
            means: env.means.clone(),
            sigma2: env.sigma2,
            constraints,
            cost_noise_sd: env.cost_noise_sd,
            reward_noise_sd,
            r,
            delta,
            slack,
            feasible,
        })
    }

    pub fn k(&self) -> usize {
        self.means.len()
    }

    /// Number of constraints beyond the simplex.
    pub fn d(&self) -> usize {
        self.constraints.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Homogeneous constraint matrix, one row per constraint.
    pub fn constraints(&self) -> &[Vec<f64>] {
        &self.constraints
    }

    pub fn cost_noise_sd(&self) -> f64 {
        self.cost_noise_sd
    }

    pub fn reward_noise_sd(&self) -> f64 {
        self.reward_noise_sd
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn slack(&self) -> &[f64] {
        &self.slack
    }

    /// The true feasible set `{π ∈ Δ : Aπ ≤ 0}`.
    pub fn feasible_set(&self) -> &FeasiblePolytope {
        &self.feasible
    }

    pub fn constraint_halfspaces(&self) -> Vec<Halfspace> {
        self.constraints
            .iter()
            .map(|row| Halfspace::new(row.clone(), 0.0))
            .collect()
    }

    /// Draws one reward and cost vector for `arm`. The reward is drawn
    /// first, then the cost coordinates in row order.
    pub fn sample_step<R: Rng + ?Sized>(&self, t: u64, arm: usize, rng: &mut R) -> Observation {
        assert!(arm < self.k(), "arm {arm} out of range for K={}", self.k());
        let z: f64 = rng.sample(StandardNormal);
        let reward = self.means[arm] + self.reward_noise_sd * z;
        let cost = self
            .constraints
            .iter()
            .map(|row| {
                let z: f64 = rng.sample(StandardNormal);
                row[arm] + self.cost_noise_sd * z
            })
            .collect();
        Observation {
            t,
            arm,
            reward,
            cost,
        }
    }
}

/// Feedback from a single pull.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub t: u64,
    pub arm: usize,
    pub reward: f64,
    pub cost: Vec<f64>,
}
