//! Ridge estimates of the means and constraint matrix, the ellipsoid radius,
//! and the pessimistic (downward-shifted) constraint matrix.
//!
//! Arms are canonical basis vectors, so the design matrix is
//! `Σ_t = diag(v + N_a)` and every estimate decouples per arm.

use crate::model::Observation;

pub const DEFAULT_RIDGE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    v: f64,
    counts: Vec<u64>,
    reward_sums: Vec<f64>,
    /// `d × K`, row `i` accumulates observed costs of constraint `i`.
    cost_sums: Vec<Vec<f64>>,
    t: u64,
}

/// Snapshot of the estimates at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct PessimisticModel {
    pub mu_hat: Vec<f64>,
    pub a_hat: Vec<Vec<f64>>,
    pub a_tilde: Vec<Vec<f64>>,
    pub f_radius: f64,
}

impl EstimatorState {
    pub fn new(k: usize, d: usize, v: f64) -> Self {
        assert!(v > 0.0, "ridge parameter must be positive");
        EstimatorState {
            v,
            counts: vec![0; k],
            reward_sums: vec![0.0; k],
            cost_sums: vec![vec![0.0; k]; d],
            t: 0,
        }
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn d(&self) -> usize {
        self.cost_sums.len()
    }

    pub fn ridge(&self) -> f64 {
        self.v
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn update(&mut self, obs: &Observation) {
        assert_eq!(obs.cost.len(), self.d(), "cost vector has wrong length");
        self.counts[obs.arm] += 1;
        self.reward_sums[obs.arm] += obs.reward;
        for (row, c) in self.cost_sums.iter_mut().zip(&obs.cost) {
            row[obs.arm] += c;
        }
        self.t += 1;
    }

    fn denom(&self, a: usize) -> f64 {
        self.v + self.counts[a] as f64
    }

    pub fn mu_hat(&self) -> Vec<f64> {
        (0..self.k()).map(|a| self.reward_sums[a] / self.denom(a)).collect()
    }

    pub fn a_hat(&self) -> Vec<Vec<f64>> {
        self.cost_sums
            .iter()
            .map(|row| (0..self.k()).map(|a| row[a] / self.denom(a)).collect())
            .collect()
    }

    /// `ln det Σ_t`.
    pub fn log_det(&self) -> f64 {
        (0..self.k()).map(|a| self.denom(a).ln()).sum()
    }

    /// Ellipsoid radius `f = 1 + sqrt(½ ln(K/δ) + ¼ ln det Σ_t)`.
    pub fn confidence_radius(&self, delta: f64) -> f64 {
        confidence_radius(self.k(), delta, self.log_det())
    }

    /// `Ã^{i,a} = Â^{i,a} − f / sqrt(v + N_a)`.
    pub fn pessimistic_model(&self, delta: f64) -> PessimisticModel {
        self.pessimistic_model_with_radius(self.confidence_radius(delta))
    }

    pub fn pessimistic_model_with_radius(&self, f_radius: f64) -> PessimisticModel {
        let a_hat = self.a_hat();
        let shift: Vec<f64> = (0..self.k()).map(|a| f_radius / self.denom(a).sqrt()).collect();
        let a_tilde = a_hat
            .iter()
            .map(|row| row.iter().zip(&shift).map(|(x, s)| x - s).collect())
            .collect();
        PessimisticModel {
            mu_hat: self.mu_hat(),
            a_hat,
            a_tilde,
            f_radius,
        }
    }

    /// `ρ = f · ‖ω‖_{Σ_t⁻¹}`.
    pub fn rho_radius(&self, delta: f64, omega: &[f64]) -> f64 {
        self.rho_radius_with(self.confidence_radius(delta), omega)
    }

    pub fn rho_radius_with(&self, f_radius: f64, omega: &[f64]) -> f64 {
        let norm2: f64 = omega
            .iter()
            .enumerate()
            .map(|(a, w)| w * w / self.denom(a))
            .sum();
        f_radius * norm2.sqrt()
    }
}

pub fn confidence_radius(k: usize, delta: f64, log_det: f64) -> f64 {
    1.0 + (0.5 * (k as f64 / delta).ln() + 0.25 * log_det).sqrt()
}
