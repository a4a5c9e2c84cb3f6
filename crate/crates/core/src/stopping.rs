//! GLR stopping statistic and the two threshold families.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{PexError, Result};
use crate::gamesolver::evaluate_d;
use crate::polytope::FeasiblePolytope;

const H_INV_ITERS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    #[default]
    Practical,
    Theoretical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingConfig {
    pub mode: ThresholdMode,
    pub s0: usize,
    pub delta: f64,
}

impl StoppingConfig {
    pub fn new(mode: ThresholdMode, s0: usize, k: usize, delta: f64) -> Result<Self> {
        if s0 < 1 || s0 > k {
            return Err(PexError::InvalidArgument(format!(
                "S0 must lie in [1, {k}], got {s0}"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(PexError::InvalidArgument(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        Ok(StoppingConfig { mode, s0, delta })
    }

    pub fn practical(k: usize, delta: f64) -> Result<Self> {
        Self::new(ThresholdMode::Practical, k, k, delta)
    }

    pub fn threshold(&self, t: u64, counts: &[u64], d: usize) -> f64 {
        match self.mode {
            ThresholdMode::Practical => threshold_practical(t, self.delta),
            ThresholdMode::Theoretical => {
                threshold_theoretical(counts, self.delta, counts.len(), d, self.s0)
            }
        }
    }
}

/// `max_π min_λ Σ_a N_a d(μ̂_a, λ_a)` over the estimated polytope.
pub fn glr_statistic(
    counts: &[u64],
    mu_hat: &[f64],
    poly: &FeasiblePolytope,
    r: f64,
    sigma2: f64,
) -> Result<f64> {
    let weights: Vec<f64> = counts.iter().map(|&n| n as f64).collect();
    Ok(evaluate_d(&weights, mu_hat, poly, r, sigma2, &[], &[])?.value)
}

/// `ln((1 + ln ln max(t, 3)) / δ)`.
pub fn threshold_practical(t: u64, delta: f64) -> f64 {
    let t = t.max(3) as f64;
    ((1.0 + t.ln().ln()) / delta).ln()
}

/// `3 S₀ ln(1 + ln N̄) + S₀ 𝒯((min(K, d) + ln(1/δ)) / S₀)` with `N̄ = max_a N_a`.
pub fn threshold_theoretical(counts: &[u64], delta: f64, k: usize, d: usize, s0: usize) -> f64 {
    let n_max = counts.iter().copied().max().unwrap_or(1).max(1) as f64;
    let s0 = s0 as f64;
    let x = (k.min(d) as f64 + (1.0 / delta).ln()) / s0;
    3.0 * s0 * (1.0 + n_max.ln()).ln() + s0 * calibration(x)
}

/// `h(u) = u − ln u`.
pub fn h(u: f64) -> f64 {
    u - u.ln()
}

/// Inverse of `h` on the branch `u ≥ 1`, by bisection.
pub fn h_inv(x: f64) -> f64 {
    if x <= 1.0 {
        return 1.0;
    }
    let mut lo = 1.0;
    let mut hi = 1.0 + x + (2.0 * x).sqrt() + 10.0;
    for _ in 0..H_INV_ITERS {
        let mid = 0.5 * (lo + hi);
        if h(mid) < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Two-branch `h̃_z`.
pub fn h_tilde(z: f64, x: f64) -> f64 {
    if x >= h_inv(1.0 / z.ln()) {
        let u = h_inv(x);
        (1.0 / u).exp() * u
    } else {
        z * (x - z.ln().ln())
    }
}

/// `𝒯(x) = 2 h̃_{3/2}((h⁻¹(1 + x) + ln(π²/3)) / 2)`.
pub fn calibration(x: f64) -> f64 {
    2.0 * h_tilde(1.5, (h_inv(1.0 + x) + (PI * PI / 3.0).ln()) / 2.0)
}
