//! Violation accounting, complexity diagnostics and cross-seed summaries.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{PexError, Result};
use crate::model::BanditInstance;
use crate::polytope::dot;
use crate::samplers::{AlgorithmId, RunRecord};

/// `max_i [A^i ω]₊`.
pub fn violation_increment(a: &[Vec<f64>], omega: &[f64]) -> f64 {
    a.iter().map(|row| dot(row, omega).max(0.0)).fold(0.0, f64::max)
}

/// `Γ_max / Γ_min`; 1 without constraints.
pub fn shadow_price(instance: &BanditInstance) -> f64 {
    let slack = instance.slack();
    if slack.is_empty() {
        return 1.0;
    }
    let max = slack.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = slack.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    /// `min_{π″ ∈ ν(π*)} (μᵀ(π* − π″))² / ‖π* − π″‖²`.
    pub c_known: f64,
    /// `2σ² / Σ_a (max μ − μ_a)²`.
    pub h: f64,
    /// Condition number of the basis matrix at `π*`.
    pub kappa: f64,
    pub shadow_price: f64,
}

pub fn diagnostics(instance: &BanditInstance) -> Diagnostics {
    let poly = instance.feasible_set();
    let mu = instance.means();
    let k = instance.k();
    let (star, _) = poly.argmax_linear(mu);
    let p = poly.vertex(star);
    let c_known = poly
        .neighbors(star)
        .iter()
        .map(|&j| {
            let v: Vec<f64> = p.iter().zip(poly.vertex(j)).map(|(a, b)| a - b).collect();
            dot(mu, &v).powi(2) / dot(&v, &v)
        })
        .fold(f64::INFINITY, f64::min);
    let best = mu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gaps: f64 = mu.iter().map(|m| (best - m).powi(2)).sum();
    let h = 2.0 * instance.sigma2() / gaps;

    let basis = &poly.vertices()[star].basis;
    let mut rows: Vec<Vec<f64>> = (0..k)
        .filter(|a| !basis.support.contains(a))
        .map(|a| {
            let mut e = vec![0.0; k];
            e[a] = 1.0;
            e
        })
        .collect();
    rows.extend(basis.tight.iter().map(|&i| instance.constraints()[i].clone()));
    rows.push(vec![1.0; k]);
    let m = DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]);
    let sv = m.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    Diagnostics {
        c_known,
        h,
        kappa: smax / smin,
        shadow_price: shadow_price(instance),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub algorithm: AlgorithmId,
    pub n_seeds: usize,
    pub median_tau: f64,
    pub std_tau: f64,
    pub mean_violation: f64,
    pub error_rate: f64,
    pub censored: usize,
}

/// Median and population std of uncensored stopping times; error rate and
/// mean violation over all records.
pub fn summarize(records: &[RunRecord]) -> Result<Summary> {
    let first = records
        .first()
        .ok_or_else(|| PexError::InvalidArgument("cannot summarize zero records".into()))?;
    if records.iter().any(|r| r.algorithm != first.algorithm) {
        return Err(PexError::InvalidArgument(
            "records mix several algorithms".into(),
        ));
    }
    let n = records.len();
    let mut taus: Vec<f64> = records
        .iter()
        .filter(|r| !r.censored)
        .map(|r| r.tau as f64)
        .collect();
    taus.sort_by(f64::total_cmp);
    let (median_tau, std_tau) = if taus.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let m = taus.len();
        let median = if m % 2 == 1 {
            taus[m / 2]
        } else {
            0.5 * (taus[m / 2 - 1] + taus[m / 2])
        };
        let mean = taus.iter().sum::<f64>() / m as f64;
        let var = taus.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / m as f64;
        (median, var.sqrt())
    };
    Ok(Summary {
        algorithm: first.algorithm,
        n_seeds: n,
        median_tau,
        std_tau,
        mean_violation: records.iter().map(|r| r.cumulative_violation).sum::<f64>() / n as f64,
        error_rate: records.iter().filter(|r| !r.correct).count() as f64 / n as f64,
        censored: records.iter().filter(|r| r.censored).count(),
    })
}
