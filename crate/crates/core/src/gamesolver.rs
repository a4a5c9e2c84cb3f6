//! Gaussian lower-bound game: confusing instances, the neighbour-vertex
//! value `D`, the Lagrange multiplier box, allocation optimisation and
//! characteristic times.

use crate::error::{PexError, Result};
use crate::model::Policy;
use crate::polytope::{dot, FeasiblePolytope};

/// Multiplier bound used when the optimal allocation has no positive slack
/// under the pessimistic constraints.
pub const B_MAX: f64 = 100.0;
pub const DEFAULT_FW_BUDGET: usize = 300;
pub const LAGRANGIAN_ROUNDS: usize = 5;
const WEIGHT_FLOOR: f64 = 1e-12;

/// Box `[lo, hi]` containing every admissible mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundedMeanBox {
    lo: f64,
    hi: f64,
}

impl BoundedMeanBox {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(PexError::InvalidArgument(format!(
                "mean box needs lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(BoundedMeanBox { lo, hi })
    }

    /// `[min μ − margin, max μ + margin]`.
    pub fn around(means: &[f64], margin: f64) -> Self {
        let lo = means.iter().copied().fold(f64::INFINITY, f64::min) - margin;
        let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max) + margin;
        BoundedMeanBox { lo, hi }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains_strictly(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    /// Largest Gaussian KL between two points of the box.
    pub fn loss_bound(&self, sigma2: f64) -> f64 {
        (self.hi - self.lo).powi(2) / (2.0 * sigma2)
    }
}

pub fn gaussian_kl(x: f64, y: f64, sigma2: f64) -> f64 {
    (x - y).powi(2) / (2.0 * sigma2)
}

fn difference(pi: &[f64], pi_prime: &[f64]) -> Vec<f64> {
    pi.iter().zip(pi_prime).map(|(a, b)| a - b).collect()
}

/// Closest instance (in `ω`-weighted KL) on the hyperplane `λᵀ(π − π′) = r`.
///
/// Returns `(λ, γ)` with `λ_a = μ_a + γ σ² v_a / ω_a`. When some arm with
/// `v_a ≠ 0` has zero weight, moving that arm alone costs nothing, so the
/// whole shift is placed there and `γ = 0`.
pub fn confusing_instance(
    means: &[f64],
    omega: &[f64],
    pi: &[f64],
    pi_prime: &[f64],
    r: f64,
    sigma2: f64,
) -> Result<(Vec<f64>, f64)> {
    let v = difference(pi, pi_prime);
    if v.iter().all(|x| *x == 0.0) {
        return Err(PexError::InvalidArgument(
            "confusing instance needs two distinct policies".into(),
        ));
    }
    let gap = r - dot(means, &v);
    if let Some(free) = (0..v.len()).find(|&a| v[a] != 0.0 && omega[a] <= 0.0) {
        let mut lambda = means.to_vec();
        lambda[free] += gap / v[free];
        return Ok((lambda, 0.0));
    }
    let spread: f64 = v
        .iter()
        .zip(omega)
        .filter(|(va, _)| **va != 0.0)
        .map(|(va, w)| va * va / w)
        .sum();
    let gamma = gap / (sigma2 * spread);
    let lambda = means
        .iter()
        .zip(&v)
        .zip(omega)
        .map(|((m, va), w)| if *va == 0.0 { *m } else { m + gamma * va * sigma2 / w })
        .collect();
    Ok((lambda, gamma))
}

/// `[(μᵀv − r)₊]² / (2σ² Σ_a v_a²/w_a)` with `v = π − π′`.
pub fn pair_term(
    means: &[f64],
    weights: &[f64],
    pi: &[f64],
    pi_prime: &[f64],
    r: f64,
    sigma2: f64,
) -> f64 {
    let mut margin = -r;
    let mut spread = 0.0;
    for a in 0..means.len() {
        let va = pi[a] - pi_prime[a];
        if va == 0.0 {
            continue;
        }
        margin += means[a] * va;
        if weights[a] <= 0.0 {
            return 0.0;
        }
        spread += va * va / weights[a];
    }
    if margin <= 0.0 || spread == 0.0 {
        return 0.0;
    }
    margin * margin / (2.0 * sigma2 * spread)
}

/// `lᵀ Ã w`.
pub fn penalty(multiplier: &[f64], a_tilde: &[Vec<f64>], w: &[f64]) -> f64 {
    multiplier
        .iter()
        .zip(a_tilde)
        .filter(|(l, _)| **l != 0.0)
        .map(|(l, row)| l * dot(row, w))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DValue {
    pub value: f64,
    /// Maximising r-good vertex.
    pub pi_star: usize,
    /// Minimising neighbour of `pi_star`.
    pub neighbor: usize,
}

/// Minimum of `pair_term` over the neighbours of vertex `pi`, with the
/// argmin (lowest index on ties).
pub fn min_over_neighbors(
    weights: &[f64],
    means: &[f64],
    poly: &FeasiblePolytope,
    pi: usize,
    r: f64,
    sigma2: f64,
) -> Result<(f64, usize)> {
    let nbrs = poly.neighbors(pi);
    if nbrs.is_empty() {
        return Err(PexError::DegenerateGeometry(format!(
            "vertex {pi} has no neighbours"
        )));
    }
    let mut best = (f64::INFINITY, nbrs[0]);
    for &j in nbrs {
        let term = pair_term(means, weights, poly.vertex(pi), poly.vertex(j), r, sigma2);
        if term < best.0 {
            best = (term, j);
        }
    }
    Ok(best)
}

/// Projection-lemma value: max over r-good vertices of the min over their
/// neighbours of `pair_term`, minus the penalty `lᵀÃw`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_d(
    weights: &[f64],
    means: &[f64],
    poly: &FeasiblePolytope,
    r: f64,
    sigma2: f64,
    multiplier: &[f64],
    a_tilde: &[Vec<f64>],
) -> Result<DValue> {
    let mut best: Option<DValue> = None;
    for pi in poly.r_good_vertices(means, r) {
        let (value, neighbor) = min_over_neighbors(weights, means, poly, pi, r, sigma2)?;
        if best.map_or(true, |b| value > b.value) {
            best = Some(DValue {
                value,
                pi_star: pi,
                neighbor,
            });
        }
    }
    let mut best = best.expect("r-good set always contains the argmax vertex");
    best.value -= penalty(multiplier, a_tilde, weights);
    Ok(best)
}

/// `‖l‖₁` bound `D / γ` with `γ = min_i(−Ã^i ω*)`; falls back to `B_MAX`
/// when `γ ≤ 0`.
pub fn multiplier_box(d_value: f64, a_tilde: &[Vec<f64>], omega_star: &[f64]) -> f64 {
    if a_tilde.is_empty() || d_value <= 0.0 {
        return 0.0;
    }
    let gamma = a_tilde
        .iter()
        .map(|row| -dot(row, omega_star))
        .fold(f64::INFINITY, f64::min);
    if gamma > 0.0 {
        d_value / gamma
    } else {
        B_MAX
    }
}

/// Minimises `−lᵀÃω` over `{l ≥ 0, ‖l‖₁ ≤ B}`: all mass on the most
/// violated row, or zero when `Ãω ≤ 0`.
pub fn multiplier_argmin(a_tilde: &[Vec<f64>], omega: &[f64], bound: f64) -> Vec<f64> {
    let mut l = vec![0.0; a_tilde.len()];
    let mut worst: Option<(usize, f64)> = None;
    for (i, row) in a_tilde.iter().enumerate() {
        let v = dot(row, omega);
        if worst.map_or(true, |(_, w)| v > w) {
            worst = Some((i, v));
        }
    }
    if let Some((i, v)) = worst {
        if v > 0.0 {
            l[i] = bound;
        }
    }
    l
}

/// Inner problem for a fixed candidate vertex: maximise over `ω ∈ poly`
/// `min_{π′ ∈ ν(π)} pair_term(ω) − lᵀÃω`.
#[derive(Debug, Clone, Copy)]
pub struct AllocationProblem<'a> {
    pub means: &'a [f64],
    pub poly: &'a FeasiblePolytope,
    pub r: f64,
    pub sigma2: f64,
    pub multiplier: &'a [f64],
    pub a_tilde: &'a [Vec<f64>],
    pub pi_star: usize,
}

#[derive(Debug, Clone)]
pub struct Allocation {
    pub omega: Policy,
    pub value: f64,
}

impl AllocationProblem<'_> {
    pub fn objective(&self, w: &[f64]) -> Result<(f64, usize)> {
        let (term, nbr) =
            min_over_neighbors(w, self.means, self.poly, self.pi_star, self.r, self.sigma2)?;
        Ok((term - penalty(self.multiplier, self.a_tilde, w), nbr))
    }

}

/// Per-solve cache: squared neighbour differences, margin coefficients and
/// the penalty direction `Ãᵀl`.
struct Prepared {
    k: usize,
    /// `[(μᵀv − r)₊]² / (2σ²)` per neighbour.
    coef: Vec<f64>,
    /// `v_a²` per neighbour, row-major.
    sq: Vec<f64>,
    penalty_dir: Vec<f64>,
}

impl Prepared {
    fn new(problem: &AllocationProblem<'_>) -> Result<Self> {
        let poly = problem.poly;
        let k = poly.k();
        let neighbors = poly.neighbors(problem.pi_star);
        if neighbors.is_empty() {
            return Err(PexError::DegenerateGeometry(format!(
                "vertex {} has no neighbours",
                problem.pi_star
            )));
        }
        let pi = poly.vertex(problem.pi_star);
        let mut coef = Vec::with_capacity(neighbors.len());
        let mut sq = Vec::with_capacity(neighbors.len() * k);
        for &j in neighbors {
            let pj = poly.vertex(j);
            let mut margin = -problem.r;
            for a in 0..k {
                let va = pi[a] - pj[a];
                if va != 0.0 {
                    margin += problem.means[a] * va;
                }
                sq.push(va * va);
            }
            coef.push(if margin > 0.0 {
                margin * margin / (2.0 * problem.sigma2)
            } else {
                0.0
            });
        }
        let mut penalty_dir = vec![0.0; k];
        for (l, row) in problem.multiplier.iter().zip(problem.a_tilde) {
            if *l != 0.0 {
                for (p, a) in penalty_dir.iter_mut().zip(row) {
                    *p += l * a;
                }
            }
        }
        Ok(Prepared {
            k,
            coef,
            sq,
            penalty_dir,
        })
    }

    /// Objective value and the position of the minimising neighbour.
    /// `inv` is scratch space of length `k`; `terms` receives every
    /// neighbour's term.
    fn objective(&self, w: &[f64], inv: &mut [f64], terms: &mut [f64]) -> (f64, usize) {
        let interior = w.iter().all(|x| *x > 0.0);
        if interior {
            for (i, x) in inv.iter_mut().zip(w) {
                *i = 1.0 / x;
            }
        }
        let mut best = (f64::INFINITY, 0);
        for (n, c) in self.coef.iter().enumerate() {
            let row = &self.sq[n * self.k..(n + 1) * self.k];
            let term = if *c == 0.0 {
                0.0
            } else if interior {
                c / dot(row, inv)
            } else if row.iter().zip(w).any(|(v2, wa)| *v2 != 0.0 && *wa <= 0.0) {
                0.0
            } else {
                let spread: f64 = row
                    .iter()
                    .zip(w)
                    .filter(|(v2, _)| **v2 != 0.0)
                    .map(|(v2, wa)| v2 / wa)
                    .sum();
                c / spread
            };
            terms[n] = term;
            if term < best.0 {
                best = (term, n);
            }
        }
        (best.0 - dot(&self.penalty_dir, w), best.1)
    }

    /// Gradient of the softmin `−β ln Σ exp(−term/β)` of the neighbour
    /// terms; `β → 0` recovers the gradient of the minimising term.
    fn supergradient(&self, w: &[f64], terms: &[f64], beta: f64, grad: &mut [f64]) {
        grad.fill(0.0);
        let min = terms.iter().copied().fold(f64::INFINITY, f64::min);
        let mut total = 0.0;
        for (n, &term) in terms.iter().enumerate() {
            let c = self.coef[n];
            let p = if beta > 0.0 {
                (-(term - min) / beta).exp()
            } else if term == min {
                1.0
            } else {
                0.0
            };
            if p < 1e-12 {
                continue;
            }
            total += p;
            if c == 0.0 {
                continue;
            }
            let row = &self.sq[n * self.k..(n + 1) * self.k];
            let spread: f64 = row
                .iter()
                .zip(w)
                .map(|(v2, wa)| v2 / wa.max(WEIGHT_FLOOR))
                .sum();
            let scale = p * c / (spread * spread);
            for ((g, v2), wa) in grad.iter_mut().zip(row).zip(w) {
                let wa = wa.max(WEIGHT_FLOOR);
                *g += scale * v2 / (wa * wa);
            }
        }
        for g in grad.iter_mut() {
            *g /= total;
        }
        for (g, p) in grad.iter_mut().zip(&self.penalty_dir) {
            *g -= p;
        }
    }
}

fn vertex_centroid(poly: &FeasiblePolytope) -> Vec<f64> {
    let n = poly.num_vertices() as f64;
    let mut c = vec![0.0; poly.k()];
    for v in poly.vertices() {
        for (ci, x) in c.iter_mut().zip(&v.point) {
            *ci += x / n;
        }
    }
    c
}

/// Frank–Wolfe with step `2/(k+2)`; the linear subproblem is a vertex scan.
/// Returns the best iterate seen, including the start.
pub fn optimize_allocation(
    problem: &AllocationProblem<'_>,
    budget: usize,
    start: Option<&[f64]>,
) -> Result<Allocation> {
    let mut w = match start {
        Some(s) => s.to_vec(),
        None => vertex_centroid(problem.poly),
    };
    let prepared = Prepared::new(problem)?;
    let mut inv = vec![0.0; w.len()];
    let mut terms = vec![0.0; prepared.coef.len()];
    let (mut value, _) = prepared.objective(&w, &mut inv, &mut terms);
    let mut best_value = value;
    let mut best = w.clone();
    let mut grad = vec![0.0; w.len()];
    for step in 0..budget {
        let eta = 2.0 / (step as f64 + 2.0);
        let min = terms.iter().copied().fold(f64::INFINITY, f64::min);
        prepared.supergradient(&w, &terms, eta * min.abs(), &mut grad);
        let (target, _) = problem.poly.argmax_linear(&grad);
        let s = problem.poly.vertex(target);
        for (wi, si) in w.iter_mut().zip(s) {
            *wi += eta * (si - *wi);
        }
        (value, _) = prepared.objective(&w, &mut inv, &mut terms);
        if value > best_value {
            best_value = value;
            best.copy_from_slice(&w);
        }
    }
    Ok(Allocation {
        omega: Policy::from_vec_unchecked(best),
        value: best_value,
    })
}

#[derive(Debug, Clone)]
pub struct CharacteristicTime {
    /// `T = 1/value`, `+∞` when the game value is not positive.
    pub time: f64,
    pub value: f64,
    pub omega: Policy,
    pub pi_star: usize,
    pub multiplier: Vec<f64>,
}

impl CharacteristicTime {
    pub fn is_finite(&self) -> bool {
        self.time.is_finite()
    }
}

fn reciprocal(value: f64) -> f64 {
    if value > 0.0 {
        1.0 / value
    } else {
        f64::INFINITY
    }
}

/// Characteristic time of the polytope without Lagrangian penalty.
pub fn characteristic_time(
    means: &[f64],
    poly: &FeasiblePolytope,
    r: f64,
    sigma2: f64,
    budget: usize,
) -> Result<CharacteristicTime> {
    let mut best: Option<(f64, usize, Policy)> = None;
    for pi in poly.r_good_vertices(means, r) {
        let problem = AllocationProblem {
            means,
            poly,
            r,
            sigma2,
            multiplier: &[],
            a_tilde: &[],
            pi_star: pi,
        };
        let alloc = optimize_allocation(&problem, budget, None)?;
        if best.as_ref().map_or(true, |b| alloc.value > b.0) {
            best = Some((alloc.value, pi, alloc.omega));
        }
    }
    let (value, pi_star, omega) = best.expect("argmax vertex is r-good");
    Ok(CharacteristicTime {
        time: reciprocal(value),
        value,
        omega,
        pi_star,
        multiplier: Vec::new(),
    })
}

/// Lagrangian-relaxed characteristic time over a pessimistic polytope:
/// alternates allocation, multiplier box and multiplier argmin.
pub fn characteristic_time_lagrangian(
    means: &[f64],
    poly: &FeasiblePolytope,
    r: f64,
    sigma2: f64,
    a_tilde: &[Vec<f64>],
    budget: usize,
) -> Result<CharacteristicTime> {
    let (pi_star, _) = poly.argmax_linear(means);
    let mut multiplier = vec![0.0; a_tilde.len()];
    let mut omega: Option<Policy> = None;
    for _ in 0..LAGRANGIAN_ROUNDS {
        let problem = AllocationProblem {
            means,
            poly,
            r,
            sigma2,
            multiplier: &multiplier,
            a_tilde,
            pi_star,
        };
        let alloc = optimize_allocation(&problem, budget, omega.as_ref().map(|p| p.weights()))?;
        let d = evaluate_d(alloc.omega.weights(), means, poly, r, sigma2, &multiplier, a_tilde)?;
        let bound = multiplier_box(d.value.max(0.0), a_tilde, alloc.omega.weights());
        multiplier = multiplier_argmin(a_tilde, alloc.omega.weights(), bound);
        omega = Some(alloc.omega);
    }
    let omega = omega.expect("at least one round");
    let value = evaluate_d(omega.weights(), means, poly, r, sigma2, &multiplier, a_tilde)?.value;
    Ok(CharacteristicTime {
        time: reciprocal(value),
        value,
        omega,
        pi_star,
        multiplier,
    })
}
