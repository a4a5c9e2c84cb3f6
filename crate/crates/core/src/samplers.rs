//! Sequential exploration algorithms: LATS, LAGEX and the baselines, with
//! C-tracking, GLR stopping and the end-of-run recommendation.

use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PexError, Result};
use crate::estimation::{EstimatorState, PessimisticModel, DEFAULT_RIDGE};
use crate::gamesolver::{
    confusing_instance, evaluate_d, gaussian_kl, min_over_neighbors, multiplier_argmin,
    multiplier_box, optimize_allocation, AllocationProblem, BoundedMeanBox, DEFAULT_FW_BUDGET,
};
use crate::metrics::violation_increment;
use crate::model::{BanditInstance, Policy};
use crate::polytope::{dot, project_simplex, solve_basis, FeasiblePolytope};
use crate::stopping::{glr_statistic, StoppingConfig, ThresholdMode};

pub const DEFAULT_HORIZON_CAP: u64 = 1_000_000;
pub const DEFAULT_ETA: f64 = 1.0;
pub const DEFAULT_ADAGRAD_EPS: f64 = 1e-8;
pub const FEASIBILITY_CHECK_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmId {
    Lats,
    Lagex,
    Uniform,
    Ctns,
    Cge,
    Ptns,
    CtnsWlag,
    CgeWlag,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 8] = [
        AlgorithmId::Lats,
        AlgorithmId::Lagex,
        AlgorithmId::Uniform,
        AlgorithmId::Ctns,
        AlgorithmId::Cge,
        AlgorithmId::Ptns,
        AlgorithmId::CtnsWlag,
        AlgorithmId::CgeWlag,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmId::Lats => "lats",
            AlgorithmId::Lagex => "lagex",
            AlgorithmId::Uniform => "uniform",
            AlgorithmId::Ctns => "ctns",
            AlgorithmId::Cge => "cge",
            AlgorithmId::Ptns => "ptns",
            AlgorithmId::CtnsWlag => "ctns_wlag",
            AlgorithmId::CgeWlag => "cge_wlag",
        }
    }

    /// Algorithms that are told the true constraint matrix.
    pub fn knows_constraints(self) -> bool {
        matches!(self, AlgorithmId::Ctns | AlgorithmId::Cge)
    }

    fn uses_multiplier(self) -> bool {
        matches!(self, AlgorithmId::Lats | AlgorithmId::Lagex)
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmId {
    type Err = PexError;

    fn from_str(s: &str) -> Result<Self> {
        AlgorithmId::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| PexError::UnknownAlgorithm(s.to_string()))
    }
}

/// Exploration function `g(t)` used by the game explorers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exploration {
    /// `ln t`
    #[default]
    Log,
    /// `3 ln t + ln ln t`
    Analysis,
}

impl Exploration {
    pub fn eval(self, t: u64) -> f64 {
        let t = t.max(3) as f64;
        match self {
            Exploration::Log => t.ln(),
            Exploration::Analysis => 3.0 * t.ln() + t.ln().ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationMeasure {
    /// The tracked allocation `ω_t`.
    #[default]
    Allocation,
    /// Empirical proportions `N_t / t`.
    Empirical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub ridge: f64,
    pub refresh_every: u64,
    pub horizon_cap: u64,
    pub fw_budget: usize,
    pub eta: f64,
    pub adagrad_eps: f64,
    pub exploration: Exploration,
    pub threshold: ThresholdMode,
    /// `S₀` for the theoretical threshold; `None` means `K`.
    pub s0: Option<usize>,
    pub violation: ViolationMeasure,
    /// Snapshot stride for the feasible-set trace; `None` disables it.
    pub trace_stride: Option<u64>,
    /// Known mean box; `None` means `[min μ − 1, max μ + 1]`.
    pub mean_box: Option<BoundedMeanBox>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            ridge: DEFAULT_RIDGE,
            refresh_every: 1,
            horizon_cap: DEFAULT_HORIZON_CAP,
            fw_budget: DEFAULT_FW_BUDGET,
            eta: DEFAULT_ETA,
            adagrad_eps: DEFAULT_ADAGRAD_EPS,
            exploration: Exploration::Log,
            threshold: ThresholdMode::Practical,
            s0: None,
            violation: ViolationMeasure::Allocation,
            trace_stride: None,
            mean_box: None,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self, k: usize) -> Result<()> {
        if !(self.ridge > 0.0) {
            return Err(PexError::config("ridge", "must be positive"));
        }
        if self.refresh_every == 0 {
            return Err(PexError::config("refresh_every", "must be at least 1"));
        }
        if self.horizon_cap < k as u64 {
            return Err(PexError::config(
                "horizon_cap",
                format!("must be at least K = {k}"),
            ));
        }
        if self.fw_budget == 0 {
            return Err(PexError::config("fw_budget", "must be at least 1"));
        }
        if !(self.eta > 0.0) {
            return Err(PexError::config("eta", "must be positive"));
        }
        if !(self.adagrad_eps > 0.0) {
            return Err(PexError::config("adagrad_eps", "must be positive"));
        }
        if let Some(s0) = self.s0 {
            if s0 < 1 || s0 > k {
                return Err(PexError::config("s0", format!("must lie in [1, {k}]")));
            }
        }
        if self.trace_stride == Some(0) {
            return Err(PexError::config("trace_stride", "must be at least 1"));
        }
        Ok(())
    }
}

/// Lowest-index `argmin_a N_a − cum_alloc_a`.
pub fn ctrack_next(counts: &[u64], cum_alloc: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (a, (&n, &c)) in counts.iter().zip(cum_alloc).enumerate() {
        let lag = n as f64 - c;
        if lag < best.1 {
            best = (a, lag);
        }
    }
    best.0
}

/// `K (1 + √t)`.
pub fn tracking_bound(k: usize, t: u64) -> f64 {
    k as f64 * (1.0 + (t as f64).sqrt())
}

/// Snapshot of the estimated feasible set.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: u64,
    pub vertices: Vec<Vec<f64>>,
    pub glr: f64,
    pub threshold: f64,
    /// `ρ(t, δ)` at the last tracked allocation.
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub algorithm: AlgorithmId,
    pub tau: u64,
    /// Recommended vertex re-solved against the true constraints; falls
    /// back to the raw vertex when that basis is singular.
    pub recommendation: Policy,
    /// Recommended vertex of the estimated polytope.
    pub raw_recommendation: Policy,
    pub correct: bool,
    pub feasible: bool,
    pub cumulative_violation: f64,
    pub censored: bool,
    pub final_glr: f64,
    pub final_threshold: f64,
    /// Largest `max_a |N_a − Σ_s ω_{a,s}| / (K(1+√t))` seen.
    pub max_tracking_ratio: f64,
    pub trace: Vec<TraceRow>,
}

impl RunRecord {
    pub fn tracking_ok(&self) -> bool {
        self.max_tracking_ratio <= 1.0
    }
}

/// Mutable per-run state.
#[derive(Debug, Clone)]
pub struct RunState {
    pub estimator: EstimatorState,
    pub cum_alloc: Vec<f64>,
    pub multiplier: Vec<f64>,
    pub adagrad_sq: Vec<f64>,
    /// Current allocation iterate (AdaGrad state or Frank–Wolfe warm start).
    pub omega: Vec<f64>,
    pub t: u64,
    pub stopped: bool,
    pub recommendation: Option<Policy>,
}

impl RunState {
    pub fn new(k: usize, d: usize, ridge: f64) -> Self {
        RunState {
            estimator: EstimatorState::new(k, d, ridge),
            cum_alloc: vec![0.0; k],
            multiplier: vec![0.0; d],
            adagrad_sq: vec![0.0; k],
            omega: vec![1.0 / k as f64; k],
            t: 0,
            stopped: false,
            recommendation: None,
        }
    }

    pub fn max_tracking_deviation(&self) -> f64 {
        self.estimator
            .counts()
            .iter()
            .zip(&self.cum_alloc)
            .map(|(&n, c)| (n as f64 - c).abs())
            .fold(0.0, f64::max)
    }
}

/// Geometry the sampler works with at one step.
struct View {
    model: PessimisticModel,
    estimated: Rc<FeasiblePolytope>,
}

struct Runner<'a> {
    instance: &'a BanditInstance,
    algorithm: AlgorithmId,
    config: &'a SamplerConfig,
    stopping: StoppingConfig,
    mean_box: BoundedMeanBox,
    simplex: Rc<FeasiblePolytope>,
    truth: Rc<FeasiblePolytope>,
    rng: ChaCha8Rng,
    state: RunState,
    view: Option<View>,
}

impl<'a> Runner<'a> {
    fn new(
        instance: &'a BanditInstance,
        algorithm: AlgorithmId,
        seed: u64,
        config: &'a SamplerConfig,
    ) -> Result<Self> {
        let k = instance.k();
        config.validate(k)?;
        let stopping = StoppingConfig::new(
            config.threshold,
            config.s0.unwrap_or(k),
            k,
            instance.delta(),
        )?;
        Ok(Runner {
            instance,
            algorithm,
            config,
            stopping,
            mean_box: config
                .mean_box
                .unwrap_or_else(|| BoundedMeanBox::around(instance.means(), 1.0)),
            simplex: Rc::new(FeasiblePolytope::simplex(k)?),
            truth: Rc::new(instance.feasible_set().clone()),
            rng: ChaCha8Rng::seed_from_u64(seed),
            state: RunState::new(k, instance.d(), config.ridge),
            view: None,
        })
    }

    fn pull(&mut self, arm: usize) {
        let obs = self.instance.sample_step(self.state.t + 1, arm, &mut self.rng);
        self.state.estimator.update(&obs);
        self.state.t += 1;
    }

    fn refresh(&mut self) {
        let est = &self.state.estimator;
        let model = est.pessimistic_model(self.instance.delta());
        let estimated = FeasiblePolytope::from_matrix(self.instance.k(), &model.a_tilde)
            .map(Rc::new)
            .unwrap_or_else(|_| Rc::clone(&self.simplex));
        self.view = Some(View { model, estimated });
    }

    fn view(&self) -> &View {
        self.view.as_ref().expect("view is built before use")
    }

    /// Polytope used for stopping, recommendation and allocation.
    fn working_polytope(&self) -> Rc<FeasiblePolytope> {
        if self.algorithm.knows_constraints() {
            Rc::clone(&self.truth)
        } else {
            Rc::clone(&self.view().estimated)
        }
    }

    /// Constraint matrix the algorithm believes in.
    fn working_constraints(&self) -> &[Vec<f64>] {
        if self.algorithm.knows_constraints() {
            self.instance.constraints()
        } else {
            &self.view().model.a_tilde
        }
    }

    fn snapshot(&self, glr: f64, threshold: f64) -> TraceRow {
        let est = &self.state.estimator;
        TraceRow {
            t: self.state.t,
            vertices: self
                .view()
                .estimated
                .vertices()
                .iter()
                .map(|v| v.point.clone())
                .collect(),
            glr,
            threshold,
            rho: est.rho_radius(self.instance.delta(), &self.state.omega),
        }
    }

    fn wants_snapshot(&self) -> bool {
        let k = self.instance.k() as u64;
        match self.config.trace_stride {
            None => false,
            Some(stride) => {
                let t = self.state.t;
                t == k || (t > k && (t - 1) % stride == 0)
            }
        }
    }

    /// Frank–Wolfe allocation for the candidate vertex.
    fn frank_wolfe(&self, poly: &FeasiblePolytope, pi_star: usize, multiplier: &[f64]) -> Result<Vec<f64>> {
        let mu_hat = &self.view().model.mu_hat;
        let a = self.working_constraints();
        let problem = AllocationProblem {
            means: mu_hat,
            poly,
            r: self.instance.r(),
            sigma2: self.instance.sigma2(),
            multiplier,
            a_tilde: a,
            pi_star,
        };
        let start = poly.contains(&self.state.omega, 1e-9).then_some(self.state.omega.as_slice());
        Ok(optimize_allocation(&problem, self.config.fw_budget, start)?
            .omega
            .into_inner())
    }

    /// Box bound and new multiplier for allocation `omega`, using the
    /// previous multiplier inside `D`.
    fn update_multiplier(&mut self, omega: &[f64]) -> Result<()> {
        if !self.algorithm.uses_multiplier() {
            return Ok(());
        }
        let view = self.view();
        let d = evaluate_d(
            omega,
            &view.model.mu_hat,
            &view.estimated,
            self.instance.r(),
            self.instance.sigma2(),
            &self.state.multiplier,
            &view.model.a_tilde,
        )?;
        let bound = multiplier_box(d.value.max(0.0), &view.model.a_tilde, omega);
        self.state.multiplier = multiplier_argmin(&view.model.a_tilde, omega, bound);
        Ok(())
    }

    /// Allocation for this step, before tracking.
    fn allocation(&mut self, pi_star: usize) -> Result<Vec<f64>> {
        let k = self.instance.k();
        let omega = match self.algorithm {
            AlgorithmId::Uniform => vec![1.0 / k as f64; k],
            AlgorithmId::Lats | AlgorithmId::CtnsWlag | AlgorithmId::Ctns => {
                let poly = self.working_polytope();
                self.frank_wolfe(&poly, pi_star, &self.state.multiplier)?
            }
            AlgorithmId::Ptns => {
                let mu_hat = &self.view().model.mu_hat;
                let (best_arm, _) = self.simplex.argmax_linear(mu_hat);
                let problem = AllocationProblem {
                    means: mu_hat,
                    poly: &self.simplex,
                    r: self.instance.r(),
                    sigma2: self.instance.sigma2(),
                    multiplier: &[],
                    a_tilde: &[],
                    pi_star: best_arm,
                };
                let free = optimize_allocation(&problem, self.config.fw_budget, None)?;
                self.view()
                    .estimated
                    .project(free.omega.weights())
                    .policy
                    .into_inner()
            }
            AlgorithmId::Lagex | AlgorithmId::Cge | AlgorithmId::CgeWlag => {
                self.state.omega.clone()
            }
        };
        self.update_multiplier(&omega)?;
        Ok(omega)
    }

    /// AdaGrad step on the game loss after observing the new sample.
    fn adagrad_update(&mut self, omega: &[f64], pi_star: usize, poly: &FeasiblePolytope) -> Result<()> {
        let k = self.instance.k();
        let sigma2 = self.instance.sigma2();
        let r = self.instance.r();
        let mu_hat = self.state.estimator.mu_hat();
        let counts = self.state.estimator.counts().to_vec();
        let (_, nbr) = min_over_neighbors(omega, &mu_hat, poly, pi_star, r, sigma2)?;
        let (lambda, _) = confusing_instance(
            &mu_hat,
            omega,
            poly.vertex(pi_star),
            poly.vertex(nbr),
            r,
            sigma2,
        )?;
        let g = self.config.exploration.eval(self.state.t);
        let q = self.mean_box.loss_bound(sigma2);
        let penalty_grad: Vec<f64> = (0..k)
            .map(|a| {
                self.state
                    .multiplier
                    .iter()
                    .zip(&self.view().model.a_tilde)
                    .map(|(l, row)| l * row[a])
                    .sum::<f64>()
            })
            .collect();
        let mut next = self.state.omega.clone();
        for a in 0..k {
            let n = counts[a] as f64;
            let half = (2.0 * sigma2 * g / n).sqrt();
            let u = (g / n)
                .max(gaussian_kl(mu_hat[a] - half, lambda[a], sigma2))
                .max(gaussian_kl(mu_hat[a] + half, lambda[a], sigma2));
            let grad = (u - penalty_grad[a]).clamp(-q, q);
            self.state.adagrad_sq[a] += grad * grad;
            next[a] += self.config.eta * grad / (self.state.adagrad_sq[a] + self.config.adagrad_eps).sqrt();
        }
        self.state.omega = match self.algorithm {
            AlgorithmId::Lagex => project_simplex(&next),
            AlgorithmId::Cge => self.instance.feasible_set().project(&next).policy.into_inner(),
            _ => self.view().estimated.project(&next).policy.into_inner(),
        };
        Ok(())
    }

    fn violation(&self, omega: &[f64]) -> f64 {
        match self.config.violation {
            ViolationMeasure::Allocation => violation_increment(self.instance.constraints(), omega),
            ViolationMeasure::Empirical => {
                let t = self.state.t as f64;
                let freq: Vec<f64> = self
                    .state
                    .estimator
                    .counts()
                    .iter()
                    .map(|&n| n as f64 / t)
                    .collect();
                violation_increment(self.instance.constraints(), &freq)
            }
        }
    }

    fn run(mut self, seed: u64) -> Result<RunRecord> {
        let k = self.instance.k();
        for a in 0..k {
            self.pull(a);
        }
        let mut trace = Vec::new();
        let mut cumulative_violation = 0.0;
        let mut max_tracking_ratio: f64 = 0.0;
        let mut since_refresh = 0;
        loop {
            if self.view.is_none() || since_refresh >= self.config.refresh_every {
                self.refresh();
                since_refresh = 0;
            }
            if let Some(view) = self.view.as_mut() {
                view.model.mu_hat = self.state.estimator.mu_hat();
            }
            let r = self.instance.r();
            let sigma2 = self.instance.sigma2();
            let poly = self.working_polytope();
            let mu_hat = self.view().model.mu_hat.clone();
            let counts = self.state.estimator.counts().to_vec();
            let glr = glr_statistic(&counts, &mu_hat, &poly, r, sigma2)?;
            let threshold = self.stopping.threshold(self.state.t, &counts, self.instance.d());
            if self.wants_snapshot() {
                trace.push(self.snapshot(glr, threshold));
            }
            let (pi_star, _) = poly.argmax_linear(&mu_hat);
            let stop = glr > threshold;
            if stop || self.state.t >= self.config.horizon_cap {
                let raw = poly.vertex(pi_star).to_vec();
                let basis = &poly.vertices()[pi_star].basis;
                let truth = self.instance.feasible_set();
                let resolved = solve_basis(k, truth.constraints(), basis);
                let feasible = resolved
                    .as_deref()
                    .is_some_and(|p| truth.contains(p, FEASIBILITY_CHECK_TOL));
                let (_, best) = truth.argmax_linear(self.instance.means());
                let correct = feasible
                    && resolved
                        .as_deref()
                        .is_some_and(|p| dot(self.instance.means(), p) >= best - r);
                let recommendation = match resolved {
                    Some(p) if p.iter().all(|x| *x >= -FEASIBILITY_CHECK_TOL) => {
                        let clipped: Vec<f64> = p.iter().map(|x| x.max(0.0)).collect();
                        let s: f64 = clipped.iter().sum();
                        Policy::from_vec_unchecked(clipped.iter().map(|x| x / s).collect())
                    }
                    _ => Policy::from_vec_unchecked(raw.clone()),
                };
                self.state.stopped = stop;
                self.state.recommendation = Some(recommendation.clone());
                return Ok(RunRecord {
                    seed,
                    algorithm: self.algorithm,
                    tau: self.state.t,
                    recommendation,
                    raw_recommendation: Policy::from_vec_unchecked(raw),
                    correct,
                    feasible,
                    cumulative_violation,
                    censored: !stop,
                    final_glr: glr,
                    final_threshold: threshold,
                    max_tracking_ratio,
                    trace,
                });
            }

            let omega = self.allocation(pi_star)?;
            for (c, w) in self.state.cum_alloc.iter_mut().zip(&omega) {
                *c += w;
            }
            let arm = ctrack_next(self.state.estimator.counts(), &self.state.cum_alloc);
            self.pull(arm);
            since_refresh += 1;
            let ratio = self.state.max_tracking_deviation() / tracking_bound(k, self.state.t);
            max_tracking_ratio = max_tracking_ratio.max(ratio);
            cumulative_violation += self.violation(&omega);
            match self.algorithm {
                AlgorithmId::Lagex | AlgorithmId::Cge | AlgorithmId::CgeWlag => {
                    self.adagrad_update(&omega, pi_star, &poly)?;
                }
                _ => self.state.omega = omega,
            }
        }
    }
}

/// Runs one algorithm on one seed until the GLR test fires or the horizon
/// cap is reached.
pub fn run(
    instance: &BanditInstance,
    algorithm: AlgorithmId,
    seed: u64,
    config: &SamplerConfig,
) -> Result<RunRecord> {
    Runner::new(instance, algorithm, seed, config)?.run(seed)
}
