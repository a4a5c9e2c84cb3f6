//! Experiment configs, seed-parallel orchestration and CSV output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{PexError, Result};
use crate::gamesolver::{characteristic_time, BoundedMeanBox, DEFAULT_FW_BUDGET};
use crate::metrics::{summarize, Summary};
use crate::model::{BanditInstance, EnvironmentSpec};
use crate::polytope::FeasiblePolytope;
use crate::presets::preset;
use crate::samplers::{run, AlgorithmId, Exploration, RunRecord, SamplerConfig, ViolationMeasure};
use crate::stopping::ThresholdMode;

pub const DEFAULT_R: f64 = 0.01;
pub const DEFAULT_OUTPUT: &str = "results";
pub const SEED_BASE_ENV: &str = "PEX_SEED_BASE";

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TRACE_FILE: &str = "trace.csv";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    ridge: Option<f64>,
    refresh_every: Option<u64>,
    fw_budget: Option<usize>,
    eta: Option<f64>,
    adagrad_eps: Option<f64>,
    exploration: Option<Exploration>,
    threshold: Option<ThresholdMode>,
    s0: Option<usize>,
    violation: Option<ViolationMeasure>,
    mean_box: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDiagnostics {
    trace_stride: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<String>,
    environment: Option<EnvironmentSpec>,
    algorithms: Vec<AlgorithmId>,
    delta: Option<f64>,
    r: Option<f64>,
    seeds: u64,
    #[serde(default)]
    base_seed: u64,
    horizon_cap: Option<u64>,
    #[serde(default)]
    solver: RawSolver,
    output: Option<PathBuf>,
    #[serde(default)]
    diagnostics: RawDiagnostics,
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub environment: EnvironmentSpec,
    pub algorithms: Vec<AlgorithmId>,
    pub delta: f64,
    pub r: f64,
    pub seeds: u64,
    pub base_seed: u64,
    pub sampler: SamplerConfig,
    pub output: PathBuf,
}

impl ExperimentConfig {
    pub fn from_preset(name: &str, algorithms: Vec<AlgorithmId>, seeds: u64) -> Result<Self> {
        let p = preset(name)?;
        let cfg = ExperimentConfig {
            preset: Some(p.name.to_string()),
            environment: p.environment,
            algorithms,
            delta: p.delta,
            r: DEFAULT_R,
            seeds,
            base_seed: 0,
            sampler: SamplerConfig::default(),
            output: PathBuf::from(DEFAULT_OUTPUT),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn instance(&self) -> Result<BanditInstance> {
        BanditInstance::build(&self.environment, self.r, self.delta)
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds).map(|i| self.base_seed + i).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds < 1 {
            return Err(PexError::config("seeds", "must be at least 1"));
        }
        if self.algorithms.is_empty() {
            return Err(PexError::config("algorithms", "must not be empty"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(PexError::config("delta", "must lie in (0, 1)"));
        }
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(PexError::config("r", "must be finite and non-negative"));
        }
        if self.base_seed.checked_add(self.seeds).is_none() {
            return Err(PexError::config("base_seed", "base_seed + seeds overflows"));
        }
        let inst = self.instance().map_err(|e| match e {
            PexError::Config { .. } => e,
            other => PexError::config("environment", other.to_string()),
        })?;
        self.sampler.validate(inst.k())
    }
}

/// Parses and validates a config from JSON text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "config".to_string() } else { path };
        PexError::config(field, e.into_inner().to_string())
    })?;

    let (preset_name, environment, preset_delta) = match (raw.preset, raw.environment) {
        (Some(_), Some(_)) => {
            return Err(PexError::config(
                "environment",
                "give either `preset` or `environment`, not both",
            ))
        }
        (None, None) => {
            return Err(PexError::config(
                "preset",
                "one of `preset` or `environment` is required",
            ))
        }
        (Some(name), None) => {
            let p = preset(&name)?;
            (Some(p.name.to_string()), p.environment, Some(p.delta))
        }
        (None, Some(env)) => (None, env, None),
    };
    let delta = raw
        .delta
        .or(preset_delta)
        .ok_or_else(|| PexError::config("delta", "required when `environment` is given"))?;

    let s = raw.solver;
    let defaults = SamplerConfig::default();
    let mean_box = s
        .mean_box
        .map(|[lo, hi]| BoundedMeanBox::new(lo, hi))
        .transpose()
        .map_err(|e| PexError::config("solver.mean_box", e.to_string()))?;
    let sampler = SamplerConfig {
        ridge: s.ridge.unwrap_or(defaults.ridge),
        refresh_every: s.refresh_every.unwrap_or(defaults.refresh_every),
        horizon_cap: raw.horizon_cap.unwrap_or(defaults.horizon_cap),
        fw_budget: s.fw_budget.unwrap_or(defaults.fw_budget),
        eta: s.eta.unwrap_or(defaults.eta),
        adagrad_eps: s.adagrad_eps.unwrap_or(defaults.adagrad_eps),
        exploration: s.exploration.unwrap_or(defaults.exploration),
        threshold: s.threshold.unwrap_or(defaults.threshold),
        s0: s.s0,
        violation: s.violation.unwrap_or(defaults.violation),
        trace_stride: raw.diagnostics.trace_stride,
        mean_box,
    };
    let cfg = ExperimentConfig {
        preset: preset_name,
        environment,
        algorithms: raw.algorithms,
        delta,
        r: raw.r.unwrap_or(DEFAULT_R),
        seeds: raw.seeds,
        base_seed: raw.base_seed,
        sampler,
        output: raw.output.unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT)),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a config file; `PEX_SEED_BASE` overrides `base_seed`.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|source| PexError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut cfg = parse_config(&text)?;
    if let Ok(v) = std::env::var(SEED_BASE_ENV) {
        cfg.base_seed = v
            .trim()
            .parse()
            .map_err(|_| PexError::config(SEED_BASE_ENV, format!("not an unsigned integer: {v:?}")))?;
        cfg.validate()?;
    }
    Ok(cfg)
}

/// Applies `f` to every seed in order.
pub fn map_seeds_sequential<T, F>(seeds: &[u64], f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    seeds.iter().map(|&s| f(s)).collect()
}

/// Applies `f` to every seed on the rayon pool; output order matches input.
#[cfg(feature = "parallel")]
pub fn map_seeds_parallel<T, F>(seeds: &[u64], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    seeds.par_iter().map(|&s| f(s)).collect()
}

/// Parallel when the `parallel` feature is on, sequential otherwise.
pub fn map_seeds<T, F>(seeds: &[u64], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_seeds_parallel(seeds, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_seeds_sequential(seeds, f)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    /// Sorted by `(algorithm, seed)`.
    pub records: Vec<RunRecord>,
    pub summaries: Vec<Summary>,
}

/// Runs every `(algorithm, seed)` pair. `threads = Some(1)` forces the
/// sequential path.
pub fn run_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let instance = cfg.instance()?;
    let seeds = cfg.seed_list();
    let mut records = Vec::with_capacity(seeds.len() * cfg.algorithms.len());
    let mut algorithms = cfg.algorithms.clone();
    algorithms.sort_by_key(|a| a.name());
    algorithms.dedup();
    for &alg in &algorithms {
        let job = |seed: u64| run(&instance, alg, seed, &cfg.sampler);
        let results = match threads {
            Some(1) => map_seeds_sequential(&seeds, job),
            #[cfg(feature = "parallel")]
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| PexError::InvalidArgument(format!("thread pool: {e}")))?
                .install(|| map_seeds_parallel(&seeds, job)),
            _ => map_seeds(&seeds, job),
        };
        for r in results {
            records.push(r?);
        }
    }
    records.sort_by(|a, b| (a.algorithm.name(), a.seed).cmp(&(b.algorithm.name(), b.seed)));
    let summaries = records
        .chunk_by(|a, b| a.algorithm == b.algorithm)
        .map(summarize)
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentOutcome { records, summaries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub algorithm: AlgorithmId,
    pub seed: u64,
    pub tau: u64,
    pub correct: bool,
    pub feasible: bool,
    pub cum_violation: f64,
    pub censored: bool,
}

impl From<&RunRecord> for ResultRow {
    fn from(r: &RunRecord) -> Self {
        ResultRow {
            algorithm: r.algorithm,
            seed: r.seed,
            tau: r.tau,
            correct: r.correct,
            feasible: r.feasible,
            cum_violation: r.cumulative_violation,
            censored: r.censored,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCsvRow {
    pub algorithm: AlgorithmId,
    pub seed: u64,
    pub t: u64,
    pub glr: f64,
    pub threshold: f64,
    pub rho: f64,
    pub n_vertices: usize,
    /// Row-major `n_vertices × K` coordinates, space separated.
    pub vertices: String,
}

impl TraceCsvRow {
    pub fn vertex_list(&self, k: usize) -> Vec<Vec<f64>> {
        let flat: Vec<f64> = self
            .vertices
            .split_whitespace()
            .filter_map(|x| x.parse().ok())
            .collect();
        flat.chunks(k).map(|c| c.to_vec()).collect()
    }
}

pub fn trace_rows(records: &[RunRecord]) -> Vec<TraceCsvRow> {
    let mut rows = Vec::new();
    for r in records {
        for s in &r.trace {
            let vertices = s
                .vertices
                .iter()
                .flatten()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            rows.push(TraceCsvRow {
                algorithm: r.algorithm,
                seed: r.seed,
                t: s.t,
                glr: s.glr,
                threshold: s.threshold,
                rho: s.rho,
                n_vertices: s.vertices.len(),
                vertices,
            });
        }
    }
    rows
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let csv_err = |source| PexError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| PexError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let csv_err = |source| PexError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err)
}

/// Writes `results.csv`, `summary.csv` and, when any run carries a trace,
/// `trace.csv` into `dir`. Returns the written paths.
pub fn write_outcome(outcome: &ExperimentOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| PexError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut written = Vec::new();
    let results: Vec<ResultRow> = outcome.records.iter().map(ResultRow::from).collect();
    let path = dir.join(RESULTS_FILE);
    write_csv(&path, &results)?;
    written.push(path);
    let path = dir.join(SUMMARY_FILE);
    write_csv(&path, &outcome.summaries)?;
    written.push(path);
    if outcome.records.iter().any(|r| !r.trace.is_empty()) {
        let path = dir.join(TRACE_FILE);
        write_csv(&path, &trace_rows(&outcome.records))?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub arm: usize,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mu: f64,
    pub t_constrained: f64,
    pub t_bai: f64,
}

impl SweepSpec {
    pub fn grid(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.lo];
        }
        let h = (self.hi - self.lo) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.lo + h * i as f64).collect()
    }
}

/// Characteristic time with the true constraints and on the bare simplex
/// while one arm's mean moves along a grid.
pub fn sweep_lowerbound(cfg: &ExperimentConfig, spec: SweepSpec) -> Result<Vec<SweepRow>> {
    let k = cfg.environment.means.len();
    if spec.arm >= k {
        return Err(PexError::config("arm", format!("must be below K = {k}")));
    }
    if spec.steps == 0 {
        return Err(PexError::config("steps", "must be at least 1"));
    }
    if !(spec.lo.is_finite() && spec.hi.is_finite() && spec.lo <= spec.hi) {
        return Err(PexError::config("lo", "need finite lo <= hi"));
    }
    let instance = cfg.instance()?;
    let simplex = FeasiblePolytope::simplex(k)?;
    let budget = cfg.sampler.fw_budget.max(DEFAULT_FW_BUDGET);
    let sigma2 = cfg.environment.sigma2;
    spec.grid()
        .into_iter()
        .map(|x| {
            let mut means = cfg.environment.means.clone();
            means[spec.arm] = x;
            let tc = characteristic_time(&means, instance.feasible_set(), cfg.r, sigma2, budget)?;
            let tb = characteristic_time(&means, &simplex, cfg.r, sigma2, budget)?;
            Ok(SweepRow {
                mu: x,
                t_constrained: tc.time,
                t_bai: tb.time,
            })
        })
        .collect()
}

pub fn write_sweep(rows: &[SweepRow], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| PexError::Io {
            path: parent.display().to_string(),
            source,
        })?;
    }
    write_csv(path, rows)
}

pub fn sweep_to_string(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|source| PexError::Csv {
            path: "<stdout>".into(),
            source,
        })?;
    }
    let bytes = w.into_inner().map_err(|e| PexError::Io {
        path: "<stdout>".into(),
        source: e.into_error(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
