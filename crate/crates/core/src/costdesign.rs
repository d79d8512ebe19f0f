//! Search for surrogate planning weights whose MPC rollouts have low true
//! cost.
//!
//! The fitness of a raw 7-vector is the mean cumulative true cost of the
//! rollouts it produces once normalized to unit length and handed to the
//! planner. Two searches are provided: CMA-ES started at the true weights and
//! uniform sampling on the unit sphere.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cma::{default_population, CmaEs};
use crate::costs::{normalize_weights, CostWeights, NUM_FEATURES};
use crate::dynamics::WorldState;
use crate::error::{Error, Result};
use crate::planner::mpc_rollout_with_human;
use crate::rng::{derive_seed, stream};
use crate::scenarios::{sample_initial_state, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig {
    /// Number of candidate weight vectors evaluated.
    pub budget: usize,
    pub sigma0: f64,
    /// Start states per fitness evaluation.
    pub n_init: usize,
    /// CMA-ES start; the scenario's true weights when `None`.
    pub init_mean: Option<[f64; NUM_FEATURES]>,
    pub master_seed: u64,
    /// Reuse one set of start states and rollout seeds for every candidate.
    pub common_random_numbers: bool,
    /// Run IPOP restarts (doubling the population) when a run stalls.
    pub ipop_restarts: bool,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            budget: 85,
            sigma0: 0.05,
            n_init: 1,
            init_mean: None,
            master_seed: 0,
            common_random_numbers: true,
            ipop_restarts: true,
        }
    }
}

impl DesignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config("budget must be >= 1".into()));
        }
        if !(self.sigma0 > 0.0) {
            return Err(Error::Config("sigma0 must be > 0".into()));
        }
        if self.n_init == 0 {
            return Err(Error::Config("n_init must be >= 1".into()));
        }
        Ok(())
    }
}

/// Start states and matching rollout seeds a candidate is evaluated on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSet {
    pub starts: Vec<WorldState>,
    pub seeds: Vec<u64>,
}

impl EvalSet {
    /// `n` start states drawn from the scenario's start distribution on
    /// stream `(label, index)` of `master`, with one rollout seed each.
    pub fn sample(scenario: &Scenario, n: usize, master: u64, label: &str, index: u64) -> Self {
        let mut rng = stream(master, label, index);
        let starts = (0..n).map(|_| sample_initial_state(scenario, &mut rng)).collect();
        let seed_label = format!("{label}/rollout");
        let seeds = (0..n as u64)
            .map(|j| derive_seed(master, &seed_label, index.wrapping_mul(1 << 20) + j))
            .collect();
        Self { starts, seeds }
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub eval_index: usize,
    pub weights: CostWeights,
    /// Mean true cost; `f64::INFINITY` when a rollout diverged.
    pub fitness: f64,
    pub rollout_seeds: Vec<u64>,
}

impl CandidateRecord {
    pub fn diverged(&self) -> bool {
        !self.fitness.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best: CostWeights,
    pub best_fitness: f64,
    pub history: Vec<CandidateRecord>,
}

/// True cost of planning with `theta_plan` from `start`, in expectation over
/// the scenario's true human cases. Diverged rollouts score `+inf`.
pub fn expected_rollout_cost(
    theta_plan: &CostWeights,
    theta_true: &CostWeights,
    scenario: &Scenario,
    start: &WorldState,
    seed: u64,
) -> Result<f64> {
    let cases = scenario.true_human_cases();
    let costs: Vec<Result<f64>> = cases
        .par_iter()
        .map(|(h, p)| {
            match mpc_rollout_with_human(theta_plan, theta_true, scenario, start, h, seed) {
                Ok(r) => Ok(p * r.cumulative_true_cost),
                Err(Error::RolloutDiverged { .. }) => Ok(f64::INFINITY),
                Err(e) => Err(e),
            }
        })
        .collect();
    costs.into_iter().sum()
}

/// Mean true cost of MPC rollouts planned with the normalized `candidate`.
pub fn fitness(
    candidate: &[f64; NUM_FEATURES],
    scenario: &Scenario,
    initial_states: &[WorldState],
    theta_true: &CostWeights,
    seeds: &[u64],
) -> Result<f64> {
    if initial_states.len() != seeds.len() || initial_states.is_empty() {
        return Err(Error::Arity {
            what: "rollout seeds",
            expected: initial_states.len().max(1),
            got: seeds.len(),
        });
    }
    let theta = normalize_weights(candidate)?;
    let per_start: Vec<Result<f64>> = initial_states
        .par_iter()
        .zip(seeds.par_iter())
        .map(|(start, &seed)| expected_rollout_cost(&theta, theta_true, scenario, start, seed))
        .collect();
    let mut total = 0.0;
    for c in per_start {
        total += c?;
    }
    Ok(total / initial_states.len() as f64)
}

/// 7 standard-normal draws scaled to unit length.
pub fn sample_unit_weights<R: Rng + ?Sized>(rng: &mut R) -> CostWeights {
    loop {
        let raw: [f64; NUM_FEATURES] = std::array::from_fn(|_| StandardNormal.sample(rng));
        if let Ok(w) = normalize_weights(&raw) {
            return w;
        }
    }
}

struct Evaluator<'a> {
    cfg: &'a DesignConfig,
    scenario: &'a Scenario,
    theta_true: &'a CostWeights,
    fixed: Option<EvalSet>,
}

impl<'a> Evaluator<'a> {
    fn new(cfg: &'a DesignConfig, scenario: &'a Scenario, theta_true: &'a CostWeights, train: Option<EvalSet>) -> Self {
        let fixed = match train {
            Some(set) => Some(set),
            None if cfg.common_random_numbers => {
                Some(EvalSet::sample(scenario, cfg.n_init, cfg.master_seed, "design/train", 0))
            }
            None => None,
        };
        Self {
            cfg,
            scenario,
            theta_true,
            fixed,
        }
    }

    fn set_for(&self, eval_index: usize) -> EvalSet {
        match &self.fixed {
            Some(set) => set.clone(),
            None => EvalSet::sample(
                self.scenario,
                self.cfg.n_init,
                self.cfg.master_seed,
                "design/fresh",
                eval_index as u64,
            ),
        }
    }

    /// Evaluate a batch concurrently; records come back in input order.
    fn evaluate(&self, raws: &[[f64; NUM_FEATURES]], first_index: usize) -> Result<Vec<CandidateRecord>> {
        raws.par_iter()
            .enumerate()
            .map(|(k, raw)| {
                let eval_index = first_index + k;
                let set = self.set_for(eval_index);
                let weights = normalize_weights(raw)?;
                let fit = fitness(raw, self.scenario, &set.starts, self.theta_true, &set.seeds)?;
                Ok(CandidateRecord {
                    eval_index,
                    weights,
                    fitness: fit,
                    rollout_seeds: set.seeds,
                })
            })
            .collect()
    }
}

fn best_of(history: Vec<CandidateRecord>) -> SearchResult {
    let best = history
        .iter()
        .min_by(|a, b| a.fitness.total_cmp(&b.fitness).then(a.eval_index.cmp(&b.eval_index)))
        .expect("budget >= 1");
    SearchResult {
        best: best.weights,
        best_fitness: best.fitness,
        history: history.clone(),
    }
}

/// CMA-ES over raw weight space, started at the configured mean with
/// `sigma0`. The mean itself is the first candidate of the first generation,
/// so the result is never worse than the start under the same evaluations.
pub fn cma_search(cfg: &DesignConfig, scenario: &Scenario, theta_true: &CostWeights) -> Result<SearchResult> {
    cma_search_on(cfg, scenario, theta_true, None)
}

/// [`cma_search`] with an explicit training set instead of one drawn from
/// `cfg.master_seed`.
pub fn cma_search_on(
    cfg: &DesignConfig,
    scenario: &Scenario,
    theta_true: &CostWeights,
    train: Option<EvalSet>,
) -> Result<SearchResult> {
    cfg.validate()?;
    let eval = Evaluator::new(cfg, scenario, theta_true, train);
    let start = cfg.init_mean.unwrap_or(theta_true.w);
    let mut history: Vec<CandidateRecord> = Vec::with_capacity(cfg.budget);
    let mut restart = 0u64;
    let mut lambda = default_population(NUM_FEATURES);

    while history.len() < cfg.budget {
        let mut es = CmaEs::new(&start, cfg.sigma0, lambda, stream(cfg.master_seed, "design/cma", restart));
        let mut best_per_gen: Vec<f64> = Vec::new();
        loop {
            let remaining = cfg.budget - history.len();
            if remaining == 0 {
                break;
            }
            let mut xs = es.ask();
            if history.is_empty() {
                xs[0] = start.to_vec();
            }
            let raws: Vec<[f64; NUM_FEATURES]> = xs
                .iter()
                .take(remaining)
                .map(|x| std::array::from_fn(|i| x[i]))
                .collect();
            let records = eval.evaluate(&raws, history.len())?;
            let fits: Vec<f64> = records.iter().map(|r| r.fitness).collect();
            best_per_gen.push(fits.iter().copied().fold(f64::INFINITY, f64::min));
            history.extend(records);
            if raws.len() < xs.len() {
                break;
            }
            es.tell(&xs, &fits);
            if cfg.ipop_restarts && stalled(&es, &best_per_gen, &fits) {
                break;
            }
        }
        restart += 1;
        lambda *= 2;
    }
    Ok(best_of(history))
}

fn stalled(es: &CmaEs, best_per_gen: &[f64], last: &[f64]) -> bool {
    const TOL_FUN: f64 = 1e-12;
    let finite: Vec<f64> = last.iter().copied().filter(|f| f.is_finite()).collect();
    let flat_generation = finite.len() == last.len()
        && finite.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - finite.iter().copied().fold(f64::INFINITY, f64::min)
            < TOL_FUN;
    let window = 10 + (30 * NUM_FEATURES) / es.population_size();
    let flat_history = best_per_gen.len() >= window && {
        let recent = &best_per_gen[best_per_gen.len() - window..];
        let hi = recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = recent.iter().copied().fold(f64::INFINITY, f64::min);
        hi - lo < TOL_FUN
    };
    let scale = es.mean().iter().map(|x| x.abs()).fold(1.0, f64::max);
    let collapsed = es.max_axis_std() < 1e-12 * scale;
    (flat_generation && flat_history) || collapsed
}

/// Uniform search over unit-norm weights.
pub fn random_search(cfg: &DesignConfig, scenario: &Scenario, theta_true: &CostWeights) -> Result<SearchResult> {
    random_search_on(cfg, scenario, theta_true, None)
}

pub fn random_search_on(
    cfg: &DesignConfig,
    scenario: &Scenario,
    theta_true: &CostWeights,
    train: Option<EvalSet>,
) -> Result<SearchResult> {
    cfg.validate()?;
    let eval = Evaluator::new(cfg, scenario, theta_true, train);
    let mut rng = stream(cfg.master_seed, "design/random", 0);
    let raws: Vec<[f64; NUM_FEATURES]> = (0..cfg.budget).map(|_| sample_unit_weights(&mut rng).w).collect();
    Ok(best_of(eval.evaluate(&raws, 0)?))
}

/// History as CSV with columns `eval_index,fitness,w1..w7`.
pub fn write_history_csv<W: Write>(history: &[CandidateRecord], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["eval_index".to_string(), "fitness".to_string()];
    header.extend((1..=NUM_FEATURES).map(|k| format!("w{k}")));
    wtr.write_record(&header)?;
    for r in history {
        let mut row = vec![r.eval_index.to_string(), r.fitness.to_string()];
        row.extend(r.weights.w.iter().map(|w| w.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_history_csv(history: &[CandidateRecord], path: &Path) -> Result<()> {
    write_history_csv(history, std::fs::File::create(path)?)
}
