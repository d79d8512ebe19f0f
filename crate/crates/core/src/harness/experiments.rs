use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costdesign::{cma_search_on, expected_rollout_cost, DesignConfig, EvalSet};
use crate::costs::CostWeights;
use crate::error::Result;
use crate::rng::{derive_seed, stream};
use crate::scenarios::{sample_initial_state, Scenario};

pub const RESULT_SCHEMA_VERSION: u32 = 1;

/// Per-trial true costs of one planning condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub schema_version: u32,
    pub scenario_id: u32,
    pub condition: String,
    pub weights: CostWeights,
    pub per_trial: Vec<f64>,
    pub mean: f64,
    pub std_error: f64,
    /// `100 * (mean_true - mean) / mean_true` against the true-cost
    /// condition run on the same trials.
    pub reduction_pct: Option<f64>,
    pub seeds: Vec<u64>,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean; zero for a single sample.
pub fn std_error(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

pub fn reduction_pct(mean_true: f64, mean_cond: f64) -> Option<f64> {
    (mean_true != 0.0).then(|| 100.0 * (mean_true - mean_cond) / mean_true)
}

/// The trials a comparison runs: one sampled start and rollout seed each.
pub fn comparison_trials(scenario: &Scenario, trials: usize, master_seed: u64) -> EvalSet {
    let mut rng = stream(master_seed, "compare/start", 0);
    let starts = (0..trials).map(|_| sample_initial_state(scenario, &mut rng)).collect();
    let seeds = (0..trials as u64)
        .map(|k| derive_seed(master_seed, "compare/rollout", k))
        .collect();
    EvalSet { starts, seeds }
}

/// True cost of planning with `theta_plan` on every start in `set`.
pub fn costs_on(theta_plan: &CostWeights, scenario: &Scenario, set: &EvalSet) -> Result<Vec<f64>> {
    set.starts
        .par_iter()
        .zip(set.seeds.par_iter())
        .map(|(start, &seed)| expected_rollout_cost(theta_plan, &scenario.theta_true, scenario, start, seed))
        .collect()
}

fn result(
    scenario: &Scenario,
    condition: &str,
    weights: CostWeights,
    per_trial: Vec<f64>,
    mean_true: Option<f64>,
    seeds: &[u64],
) -> ExperimentResult {
    let m = mean(&per_trial);
    ExperimentResult {
        schema_version: RESULT_SCHEMA_VERSION,
        scenario_id: scenario.id,
        condition: condition.to_string(),
        weights,
        std_error: std_error(&per_trial),
        reduction_pct: reduction_pct(mean_true.unwrap_or(m), m),
        mean: m,
        per_trial,
        seeds: seeds.to_vec(),
    }
}

fn condition_name(base: &str, scenario: &Scenario) -> String {
    if scenario.wind.enabled {
        format!("{base}_plus_wind")
    } else {
        base.to_string()
    }
}

/// Paired comparison of planning with the true weights and with `learned`:
/// both conditions see the same sampled starts and rollout seeds.
pub fn compare_experiment(
    scenario: &Scenario,
    learned: &CostWeights,
    trials: usize,
    master_seed: u64,
) -> Result<(ExperimentResult, ExperimentResult)> {
    let set = comparison_trials(scenario, trials.max(1), master_seed);
    let true_costs = costs_on(&scenario.theta_true, scenario, &set)?;
    let learned_costs = costs_on(learned, scenario, &set)?;
    let base = result(
        scenario,
        &condition_name("true_cost", scenario),
        scenario.theta_true,
        true_costs,
        None,
        &set.seeds,
    );
    let cond = result(
        scenario,
        &condition_name("surrogate", scenario),
        *learned,
        learned_costs,
        Some(base.mean),
        &set.seeds,
    );
    Ok((base, cond))
}

/// Mean test-set true cost for one (replicate, training-set size) cell, or
/// the true-weights baseline when `n_init` is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationRow {
    pub replicate: usize,
    pub n_init: Option<usize>,
    pub condition: String,
    pub mean_test_cost: f64,
    pub train_fitness: Option<f64>,
    pub weights: CostWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationTable {
    pub schema_version: u32,
    pub scenario_id: u32,
    pub test_size: usize,
    pub replicates: usize,
    pub n_init_values: Vec<usize>,
    pub rows: Vec<GeneralizationRow>,
}

impl GeneralizationTable {
    pub fn baseline(&self, replicate: usize) -> Option<&GeneralizationRow> {
        self.rows
            .iter()
            .find(|r| r.replicate == replicate && r.n_init.is_none())
    }

    pub fn learned(&self, replicate: usize, n_init: usize) -> Option<&GeneralizationRow> {
        self.rows
            .iter()
            .find(|r| r.replicate == replicate && r.n_init == Some(n_init))
    }

    /// Replicates in which weights trained on `n_init` starts beat the true
    /// weights on the test set.
    pub fn wins(&self, n_init: usize) -> usize {
        (0..self.replicates)
            .filter(|&r| match (self.learned(r, n_init), self.baseline(r)) {
                (Some(l), Some(b)) => l.mean_test_cost < b.mean_test_cost,
                _ => false,
            })
            .count()
    }
}

/// Train on `n_init` sampled starts, test on a shared held-out set, for every
/// training size and replicate.
///
/// Training and test starts come from separate labeled streams, so no
/// training set shares draws with its replicate's test set.
pub fn generalization_experiment(
    scenario: &Scenario,
    n_init_values: &[usize],
    test_size: usize,
    replicates: usize,
    master_seed: u64,
    design: &DesignConfig,
) -> Result<GeneralizationTable> {
    let mut rows = Vec::new();
    for r in 0..replicates {
        let rep = r as u64;
        let test = EvalSet::sample(scenario, test_size.max(1), master_seed, "generalize/test", rep);
        let baseline = costs_on(&scenario.theta_true, scenario, &test)?;
        rows.push(GeneralizationRow {
            replicate: r,
            n_init: None,
            condition: "true_cost".into(),
            mean_test_cost: mean(&baseline),
            train_fitness: None,
            weights: scenario.theta_true,
        });
        for &n in n_init_values {
            let train = EvalSet::sample(
                scenario,
                n,
                master_seed,
                &format!("generalize/train/{n}"),
                rep,
            );
            let cfg = DesignConfig {
                n_init: n,
                master_seed: derive_seed(master_seed, "generalize/cma", rep),
                ..design.clone()
            };
            let found = cma_search_on(&cfg, scenario, &scenario.theta_true, Some(train))?;
            let test_costs = costs_on(&found.best, scenario, &test)?;
            rows.push(GeneralizationRow {
                replicate: r,
                n_init: Some(n),
                condition: "surrogate".into(),
                mean_test_cost: mean(&test_costs),
                train_fitness: Some(found.best_fitness),
                weights: found.best,
            });
        }
    }
    Ok(GeneralizationTable {
        schema_version: RESULT_SCHEMA_VERSION,
        scenario_id: scenario.id,
        test_size,
        replicates,
        n_init_values: n_init_values.to_vec(),
        rows,
    })
}
