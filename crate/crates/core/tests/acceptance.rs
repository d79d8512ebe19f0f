//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Uses the same defaults as the `ocd-mpc` command line.

use std::process::ExitCode;
use std::time::Instant;

use ocd_mpc::costdesign::{cma_search, fitness, random_search, DesignConfig, EvalSet, SearchResult};
use ocd_mpc::costs::{cost, heatmap, normalize_weights, HeatmapGrid, NUM_FEATURES};
use ocd_mpc::harness::cli::DEFAULT_N_INIT;
use ocd_mpc::harness::{compare_experiment, generalization_experiment, ExperimentResult};
use ocd_mpc::human::posterior_from_likelihoods;
use ocd_mpc::planner::{mpc_rollout, mpc_rollout_with_human, plan_gradient, plan_objective};
use ocd_mpc::rng::stream;
use ocd_mpc::{build_scenario, Belief, CarState, Control, ControlSequence, CostWeights, HumanHypothesis, Scenario, WorldState};
use rand::Rng;

const BUDGET: usize = 85;
const TRIALS: usize = 7;
const DESIGN_SEED: u64 = 0;
const COMPARE_SEED: u64 = 0;

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!("criterion {id}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn design(s: &Scenario, seed: u64) -> SearchResult {
    let cfg = DesignConfig {
        budget: BUDGET,
        n_init: DEFAULT_N_INIT,
        master_seed: seed,
        ..DesignConfig::default()
    };
    cma_search(&cfg, s, &s.theta_true).expect("design")
}

fn compare(s: &Scenario, learned: &CostWeights) -> (ExperimentResult, ExperimentResult) {
    compare_experiment(s, learned, TRIALS, COMPARE_SEED).expect("compare")
}

fn final_lane(s: &Scenario, theta: &CostWeights, human: &HumanHypothesis) -> (usize, f64) {
    let r = mpc_rollout_with_human(theta, &s.theta_true, s, &s.nominal_start, human, 0).expect("rollout");
    let lat = r.final_state.expect("final state").robot.lat;
    (s.road.closest_lane(lat), lat)
}

fn reveal_step(h: &HumanHypothesis) -> usize {
    match h {
        HumanHypothesis::MergeAtReveal { reveal_step, .. } => *reveal_step,
        HumanHypothesis::FixedSpeed { .. } => 0,
    }
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut report = Report { failures: 0 };
    let mut surrogate_means = Vec::new();

    // 1-3: design on each scenario, then a paired 7-trial comparison.
    for id in 1..=3u32 {
        let s = build_scenario(id, false).unwrap();
        let found = design(&s, DESIGN_SEED);
        let (base, cond) = compare(&s, &found.best);
        let red = cond.reduction_pct.unwrap_or(f64::NEG_INFINITY);
        surrogate_means.push(cond.mean);
        match id {
            1 => report.line("1", red >= 40.0, format!("scenario 1 reduction {red:.1}% (need >= 40); true {:.4} surrogate {:.4}", base.mean, cond.mean)),
            2 => {
                let right = s.road.lane_centers.len() - 1;
                let (lane_true, lat_true) = final_lane(&s, &s.theta_true, &s.true_human);
                let (lane_sur, lat_sur) = final_lane(&s, &found.best, &s.true_human);
                let pass = red >= 10.0 && lane_sur == right && lane_true != right;
                report.line(
                    "2",
                    pass,
                    format!(
                        "scenario 2 reduction {red:.1}% (need >= 10); final lat true {lat_true:+.3} (lane {lane_true}), surrogate {lat_sur:+.3} (lane {lane_sur}), rightmost lane {right}"
                    ),
                );
            }
            _ => {
                let mut lanes = Vec::new();
                let mut speed_ok = true;
                let mut ratios = Vec::new();
                for h in &s.belief0.hypotheses {
                    let r = mpc_rollout_with_human(&found.best, &s.theta_true, &s, &s.nominal_start, h, 0).unwrap();
                    let k = reveal_step(h).max(1);
                    let v0 = r.states[0].robot.speed;
                    let mean_v = r.states[..k].iter().map(|w| w.robot.speed).sum::<f64>() / k as f64;
                    ratios.push(mean_v / v0);
                    speed_ok &= mean_v >= 0.9 * v0;
                    let lat = r.final_state.unwrap().robot.lat;
                    lanes.push(s.road.closest_lane(lat));
                }
                let differ = lanes.windows(2).all(|p| p[0] != p[1]);
                report.line(
                    "3",
                    red >= 20.0 && speed_ok && differ,
                    format!(
                        "scenario 3 reduction {red:.1}% (need >= 20); pre-reveal speed ratio {ratios:.3?} (need >= 0.9); final lanes {lanes:?} (need distinct)"
                    ),
                );
            }
        }
    }

    // 4: CMA-ES against random search, five paired seeds per scenario.
    let mut detail = Vec::new();
    let mut pass4 = true;
    for id in 1..=3u32 {
        let s = build_scenario(id, false).unwrap();
        let (mut cma, mut rnd) = (0.0, 0.0);
        for seed in 0..5u64 {
            let cfg = DesignConfig { budget: BUDGET, n_init: DEFAULT_N_INIT, master_seed: seed, ..DesignConfig::default() };
            cma += cma_search(&cfg, &s, &s.theta_true).unwrap().best_fitness / 5.0;
            rnd += random_search(&cfg, &s, &s.theta_true).unwrap().best_fitness / 5.0;
        }
        pass4 &= cma <= rnd;
        detail.push(format!("s{id} cma {cma:.4} vs random {rnd:.4}"));
    }
    report.line("4", pass4, format!("mean best fitness over 5 seeds: {}", detail.join("; ")));

    // 5: the same protocol with wind in the executed dynamics.
    let mut detail = Vec::new();
    let mut pass5 = true;
    for id in 1..=3u32 {
        let s = build_scenario(id, true).unwrap();
        let found = design(&s, DESIGN_SEED);
        let (_, cond) = compare(&s, &found.best);
        let red = cond.reduction_pct.unwrap_or(f64::NEG_INFINITY);
        let calm = surrogate_means[id as usize - 1];
        let rel = (cond.mean - calm).abs() / calm;
        pass5 &= red > 0.0 && rel <= 0.25;
        detail.push(format!("s{id} reduction {red:.1}%, surrogate {:.4} vs calm {calm:.4} ({:.1}% apart)", cond.mean, 100.0 * rel));
    }
    report.line("5", pass5, format!("need reduction > 0 and within 25%: {}", detail.join("; ")));

    // 6: generalization on scenario 3 with five training starts.
    let s3 = build_scenario(3, false).unwrap();
    let cfg = DesignConfig { budget: BUDGET, ..DesignConfig::default() };
    let t6 = Instant::now();
    let table = generalization_experiment(&s3, &[5], 24, 10, 0, &cfg).unwrap();
    let wins = table.wins(5);
    report.line(
        "6",
        wins >= 8,
        format!("n_init 5 beats true weights in {wins}/10 replicates (need >= 8), {:.0}s", t6.elapsed().as_secs_f64()),
    );

    // 7: property checks, timed.
    let t7 = Instant::now();
    let props = property_suite();
    let secs = t7.elapsed().as_secs_f64();
    let failed: Vec<&String> = props.iter().filter(|(_, ok)| !ok).map(|(n, _)| n).collect();
    report.line(
        "7",
        failed.is_empty() && secs < 120.0,
        format!("{} checks, failed {:?}, {secs:.1}s (need < 120s)", props.len(), failed),
    );

    // 8: self-comparison.
    let mut pass8 = true;
    for id in 1..=3u32 {
        for wind in [false, true] {
            let s = build_scenario(id, wind).unwrap();
            let (_, same) = compare(&s, &s.theta_true);
            pass8 &= same.reduction_pct == Some(0.0);
        }
    }
    report.line("8", pass8, "compare(theta_true, theta_true) reduction exactly 0 in every scenario".into());

    println!(
        "{} of 8 criteria passed in {:.0}s",
        8 - report.failures,
        started.elapsed().as_secs_f64()
    );
    if report.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn merge(lane: usize) -> HumanHypothesis {
    HumanHypothesis::MergeAtReveal { target_lane: lane, reveal_step: 6, merge_steer: 0.8, cruise_speed: 0.7 }
}

fn property_suite() -> Vec<(String, bool)> {
    let mut out = Vec::new();
    let mut rng = stream(2024, "acceptance/properties", 0);
    let s3 = build_scenario(3, false).unwrap();

    // Planner gradient against central differences.
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mut raw: [f64; NUM_FEATURES] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        raw[3] = 0.0;
        let theta = normalize_weights(&raw).unwrap();
        let w = WorldState {
            robot: CarState::new(rng.random_range(-0.22..0.22), 0.0, rng.random_range(-0.2..0.2), rng.random_range(0.3..1.3)),
            humans: vec![CarState::new(rng.random_range(-0.1..0.1), rng.random_range(0.1..0.6), 0.0, 0.7)],
            t: rng.random_range(0..10),
        };
        let p = rng.random_range(0.05..0.95);
        let belief = Belief::new(vec![merge(1), merge(2)], vec![p, 1.0 - p]).unwrap();
        let seq = ControlSequence(
            (0..5)
                .map(|_| Control::new(rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9)))
                .collect(),
        );
        let f = |q: &ControlSequence| plan_objective(&theta, &w, &belief, q, &s3.road, s3.v_target, &s3.dynamics).unwrap();
        let g = plan_gradient(&theta, &w, &belief, &seq, &s3.road, s3.v_target, &s3.dynamics).unwrap();
        let h = 1e-6;
        for i in 0..5 {
            for c in 0..2 {
                let (mut a, mut b) = (seq.clone(), seq.clone());
                if c == 0 {
                    a.0[i].steer += h;
                    b.0[i].steer -= h;
                } else {
                    a.0[i].accel += h;
                    b.0[i].accel -= h;
                }
                let fd = (f(&a) - f(&b)) / (2.0 * h);
                worst = worst.max((g[i][c] - fd).abs() / (1.0 + fd.abs()));
            }
        }
    }
    out.push(("planner gradient vs finite differences (100 instances)".into(), worst < 1e-5));

    // Belief normalization and pre-reveal stasis.
    let mut ok = true;
    for _ in 0..200 {
        let n = rng.random_range(2..6);
        let probs: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let total: f64 = probs.iter().sum();
        let b = Belief::new(vec![HumanHypothesis::FixedSpeed { speed: 0.5 }; n], probs.iter().map(|p| p / total).collect()).unwrap();
        let lik: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
        let post = posterior_from_likelihoods(&b, &lik).unwrap();
        ok &= (post.belief.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12;
    }
    out.push(("posterior sums to one".into(), ok));
    let mut ok = true;
    for h in &s3.belief0.hypotheses {
        let r = mpc_rollout_with_human(&s3.theta_true, &s3.theta_true, &s3, &s3.nominal_start, h, 0).unwrap();
        let k = reveal_step(h);
        ok &= r.beliefs[..=k].iter().all(|b| *b == s3.belief0.probs);
    }
    out.push(("belief unchanged before the reveal".into(), ok));

    // Normalization.
    let mut ok = normalize_weights(&[0.0; NUM_FEATURES]).is_err();
    for _ in 0..200 {
        let raw: [f64; NUM_FEATURES] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
        let once = normalize_weights(&raw).unwrap();
        let twice = normalize_weights(&once.w).unwrap();
        ok &= (once.norm() - 1.0).abs() < 1e-12 && once.w.iter().zip(&twice.w).all(|(a, b)| (a - b).abs() < 1e-15);
    }
    out.push(("unit-norm normalization idempotent, zero rejected".into(), ok));

    // Fitness oracle.
    let s1 = build_scenario(1, true).unwrap();
    let set = EvalSet::sample(&s1, 3, 5, "acceptance/oracle", 0);
    let raw = [0.4, 0.7, 0.5, 0.2, 0.0, 0.1, 0.1];
    let theta = normalize_weights(&raw).unwrap();
    let got = fitness(&raw, &s1, &set.starts, &s1.theta_true, &set.seeds).unwrap();
    let want = set
        .starts
        .iter()
        .zip(&set.seeds)
        .map(|(st, &sd)| mpc_rollout(&theta, &s1.theta_true, &s1, st, sd).unwrap().cumulative_true_cost)
        .sum::<f64>()
        / 3.0;
    out.push(("fitness equals mean of rollouts".into(), (got - want).abs() < 1e-12));

    // Rollout length, determinism and re-scoring.
    let mut ok = true;
    for id in 1..=3 {
        let s = build_scenario(id, true).unwrap();
        let a = mpc_rollout(&s.theta_true, &s.theta_true, &s, &s.nominal_start, 4).unwrap();
        let b = mpc_rollout(&s.theta_true, &s.theta_true, &s, &s.nominal_start, 4).unwrap();
        ok &= a == b && a.len() == s.horizon;
        let again: f64 = a.states.iter().zip(&a.controls).map(|(x, u)| cost(&s.theta_true, x, u, &s.road, s.v_target)).sum();
        ok &= (again - a.cumulative_true_cost).abs() < 1e-12;
    }
    out.push(("rollout length, determinism, re-scoring".into(), ok));

    // Budget exactness.
    let cfg = DesignConfig { budget: BUDGET, n_init: 1, ..DesignConfig::default() };
    let s1 = build_scenario(1, false).unwrap();
    let ok = cma_search(&cfg, &s1, &s1.theta_true).unwrap().history.len() == BUDGET
        && random_search(&cfg, &s1, &s1.theta_true).unwrap().history.len() == BUDGET;
    out.push(("85 evaluations exactly".into(), ok));

    // Cost linearity.
    let mut ok = true;
    for _ in 0..200 {
        let a: [f64; NUM_FEATURES] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let b: [f64; NUM_FEATURES] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let k = rng.random_range(-2.0..2.0);
        let mut w = s1.nominal_start.clone();
        w.robot.lat = rng.random_range(-0.3..0.3);
        let c = |x: [f64; NUM_FEATURES]| cost(&CostWeights::raw(x, ocd_mpc::WeightsLabel::Surrogate), &w, &Control::ZERO, &s1.road, s1.v_target);
        let lhs = c(std::array::from_fn(|i| k * a[i] + b[i]));
        ok &= (lhs - (k * c(a) + c(b))).abs() < 1e-10 * (1.0 + lhs.abs());
    }
    out.push(("cost linear in weights".into(), ok));

    // Heatmap cells and symmetry.
    let g = HeatmapGrid { lat_min: -0.35, lat_max: 0.35, lon_min: 0.0, lon_max: 1.0, rows: 15, cols: 5 };
    let sym = normalize_weights(&[0.5, 1.0, 2.0, 0.7, 0.3, 0.4, 0.3]).unwrap();
    let map = heatmap(&sym, &s1.road, s1.v_target, &g, 0.6, 0.0, &[]).unwrap();
    let mut ok = true;
    for i in 0..g.rows {
        for j in 0..g.cols {
            let w = WorldState { robot: CarState::new(g.lat_at(i), g.lon_at(j), 0.0, 0.6), humans: vec![], t: 0 };
            ok &= map.values[i][j] == cost(&sym, &w, &Control::ZERO, &s1.road, s1.v_target);
            ok &= (map.values[i][j] - map.values[g.rows - 1 - i][j]).abs() < 1e-9;
        }
    }
    out.push(("heatmap cell consistency and mirror symmetry".into(), ok));
    out
}
