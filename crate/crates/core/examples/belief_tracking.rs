//! Follow the robot's belief about which lane the merging driver will take,
//! once for each true behavior.
//!
//!     cargo run --release --example belief_tracking

use ocd_mpc::build_scenario;
use ocd_mpc::human::HumanHypothesis;
use ocd_mpc::planner::mpc_rollout_with_human;

fn describe(h: &HumanHypothesis) -> String {
    match h {
        HumanHypothesis::MergeAtReveal { target_lane, reveal_step, .. } => {
            format!("merges into lane {target_lane} from step {reveal_step}")
        }
        HumanHypothesis::FixedSpeed { speed } => format!("holds speed {speed}"),
    }
}

fn main() -> ocd_mpc::Result<()> {
    let s = build_scenario(3, false)?;
    let names: Vec<String> = s.belief0.hypotheses.iter().map(describe).collect();
    for truth in &s.belief0.hypotheses {
        println!("true driver {}", describe(truth));
        let r = mpc_rollout_with_human(&s.theta_true, &s.theta_true, &s, &s.nominal_start, truth, 0)?;
        for (t, (probs, w)) in r.beliefs.iter().zip(&r.states).enumerate() {
            let human = &w.humans[0];
            println!(
                "  t={t:>2}  P = [{:.3}, {:.3}]  human lat {:+.3}  robot lat {:+.3}",
                probs[0], probs[1], human.lat, w.robot.lat
            );
        }
        println!("  cumulative true cost {:.4}\n", r.cumulative_true_cost);
    }
    println!("hypotheses: 0 = {}, 1 = {}", names[0], names[1]);
    Ok(())
}
