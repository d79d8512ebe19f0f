//! Export a built-in scenario to JSON, edit it, load it back and run it.
//! The same file works with `ocd-mpc simulate --scenario path.json`.
//!
//!     cargo run --release --example custom_scenario -- [out.json]

use ocd_mpc::planner::mpc_rollout;
use ocd_mpc::{build_scenario, Scenario};

fn main() -> ocd_mpc::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "custom_scenario.json".into());

    let mut s = build_scenario(1, false)?;
    s.name = "short-horizon, slower traffic".into();
    s.nominal_start.humans[0].speed = 0.4;
    s.true_human = ocd_mpc::HumanHypothesis::FixedSpeed { speed: 0.4 };
    s.belief0 = ocd_mpc::Belief::certain(s.true_human);
    s.horizon = 20;
    std::fs::write(&path, s.to_json()?)?;
    println!("wrote {path}");

    let loaded = Scenario::load(std::path::Path::new(&path))?;
    loaded.validate()?;
    let r = mpc_rollout(&loaded.theta_true, &loaded.theta_true, &loaded, &loaded.nominal_start, 0)?;
    let end = r.final_state.as_ref().expect("non-empty rollout");
    println!(
        "{}: {} steps, true cost {:.4}, robot ends at lat {:+.3} speed {:.3}",
        loaded.name,
        r.len(),
        r.cumulative_true_cost,
        end.robot.lat,
        end.robot.speed
    );
    Ok(())
}
