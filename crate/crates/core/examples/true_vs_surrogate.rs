//! Plan with the true weights, search for surrogate weights, and compare the
//! two executed trajectories under the true cost.
//!
//!     cargo run --release --example true_vs_surrogate -- [scenario] [budget]

use ocd_mpc::costdesign::{cma_search, DesignConfig};
use ocd_mpc::planner::mpc_rollout;
use ocd_mpc::{build_scenario, Rollout};

fn print_path(label: &str, r: &Rollout) {
    println!("{label}: true cost {:.4}", r.cumulative_true_cost);
    for (t, w) in r.states.iter().enumerate().step_by(3) {
        println!(
            "  t={t:>2}  lat {:+.3}  lon {:.3}  speed {:.3}",
            w.robot.lat, w.robot.lon, w.robot.speed
        );
    }
    if let Some(f) = &r.final_state {
        println!("  end   lat {:+.3}  lon {:.3}  speed {:.3}", f.robot.lat, f.robot.lon, f.robot.speed);
    }
}

fn main() -> ocd_mpc::Result<()> {
    let mut args = std::env::args().skip(1);
    let id: u32 = args.next().map_or(1, |a| a.parse().expect("scenario id"));
    let budget: usize = args.next().map_or(85, |a| a.parse().expect("budget"));

    let s = build_scenario(id, false)?;
    let cfg = DesignConfig { budget, n_init: 5, ..DesignConfig::default() };
    let found = cma_search(&cfg, &s, &s.theta_true)?;
    println!("true weights      {:.3?}", s.theta_true.w);
    println!("surrogate weights {:.3?}", found.best.w);

    let truth = mpc_rollout(&s.theta_true, &s.theta_true, &s, &s.nominal_start, 0)?;
    let surrogate = mpc_rollout(&found.best, &s.theta_true, &s, &s.nominal_start, 0)?;
    print_path("planning with true weights", &truth);
    print_path("planning with surrogate", &surrogate);
    Ok(())
}
