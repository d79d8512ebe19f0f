//! The planner assumes calm air; the executed dynamics push the robot
//! sideways. Compare true-weight and surrogate rollouts with and without wind.
//!
//!     cargo run --release --example wind_mismatch -- [scenario] [trials]

use ocd_mpc::build_scenario;
use ocd_mpc::costdesign::{cma_search, DesignConfig};
use ocd_mpc::harness::compare_experiment;

fn main() -> ocd_mpc::Result<()> {
    let mut args = std::env::args().skip(1);
    let id: u32 = args.next().map_or(1, |a| a.parse().expect("scenario id"));
    let trials: usize = args.next().map_or(7, |a| a.parse().expect("trials"));

    for wind in [false, true] {
        let s = build_scenario(id, wind)?;
        let cfg = DesignConfig { n_init: 5, ..DesignConfig::default() };
        let found = cma_search(&cfg, &s, &s.theta_true)?;
        let (base, learned) = compare_experiment(&s, &found.best, trials, 0)?;
        println!("{}", s.name);
        for r in [&base, &learned] {
            println!("  {:<22} {:.4} +- {:.4}", r.condition, r.mean, r.std_error);
        }
        println!("  reduction {:.1}%", learned.reduction_pct.unwrap_or(f64::NAN));
    }
    Ok(())
}
