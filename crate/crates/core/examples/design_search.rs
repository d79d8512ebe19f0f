//! CMA-ES against random search at equal budget, printing the best-so-far
//! curve of each.
//!
//!     cargo run --release --example design_search -- [scenario] [budget] [seed]

use ocd_mpc::build_scenario;
use ocd_mpc::costdesign::{cma_search, random_search, CandidateRecord, DesignConfig};

fn best_so_far(history: &[CandidateRecord]) -> Vec<f64> {
    history
        .iter()
        .scan(f64::INFINITY, |best, r| {
            *best = best.min(r.fitness);
            Some(*best)
        })
        .collect()
}

fn main() -> ocd_mpc::Result<()> {
    let mut args = std::env::args().skip(1);
    let id: u32 = args.next().map_or(2, |a| a.parse().expect("scenario id"));
    let budget: usize = args.next().map_or(85, |a| a.parse().expect("budget"));
    let seed: u64 = args.next().map_or(0, |a| a.parse().expect("seed"));

    let s = build_scenario(id, false)?;
    let cfg = DesignConfig { budget, n_init: 5, master_seed: seed, ..DesignConfig::default() };
    let cma = cma_search(&cfg, &s, &s.theta_true)?;
    let random = random_search(&cfg, &s, &s.theta_true)?;

    let (a, b) = (best_so_far(&cma.history), best_so_far(&random.history));
    println!("{:>5} {:>10} {:>10}", "evals", "cma", "random");
    for k in (0..budget).step_by(10).chain([budget - 1]) {
        println!("{:>5} {:>10.4} {:>10.4}", k + 1, a[k], b[k]);
    }
    println!("cma best    {:.4} {:.3?}", cma.best_fitness, cma.best.w);
    println!("random best {:.4} {:.3?}", random.best_fitness, random.best.w);
    Ok(())
}
