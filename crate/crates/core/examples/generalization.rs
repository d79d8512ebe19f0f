//! Train surrogates on 1, 2 and 5 sampled starts and test them on held-out
//! starts. Defaults are a small smoke run; pass larger sizes for the full
//! protocol.
//!
//!     cargo run --release --example generalization -- [scenario] [test_size] [replicates]

use ocd_mpc::build_scenario;
use ocd_mpc::costdesign::DesignConfig;
use ocd_mpc::harness::generalization_experiment;

fn main() -> ocd_mpc::Result<()> {
    let mut args = std::env::args().skip(1);
    let id: u32 = args.next().map_or(3, |a| a.parse().expect("scenario id"));
    let test_size: usize = args.next().map_or(8, |a| a.parse().expect("test size"));
    let replicates: usize = args.next().map_or(2, |a| a.parse().expect("replicates"));

    let s = build_scenario(id, false)?;
    let sizes = [1, 2, 5];
    let table = generalization_experiment(&s, &sizes, test_size, replicates, 0, &DesignConfig::default())?;

    print!("{:>9} {:>10}", "replicate", "true");
    for n in sizes {
        print!(" {:>10}", format!("n={n}"));
    }
    println!();
    for r in 0..replicates {
        print!("{r:>9} {:>10.4}", table.baseline(r).map_or(f64::NAN, |b| b.mean_test_cost));
        for n in sizes {
            print!(" {:>10.4}", table.learned(r, n).map_or(f64::NAN, |l| l.mean_test_cost));
        }
        println!();
    }
    for n in sizes {
        println!("n_init {n}: beats true weights in {}/{replicates}", table.wins(n));
    }
    Ok(())
}
