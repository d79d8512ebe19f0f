//! `ocd-mpc` command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::costdesign::{cma_search, random_search, save_history_csv, DesignConfig};
use crate::costs::{heatmap, HeatmapGrid};
use crate::error::{Error, Result};
use crate::harness::experiments::{compare_experiment, generalization_experiment};
use crate::harness::io::{resolve_scenario, resolve_weights, run_dir, save_rollout, save_weights, write_json};
use crate::planner::mpc_rollout;

/// Training starts per fitness evaluation when `--n-init` is not given.
pub const DEFAULT_N_INIT: usize = 5;

#[derive(Debug, Parser)]
#[command(name = "ocd-mpc", version, about = "Optimal cost design for MPC on highway scenarios")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Cma,
    Random,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One MPC rollout from the scenario's nominal start.
    Simulate {
        /// Scenario id (1, 2, 3) or scenario JSON file.
        #[arg(long)]
        scenario: String,
        /// `true` or a weights JSON file.
        #[arg(long, default_value = "true")]
        weights: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Lateral wind in the executed dynamics.
        #[arg(long)]
        wind: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search for surrogate weights.
    Design {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 85)]
        budget: usize,
        #[arg(long, default_value_t = 0.05)]
        sigma0: f64,
        #[arg(long, default_value_t = DEFAULT_N_INIT)]
        n_init: usize,
        #[arg(long, value_enum, default_value_t = Method::Cma)]
        method: Method,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        wind: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Paired comparison of the true weights against `--weights`.
    Compare {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        weights: String,
        #[arg(long, default_value_t = 7)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        wind: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cost over robot positions around the nominal start.
    Heatmap {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value = "true")]
        weights: String,
        /// Cells as ROWSxCOLS (rows index lateral position).
        #[arg(long, default_value = "41x61", value_parser = parse_grid)]
        grid: (usize, usize),
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train on growing numbers of sampled starts, test on held-out starts.
    Generalize {
        #[arg(long)]
        scenario: String,
        #[arg(long, value_delimiter = ',', default_value = "1,2,5,10")]
        n_init_list: Vec<usize>,
        #[arg(long, default_value_t = 24)]
        test_size: usize,
        #[arg(long, default_value_t = 10)]
        replicates: usize,
        #[arg(long, default_value_t = 85)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_grid(s: &str) -> std::result::Result<(usize, usize), String> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected ROWSxCOLS, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    let (r, c) = (parse(r)?, parse(c)?);
    if r < 2 || c < 2 {
        return Err("grid needs at least 2 cells per axis".into());
    }
    Ok((r, c))
}

/// Parse `args` (including the program name) and run; the returned code is
/// 0 on success, 2 on a usage error and 1 on a runtime error.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate { scenario, weights, seed, wind, out } => {
            let s = resolve_scenario(&scenario, wind)?;
            let theta = resolve_weights(&weights, &s)?;
            let dir = run_dir(out.as_deref(), seed)?;
            let rollout = mpc_rollout(&theta, &s.theta_true, &s, &s.nominal_start, seed)?;
            let path = dir.join("rollout.json");
            save_rollout(&s, &theta, &rollout, &path)?;
            let last = rollout.final_state.as_ref().map_or(&s.nominal_start, |w| w);
            println!(
                "scenario {} ({}) seed {seed}: {} steps, true cost {:.6}",
                s.id,
                s.name,
                rollout.len(),
                rollout.cumulative_true_cost
            );
            println!("final robot lat {:.4} lon {:.4} speed {:.4}", last.robot.lat, last.robot.lon, last.robot.speed);
            println!("wrote {}", path.display());
        }
        Command::Design { scenario, budget, sigma0, n_init, method, seed, wind, out } => {
            let s = resolve_scenario(&scenario, wind)?;
            let cfg = DesignConfig {
                budget,
                sigma0,
                n_init,
                master_seed: seed,
                ..DesignConfig::default()
            };
            cfg.validate()?;
            let dir = run_dir(out.as_deref(), seed)?;
            let result = match method {
                Method::Cma => cma_search(&cfg, &s, &s.theta_true)?,
                Method::Random => random_search(&cfg, &s, &s.theta_true)?,
            };
            save_history_csv(&result.history, &dir.join("history.csv"))?;
            save_weights(&result.best, Some(result.best_fitness), &dir.join("best_weights.json"))?;
            write_json(&cfg, &dir.join("design_config.json"))?;
            println!(
                "scenario {} {:?} search, {} evaluations, best fitness {:.6}",
                s.id,
                method,
                result.history.len(),
                result.best_fitness
            );
            println!("best weights {}", fmt_weights(&result.best.w));
            println!("wrote {}", dir.display());
        }
        Command::Compare { scenario, weights, trials, seed, wind, out } => {
            let s = resolve_scenario(&scenario, wind)?;
            let learned = resolve_weights(&weights, &s)?;
            if trials == 0 {
                return Err(Error::Config("--trials must be >= 1".into()));
            }
            let dir = run_dir(out.as_deref(), seed)?;
            let (base, cond) = compare_experiment(&s, &learned, trials, seed)?;
            write_json(&[&base, &cond], &dir.join("compare.json"))?;
            for r in [&base, &cond] {
                println!("{:<22} mean {:.6} +- {:.6} over {} trials", r.condition, r.mean, r.std_error, r.per_trial.len());
            }
            match cond.reduction_pct {
                Some(p) => println!("reduction {p:.2}%"),
                None => println!("reduction undefined (true-cost mean is zero)"),
            }
            println!("wrote {}", dir.display());
        }
        Command::Heatmap { scenario, weights, grid, out } => {
            let s = resolve_scenario(&scenario, false)?;
            let theta = resolve_weights(&weights, &s)?;
            let dir = run_dir(out.as_deref(), 0)?;
            let g = default_grid(&s, grid);
            let start = &s.nominal_start;
            let map = heatmap(&theta, &s.road, s.v_target, &g, start.robot.speed, start.robot.heading, &start.humans)?;
            let path = dir.join("heatmap.csv");
            map.save_csv(&path)?;
            println!(
                "{}x{} cells over lat [{:.3}, {:.3}] lon [{:.3}, {:.3}]",
                g.rows, g.cols, g.lat_min, g.lat_max, g.lon_min, g.lon_max
            );
            println!("wrote {}", path.display());
        }
        Command::Generalize { scenario, n_init_list, test_size, replicates, budget, seed, out } => {
            let s = resolve_scenario(&scenario, false)?;
            if test_size == 0 || replicates == 0 || n_init_list.iter().any(|&n| n == 0) {
                return Err(Error::Config("test size, replicates and n_init values must be >= 1".into()));
            }
            let cfg = DesignConfig { budget, ..DesignConfig::default() };
            cfg.validate()?;
            let dir = run_dir(out.as_deref(), seed)?;
            let table = generalization_experiment(&s, &n_init_list, test_size, replicates, seed, &cfg)?;
            write_json(&table, &dir.join("generalize.json"))?;
            for &n in &n_init_list {
                println!("n_init {n:>3}: beats true weights in {}/{replicates} replicates", table.wins(n));
            }
            println!("wrote {}", dir.display());
        }
    }
    Ok(())
}

/// Lateral extent covers the road plus the off-road band; longitudinal
/// extent spans from just behind the robot to past the furthest human.
fn default_grid(s: &crate::scenarios::Scenario, (rows, cols): (usize, usize)) -> HeatmapGrid {
    let half = s.road.road_half_width + s.road.offroad_band;
    let robot = s.nominal_start.robot.lon;
    let far = s.nominal_start.humans.iter().map(|h| h.lon).fold(robot, f64::max);
    HeatmapGrid {
        lat_min: -half,
        lat_max: half,
        lon_min: robot - 0.2,
        lon_max: far + 0.6,
        rows,
        cols,
    }
}

fn fmt_weights(w: &[f64]) -> String {
    let parts: Vec<String> = w.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("3x4"), Ok((3, 4)));
        assert_eq!(parse_grid("10X2"), Ok((10, 2)));
        assert!(parse_grid("1x4").is_err());
        assert!(parse_grid("34").is_err());
    }

    #[test]
    fn unknown_subcommand_is_a_usage_error() {
        assert_eq!(main_with_args(["ocd-mpc", "fly"]), ExitCode::from(2));
        assert_eq!(main_with_args(["ocd-mpc", "simulate", "--bogus"]), ExitCode::from(2));
    }
}
