//! Write true-cost and surrogate-cost heatmaps around the nominal start and
//! render a coarse ASCII view of each.
//!
//!     cargo run --release --example cost_heatmap -- [scenario] [out_dir]

use std::path::PathBuf;

use ocd_mpc::build_scenario;
use ocd_mpc::costdesign::{cma_search, DesignConfig};
use ocd_mpc::costs::{heatmap, CostWeights, Heatmap, HeatmapGrid};

fn ascii(map: &Heatmap) {
    let shades = [' ', '.', ':', '-', '=', '+', '*', '#', '%', '@'];
    let all: Vec<f64> = map.values.iter().flatten().copied().collect();
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Lon runs up the screen, lat left to right.
    for j in (0..map.grid.cols).rev() {
        let line: String = (0..map.grid.rows)
            .map(|i| {
                let x = (map.values[i][j] - lo) / (hi - lo).max(1e-12);
                shades[((x * 9.0).round() as usize).min(9)]
            })
            .collect();
        println!("  |{line}|");
    }
}

fn main() -> ocd_mpc::Result<()> {
    let mut args = std::env::args().skip(1);
    let id: u32 = args.next().map_or(1, |a| a.parse().expect("scenario id"));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "heatmaps".into()));
    std::fs::create_dir_all(&out)?;

    let s = build_scenario(id, false)?;
    let half = s.road.road_half_width + s.road.offroad_band;
    let robot = s.nominal_start.robot;
    let grid = HeatmapGrid {
        lat_min: -half,
        lat_max: half,
        lon_min: robot.lon - 0.2,
        lon_max: robot.lon + 1.0,
        rows: 36,
        cols: 24,
    };
    let found = cma_search(&DesignConfig { n_init: 5, ..DesignConfig::default() }, &s, &s.theta_true)?;
    let maps: [(&str, CostWeights); 2] = [("true", s.theta_true), ("surrogate", found.best)];
    for (name, theta) in maps {
        let map = heatmap(&theta, &s.road, s.v_target, &grid, robot.speed, robot.heading, &s.nominal_start.humans)?;
        let path = out.join(format!("scenario{id}_{name}.csv"));
        map.save_csv(&path)?;
        println!("{name} cost, written to {}", path.display());
        ascii(&map);
    }
    Ok(())
}
