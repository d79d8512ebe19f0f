//! Linear costs over a fixed basis of seven smooth driving features.
//!
//! | index | feature |
//! |-------|---------|
//! | 0 | squared speed error `(speed - v_target)^2` |
//! | 1 | collision spike: compact bump around each human car |
//! | 2 | off-road: smoothstep past the road edge |
//! | 3 | squared distance to the closest lane center |
//! | 4..=6 | squared distance to lane center 0, 1, 2 |
//!
//! Lateral distances are measured in lane widths, so a car on a lane line has
//! a closest-lane feature of `0.25` whatever the road scale is.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{CarState, Control, WorldState};
use crate::error::{Error, Result};
use crate::planner::Rollout;

pub const NUM_FEATURES: usize = 7;

pub const SPEED: usize = 0;
pub const COLLISION: usize = 1;
pub const OFF_ROAD: usize = 2;
pub const CLOSEST_LANE: usize = 3;
pub const LANE: [usize; 3] = [4, 5, 6];

/// Three-lane straight road and the length scales of the smooth features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadGeometry {
    /// Lateral lane centers, sorted ascending (left to right).
    pub lane_centers: [f64; 3],
    pub lane_width: f64,
    pub road_half_width: f64,
    /// Width of the off-road smoothstep ramp beyond the road edge.
    pub offroad_band: f64,
    /// Lateral radius of the collision bump.
    pub collision_radius_lat: f64,
    /// Longitudinal radius of the collision bump.
    pub collision_radius_lon: f64,
}

impl RoadGeometry {
    /// Three lanes of `lane_width` centered on `lat = 0`, with bump radii of
    /// 0.6 lane widths laterally and `collision_radius_lon` longitudinally.
    pub fn three_lane(lane_width: f64, collision_radius_lon: f64) -> Self {
        Self {
            lane_centers: [-lane_width, 0.0, lane_width],
            lane_width,
            road_half_width: 1.5 * lane_width,
            offroad_band: 0.1,
            collision_radius_lat: 0.6 * lane_width,
            collision_radius_lon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.lane_centers;
        if !(c[0] <= c[1] && c[1] <= c[2]) {
            return Err(Error::Config("lane centers must be sorted".into()));
        }
        let outer = c[0].abs().max(c[2].abs()) + self.lane_width / 2.0;
        if self.road_half_width < outer - 1e-12 {
            return Err(Error::Config(format!(
                "road half width {} narrower than outer lane edge {outer}",
                self.road_half_width
            )));
        }
        if !(self.lane_width > 0.0
            && self.offroad_band > 0.0
            && self.collision_radius_lat > 0.0
            && self.collision_radius_lon > 0.0)
        {
            return Err(Error::Config("road length scales must be positive".into()));
        }
        Ok(())
    }

    /// Index of the lane whose center is laterally closest to `lat`.
    pub fn closest_lane(&self, lat: f64) -> usize {
        (0..3)
            .min_by(|&a, &b| {
                (lat - self.lane_centers[a])
                    .abs()
                    .total_cmp(&(lat - self.lane_centers[b]).abs())
            })
            .unwrap_or(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; NUM_FEATURES]);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightsLabel {
    True,
    Surrogate,
}

/// Weights of a linear cost over the feature basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub w: [f64; NUM_FEATURES],
    pub label: WeightsLabel,
}

impl CostWeights {
    pub const ZERO: CostWeights = CostWeights {
        w: [0.0; NUM_FEATURES],
        label: WeightsLabel::Surrogate,
    };

    pub fn raw(w: [f64; NUM_FEATURES], label: WeightsLabel) -> Self {
        Self { w, label }
    }

    pub fn norm(&self) -> f64 {
        self.w.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn with_label(mut self, label: WeightsLabel) -> Self {
        self.label = label;
        self
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.w.iter_mut().for_each(|x| *x *= c);
        self
    }
}

/// Scale `raw` to unit l2 norm. The result is labeled as a surrogate.
pub fn normalize_weights(raw: &[f64; NUM_FEATURES]) -> Result<CostWeights> {
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::ZeroWeights);
    }
    let mut w = *raw;
    w.iter_mut().for_each(|x| *x /= norm);
    Ok(CostWeights {
        w,
        label: WeightsLabel::Surrogate,
    })
}

/// `exp(1 - 1/(1 - s))` for `s = d^2 < 1`, else 0, with its derivative in `s`.
#[inline]
fn bump_sq(s: f64) -> (f64, f64) {
    if s >= 1.0 {
        return (0.0, 0.0);
    }
    let inv = 1.0 / (1.0 - s);
    let b = (1.0 - inv).exp();
    (b, -b * inv * inv)
}

/// The smooth bump on a scaled distance `d`.
pub fn bump(d: f64) -> f64 {
    bump_sq(d * d).0
}

#[inline]
fn smoothstep(x: f64) -> (f64, f64) {
    if x <= 0.0 {
        (0.0, 0.0)
    } else if x >= 1.0 {
        (1.0, 0.0)
    } else {
        (x * x * (3.0 - 2.0 * x), 6.0 * x * (1.0 - x))
    }
}

/// Feature values and their gradients with respect to the robot state
/// `(lat, lon, heading, speed)`.
pub(crate) fn features_with_grad(
    robot: &CarState,
    humans: &[CarState],
    road: &RoadGeometry,
    v_target: f64,
) -> ([f64; NUM_FEATURES], [[f64; 4]; NUM_FEATURES]) {
    let mut f = [0.0; NUM_FEATURES];
    let mut g = [[0.0; 4]; NUM_FEATURES];

    let dv = robot.speed - v_target;
    f[SPEED] = dv * dv;
    g[SPEED][3] = 2.0 * dv;

    // Collision: 1 - prod(1 - b_i) so several humans stay within [0, 1].
    let mut survive = 1.0;
    let mut bumps = Vec::with_capacity(humans.len());
    for h in humans {
        let rl = road.collision_radius_lat;
        let rn = road.collision_radius_lon;
        let dlat = (robot.lat - h.lat) / rl;
        let dlon = (robot.lon - h.lon) / rn;
        let (b, db) = bump_sq(dlat * dlat + dlon * dlon);
        bumps.push((b, db * 2.0 * dlat / rl, db * 2.0 * dlon / rn));
        survive *= 1.0 - b;
    }
    f[COLLISION] = 1.0 - survive;
    for (i, &(_, glat, glon)) in bumps.iter().enumerate() {
        let others: f64 = bumps
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &(b, _, _))| 1.0 - b)
            .product();
        g[COLLISION][0] += glat * others;
        g[COLLISION][1] += glon * others;
    }

    let x = (robot.lat.abs() - road.road_half_width) / road.offroad_band;
    let (s, ds) = smoothstep(x);
    f[OFF_ROAD] = s;
    g[OFF_ROAD][0] = ds * robot.lat.signum() / road.offroad_band;

    let lw2 = road.lane_width * road.lane_width;
    for (k, &c) in road.lane_centers.iter().enumerate() {
        let d = robot.lat - c;
        f[LANE[k]] = d * d / lw2;
        g[LANE[k]][0] = 2.0 * d / lw2;
    }
    let nearest = road.closest_lane(robot.lat);
    f[CLOSEST_LANE] = f[LANE[nearest]];
    g[CLOSEST_LANE] = g[LANE[nearest]];

    (f, g)
}

/// Evaluate the feature basis. The controls do not enter any feature; the
/// argument is kept so costs can be written as `C(x, u)`.
pub fn features(w: &WorldState, _u: &Control, road: &RoadGeometry, v_target: f64) -> FeatureVector {
    FeatureVector(features_with_grad(&w.robot, &w.humans, road, v_target).0)
}

pub fn dot(theta: &CostWeights, f: &FeatureVector) -> f64 {
    theta.w.iter().zip(f.0.iter()).map(|(a, b)| a * b).sum()
}

pub fn cost(theta: &CostWeights, w: &WorldState, u: &Control, road: &RoadGeometry, v_target: f64) -> f64 {
    dot(theta, &features(w, u, road, v_target))
}

/// Cost and its gradient with respect to the robot state.
pub(crate) fn cost_with_state_grad(
    theta: &CostWeights,
    robot: &CarState,
    humans: &[CarState],
    road: &RoadGeometry,
    v_target: f64,
) -> (f64, [f64; 4]) {
    let (f, g) = features_with_grad(robot, humans, road, v_target);
    let mut c = 0.0;
    let mut grad = [0.0; 4];
    for k in 0..NUM_FEATURES {
        let wk = theta.w[k];
        if wk == 0.0 {
            continue;
        }
        c += wk * f[k];
        for j in 0..4 {
            grad[j] += wk * g[k][j];
        }
    }
    (c, grad)
}

/// Sum of `theta_true` costs over every logged (state, control) pair.
pub fn cumulative_true_cost(
    rollout: &Rollout,
    theta_true: &CostWeights,
    road: &RoadGeometry,
    v_target: f64,
) -> Result<f64> {
    if rollout.states.is_empty() {
        return Err(Error::Arity {
            what: "rollout steps",
            expected: 1,
            got: 0,
        });
    }
    Ok(rollout
        .states
        .iter()
        .zip(&rollout.controls)
        .map(|(w, u)| cost(theta_true, w, u, road, v_target))
        .sum())
}

/// Bounds and resolution of a heatmap. Rows index `lat`, columns index `lon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapGrid {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub rows: usize,
    pub cols: usize,
}

impl HeatmapGrid {
    pub fn lat_at(&self, i: usize) -> f64 {
        self.lat_min + (self.lat_max - self.lat_min) * i as f64 / (self.rows - 1) as f64
    }

    pub fn lon_at(&self, j: usize) -> f64 {
        self.lon_min + (self.lon_max - self.lon_min) * j as f64 / (self.cols - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub grid: HeatmapGrid,
    pub values: Vec<Vec<f64>>,
}

/// Cost of placing the robot at each grid cell with the given speed and
/// heading and zero control, humans held fixed.
pub fn heatmap(
    theta: &CostWeights,
    road: &RoadGeometry,
    v_target: f64,
    grid: &HeatmapGrid,
    speed: f64,
    heading: f64,
    humans: &[CarState],
) -> Result<Heatmap> {
    if grid.rows < 2 || grid.cols < 2 {
        return Err(Error::Arity {
            what: "heatmap cells per axis",
            expected: 2,
            got: grid.rows.min(grid.cols),
        });
    }
    let mut world = WorldState {
        robot: CarState::new(0.0, 0.0, heading, speed),
        humans: humans.to_vec(),
        t: 0,
    };
    let mut values = vec![vec![0.0; grid.cols]; grid.rows];
    for (i, row) in values.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            world.robot.lat = grid.lat_at(i);
            world.robot.lon = grid.lon_at(j);
            *cell = cost(theta, &world, &Control::ZERO, road, v_target);
        }
    }
    Ok(Heatmap { grid: *grid, values })
}

impl Heatmap {
    /// CSV: a header naming the bounds, a line with their values, then one
    /// line per grid row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().flexible(true).from_writer(out);
        wtr.write_record(["lat_min", "lat_max", "lon_min", "lon_max", "rows", "cols"])?;
        let g = &self.grid;
        wtr.write_record([
            g.lat_min.to_string(),
            g.lat_max.to_string(),
            g.lon_min.to_string(),
            g.lon_max.to_string(),
            g.rows.to_string(),
            g.cols.to_string(),
        ])?;
        for row in &self.values {
            wtr.write_record(row.iter().map(|v| v.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Heatmap> {
        let mut rdr = csv::ReaderBuilder::new()
            .flexible(true)
            .has_headers(true)
            .from_reader(input);
        let mut records = rdr.records();
        let bad = |m: &str| Error::Config(format!("heatmap csv: {m}"));
        let head = records.next().ok_or_else(|| bad("missing bounds line"))??;
        let num = |i: usize| -> Result<f64> {
            head.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("malformed bounds line"))
        };
        let grid = HeatmapGrid {
            lat_min: num(0)?,
            lat_max: num(1)?,
            lon_min: num(2)?,
            lon_max: num(3)?,
            rows: num(4)? as usize,
            cols: num(5)? as usize,
        };
        let values = records
            .map(|r| {
                r?.iter()
                    .map(|s| s.parse::<f64>().map_err(|_| bad("malformed cell")))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != grid.rows || values.iter().any(|r| r.len() != grid.cols) {
            return Err(bad("row/column count does not match header"));
        }
        Ok(Heatmap { grid, values })
    }
}
