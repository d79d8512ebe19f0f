//! The three highway scenarios, their true costs and start distributions.
//!
//! 1. Short horizon: the robot follows a slower car in the middle lane. The
//!    cheap long-run behavior is a lane change, which a 5-step planner cannot
//!    see past the cost of crossing a lane line.
//! 2. Local optima: the robot starts in the left lane, beside a car in the
//!    middle lane, and is asked to reach the right lane. The planner has a
//!    single straight initialization.
//! 3. Replanning: robot and a slow human both straddle the right lane line.
//!    The human will merge left or right at `reveal_step`; the robot believes
//!    both are equally likely.
//!
//! All weights, speeds and distances here are calibration choices for this
//! simulator.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::costs::{normalize_weights, CostWeights, RoadGeometry, WeightsLabel};
use crate::dynamics::{CarState, DynamicsConfig, WindParams, WorldState};
use crate::error::{Error, Result};
use crate::human::{Belief, HumanHypothesis};
use crate::planner::{ControlInit, PlannerConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Per-field standard deviation of the robot's start state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartStd {
    pub lat: f64,
    pub lon: f64,
    pub heading: f64,
    pub speed: f64,
}

impl StartStd {
    pub const ZERO: StartStd = StartStd {
        lat: 0.0,
        lon: 0.0,
        heading: 0.0,
        speed: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema_version: u32,
    pub id: u32,
    pub name: String,
    pub road: RoadGeometry,
    /// True task horizon `T`.
    pub horizon: usize,
    pub planner: PlannerConfig,
    pub dynamics: DynamicsConfig,
    pub theta_true: CostWeights,
    pub v_target: f64,
    pub nominal_start: WorldState,
    pub start_std: StartStd,
    /// Behavior of the human in a single rollout.
    pub true_human: HumanHypothesis,
    /// Robot's initial belief over human behavior.
    pub belief0: Belief,
    pub wind: WindParams,
    pub likelihood_sigma: f64,
    /// Score rollouts in expectation over `belief0` instead of only under
    /// `true_human`.
    #[serde(default)]
    pub true_human_from_belief: bool,
}

/// Lane width of the three-lane road.
pub const LANE_WIDTH: f64 = 0.17;
/// Wind used for the dynamics-mismatch variants.
pub const DEFAULT_WIND: WindParams = WindParams {
    mean_lat_force: 0.05,
    std_lat_force: 0.02,
    enabled: true,
};

const DEFAULT_START_STD: StartStd = StartStd {
    lat: 0.01,
    lon: 0.05,
    heading: 0.0,
    speed: 0.05,
};

fn true_weights(raw: [f64; 7]) -> CostWeights {
    normalize_weights(&raw)
        .expect("scenario weights are nonzero")
        .with_label(WeightsLabel::True)
}

fn base_planner() -> PlannerConfig {
    PlannerConfig {
        horizon: 5,
        gd_steps: 100,
        step_size: 1.0,
        initializations: ControlInit::defaults(),
        warm_start: true,
        terminal_weights: None,
    }
}

fn road() -> RoadGeometry {
    RoadGeometry::three_lane(LANE_WIDTH, 0.3)
}

fn scenario_one() -> Scenario {
    let human = HumanHypothesis::FixedSpeed { speed: 0.6 };
    Scenario {
        schema_version: SCHEMA_VERSION,
        id: 1,
        name: "short-horizon".into(),
        road: road(),
        horizon: 15,
        planner: base_planner(),
        dynamics: DynamicsConfig::default(),
        theta_true: true_weights([1.0, 4.0, 4.0, 2.0, 0.0, 0.0, 0.0]),
        v_target: 1.0,
        nominal_start: WorldState {
            robot: CarState::new(0.0, 0.0, 0.0, 1.0),
            humans: vec![CarState::new(0.0, 0.45, 0.0, 0.6)],
            t: 0,
        },
        start_std: DEFAULT_START_STD,
        true_human: human,
        belief0: Belief::certain(human),
        wind: WindParams::CALM,
        likelihood_sigma: 0.05,
        true_human_from_belief: false,
    }
}

fn scenario_two() -> Scenario {
    let human = HumanHypothesis::FixedSpeed { speed: 1.0 };
    let mut planner = base_planner();
    planner.initializations = vec![ControlInit::new("straight", 0.0, 0.0)];
    Scenario {
        schema_version: SCHEMA_VERSION,
        id: 2,
        name: "local-optimum".into(),
        road: road(),
        horizon: 15,
        planner,
        dynamics: DynamicsConfig::default(),
        theta_true: true_weights([3.0, 4.0, 4.0, 0.5, 0.0, 0.0, 1.5]),
        v_target: 1.0,
        nominal_start: WorldState {
            robot: CarState::new(-LANE_WIDTH, 0.0, 0.0, 1.0),
            humans: vec![CarState::new(0.0, 0.0, 0.0, 1.0)],
            t: 0,
        },
        start_std: DEFAULT_START_STD,
        true_human: human,
        belief0: Belief::certain(human),
        wind: WindParams::CALM,
        likelihood_sigma: 0.05,
        true_human_from_belief: false,
    }
}

pub const SCENARIO3_REVEAL_STEP: usize = 8;

fn merge_hypothesis(target_lane: usize) -> HumanHypothesis {
    HumanHypothesis::MergeAtReveal {
        target_lane,
        reveal_step: SCENARIO3_REVEAL_STEP,
        merge_steer: 1.0,
        cruise_speed: 0.7,
    }
}

fn scenario_three() -> Scenario {
    let left = merge_hypothesis(1);
    let right = merge_hypothesis(2);
    Scenario {
        schema_version: SCHEMA_VERSION,
        id: 3,
        name: "replanning".into(),
        // Wider side clearance so a merging car blocks its whole target lane.
        road: RoadGeometry { collision_radius_lat: 0.15, ..road() },
        horizon: 20,
        planner: base_planner(),
        dynamics: DynamicsConfig::default(),
        theta_true: true_weights([2.0, 4.0, 4.0, 0.8, 0.0, 0.3, 0.3]),
        v_target: 1.0,
        nominal_start: WorldState {
            robot: CarState::new(LANE_WIDTH / 2.0, 0.0, 0.0, 1.0),
            humans: vec![CarState::new(LANE_WIDTH / 2.0, 0.5, 0.0, 0.7)],
            t: 0,
        },
        start_std: DEFAULT_START_STD,
        true_human: right,
        belief0: Belief::uniform(vec![left, right]),
        wind: WindParams::CALM,
        likelihood_sigma: 0.05,
        true_human_from_belief: true,
    }
}

/// Build scenario `id` (1, 2 or 3), optionally with lateral wind in the true
/// dynamics.
pub fn build_scenario(id: u32, wind_enabled: bool) -> Result<Scenario> {
    let mut s = match id {
        1 => scenario_one(),
        2 => scenario_two(),
        3 => scenario_three(),
        other => return Err(Error::Config(format!("unknown scenario id {other}"))),
    };
    if wind_enabled {
        s.wind = DEFAULT_WIND;
        s.name.push_str("+wind");
    }
    Ok(s)
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported scenario schema version {}",
                self.schema_version
            )));
        }
        self.road.validate()?;
        self.planner.validate()?;
        if self.horizon <= self.planner.horizon {
            return Err(Error::Config(format!(
                "task horizon {} must exceed planning horizon {}",
                self.horizon, self.planner.horizon
            )));
        }
        if (self.theta_true.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("true weights must have unit norm".into()));
        }
        if !(self.dynamics.dt > 0.0) || !(self.likelihood_sigma > 0.0) {
            return Err(Error::Config("dt and likelihood sigma must be positive".into()));
        }
        if self.wind.std_lat_force < 0.0 {
            return Err(Error::Config("wind std must be >= 0".into()));
        }
        self.true_human.validate()?;
        for h in &self.belief0.hypotheses {
            h.validate()?;
        }
        Belief::new(self.belief0.hypotheses.clone(), self.belief0.probs.clone())?;
        if !self.nominal_start.is_finite() {
            return Err(Error::InvalidState("non-finite nominal start".into()));
        }
        Ok(())
    }

    /// Human behaviors a rollout is scored under, with their weights.
    pub fn true_human_cases(&self) -> Vec<(HumanHypothesis, f64)> {
        if self.true_human_from_belief {
            self.belief0
                .hypotheses
                .iter()
                .copied()
                .zip(self.belief0.probs.iter().copied())
                .filter(|(_, p)| *p > 0.0)
                .collect()
        } else {
            vec![(self.true_human, 1.0)]
        }
    }

    pub fn with_wind(mut self, wind: WindParams) -> Self {
        self.wind = wind;
        self
    }

    pub fn from_json(text: &str) -> Result<Scenario> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Draw a start state: the robot's fields perturbed by independent Gaussians
/// around the nominal start, lateral position kept on the road and speed
/// kept non-negative. Human cars start at their nominal states.
pub fn sample_initial_state<R: Rng + ?Sized>(s: &Scenario, rng: &mut R) -> WorldState {
    let mut draw = |mean: f64, std: f64| {
        if std > 0.0 {
            Normal::new(mean, std).map(|n| n.sample(rng)).unwrap_or(mean)
        } else {
            mean
        }
    };
    let nominal = s.nominal_start.robot;
    let std = s.start_std;
    let lat = draw(nominal.lat, std.lat);
    let lon = draw(nominal.lon, std.lon);
    let heading = draw(nominal.heading, std.heading);
    let speed = draw(nominal.speed, std.speed);
    let edge = s.road.road_half_width;
    let mut w = s.nominal_start.clone();
    w.robot = CarState::new(lat.clamp(-edge, edge), lon, heading, speed.max(0.0));
    w
}
