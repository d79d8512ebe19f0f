//! Kinematic car model and world stepping.
//!
//! Two transition functions share one car model: [`step_world_planning`] is the
//! deterministic model the planner differentiates through, and
//! [`step_world_true`] is what actually happens, optionally with a lateral wind
//! force the planner does not know about.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// State of a single car.
///
/// `lat` grows toward the right edge of the road, `lon` grows in the driving
/// direction and `heading = 0` points straight down the road.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarState {
    pub lat: f64,
    pub lon: f64,
    pub heading: f64,
    pub speed: f64,
}

impl CarState {
    pub const fn new(lat: f64, lon: f64, heading: f64, speed: f64) -> Self {
        Self {
            lat,
            lon,
            heading,
            speed,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && self.heading.is_finite()
            && self.speed.is_finite()
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.lat, self.lon, self.heading, self.speed]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlBounds {
    pub steer_max: f64,
    pub accel_max: f64,
}

impl Default for ControlBounds {
    fn default() -> Self {
        Self {
            steer_max: 1.0,
            accel_max: 1.0,
        }
    }
}

/// Steering and acceleration input, always within [`ControlBounds`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Control {
    pub steer: f64,
    pub accel: f64,
}

impl Control {
    pub const ZERO: Control = Control {
        steer: 0.0,
        accel: 0.0,
    };

    /// Clamp to the default unit bounds.
    pub fn new(steer: f64, accel: f64) -> Self {
        Self::bounded(steer, accel, &ControlBounds::default())
    }

    pub fn bounded(steer: f64, accel: f64, bounds: &ControlBounds) -> Self {
        Self {
            steer: steer.clamp(-bounds.steer_max, bounds.steer_max),
            accel: accel.clamp(-bounds.accel_max, bounds.accel_max),
        }
    }
}

/// Integration constants shared by both transition functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsConfig {
    pub dt: f64,
    pub friction: f64,
    pub bounds: ControlBounds,
    /// Clamp speed from below after each step. Off by default: the clamp is not
    /// differentiable at the floor.
    #[serde(default)]
    pub min_speed: Option<f64>,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            friction: 0.0,
            bounds: ControlBounds::default(),
            min_speed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub robot: CarState,
    pub humans: Vec<CarState>,
    pub t: usize,
}

impl WorldState {
    pub fn is_finite(&self) -> bool {
        self.robot.is_finite() && self.humans.iter().all(CarState::is_finite)
    }
}

/// Unmodeled lateral force acting on the robot in the true dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindParams {
    pub mean_lat_force: f64,
    pub std_lat_force: f64,
    pub enabled: bool,
}

impl WindParams {
    pub const CALM: WindParams = WindParams {
        mean_lat_force: 0.0,
        std_lat_force: 0.0,
        enabled: false,
    };
}

impl Default for WindParams {
    fn default() -> Self {
        Self::CALM
    }
}

fn check_finite(s: &CarState, u: &Control) -> Result<()> {
    if !s.is_finite() {
        return Err(Error::InvalidState(format!("non-finite car state {s:?}")));
    }
    if !(u.steer.is_finite() && u.accel.is_finite()) {
        return Err(Error::InvalidState(format!("non-finite control {u:?}")));
    }
    Ok(())
}

/// One explicit Euler step of the kinematic car.
pub fn step_car(s: &CarState, u: &Control, dt: f64, friction: f64) -> Result<CarState> {
    check_finite(s, u)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidState(format!("dt must be positive, got {dt}")));
    }
    Ok(euler(s, u, dt, friction))
}

#[inline]
pub(crate) fn euler(s: &CarState, u: &Control, dt: f64, friction: f64) -> CarState {
    let (sin_h, cos_h) = s.heading.sin_cos();
    CarState {
        lat: s.lat + dt * s.speed * sin_h,
        lon: s.lon + dt * s.speed * cos_h,
        heading: s.heading + dt * s.speed * u.steer,
        speed: s.speed + dt * (u.accel - friction * s.speed),
    }
}

/// Jacobians of [`step_car`]: `(d next / d state, d next / d control)`.
///
/// State order is `(lat, lon, heading, speed)`, control order `(steer, accel)`.
pub fn step_car_jacobian(
    s: &CarState,
    u: &Control,
    dt: f64,
    friction: f64,
) -> ([[f64; 4]; 4], [[f64; 2]; 4]) {
    let (sin_h, cos_h) = s.heading.sin_cos();
    let v = s.speed;
    let a = [
        [1.0, 0.0, dt * v * cos_h, dt * sin_h],
        [0.0, 1.0, -dt * v * sin_h, dt * cos_h],
        [0.0, 0.0, 1.0, dt * u.steer],
        [0.0, 0.0, 0.0, 1.0 - dt * friction],
    ];
    let b = [[0.0, 0.0], [0.0, 0.0], [dt * v, 0.0], [0.0, dt]];
    (a, b)
}

fn apply_speed_floor(mut s: CarState, cfg: &DynamicsConfig) -> CarState {
    if let Some(floor) = cfg.min_speed {
        s.speed = s.speed.max(floor);
    }
    s
}

/// The planner's model: every car advanced by [`step_car`], no wind.
pub fn step_world_planning(
    w: &WorldState,
    u_robot: &Control,
    u_humans: &[Control],
    cfg: &DynamicsConfig,
) -> Result<WorldState> {
    if u_humans.len() != w.humans.len() {
        return Err(Error::Arity {
            what: "human controls",
            expected: w.humans.len(),
            got: u_humans.len(),
        });
    }
    let robot = apply_speed_floor(step_car(&w.robot, u_robot, cfg.dt, cfg.friction)?, cfg);
    let humans = w
        .humans
        .iter()
        .zip(u_humans)
        .map(|(h, u)| step_car(h, u, cfg.dt, cfg.friction).map(|s| apply_speed_floor(s, cfg)))
        .collect::<Result<Vec<_>>>()?;
    Ok(WorldState {
        robot,
        humans,
        t: w.t + 1,
    })
}

/// The true transition: planning dynamics plus a lateral wind displacement
/// `dt * g`, `g ~ Normal(mean, std)`, on the robot when wind is enabled.
pub fn step_world_true<R: Rng + ?Sized>(
    w: &WorldState,
    u_robot: &Control,
    u_humans: &[Control],
    cfg: &DynamicsConfig,
    wind: &WindParams,
    rng: &mut R,
) -> Result<WorldState> {
    let mut next = step_world_planning(w, u_robot, u_humans, cfg)?;
    if wind.enabled {
        let force = if wind.std_lat_force > 0.0 {
            Normal::new(wind.mean_lat_force, wind.std_lat_force)
                .map_err(|e| Error::Config(format!("wind: {e}")))?
                .sample(rng)
        } else {
            wind.mean_lat_force
        };
        next.robot.lat += cfg.dt * force;
    }
    Ok(next)
}
