//! Receding-horizon planner.
//!
//! At every timestep the robot minimizes the belief-weighted cost of a
//! `K`-step control sequence by fixed-step gradient descent from several
//! initializations, executes the first control, observes the human, updates
//! its belief and replans. The belief is held fixed inside each plan: the
//! planner never reasons about what it will learn later.

use serde::{Deserialize, Serialize};

use crate::costs::{cost, cost_with_state_grad, CostWeights, RoadGeometry};
use crate::dynamics::{
    euler, step_car_jacobian, step_world_true, CarState, Control, ControlBounds, DynamicsConfig,
    WorldState,
};
use crate::error::{Error, Result};
use crate::human::{forecast_humans, human_control, update_belief, Belief, HumanHypothesis};
use crate::rng::{derive_seed, seeded_rng};
use crate::scenarios::Scenario;

/// A constant control used to seed one gradient-descent run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlInit {
    pub name: String,
    pub steer: f64,
    pub accel: f64,
}

impl ControlInit {
    pub fn new(name: &str, steer: f64, accel: f64) -> Self {
        Self {
            name: name.to_string(),
            steer,
            accel,
        }
    }

    /// Straight ahead, toward the right edge, toward the left edge.
    pub fn defaults() -> Vec<ControlInit> {
        vec![
            Self::new("straight", 0.0, 0.0),
            Self::new("right", 0.2, 0.0),
            Self::new("left", -0.2, 0.0),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub horizon: usize,
    pub gd_steps: usize,
    pub step_size: f64,
    pub initializations: Vec<ControlInit>,
    /// Add the previous plan, shifted by one step, as an extra initialization.
    pub warm_start: bool,
    /// Optional cost applied to the state reached after the last planned
    /// control.
    #[serde(default)]
    pub terminal_weights: Option<CostWeights>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            horizon: 5,
            gd_steps: 100,
            step_size: 0.05,
            initializations: ControlInit::defaults(),
            warm_start: true,
            terminal_weights: None,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("planning horizon must be >= 1".into()));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::Config("step size must be > 0".into()));
        }
        if self.initializations.is_empty() {
            return Err(Error::Config("at least one control initialization is required".into()));
        }
        Ok(())
    }
}

/// A planned sequence of exactly `K` bounded controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSequence(pub Vec<Control>);

impl ControlSequence {
    pub fn constant(u: Control, horizon: usize) -> Self {
        Self(vec![u; horizon])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Drop the first control and repeat the last one.
    pub fn shifted(&self) -> Self {
        let mut v: Vec<Control> = self.0.iter().skip(1).copied().collect();
        if let Some(last) = self.0.last() {
            v.push(*last);
        }
        Self(v)
    }
}

/// Everything that stays fixed while one plan is optimized: the current
/// world, and for every hypothesis with nonzero belief the forecast human
/// positions over the horizon.
pub struct PlanProblem<'a> {
    theta: &'a CostWeights,
    terminal: Option<&'a CostWeights>,
    robot: CarState,
    // (probability, human cars at steps 0..=K)
    forecasts: Vec<(f64, Vec<Vec<CarState>>)>,
    road: &'a RoadGeometry,
    v_target: f64,
    dynamics: &'a DynamicsConfig,
    horizon: usize,
}

impl<'a> PlanProblem<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        theta: &'a CostWeights,
        w: &WorldState,
        belief: &Belief,
        horizon: usize,
        terminal: Option<&'a CostWeights>,
        road: &'a RoadGeometry,
        v_target: f64,
        dynamics: &'a DynamicsConfig,
    ) -> Self {
        let forecasts = belief
            .hypotheses
            .iter()
            .zip(&belief.probs)
            .filter(|(_, &p)| p > 0.0)
            .map(|(h, &p)| (p, forecast_humans(h, w, horizon + 1, road, dynamics).states))
            .collect();
        Self {
            theta,
            terminal,
            robot: w.robot,
            forecasts,
            road,
            v_target,
            dynamics,
            horizon,
        }
    }

    fn expected_cost(&self, theta: &CostWeights, x: &CarState, step: usize) -> (f64, [f64; 4]) {
        let mut c = 0.0;
        let mut g = [0.0; 4];
        for (p, states) in &self.forecasts {
            let (ci, gi) = cost_with_state_grad(theta, x, &states[step], self.road, self.v_target);
            c += p * ci;
            for j in 0..4 {
                g[j] += p * gi[j];
            }
        }
        (c, g)
    }

    fn check_len(&self, seq: &ControlSequence) -> Result<()> {
        if seq.len() != self.horizon {
            return Err(Error::Arity {
                what: "planned controls",
                expected: self.horizon,
                got: seq.len(),
            });
        }
        Ok(())
    }

    fn robot_path(&self, seq: &ControlSequence) -> Vec<CarState> {
        let mut xs = Vec::with_capacity(self.horizon + 1);
        xs.push(self.robot);
        for u in &seq.0 {
            let last = xs[xs.len() - 1];
            xs.push(euler(&last, u, self.dynamics.dt, self.dynamics.friction));
        }
        xs
    }

    pub fn objective(&self, seq: &ControlSequence) -> Result<f64> {
        self.check_len(seq)?;
        Ok(self.value_and_gradient(seq, false).0)
    }

    pub fn gradient(&self, seq: &ControlSequence) -> Result<Vec<[f64; 2]>> {
        self.check_len(seq)?;
        Ok(self.value_and_gradient(seq, true).1)
    }

    /// Objective and, by reverse accumulation through the planning dynamics,
    /// its gradient with respect to every `(steer, accel)` entry.
    pub(crate) fn value_and_gradient(&self, seq: &ControlSequence, want_grad: bool) -> (f64, Vec<[f64; 2]>) {
        let k = self.horizon;
        let xs = self.robot_path(seq);
        let mut total = 0.0;
        let mut stage_grads = Vec::with_capacity(k);
        for (i, x) in xs.iter().take(k).enumerate() {
            let (c, g) = self.expected_cost(self.theta, x, i);
            total += c;
            stage_grads.push(g);
        }
        let mut adjoint = [0.0; 4];
        if let Some(term) = self.terminal {
            let (c, g) = self.expected_cost(term, &xs[k], k);
            total += c;
            adjoint = g;
        }
        if !want_grad {
            return (total, Vec::new());
        }
        let mut grad = vec![[0.0; 2]; k];
        let dt = self.dynamics.dt;
        let fr = self.dynamics.friction;
        // `adjoint` is dJ/dx_{i+1} on entry to iteration i.
        for i in (0..k).rev() {
            let (a, b) = step_car_jacobian(&xs[i], &seq.0[i], dt, fr);
            for (c, out) in grad[i].iter_mut().enumerate() {
                *out = (0..4).map(|r| b[r][c] * adjoint[r]).sum();
            }
            let mut next = stage_grads[i];
            for (c, n) in next.iter_mut().enumerate() {
                *n += (0..4).map(|r| a[r][c] * adjoint[r]).sum::<f64>();
            }
            adjoint = next;
        }
        (total, grad)
    }
}

/// Belief-weighted cost of `seq` over the horizon starting at `w`.
#[allow(clippy::too_many_arguments)]
pub fn plan_objective(
    theta: &CostWeights,
    w: &WorldState,
    belief: &Belief,
    seq: &ControlSequence,
    road: &RoadGeometry,
    v_target: f64,
    dynamics: &DynamicsConfig,
) -> Result<f64> {
    PlanProblem::new(theta, w, belief, seq.len(), None, road, v_target, dynamics).objective(seq)
}

/// Exact gradient of [`plan_objective`], one `[d/dsteer, d/daccel]` per step.
#[allow(clippy::too_many_arguments)]
pub fn plan_gradient(
    theta: &CostWeights,
    w: &WorldState,
    belief: &Belief,
    seq: &ControlSequence,
    road: &RoadGeometry,
    v_target: f64,
    dynamics: &DynamicsConfig,
) -> Result<Vec<[f64; 2]>> {
    PlanProblem::new(theta, w, belief, seq.len(), None, road, v_target, dynamics).gradient(seq)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub controls: ControlSequence,
    pub objective: f64,
    /// Index of the initialization the best iterate descended from; extra
    /// initializations follow the configured ones.
    pub init_index: usize,
}

fn descend(
    problem: &PlanProblem<'_>,
    start: ControlSequence,
    cfg: &PlannerConfig,
    bounds: &ControlBounds,
) -> (ControlSequence, f64) {
    let mut seq = start;
    let mut best = (seq.clone(), f64::INFINITY);
    for step in 0..=cfg.gd_steps {
        let (value, grad) = problem.value_and_gradient(&seq, step < cfg.gd_steps);
        if value < best.1 {
            best = (seq.clone(), value);
        }
        if step == cfg.gd_steps {
            break;
        }
        for (u, g) in seq.0.iter_mut().zip(&grad) {
            *u = Control::bounded(u.steer - cfg.step_size * g[0], u.accel - cfg.step_size * g[1], bounds);
        }
    }
    if !best.1.is_finite() {
        // Every iterate was non-finite; report the start so callers see it.
        let v = problem.value_and_gradient(&seq, false).0;
        best = (seq, v);
    }
    best
}

/// Gradient descent from every configured initialization plus `extra`,
/// returning the lowest-objective iterate seen across all of them.
pub fn optimize_plan(
    problem: &PlanProblem<'_>,
    cfg: &PlannerConfig,
    bounds: &ControlBounds,
    extra: &[ControlSequence],
) -> PlanResult {
    let starts = cfg
        .initializations
        .iter()
        .map(|init| ControlSequence::constant(Control::bounded(init.steer, init.accel, bounds), cfg.horizon))
        .chain(extra.iter().cloned());
    let mut best: Option<PlanResult> = None;
    for (index, start) in starts.enumerate() {
        let (controls, objective) = descend(problem, start, cfg, bounds);
        if best.as_ref().is_none_or(|b| objective < b.objective) {
            best = Some(PlanResult {
                controls,
                objective,
                init_index: index,
            });
        }
    }
    best.expect("planner config has at least one initialization")
}

/// The executed closed-loop trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub seed: u64,
    pub states: Vec<WorldState>,
    pub controls: Vec<Control>,
    pub per_step_true_cost: Vec<f64>,
    pub cumulative_true_cost: f64,
    /// State reached after the last executed control.
    pub final_state: Option<WorldState>,
    /// Belief held when planning at each step.
    pub beliefs: Vec<Vec<f64>>,
    pub true_human: Option<HumanHypothesis>,
}

impl Rollout {
    fn empty(seed: u64, true_human: HumanHypothesis) -> Self {
        Self {
            seed,
            states: Vec::new(),
            controls: Vec::new(),
            per_step_true_cost: Vec::new(),
            cumulative_true_cost: 0.0,
            final_state: None,
            beliefs: Vec::new(),
            true_human: Some(true_human),
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// MPC rollout of `theta_plan` from `start`, scored under `theta_true`, with
/// the scenario's true human behavior.
pub fn mpc_rollout(
    theta_plan: &CostWeights,
    theta_true: &CostWeights,
    scenario: &Scenario,
    start: &WorldState,
    seed: u64,
) -> Result<Rollout> {
    mpc_rollout_with_human(theta_plan, theta_true, scenario, start, &scenario.true_human, seed)
}

/// [`mpc_rollout`] with an explicit true human behavior.
pub fn mpc_rollout_with_human(
    theta_plan: &CostWeights,
    theta_true: &CostWeights,
    scenario: &Scenario,
    start: &WorldState,
    true_human: &HumanHypothesis,
    seed: u64,
) -> Result<Rollout> {
    let cfg = &scenario.planner;
    let dyn_cfg = &scenario.dynamics;
    let road = &scenario.road;
    let vt = scenario.v_target;
    let mut wind_rng = seeded_rng(derive_seed(seed, "wind", 0));
    let mut belief = scenario.belief0.clone();
    let mut world = start.clone();
    let mut previous: Option<ControlSequence> = None;
    let mut log = Rollout::empty(seed, *true_human);

    for step in 0..scenario.horizon {
        if !world.is_finite() {
            return Err(Error::RolloutDiverged {
                step,
                partial: Box::new(log),
            });
        }
        let problem = PlanProblem::new(
            theta_plan,
            &world,
            &belief,
            cfg.horizon,
            cfg.terminal_weights.as_ref(),
            road,
            vt,
            dyn_cfg,
        );
        let extra: Vec<ControlSequence> = match (&previous, cfg.warm_start) {
            (Some(prev), true) => vec![prev.shifted()],
            _ => Vec::new(),
        };
        let plan = optimize_plan(&problem, cfg, &dyn_cfg.bounds, &extra);
        let u = plan.controls.0[0];

        let observed: Vec<Control> = world
            .humans
            .iter()
            .map(|car| human_control(true_human, car, world.t, road, dyn_cfg))
            .collect();
        let step_cost = cost(theta_true, &world, &u, road, vt);
        log.states.push(world.clone());
        log.controls.push(u);
        log.per_step_true_cost.push(step_cost);
        log.beliefs.push(belief.probs.clone());

        if let (Some(obs), Some(car)) = (observed.first(), world.humans.first()) {
            let predicted: Vec<Control> = belief
                .hypotheses
                .iter()
                .map(|h| human_control(h, car, world.t, road, dyn_cfg))
                .collect();
            belief = update_belief(&belief, obs, &predicted, scenario.likelihood_sigma)?.belief;
        }
        world = step_world_true(&world, &u, &observed, dyn_cfg, &scenario.wind, &mut wind_rng)?;
        previous = Some(plan.controls);
    }
    log.cumulative_true_cost = log.per_step_true_cost.iter().sum();
    if !world.is_finite() || !log.cumulative_true_cost.is_finite() {
        return Err(Error::RolloutDiverged {
            step: scenario.horizon,
            partial: Box::new(log),
        });
    }
    log.final_state = Some(world);
    Ok(log)
}
