//! Human-driver hypotheses and the robot's belief over them.
//!
//! Human cars are open loop: they follow their own policy and ignore the
//! robot. A hypothesis drives every human car in the world.

use serde::{Deserialize, Serialize};

use crate::costs::RoadGeometry;
use crate::dynamics::{euler, CarState, Control, DynamicsConfig, WorldState};
use crate::error::{Error, Result};

/// Lateral error to desired heading gain of the merge controller.
const MERGE_LAT_GAIN: f64 = 4.0;
/// Largest heading the merge controller asks for.
const MERGE_MAX_HEADING: f64 = 0.3;
/// Heading error to steering gain of the merge controller.
const MERGE_HEADING_GAIN: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum HumanHypothesis {
    /// Drive straight, holding `speed`.
    FixedSpeed { speed: f64 },
    /// Drive straight at `cruise_speed` until `reveal_step`, then merge into
    /// `target_lane` with steering bounded by `merge_steer`.
    MergeAtReveal {
        target_lane: usize,
        reveal_step: usize,
        merge_steer: f64,
        cruise_speed: f64,
    },
}

impl HumanHypothesis {
    pub fn validate(&self) -> Result<()> {
        match *self {
            HumanHypothesis::FixedSpeed { speed } if speed < 0.0 => {
                Err(Error::Config(format!("fixed speed must be >= 0, got {speed}")))
            }
            HumanHypothesis::MergeAtReveal {
                target_lane,
                cruise_speed,
                merge_steer,
                ..
            } => {
                if target_lane > 2 {
                    Err(Error::Config(format!("target lane {target_lane} out of range")))
                } else if cruise_speed < 0.0 || merge_steer < 0.0 {
                    Err(Error::Config("cruise speed and merge steer must be >= 0".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

fn hold_speed(car: &CarState, speed: f64, dyn_cfg: &DynamicsConfig) -> f64 {
    dyn_cfg.friction * car.speed + (speed - car.speed) / dyn_cfg.dt
}

/// The control hypothesis `h` applies to `car` at timestep `t`.
pub fn human_control(
    h: &HumanHypothesis,
    car: &CarState,
    t: usize,
    road: &RoadGeometry,
    dyn_cfg: &DynamicsConfig,
) -> Control {
    let b = &dyn_cfg.bounds;
    match *h {
        HumanHypothesis::FixedSpeed { speed } => {
            Control::bounded(0.0, hold_speed(car, speed, dyn_cfg), b)
        }
        HumanHypothesis::MergeAtReveal {
            target_lane,
            reveal_step,
            merge_steer,
            cruise_speed,
        } => {
            let accel = hold_speed(car, cruise_speed, dyn_cfg);
            if t < reveal_step {
                return Control::bounded(0.0, accel, b);
            }
            let target = road.lane_centers[target_lane.min(2)];
            let want = (MERGE_LAT_GAIN * (target - car.lat))
                .clamp(-MERGE_MAX_HEADING, MERGE_MAX_HEADING);
            let steer = (MERGE_HEADING_GAIN * (want - car.heading)).clamp(-merge_steer, merge_steer);
            Control::bounded(steer, accel, b)
        }
    }
}

/// Controls and states of every human car over `horizon` steps when all of
/// them follow `h`, starting from `w`.
///
/// `states[i]` holds the human cars at step `w.t + i`; `controls[i]` is the
/// control human 0 applies there.
pub struct HumanForecast {
    pub controls: Vec<Control>,
    pub states: Vec<Vec<CarState>>,
}

pub fn forecast_humans(
    h: &HumanHypothesis,
    w: &WorldState,
    horizon: usize,
    road: &RoadGeometry,
    dyn_cfg: &DynamicsConfig,
) -> HumanForecast {
    let mut cars = w.humans.clone();
    let mut controls = Vec::with_capacity(horizon);
    let mut states = Vec::with_capacity(horizon);
    for i in 0..horizon {
        let t = w.t + i;
        let us: Vec<Control> = cars
            .iter()
            .map(|c| human_control(h, c, t, road, dyn_cfg))
            .collect();
        if let Some(u) = us.first() {
            controls.push(*u);
        }
        states.push(cars.clone());
        cars = cars
            .iter()
            .zip(&us)
            .map(|(c, u)| euler(c, u, dyn_cfg.dt, dyn_cfg.friction))
            .collect();
    }
    HumanForecast { controls, states }
}

/// Controls human 0 applies over `horizon` steps under hypothesis `h`.
pub fn predict_human_trajectory(
    h: &HumanHypothesis,
    w: &WorldState,
    horizon: usize,
    road: &RoadGeometry,
    dyn_cfg: &DynamicsConfig,
) -> Vec<Control> {
    forecast_humans(h, w, horizon.max(1), road, dyn_cfg).controls
}

/// Probability vector over human hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub hypotheses: Vec<HumanHypothesis>,
    pub probs: Vec<f64>,
}

impl Belief {
    pub fn new(hypotheses: Vec<HumanHypothesis>, probs: Vec<f64>) -> Result<Self> {
        if hypotheses.len() != probs.len() || hypotheses.is_empty() {
            return Err(Error::Arity {
                what: "belief probabilities",
                expected: hypotheses.len().max(1),
                got: probs.len(),
            });
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("belief probabilities must lie in [0, 1]".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("belief sums to {total}, not 1")));
        }
        Ok(Self { hypotheses, probs })
    }

    pub fn uniform(hypotheses: Vec<HumanHypothesis>) -> Self {
        let n = hypotheses.len().max(1);
        Self {
            probs: vec![1.0 / n as f64; hypotheses.len()],
            hypotheses,
        }
    }

    pub fn certain(h: HumanHypothesis) -> Self {
        Self {
            hypotheses: vec![h],
            probs: vec![1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefUpdate {
    pub belief: Belief,
    /// Every hypothesis explained the observation with numerically zero
    /// likelihood; the belief was reset to uniform.
    pub degenerate: bool,
}

/// Posterior proportional to `prior * likelihood`, renormalized.
pub fn posterior_from_likelihoods(prior: &Belief, likelihoods: &[f64]) -> Result<BeliefUpdate> {
    if likelihoods.len() != prior.len() {
        return Err(Error::Arity {
            what: "likelihoods",
            expected: prior.len(),
            got: likelihoods.len(),
        });
    }
    let unnorm: Vec<f64> = prior.probs.iter().zip(likelihoods).map(|(p, l)| p * l).collect();
    let total: f64 = unnorm.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Ok(BeliefUpdate {
            belief: Belief::uniform(prior.hypotheses.clone()),
            degenerate: true,
        });
    }
    Ok(BeliefUpdate {
        belief: Belief {
            hypotheses: prior.hypotheses.clone(),
            probs: unnorm.into_iter().map(|p| p / total).collect(),
        },
        degenerate: false,
    })
}

/// Bayes update with an isotropic Gaussian likelihood on the control error.
pub fn update_belief(
    b: &Belief,
    observed: &Control,
    predicted: &[Control],
    likelihood_sigma: f64,
) -> Result<BeliefUpdate> {
    if predicted.len() != b.len() {
        return Err(Error::Arity {
            what: "predicted controls",
            expected: b.len(),
            got: predicted.len(),
        });
    }
    let var2 = 2.0 * likelihood_sigma * likelihood_sigma;
    let likelihoods: Vec<f64> = predicted
        .iter()
        .map(|p| {
            let ds = observed.steer - p.steer;
            let da = observed.accel - p.accel;
            (-(ds * ds + da * da) / var2).exp()
        })
        .collect();
    posterior_from_likelihoods(b, &likelihoods)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn road() -> RoadGeometry {
        RoadGeometry::three_lane(0.17, 0.3)
    }

    fn merge(lane: usize) -> HumanHypothesis {
        HumanHypothesis::MergeAtReveal {
            target_lane: lane,
            reveal_step: 4,
            merge_steer: 0.5,
            cruise_speed: 0.7,
        }
    }

    fn world(lat: f64, speed: f64, t: usize) -> WorldState {
        WorldState {
            robot: CarState::new(0.0, 0.0, 0.0, 1.0),
            humans: vec![CarState::new(lat, 0.5, 0.0, speed)],
            t,
        }
    }

    #[test]
    fn fixed_speed_without_friction_is_idle() {
        let h = HumanHypothesis::FixedSpeed { speed: 0.6 };
        let w = world(0.0, 0.6, 0);
        for t in 0..10 {
            assert_eq!(human_control(&h, &w.humans[0], t, &road(), &DynamicsConfig::default()), Control::ZERO);
        }
    }

    #[test]
    fn fixed_speed_compensates_friction() {
        let cfg = DynamicsConfig {
            friction: 0.2,
            ..Default::default()
        };
        let h = HumanHypothesis::FixedSpeed { speed: 0.6 };
        let car = CarState::new(0.0, 0.0, 0.0, 0.6);
        let u = human_control(&h, &car, 0, &road(), &cfg);
        assert!((euler(&car, &u, cfg.dt, cfg.friction).speed - 0.6).abs() < 1e-12);
    }

    #[test]
    fn merge_steers_toward_target_after_reveal() {
        let cfg = DynamicsConfig::default();
        let car = CarState::new(0.085, 0.0, 0.0, 0.7);
        let right = human_control(&merge(2), &car, 4, &road(), &cfg);
        let left = human_control(&merge(1), &car, 4, &road(), &cfg);
        assert!(right.steer > 0.0);
        assert!(left.steer < 0.0);
        assert!(right.steer.abs() <= 0.5);
    }

    #[test]
    fn merge_before_reveal_matches_fixed_speed() {
        let cfg = DynamicsConfig {
            friction: 0.1,
            ..Default::default()
        };
        let fixed = HumanHypothesis::FixedSpeed { speed: 0.7 };
        let car = CarState::new(0.085, 0.0, 0.0, 0.65);
        for t in 0..4 {
            assert_eq!(
                human_control(&merge(2), &car, t, &road(), &cfg),
                human_control(&fixed, &car, t, &road(), &cfg)
            );
        }
    }

    #[test]
    fn single_step_prediction() {
        let cfg = DynamicsConfig::default();
        let w = world(0.085, 0.7, 6);
        let p = predict_human_trajectory(&merge(2), &w, 1, &road(), &cfg);
        assert_eq!(p, vec![human_control(&merge(2), &w.humans[0], 6, &road(), &cfg)]);
    }

    #[test]
    fn fixed_speed_prediction_is_constant() {
        let cfg = DynamicsConfig::default();
        let h = HumanHypothesis::FixedSpeed { speed: 0.5 };
        let p = predict_human_trajectory(&h, &world(0.0, 0.5, 0), 7, &road(), &cfg);
        assert_eq!(p.len(), 7);
        assert!(p.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn prediction_switches_at_reveal_index() {
        let cfg = DynamicsConfig::default();
        // Reveal at step 4, starting from t = 1: switch at index 3.
        let p = predict_human_trajectory(&merge(0), &world(0.085, 0.7, 1), 6, &road(), &cfg);
        let first_steer = p.iter().position(|u| u.steer != 0.0);
        assert_eq!(first_steer, Some(3));
        assert!(p[..3].iter().all(|u| u.steer == 0.0));
    }

    #[test]
    fn identical_predictions_leave_belief_unchanged() {
        let b = Belief::uniform(vec![merge(1), merge(2)]);
        let u = Control::new(0.1, 0.0);
        let up = update_belief(&b, &Control::new(0.3, 0.2), &[u, u], 0.05).unwrap();
        assert_eq!(up.belief.probs, vec![0.5, 0.5]);
        assert!(!up.degenerate);
    }

    #[test]
    fn far_hypothesis_is_ruled_out() {
        // Hypothesis B predicts 0.5 away with sigma 0.05 (10 sigma): its
        // likelihood is exp(-50) relative to A's 1.
        let b = Belief::uniform(vec![merge(1), merge(2)]);
        let obs = Control::new(-0.25, 0.0);
        let up = update_belief(&b, &obs, &[obs, Control::new(0.25, 0.0)], 0.05).unwrap();
        assert!((up.belief.probs[0] - 1.0).abs() < 1e-6);
        assert!(up.belief.probs[1] < 1e-6);
    }

    #[test]
    fn certain_prior_is_absorbing() {
        let b = Belief::new(vec![merge(1), merge(2)], vec![1.0, 0.0]).unwrap();
        let up = update_belief(&b, &Control::new(0.5, 0.0), &[Control::new(-0.5, 0.0), Control::new(0.5, 0.0)], 0.05)
            .unwrap();
        assert_eq!(up.belief.probs, vec![1.0, 0.0]);
    }

    #[test]
    fn zero_mass_falls_back_to_uniform() {
        let b = Belief::new(vec![merge(1), merge(2)], vec![1.0, 0.0]).unwrap();
        let up = update_belief(&b, &Control::new(0.5, 0.0), &[Control::new(-0.5, 0.0), Control::new(0.5, 0.0)], 0.001)
            .unwrap();
        assert!(up.degenerate);
        assert_eq!(up.belief.probs, vec![0.5, 0.5]);
    }

    #[test]
    fn prediction_count_checked() {
        let b = Belief::uniform(vec![merge(1), merge(2)]);
        assert!(update_belief(&b, &Control::ZERO, &[Control::ZERO], 0.05).is_err());
    }

    #[test]
    fn invalid_beliefs_rejected() {
        assert!(Belief::new(vec![merge(1)], vec![0.7]).is_err());
        assert!(Belief::new(vec![merge(1), merge(2)], vec![1.2, -0.2]).is_err());
        assert!(merge(3).validate().is_err());
    }

    #[test]
    fn hypotheses_roundtrip_json() {
        let b = Belief::uniform(vec![merge(1), HumanHypothesis::FixedSpeed { speed: 0.4 }]);
        let text = serde_json::to_string(&b).unwrap();
        assert!(text.contains("\"kind\":\"MergeAtReveal\""));
        assert_eq!(serde_json::from_str::<Belief>(&text).unwrap(), b);
    }

    proptest! {
        #[test]
        fn belief_stays_normalized(
            prior in prop::collection::vec(0.01f64..1.0, 2..5),
            obs in (-1.0f64..1.0, -1.0f64..1.0),
            seq in prop::collection::vec(prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 5), 1..8),
        ) {
            let total: f64 = prior.iter().sum();
            let n = prior.len();
            let hyps = vec![HumanHypothesis::FixedSpeed { speed: 0.5 }; n];
            let mut b = Belief::new(hyps, prior.iter().map(|p| p / total).collect()).unwrap();
            for preds in seq {
                let preds: Vec<Control> = preds.iter().take(n).map(|&(s, a)| Control::new(s, a)).collect();
                b = update_belief(&b, &Control::new(obs.0, obs.1), &preds, 0.3).unwrap().belief;
                let s: f64 = b.probs.iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-9);
                prop_assert!(b.probs.iter().all(|p| (0.0..=1.0).contains(p)));
            }
        }

        #[test]
        fn posterior_invariant_to_likelihood_scale(
            l in prop::collection::vec(0.001f64..1.0, 3), c in 0.01f64..100.0,
        ) {
            let b = Belief::new(vec![merge(0), merge(1), merge(2)], vec![0.2, 0.3, 0.5]).unwrap();
            let scaled: Vec<f64> = l.iter().map(|x| x * c).collect();
            let p1 = posterior_from_likelihoods(&b, &l).unwrap().belief.probs;
            let p2 = posterior_from_likelihoods(&b, &scaled).unwrap().belief.probs;
            for (a, b) in p1.iter().zip(&p2) { prop_assert!((a - b).abs() < 1e-12); }
        }
    }
}
