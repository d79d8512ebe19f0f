//! Result files: weights JSON, rollout JSON and run directories.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::costs::{normalize_weights, CostWeights, WeightsLabel, NUM_FEATURES};
use crate::error::{Error, Result};
use crate::harness::experiments::RESULT_SCHEMA_VERSION;
use crate::planner::Rollout;
use crate::scenarios::{build_scenario, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    pub schema_version: u32,
    pub label: WeightsLabel,
    pub weights: [f64; NUM_FEATURES],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fitness: Option<f64>,
}

impl WeightsFile {
    pub fn new(theta: &CostWeights, fitness: Option<f64>) -> Self {
        Self {
            schema_version: RESULT_SCHEMA_VERSION,
            label: theta.label,
            weights: theta.w,
            fitness,
        }
    }
}

pub fn save_weights(theta: &CostWeights, fitness: Option<f64>, path: &Path) -> Result<()> {
    write_json(&WeightsFile::new(theta, fitness), path)
}

/// Load a weights file and renormalize it to unit length.
pub fn load_weights(path: &Path) -> Result<CostWeights> {
    let text = std::fs::read_to_string(path)?;
    let file: WeightsFile = serde_json::from_str(&text)?;
    if file.schema_version != RESULT_SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "{}: unsupported schema version {}",
            path.display(),
            file.schema_version
        )));
    }
    Ok(normalize_weights(&file.weights)?.with_label(file.label))
}

/// `"true"` selects the scenario's true weights; anything else is a path.
pub fn resolve_weights(arg: &str, scenario: &Scenario) -> Result<CostWeights> {
    if arg == "true" {
        Ok(scenario.theta_true)
    } else {
        load_weights(Path::new(arg))
    }
}

/// A scenario id (`1`, `2`, `3`) or the path of a scenario JSON file.
pub fn resolve_scenario(arg: &str, wind: bool) -> Result<Scenario> {
    let s = match arg.parse::<u32>() {
        Ok(id) => build_scenario(id, wind)?,
        Err(_) => {
            let s = Scenario::load(Path::new(arg))?;
            if wind {
                s.with_wind(crate::scenarios::DEFAULT_WIND)
            } else {
                s
            }
        }
    };
    s.validate()?;
    Ok(s)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RolloutFile {
    pub schema_version: u32,
    pub scenario_id: u32,
    pub weights: CostWeights,
    #[serde(flatten)]
    pub rollout: Rollout,
}

pub fn save_rollout(scenario: &Scenario, weights: &CostWeights, rollout: &Rollout, path: &Path) -> Result<()> {
    let file = RolloutFile {
        schema_version: RESULT_SCHEMA_VERSION,
        scenario_id: scenario.id,
        weights: *weights,
        rollout: rollout.clone(),
    };
    write_json(&file, path)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// `out` if given, otherwise `runs/<unix-seconds>-seed<seed>`; created if
/// missing.
pub fn run_dir(out: Option<&Path>, seed: u64) -> Result<PathBuf> {
    let dir = match out {
        Some(p) => p.to_path_buf(),
        None => {
            let secs = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            PathBuf::from("runs").join(format!("{secs}-seed{seed}"))
        }
    };
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}
