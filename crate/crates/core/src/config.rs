//! One TOML file describing crane, scenario, planner, simulator and
//! experiments. Every section is optional and falls back to the defaults.
//!
//! ```toml
//! variant = "cm"
//!
//! [scenario]
//! name = "wall"
//! start = [0.2, 0.3, -0.8]
//! goal = [1.0, 0.6, -0.8]
//! obstacles = [[0.55, 0.65, 0.0, 0.9, -0.9, -0.35]]
//!
//! [planner]
//! intervals = 100
//! lambda = 0.001
//! margin = 0.01
//!
//! [params]
//! u_max = [12.0, 9.0, 1.0]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CraneError, Result};
use crate::experiments::{SweepConfig, TuneConfig};
use crate::geometry::BoxObstacle;
use crate::model::{CraneParams, ModelTag};
use crate::optimizer::{PlannerConfig, Scenario};
use crate::simulator::{PiGains, SimConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Friction model used for planning.
    pub variant: ModelTag,
    /// Crane parameters; they also define the simulated plant.
    pub params: CraneParams,
    pub scenario: Scenario,
    pub planner: PlannerConfig,
    pub sim: SimConfig,
    pub gains: PiGains,
    pub tune: TuneConfig,
    pub sweep: SweepConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            variant: ModelTag::Cm,
            params: CraneParams::default(),
            scenario: scenario_one(),
            planner: PlannerConfig::default(),
            sim: SimConfig::default(),
            gains: PiGains::default(),
            tune: TuneConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| CraneError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CraneError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Canonical text of the effective configuration; its hash identifies
    /// outputs.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CraneError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.scenario.validate(&self.params)?;
        self.planner.validate()?;
        self.sim.validate()?;
        self.gains.validate()?;
        self.sweep.validate()
    }
}

fn obstacle(l: [f64; 6]) -> BoxObstacle {
    BoxObstacle::from_limits(l).expect("preset obstacles are valid")
}

/// A wall across the workspace that the payload has to be lifted over.
pub fn scenario_one() -> Scenario {
    Scenario {
        name: "single-obstacle".into(),
        start: [0.2, 0.3, -0.8],
        goal: [1.0, 0.6, -0.8],
        obstacles: vec![obstacle([0.55, 0.65, 0.0, 0.9, -0.9, -0.35])],
    }
}

/// Three staggered boxes to pass between and over.
pub fn scenario_two() -> Scenario {
    Scenario {
        name: "three-obstacles".into(),
        start: [0.15, 0.25, -0.8],
        goal: [1.05, 0.3, -0.8],
        obstacles: vec![
            obstacle([0.35, 0.45, 0.0, 0.55, -0.9, -0.3]),
            obstacle([0.6, 0.7, 0.35, 0.9, -0.9, -0.45]),
            obstacle([0.85, 0.95, 0.0, 0.5, -0.9, -0.5]),
        ],
    }
}
