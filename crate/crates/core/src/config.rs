//! Agent configuration file (TOML) and noise profiles.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapper::{DEFAULT_GLOBAL_SIZE, DEFAULT_LOCAL_SIZE};
use crate::nav::PolicyConfig;
use crate::pose::SearchWindow;
use crate::sim::{Action, NoiseModel, SimConfig};
use crate::world::DEFAULT_CELL_SIZE;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: String, source: toml::de::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapperConfig {
    pub cell_size: f64,
    /// Local map side L, cells.
    pub local_size: usize,
    /// Global map side G, cells.
    pub global_size: usize,
}

impl Default for MapperConfig {
    fn default() -> Self {
        Self { cell_size: DEFAULT_CELL_SIZE, local_size: DEFAULT_LOCAL_SIZE, global_size: DEFAULT_GLOBAL_SIZE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoseConfig {
    /// Map-alignment correction on top of the sensor displacement.
    pub correction: bool,
    pub search: SearchWindow,
}

impl Default for PoseConfig {
    fn default() -> Self {
        Self { correction: true, search: SearchWindow::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// Exploration episode length T.
    pub exploration_steps: usize,
    pub pointnav_step_limit: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { seed: 0, exploration_steps: 1000, pointnav_step_limit: 1000 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub sim: SimConfig,
    pub mapper: MapperConfig,
    pub pose: PoseConfig,
    pub policy: PolicyConfig,
    pub run: RunConfig,
}

impl AgentConfig {
    pub fn from_toml(text: &str, path: &str) -> Result<Self, ConfigError> {
        let cfg: AgentConfig =
            toml::from_str(text).map_err(|source| ConfigError::Parse { path: path.to_string(), source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let p = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: p.clone(), source })?;
        Self::from_toml(&text, &p)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        let m = &self.mapper;
        if !(m.cell_size > 0.0) {
            return bad("mapper.cell_size must be positive");
        }
        if m.local_size % 2 == 0 || m.global_size % 2 == 0 {
            return bad("mapper.local_size and mapper.global_size must be odd");
        }
        let t = self.policy.classify_threshold;
        if !(t > 0.0 && t < 1.0) {
            return bad("policy.classify_threshold must lie in (0, 1)");
        }
        if !(self.policy.unknown_cell_cost >= 1.0) {
            return bad("policy.unknown_cell_cost must be >= 1");
        }
        if self.policy.global_goal_interval == 0 {
            return bad("policy.global_goal_interval must be >= 1");
        }
        Ok(())
    }
}

/// `noise-free`, `noisy`, or a path to a TOML noise model.
pub fn load_noise_profile(spec: &str) -> Result<NoiseModel, ConfigError> {
    match spec {
        "noise-free" | "noise_free" => Ok(NoiseModel::noise_free()),
        "noisy" => Ok(NoiseModel::noisy(0)),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| ConfigError::Io { path: path.to_string(), source })?;
            toml::from_str(&text).map_err(|source| ConfigError::Parse { path: path.to_string(), source })
        }
    }
}

/// Search window actually used to correct the odometry of `action`: each
/// axis spans three standard deviations of the sensor error that action can
/// cause, capped by the configured window. Forward noise only lengthens or
/// shortens a step, so the lateral axis of a forward step gets drift alone. An axis with no possible error
/// collapses to zero, so noise-free runs never move off the odometry.
pub fn effective_window(search: &SearchWindow, noise: &NoiseModel, action: Action) -> SearchWindow {
    let moving = matches!(action, Action::Forward);
    let turning = matches!(action, Action::TurnLeft | Action::TurnRight);
    let forward = if moving { noise.forward_sigma } else { 0.0 };
    let turn = if turning { noise.turn_sigma } else { 0.0 };
    let sigma_along = forward.hypot(noise.drift_sigma_xy);
    let sigma_theta = turn.hypot(noise.drift_sigma_theta);
    let span = |sigma: f64, cap: f64, step: f64| {
        if step > 0.0 {
            ((3.0 * sigma).min(cap) / step + 1e-9).floor() * step
        } else {
            0.0
        }
    };
    SearchWindow {
        window_xy: span(sigma_along, search.window_xy, search.step_xy),
        window_lateral: Some(span(noise.drift_sigma_xy, search.lateral(), search.step_xy)),
        window_theta: span(sigma_theta, search.window_theta, search.step_theta),
        ..*search
    }
}
