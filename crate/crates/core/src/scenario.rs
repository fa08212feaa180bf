//! Scenario files: a strict JSON description of the floor plan, victim,
//! propagation, learning and run parameters.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agent::{AgentError, Hyperparams};
use crate::episode::{
    Environment, EpisodeError, EpisodeLimits, StartRule, TrainingSettings, DEFAULT_MAX_STEPS,
};
use crate::geometry::{
    FloorPlan, GeometryError, Point, Position, Wall, WallKind, DEFAULT_CLEARANCE_M,
};
use crate::propagation::{
    default_attenuation_db, AntennaPattern, PropagationError, PropagationParams, RxOrientation,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid `{key}`: {message}")]
    Validation { key: String, message: String },
}

impl ConfigError {
    fn invalid(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Validation {
            key: key.into(),
            message: message.into(),
        }
    }
}

fn default_name() -> String {
    "scenario".into()
}
fn default_iterations() -> usize {
    30_000
}
fn default_max_steps() -> usize {
    DEFAULT_MAX_STEPS
}
fn default_speed() -> f64 {
    1.0
}
fn default_terminal_distance() -> f64 {
    2.0
}
fn default_clearance() -> f64 {
    DEFAULT_CLEARANCE_M
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub floor_plan: FloorPlanConfig,
    /// Transmitter location in metres.
    pub victim: Point,
    #[serde(default)]
    pub start: StartConfig,
    #[serde(default)]
    pub propagation: PropagationConfig,
    #[serde(default)]
    pub hyperparams: Hyperparams,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_speed")]
    pub speed_v: f64,
    #[serde(default = "default_terminal_distance")]
    pub terminal_distance_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloorPlanConfig {
    pub width: u32,
    pub height: u32,
    #[serde(default = "default_clearance")]
    pub clearance_m: f64,
    #[serde(default)]
    pub walls: Vec<WallConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallConfig {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    #[serde(default = "default_kind")]
    pub kind: WallKind,
    /// Omitted: the per-kind default for the scenario's frequency band.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attenuation_db: Option<f64>,
}

fn default_kind() -> WallKind {
    WallKind::Wall
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartKeyword {
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StartConfig {
    Cell(Position),
    Keyword(StartKeyword),
}

impl Default for StartConfig {
    fn default() -> Self {
        StartConfig::Keyword(StartKeyword::Random)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AntennaKindConfig {
    Omnidirectional,
    Directional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoresightKeyword {
    /// Follow the agent's movement direction (receive antenna only).
    Heading,
    /// Point from the transmitter at the centroid of the free cells.
    FreeSpaceCenter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Boresight {
    Degrees(f64),
    Keyword(BoresightKeyword),
}

fn default_exponent() -> f64 {
    AntennaPattern::DEFAULT_EXPONENT
}
fn default_floor() -> f64 {
    AntennaPattern::DEFAULT_FLOOR_DB
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaConfig {
    pub kind: AntennaKindConfig,
    #[serde(default = "default_exponent")]
    pub exponent_k: f64,
    #[serde(default = "default_floor")]
    pub front_to_back_floor_db: f64,
    #[serde(default = "AntennaConfig::default_boresight")]
    pub boresight: Boresight,
}

impl AntennaConfig {
    fn default_boresight() -> Boresight {
        Boresight::Degrees(0.0)
    }

    pub fn omnidirectional() -> Self {
        Self {
            kind: AntennaKindConfig::Omnidirectional,
            exponent_k: default_exponent(),
            front_to_back_floor_db: default_floor(),
            boresight: Self::default_boresight(),
        }
    }

    pub fn directional(boresight: Boresight) -> Self {
        Self {
            kind: AntennaKindConfig::Directional,
            boresight,
            ..Self::omnidirectional()
        }
    }
}

impl Default for AntennaConfig {
    fn default() -> Self {
        Self::omnidirectional()
    }
}

fn default_tx_power() -> f64 {
    25.0
}
fn default_frequency() -> f64 {
    2.4e9
}
fn default_exponent_n() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationConfig {
    #[serde(default = "default_tx_power")]
    pub tx_power_dbm: f64,
    #[serde(default = "default_frequency")]
    pub frequency_hz: f64,
    #[serde(default = "default_exponent_n")]
    pub path_loss_exponent: f64,
    #[serde(default)]
    pub shadowing_sigma_db: f64,
    #[serde(default)]
    pub shadowing_seed: u64,
    #[serde(default)]
    pub tx_antenna: AntennaConfig,
    #[serde(default)]
    pub rx_antenna: AntennaConfig,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            tx_power_dbm: default_tx_power(),
            frequency_hz: default_frequency(),
            path_loss_exponent: default_exponent_n(),
            shadowing_sigma_db: 0.0,
            shadowing_seed: 0,
            tx_antenna: AntennaConfig::default(),
            rx_antenna: AntennaConfig::default(),
        }
    }
}

impl ScenarioConfig {
    /// Parses and validates a scenario document.
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: ScenarioConfig =
            serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        config.validate()?;
        Ok(config)
    }

    /// Pretty JSON with every default written out; stable across runs.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_canonical_json().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let plan = self.build_plan()?;
        let victim_cell = self.victim.cell();
        if !plan.contains_point(self.victim) || !plan.in_bounds(victim_cell) {
            return Err(ConfigError::invalid(
                "victim",
                "lies outside the floor plan",
            ));
        }
        if !plan.is_free(victim_cell) {
            return Err(ConfigError::invalid(
                "victim",
                format!("cell {victim_cell} is blocked"),
            ));
        }
        if let StartConfig::Cell(p) = self.start {
            if !plan.is_free(p) {
                return Err(ConfigError::invalid(
                    "start",
                    format!("cell {p} is out of bounds or blocked"),
                ));
            }
        }
        if self.max_steps == 0 {
            return Err(ConfigError::invalid("max_steps", "must be >= 1"));
        }
        if !(self.speed_v.is_finite() && self.speed_v > 0.0) {
            return Err(ConfigError::invalid("speed_v", "must be > 0"));
        }
        if !(self.terminal_distance_m.is_finite() && self.terminal_distance_m > 0.0) {
            return Err(ConfigError::invalid("terminal_distance_m", "must be > 0"));
        }
        if self.propagation.rx_antenna.boresight
            == Boresight::Keyword(BoresightKeyword::FreeSpaceCenter)
        {
            return Err(ConfigError::invalid(
                "propagation.rx_antenna.boresight",
                "free_space_center applies to the transmitter only",
            ));
        }
        if self.propagation.tx_antenna.boresight == Boresight::Keyword(BoresightKeyword::Heading) {
            return Err(ConfigError::invalid(
                "propagation.tx_antenna.boresight",
                "heading applies to the receiver only",
            ));
        }
        self.hyperparams.validate().map_err(|e| match e {
            AgentError::InvalidHyperparam { key, reason } => {
                ConfigError::invalid(format!("hyperparams.{key}"), reason)
            }
            other => ConfigError::invalid("hyperparams", other.to_string()),
        })?;
        self.propagation_params(&plan)
            .validate()
            .map_err(|e| match e {
                PropagationError::InvalidParam { key, reason } => {
                    ConfigError::invalid(format!("propagation.{key}"), reason)
                }
                other => ConfigError::invalid("propagation", other.to_string()),
            })
    }

    /// Floor plan with omitted attenuations filled in for the configured band.
    pub fn build_plan(&self) -> Result<FloorPlan, ConfigError> {
        self.plan_geometry().map_err(|e| {
            let key = match &e {
                GeometryError::DegenerateWall { index }
                | GeometryError::BadAttenuation { index, .. }
                | GeometryError::WallOutOfBounds { index, .. } => {
                    format!("floor_plan.walls[{index}]")
                }
                GeometryError::BadClearance(_) => "floor_plan.clearance_m".into(),
                _ => "floor_plan".into(),
            };
            ConfigError::invalid(key, e.to_string())
        })
    }

    fn plan_geometry(&self) -> Result<FloorPlan, GeometryError> {
        let f = self.propagation.frequency_hz;
        let walls = self
            .floor_plan
            .walls
            .iter()
            .map(|w| {
                Wall::new(
                    Point::new(w.x1, w.y1),
                    Point::new(w.x2, w.y2),
                    w.kind,
                    w.attenuation_db
                        .unwrap_or_else(|| default_attenuation_db(w.kind, f)),
                )
            })
            .collect();
        FloorPlan::new(
            self.floor_plan.width,
            self.floor_plan.height,
            walls,
            self.floor_plan.clearance_m,
        )
    }

    pub fn propagation_params(&self, plan: &FloorPlan) -> PropagationParams {
        let p = &self.propagation;
        let pattern = |a: &AntennaConfig| match a.kind {
            AntennaKindConfig::Omnidirectional => AntennaPattern::omnidirectional(),
            AntennaKindConfig::Directional => {
                let boresight = match a.boresight {
                    Boresight::Degrees(d) => d,
                    Boresight::Keyword(BoresightKeyword::FreeSpaceCenter) => {
                        free_space_center_azimuth(plan, self.victim)
                    }
                    Boresight::Keyword(BoresightKeyword::Heading) => 0.0,
                };
                AntennaPattern::directional(a.exponent_k, a.front_to_back_floor_db, boresight)
            }
        };
        let rx_orientation = match p.rx_antenna.boresight {
            Boresight::Keyword(BoresightKeyword::Heading) => RxOrientation::Heading,
            _ => RxOrientation::Fixed,
        };
        PropagationParams {
            tx_power_dbm: p.tx_power_dbm,
            frequency_hz: p.frequency_hz,
            path_loss_exponent: p.path_loss_exponent,
            shadowing_sigma_db: p.shadowing_sigma_db,
            shadowing_seed: p.shadowing_seed,
            tx_pattern: pattern(&p.tx_antenna),
            rx_pattern: pattern(&p.rx_antenna),
            rx_orientation,
        }
    }

    pub fn environment(&self) -> Result<Environment, EpisodeError> {
        let plan = self.plan_geometry()?;
        let params = self.propagation_params(&plan);
        Environment::new(plan, self.victim, &params, self.terminal_distance_m)
    }

    pub fn start_rule(&self) -> StartRule {
        match self.start {
            StartConfig::Cell(p) => StartRule::Fixed(p),
            StartConfig::Keyword(StartKeyword::Random) => StartRule::Random,
        }
    }

    pub fn training_settings(&self) -> TrainingSettings {
        TrainingSettings {
            hyperparams: self.hyperparams,
            iterations: self.iterations,
            limits: self.limits(),
            master_seed: self.master_seed,
            start: self.start_rule(),
        }
    }

    pub fn limits(&self) -> EpisodeLimits {
        EpisodeLimits {
            max_steps: self.max_steps,
        }
    }
}

/// Azimuth from `tx` to the centroid of the free cell centres.
pub fn free_space_center_azimuth(plan: &FloorPlan, tx: Point) -> f64 {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for c in plan.free_cells() {
        let p = c.center();
        sx += p.x;
        sy += p.y;
        n += 1;
    }
    if n == 0 {
        return 0.0;
    }
    let centroid = Point::new(sx / n as f64, sy / n as f64);
    if centroid == tx {
        0.0
    } else {
        tx.azimuth_to(centroid)
    }
}

pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })?;
    ScenarioConfig::from_json_str(&text)
}
