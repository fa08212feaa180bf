//! Surrogate indoor propagation: log-distance path loss, per-wall
//! penetration loss, azimuth antenna patterns and optional log-normal
//! shadowing, evaluated over every free cell of a floor plan.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::geometry::{Action, FloorPlan, Point, Position, WallKind};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Near-field distance clamp for path loss evaluation.
pub const MIN_DISTANCE_M: f64 = 0.5;

/// Receive boresight before the first move.
pub const INITIAL_HEADING: Action = Action::E;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error("{what} must be positive, got {value}")]
    Domain { what: &'static str, value: f64 },
    #[error("transmitter and receiver coincide")]
    Coincident,
    #[error("invalid propagation parameter `{key}`: {reason}")]
    InvalidParam { key: &'static str, reason: String },
    #[error("transmitter ({x}, {y}) lies outside the plan")]
    TransmitterOutOfBounds { x: f64, y: f64 },
}

/// `20 log10(d) + 20 log10(f) + 20 log10(4 pi / c)`, in dB.
pub fn free_space_path_loss(distance_m: f64, frequency_hz: f64) -> Result<f64, PropagationError> {
    if distance_m.is_nan() || distance_m <= 0.0 {
        return Err(PropagationError::Domain {
            what: "distance",
            value: distance_m,
        });
    }
    if frequency_hz.is_nan() || frequency_hz <= 0.0 {
        return Err(PropagationError::Domain {
            what: "frequency",
            value: frequency_hz,
        });
    }
    Ok(log_distance_path_loss(distance_m, frequency_hz, 2.0))
}

fn log_distance_path_loss(distance_m: f64, frequency_hz: f64, exponent: f64) -> f64 {
    10.0 * exponent * distance_m.log10()
        + 20.0 * frequency_hz.log10()
        + 20.0 * (4.0 * PI / SPEED_OF_LIGHT).log10()
}

/// Per-crossing loss used when a scenario does not give one explicitly.
/// Anything below 4 GHz gets the 2.4 GHz figures, the rest the 5 GHz ones.
pub fn default_attenuation_db(kind: WallKind, frequency_hz: f64) -> f64 {
    match kind {
        WallKind::Wall if frequency_hz >= 4.0e9 => 9.0,
        WallKind::Wall => 5.0,
        WallKind::Door => 2.0,
        WallKind::Window => 3.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AntennaKind {
    Omnidirectional,
    Directional,
}

/// Azimuth-only power pattern with a 0 dB peak.
///
/// Directional patterns follow `cos^k` of the off-boresight angle inside the
/// front half-plane and sit at the front-to-back floor behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaPattern {
    pub kind: AntennaKind,
    pub exponent_k: f64,
    pub front_to_back_floor_db: f64,
    pub boresight_deg: f64,
}

impl AntennaPattern {
    pub const DEFAULT_EXPONENT: f64 = 4.0;
    pub const DEFAULT_FLOOR_DB: f64 = -20.0;

    pub fn omnidirectional() -> Self {
        Self {
            kind: AntennaKind::Omnidirectional,
            exponent_k: 0.0,
            front_to_back_floor_db: 0.0,
            boresight_deg: 0.0,
        }
    }

    pub fn directional(exponent_k: f64, front_to_back_floor_db: f64, boresight_deg: f64) -> Self {
        Self {
            kind: AntennaKind::Directional,
            exponent_k,
            front_to_back_floor_db,
            boresight_deg,
        }
    }

    pub fn is_directional(&self) -> bool {
        self.kind == AntennaKind::Directional
    }

    pub fn with_boresight(mut self, boresight_deg: f64) -> Self {
        self.boresight_deg = boresight_deg;
        self
    }

    pub fn gain_db(&self, azimuth_deg: f64) -> f64 {
        match self.kind {
            AntennaKind::Omnidirectional => 0.0,
            AntennaKind::Directional => {
                let off = off_boresight_deg(azimuth_deg, self.boresight_deg);
                let floor = 10f64.powf(self.front_to_back_floor_db / 10.0);
                let lobe = if off.abs() < 90.0 {
                    off.to_radians().cos().powf(self.exponent_k)
                } else {
                    0.0
                };
                10.0 * lobe.max(floor).log10()
            }
        }
    }

    fn validate(&self, key: &'static str) -> Result<(), PropagationError> {
        if self.kind == AntennaKind::Directional {
            if !(self.exponent_k.is_finite() && self.exponent_k >= 0.0) {
                return Err(PropagationError::InvalidParam {
                    key,
                    reason: format!("exponent_k must be >= 0, got {}", self.exponent_k),
                });
            }
            if !(self.front_to_back_floor_db.is_finite() && self.front_to_back_floor_db <= 0.0) {
                return Err(PropagationError::InvalidParam {
                    key,
                    reason: format!(
                        "front_to_back_floor_db must be finite and <= 0, got {}",
                        self.front_to_back_floor_db
                    ),
                });
            }
            if !self.boresight_deg.is_finite() {
                return Err(PropagationError::InvalidParam {
                    key,
                    reason: "boresight must be finite".into(),
                });
            }
        }
        Ok(())
    }
}

pub fn antenna_gain(pattern: &AntennaPattern, azimuth_deg: f64) -> f64 {
    pattern.gain_db(azimuth_deg)
}

/// Signed angle from boresight to azimuth, in `(-180, 180]`.
fn off_boresight_deg(azimuth_deg: f64, boresight_deg: f64) -> f64 {
    let d = (azimuth_deg - boresight_deg).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

/// How the receive antenna is pointed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RxOrientation {
    /// Use `rx_pattern.boresight_deg` everywhere.
    Fixed,
    /// Point along the last movement direction.
    Heading,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationParams {
    pub tx_power_dbm: f64,
    pub frequency_hz: f64,
    pub path_loss_exponent: f64,
    pub shadowing_sigma_db: f64,
    pub shadowing_seed: u64,
    pub tx_pattern: AntennaPattern,
    pub rx_pattern: AntennaPattern,
    pub rx_orientation: RxOrientation,
}

impl Default for PropagationParams {
    fn default() -> Self {
        Self {
            tx_power_dbm: 25.0,
            frequency_hz: 2.4e9,
            path_loss_exponent: 2.0,
            shadowing_sigma_db: 0.0,
            shadowing_seed: 0,
            tx_pattern: AntennaPattern::omnidirectional(),
            rx_pattern: AntennaPattern::omnidirectional(),
            rx_orientation: RxOrientation::Heading,
        }
    }
}

impl PropagationParams {
    pub fn validate(&self) -> Result<(), PropagationError> {
        if !(self.frequency_hz.is_finite() && self.frequency_hz > 0.0) {
            return Err(PropagationError::InvalidParam {
                key: "frequency_hz",
                reason: format!("must be > 0, got {}", self.frequency_hz),
            });
        }
        if !self.tx_power_dbm.is_finite() {
            return Err(PropagationError::InvalidParam {
                key: "tx_power_dbm",
                reason: "must be finite".into(),
            });
        }
        if !(self.path_loss_exponent.is_finite() && self.path_loss_exponent >= 1.0) {
            return Err(PropagationError::InvalidParam {
                key: "path_loss_exponent",
                reason: format!("must be >= 1, got {}", self.path_loss_exponent),
            });
        }
        if !(self.shadowing_sigma_db.is_finite() && self.shadowing_sigma_db >= 0.0) {
            return Err(PropagationError::InvalidParam {
                key: "shadowing_sigma_db",
                reason: format!("must be >= 0, got {}", self.shadowing_sigma_db),
            });
        }
        self.tx_pattern.validate("tx_antenna")?;
        self.rx_pattern.validate("rx_antenna")
    }

    /// Whether sensed RSS depends on the agent's heading.
    pub fn heading_dependent(&self) -> bool {
        self.rx_pattern.is_directional() && self.rx_orientation == RxOrientation::Heading
    }

    fn rx_pattern_for(&self, heading: Action) -> AntennaPattern {
        match self.rx_orientation {
            RxOrientation::Heading => self.rx_pattern.with_boresight(heading.heading_deg()),
            RxOrientation::Fixed => self.rx_pattern,
        }
    }
}

/// Deterministic link budget between two points, using the receive pattern
/// exactly as given (its boresight is not adjusted) and no shadowing term.
pub fn rss_at(
    tx: Point,
    rx: Point,
    plan: &FloorPlan,
    params: &PropagationParams,
) -> Result<f64, PropagationError> {
    link_budget(tx, rx, plan, params, &params.rx_pattern)
}

fn link_budget(
    tx: Point,
    rx: Point,
    plan: &FloorPlan,
    params: &PropagationParams,
    rx_pattern: &AntennaPattern,
) -> Result<f64, PropagationError> {
    let d = tx.distance(rx);
    if d == 0.0 {
        return Err(PropagationError::Coincident);
    }
    let loss = log_distance_path_loss(
        d.max(MIN_DISTANCE_M),
        params.frequency_hz,
        params.path_loss_exponent,
    );
    let walls = plan.count_wall_crossings(tx, rx).total_attenuation_db;
    let g_tx = params.tx_pattern.gain_db(tx.azimuth_to(rx));
    let g_rx = rx_pattern.gain_db(rx.azimuth_to(tx));
    Ok(params.tx_power_dbm - loss - walls + g_tx + g_rx)
}

/// Zero-mean normal shadowing for one cell, keyed by (seed, cell index).
pub fn shadowing_db(params: &PropagationParams, cell_index: usize) -> f64 {
    if params.shadowing_sigma_db == 0.0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.shadowing_seed);
    rng.set_stream(cell_index as u64);
    let z: f64 = StandardNormal.sample(&mut rng);
    params.shadowing_sigma_db * z
}

/// RSS at every free cell centre for one transmitter.
///
/// When the receiver is directional and heading-aligned the map holds one
/// layer per heading; otherwise a single layer serves every heading.
#[derive(Debug, Clone, PartialEq)]
pub struct RssMap {
    width: u32,
    height: u32,
    layers: usize,
    values: Vec<f64>,
    tx: Point,
    params: PropagationParams,
}

impl RssMap {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn tx(&self) -> Point {
        self.tx
    }

    pub fn params(&self) -> &PropagationParams {
        &self.params
    }

    pub fn heading_dependent(&self) -> bool {
        self.layers > 1
    }

    fn slot(&self, pos: Position, heading: Action) -> Option<usize> {
        if pos.x < 0 || pos.y < 0 || pos.x as u32 >= self.width || pos.y as u32 >= self.height {
            return None;
        }
        let cell = pos.y as usize * self.width as usize + pos.x as usize;
        let layer = if self.layers > 1 { heading.index() } else { 0 };
        Some(cell * self.layers + layer)
    }

    /// RSS sensed at `pos` with the receiver pointing along `heading`.
    /// `None` for blocked or out-of-bounds cells.
    pub fn rss_heading(&self, pos: Position, heading: Action) -> Option<f64> {
        let v = self.values[self.slot(pos, heading)?];
        (!v.is_nan()).then_some(v)
    }

    /// RSS at `pos` for the initial heading.
    pub fn rss(&self, pos: Position) -> Option<f64> {
        self.rss_heading(pos, INITIAL_HEADING)
    }

    /// Cells with a defined value, row-major, with their initial-heading RSS.
    pub fn iter(&self) -> impl Iterator<Item = (Position, f64)> + '_ {
        let w = self.width as usize;
        (0..(self.width as usize * self.height as usize)).filter_map(move |i| {
            let pos = Position::new((i % w) as i32, (i / w) as i32);
            self.rss(pos).map(|v| (pos, v))
        })
    }

    /// Smallest and largest stored value over every layer.
    pub fn range(&self) -> Option<(f64, f64)> {
        self.values
            .iter()
            .filter(|v| !v.is_nan())
            .fold(None, |acc, &v| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
    }
}

pub fn build_rss_map(
    plan: &FloorPlan,
    tx: Point,
    params: &PropagationParams,
) -> Result<RssMap, PropagationError> {
    params.validate()?;
    if !plan.contains_point(tx) {
        return Err(PropagationError::TransmitterOutOfBounds { x: tx.x, y: tx.y });
    }
    let layers = if params.heading_dependent() { 8 } else { 1 };
    let mut values = vec![f64::NAN; plan.cell_count() * layers];
    for pos in plan.free_cells() {
        let cell = plan.cell_index(pos).expect("free cell is in bounds");
        let rx = pos.center();
        let shadow = shadowing_db(params, cell);
        for layer in 0..layers {
            let heading = if layers > 1 {
                Action::ALL[layer]
            } else {
                INITIAL_HEADING
            };
            let rx_pattern = params.rx_pattern_for(heading);
            let v = if tx == rx {
                // Own cell: clamp distance, no direction to resolve.
                params.tx_power_dbm
                    - log_distance_path_loss(
                        MIN_DISTANCE_M,
                        params.frequency_hz,
                        params.path_loss_exponent,
                    )
            } else {
                link_budget(tx, rx, plan, params, &rx_pattern)?
            };
            values[cell * layers + layer] = v + shadow;
        }
    }
    Ok(RssMap {
        width: plan.width(),
        height: plan.height(),
        layers,
        values,
        tx,
        params: params.clone(),
    })
}

/// Free-space RSS at distance `d` with 0 dB gains: the termination level.
pub fn rss_threshold_for_distance(
    distance_m: f64,
    params: &PropagationParams,
) -> Result<f64, PropagationError> {
    Ok(params.tx_power_dbm - free_space_path_loss(distance_m, params.frequency_hz)?)
}
