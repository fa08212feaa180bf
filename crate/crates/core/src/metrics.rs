//! Trajectory and training statistics.

use thiserror::Error;

use crate::episode::{EpisodeResult, Outcome, TrainingLog};
use crate::geometry::{step_distance, Action, Position};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("hop {index} from {from} to {to} is not a single grid move")]
    InvalidTrajectory {
        index: usize,
        from: Position,
        to: Position,
    },
    #[error("{what} must be > 0, got {value}")]
    Domain { what: &'static str, value: f64 },
}

/// Seconds per sensing interval: one RSS reading per step.
pub const SENSING_INTERVAL_S: f64 = 1.0;

/// Sum of per-hop distances (1 m cardinal, sqrt 2 m diagonal).
pub fn trajectory_length(traj: &[Position]) -> Result<f64, MetricsError> {
    let mut total = 0.0;
    for (i, w) in traj.windows(2).enumerate() {
        let action = Action::from_displacement(w[1].x - w[0].x, w[1].y - w[0].y).ok_or(
            MetricsError::InvalidTrajectory {
                index: i,
                from: w[0],
                to: w[1],
            },
        )?;
        total += step_distance(action);
    }
    Ok(total)
}

pub fn flight_time(traj: &[Position], speed_v: f64) -> Result<f64, MetricsError> {
    if speed_v.is_nan() || speed_v <= 0.0 {
        return Err(MetricsError::Domain {
            what: "speed",
            value: speed_v,
        });
    }
    Ok(trajectory_length(traj)? / speed_v)
}

/// Time at one reading per step, regardless of direction.
pub fn sensing_time(traj: &[Position]) -> f64 {
    traj.len().saturating_sub(1) as f64 * SENSING_INTERVAL_S
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryStats {
    pub length_m: f64,
    pub steps: usize,
    pub flight_time_s: f64,
    pub sensing_time_s: f64,
    pub rescued: bool,
}

impl TrajectoryStats {
    pub fn from_result(result: &EpisodeResult, speed_v: f64) -> Result<Self, MetricsError> {
        let traj = &result.trajectory;
        let length_m = trajectory_length(traj)?;
        Ok(Self {
            length_m,
            steps: traj.len().saturating_sub(1),
            flight_time_s: flight_time(traj, speed_v)?,
            sensing_time_s: sensing_time(traj),
            rescued: result.outcome == Outcome::Rescued,
        })
    }
}

/// Index of the first rescued episode.
pub fn episodes_to_first_rescue(log: &TrainingLog) -> Option<usize> {
    log.records
        .iter()
        .find(|r| r.outcome == Outcome::Rescued)
        .map(|r| r.episode)
}

/// Median step count over the last `window` episodes (all of them if fewer).
pub fn median_final_steps(log: &TrainingLog, window: usize) -> Option<f64> {
    let n = log.records.len();
    let tail = &log.records[n.saturating_sub(window)..];
    median(tail.iter().map(|r| r.steps as f64).collect())
}

pub fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        (values[m - 1] + values[m]) / 2.0
    })
}

pub const FINAL_WINDOW: usize = 1000;

/// One configuration of a comparison battery.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub antenna: String,
    pub frequency_hz: f64,
    pub iterations: usize,
    pub seed: u64,
    pub scenario_hash: String,
    pub episodes_to_first_rescue: Option<usize>,
    pub median_final_steps: Option<f64>,
    pub eval: TrajectoryStats,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}
