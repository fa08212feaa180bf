use crate::episode::{is_terminal, reward};
use crate::geometry::{Action, FloorPlan, Move};
use crate::propagation::RssMap;

use super::{AgentError, StateId, StateIndex};

/// Sweeps stop once no state value moves by this much.
pub const ORACLE_TOLERANCE: f64 = 1e-9;
pub const ORACLE_MAX_SWEEPS: usize = 1_000_000;

/// Optimal values and action values of the navigation MDP.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    values: Vec<f64>,
    action_values: Vec<[Option<f64>; 8]>,
    terminal: Vec<bool>,
    sweeps: usize,
}

impl OracleSolution {
    pub fn value(&self, s: StateId) -> f64 {
        self.values[s.index()]
    }

    pub fn is_terminal(&self, s: StateId) -> bool {
        self.terminal[s.index()]
    }

    /// `r + gamma V(s')` for each permitted action; `None` where blocked.
    pub fn action_values(&self, s: StateId) -> &[Option<f64>; 8] {
        &self.action_values[s.index()]
    }

    /// Best permitted action (lowest index on ties); `None` for terminal or
    /// boxed-in states.
    pub fn action(&self, s: StateId) -> Option<Action> {
        let mut best: Option<(Action, f64)> = None;
        for (i, v) in self.action_values[s.index()].iter().enumerate() {
            if let Some(v) = *v {
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((Action::ALL[i], v));
                }
            }
        }
        best.map(|(a, _)| a)
    }

    /// Difference between the best and second-best permitted action values.
    pub fn top_two_gap(&self, s: StateId) -> Option<f64> {
        let mut vals: Vec<f64> = self.action_values[s.index()]
            .iter()
            .flatten()
            .copied()
            .collect();
        if vals.len() < 2 {
            return None;
        }
        vals.sort_by(|a, b| b.total_cmp(a));
        Some(vals[0] - vals[1])
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Solves the deterministic MDP the agent faces by value iteration.
///
/// Transitions come straight from [`FloorPlan::apply_action`]; the reward is
/// the RSS difference between successive readings; terminal states are
/// absorbing with value 0. Blocked actions are unavailable.
pub fn value_iteration_oracle(
    map: &RssMap,
    plan: &FloorPlan,
    states: &StateIndex,
    gamma: f64,
    terminal_threshold: f64,
) -> Result<OracleSolution, AgentError> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(AgentError::InvalidHyperparam {
            key: "gamma",
            reason: "must lie in [0, 1)".into(),
        });
    }
    let n = states.len();
    let mut terminal = vec![false; n];
    // (action index, next state, reward) per state.
    let mut edges: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); n];
    for (id, info) in states.iter() {
        let here = info.rss_dbm;
        if is_terminal(here, terminal_threshold) {
            terminal[id.index()] = true;
            continue;
        }
        for a in Action::ALL {
            if let Ok(Move::To(next)) = plan.apply_action(info.cell, a) {
                let s2 = states.state_at(next, a).expect("free cell has a state");
                let there = map.rss_heading(next, a).expect("free cell has RSS");
                edges[id.index()].push((a.index(), s2.index(), reward(here, there)));
            }
        }
    }

    let mut values = vec![0.0; n];
    let mut sweeps = 0;
    loop {
        if sweeps >= ORACLE_MAX_SWEEPS {
            return Err(AgentError::NonTermination { sweeps });
        }
        sweeps += 1;
        let mut delta = 0.0f64;
        for s in 0..n {
            if terminal[s] || edges[s].is_empty() {
                continue;
            }
            let best = edges[s]
                .iter()
                .map(|&(_, s2, r)| r + gamma * values[s2])
                .fold(f64::NEG_INFINITY, f64::max);
            delta = delta.max((best - values[s]).abs());
            values[s] = best;
        }
        if delta < ORACLE_TOLERANCE {
            break;
        }
    }

    let action_values = (0..n)
        .map(|s| {
            let mut row = [None; 8];
            for &(a, s2, r) in &edges[s] {
                row[a] = Some(r + gamma * values[s2]);
            }
            row
        })
        .collect();

    Ok(OracleSolution {
        values,
        action_values,
        terminal,
        sweeps,
    })
}
