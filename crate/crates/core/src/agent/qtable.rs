use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Action;

use super::{AgentError, StateId};

/// Learning-rate, discount and exploration schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// Multiplicative per-episode decay of epsilon.
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    /// Penalty recorded against a blocked action; `None` leaves blocked
    /// actions untouched.
    pub collision_penalty: Option<f64>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 0.9,
            epsilon: 1.0,
            epsilon_decay: 0.999,
            epsilon_min: 0.05,
            collision_penalty: None,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |key, reason: &str| {
            Err(AgentError::InvalidHyperparam {
                key,
                reason: reason.to_owned(),
            })
        };
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha", "must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma", "must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon", "must lie in [0, 1]");
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return bad("epsilon_decay", "must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon_min) {
            return bad("epsilon_min", "must lie in [0, 1]");
        }
        if self.epsilon_min > self.epsilon {
            return bad("epsilon_min", "must not exceed epsilon");
        }
        if let Some(p) = self.collision_penalty {
            if !(p.is_finite() && p >= 0.0) {
                return bad("collision_penalty", "must be finite and >= 0");
            }
        }
        Ok(())
    }

    /// Exploration rate used in episode `episode` (0-based).
    pub fn epsilon_at(&self, episode: usize) -> f64 {
        let mut eps = self.epsilon;
        for _ in 0..episode {
            eps = self.next_epsilon(eps);
        }
        eps
    }

    pub fn next_epsilon(&self, eps: f64) -> f64 {
        (eps * self.epsilon_decay).max(self.epsilon_min)
    }
}

/// A subset of the eight actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ActionSet(u8);

impl ActionSet {
    pub const EMPTY: ActionSet = ActionSet(0);
    pub const ALL: ActionSet = ActionSet(0xff);

    pub fn insert(&mut self, a: Action) {
        self.0 |= 1 << a.index();
    }

    pub fn contains(self, a: Action) -> bool {
        self.0 & (1 << a.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_full(self) -> bool {
        self.0 == 0xff
    }

    pub fn complement(self) -> ActionSet {
        ActionSet(!self.0)
    }

    pub fn iter(self) -> impl Iterator<Item = Action> {
        Action::ALL.into_iter().filter(move |&a| self.contains(a))
    }
}

impl FromIterator<Action> for ActionSet {
    fn from_iter<I: IntoIterator<Item = Action>>(iter: I) -> Self {
        let mut set = ActionSet::EMPTY;
        for a in iter {
            set.insert(a);
        }
        set
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    values: Vec<[f64; 8]>,
    hyperparams: Hyperparams,
    seed: u64,
}

impl QTable {
    /// Zero-initialised table.
    pub fn new(states: usize, hyperparams: Hyperparams, seed: u64) -> Self {
        Self {
            values: vec![[0.0; 8]; states],
            hyperparams,
            seed,
        }
    }

    pub fn from_rows(rows: Vec<[f64; 8]>, hyperparams: Hyperparams, seed: u64) -> Self {
        Self {
            values: rows,
            hyperparams,
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyperparams
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rows(&self) -> &[[f64; 8]] {
        &self.values
    }

    pub fn row(&self, s: StateId) -> &[f64; 8] {
        &self.values[s.index()]
    }

    pub fn get(&self, s: StateId, a: Action) -> f64 {
        self.values[s.index()][a.index()]
    }

    pub fn set(&mut self, s: StateId, a: Action, value: f64) {
        self.values[s.index()][a.index()] = value;
    }

    pub fn max_value(&self, s: StateId) -> f64 {
        self.row(s)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Q(s,a) <- (1-alpha) Q(s,a) + alpha (r + gamma max_a' Q(s',a'))`.
    pub fn update(&mut self, s: StateId, a: Action, reward: f64, next: StateId) {
        let Hyperparams { alpha, gamma, .. } = self.hyperparams;
        let target = reward + gamma * self.max_value(next);
        let q = &mut self.values[s.index()][a.index()];
        *q = (1.0 - alpha) * *q + alpha * target;
    }

    /// Highest-valued action outside `forbidden`; ties go to the lowest index.
    pub fn greedy_action(&self, s: StateId, forbidden: ActionSet) -> Option<Action> {
        let row = self.row(s);
        let mut best: Option<Action> = None;
        for a in forbidden.complement().iter() {
            match best {
                Some(b) if row[a.index()] <= row[b.index()] => {}
                _ => best = Some(a),
            }
        }
        best
    }

    /// Scale every entry, used in tests of argmax invariance.
    pub fn scaled(&self, factor: f64) -> QTable {
        QTable {
            values: self
                .values
                .iter()
                .map(|row| row.map(|v| v * factor))
                .collect(),
            ..self.clone()
        }
    }
}

pub fn q_update(q: &mut QTable, s: StateId, a: Action, reward: f64, next: StateId) {
    q.update(s, a, reward, next);
}

/// Epsilon-greedy choice among actions not in `forbidden`.
pub fn select_action<R: Rng + ?Sized>(
    q: &QTable,
    s: StateId,
    forbidden: ActionSet,
    epsilon: f64,
    rng: &mut R,
) -> Result<Action, AgentError> {
    if forbidden.is_full() {
        return Err(AgentError::NoActionAvailable);
    }
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return Ok(random_action(forbidden, rng));
    }
    Ok(q.greedy_action(s, forbidden)
        .expect("at least one permitted action"))
}

/// Uniform choice among actions not in `forbidden` (which must not be full).
pub(crate) fn random_action<R: Rng + ?Sized>(forbidden: ActionSet, rng: &mut R) -> Action {
    let permitted = forbidden.complement();
    let k = rng.random_range(0..permitted.len());
    permitted.iter().nth(k).expect("index within permitted set")
}

/// Argmax action for every state.
pub fn greedy_policy(q: &QTable) -> Vec<Action> {
    (0..q.len())
        .map(|i| {
            q.greedy_action(StateId(i as u32), ActionSet::EMPTY)
                .expect("empty forbidden set")
        })
        .collect()
}
