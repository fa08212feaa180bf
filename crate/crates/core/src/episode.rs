//! The sense / act / update loop, greedy evaluation, and the training driver.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::agent::{
    select_action, ActionSet, AgentError, Hyperparams, QTable, StateId, StateIndex,
    DEFAULT_RSS_QUANTUM_DB,
};
use crate::geometry::{Action, FloorPlan, GeometryError, MoveTable, Point, Position};
use crate::propagation::{
    build_rss_map, rss_threshold_for_distance, PropagationError, PropagationParams, RssMap,
    INITIAL_HEADING,
};

pub const DEFAULT_MAX_STEPS: usize = 10_000;

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error("invalid start cell {0}: out of bounds or blocked")]
    InvalidStart(Position),
    #[error("Q-table has {found} states but the environment has {expected}")]
    TableMismatch { expected: usize, found: usize },
    #[error("no free non-terminal start cell exists")]
    NoStartCell,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

/// `RSS_t - RSS_{t-1}`.
pub fn reward(rss_prev: f64, rss_cur: f64) -> f64 {
    rss_cur - rss_prev
}

/// A reading at or above the threshold ends the episode.
pub fn is_terminal(rss: f64, threshold: f64) -> bool {
    rss >= threshold
}

/// Everything an episode needs that does not change during training.
#[derive(Debug, Clone)]
pub struct Environment {
    plan: FloorPlan,
    map: RssMap,
    states: StateIndex,
    moves: MoveTable,
    threshold_dbm: f64,
    start_cells: Vec<Position>,
}

impl Environment {
    pub fn new(
        plan: FloorPlan,
        tx: Point,
        params: &PropagationParams,
        terminal_distance_m: f64,
    ) -> Result<Self, EpisodeError> {
        let map = build_rss_map(&plan, tx, params)?;
        let threshold = rss_threshold_for_distance(terminal_distance_m, params)?;
        Ok(Self::from_parts(
            plan,
            map,
            threshold,
            DEFAULT_RSS_QUANTUM_DB,
        ))
    }

    pub fn from_parts(plan: FloorPlan, map: RssMap, threshold_dbm: f64, quantum_db: f64) -> Self {
        let states = StateIndex::new(&map, quantum_db);
        let moves = plan.move_table();
        let start_cells = plan
            .free_cells()
            .filter(|&c| !is_terminal(map.rss(c).expect("free cell"), threshold_dbm))
            .collect();
        Self {
            plan,
            map,
            states,
            moves,
            threshold_dbm,
            start_cells,
        }
    }

    pub fn plan(&self) -> &FloorPlan {
        &self.plan
    }

    pub fn map(&self) -> &RssMap {
        &self.map
    }

    pub fn states(&self) -> &StateIndex {
        &self.states
    }

    pub fn moves(&self) -> &MoveTable {
        &self.moves
    }

    pub fn threshold_dbm(&self) -> f64 {
        self.threshold_dbm
    }

    /// Free cells that are not terminal at the initial heading.
    pub fn start_cells(&self) -> &[Position] {
        &self.start_cells
    }

    /// Reading and state sensed at `pos` facing `heading`.
    pub fn observe(&self, pos: Position, heading: Action) -> Option<(f64, StateId)> {
        Some((
            self.map.rss_heading(pos, heading)?,
            self.states.state_at(pos, heading)?,
        ))
    }

    pub fn new_qtable(&self, hyperparams: Hyperparams, seed: u64) -> QTable {
        QTable::new(self.states.len(), hyperparams, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Rescued,
    StepLimit,
    BoxedIn,
}

impl Outcome {
    pub fn label(self) -> &'static str {
        match self {
            Outcome::Rescued => "Rescued",
            Outcome::StepLimit => "StepLimit",
            Outcome::BoxedIn => "BoxedIn",
        }
    }

    pub fn from_label(label: &str) -> Option<Outcome> {
        [Outcome::Rescued, Outcome::StepLimit, Outcome::BoxedIn]
            .into_iter()
            .find(|o| o.label() == label)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeLimits {
    pub max_steps: usize,
}

impl Default for EpisodeLimits {
    fn default() -> Self {
        Self {
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

/// One rollout. `rss_dbm[i]` is the reading at `trajectory[i]`; `actions[i]`
/// and `rewards[i]` describe the move from `trajectory[i]` to
/// `trajectory[i + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub episode_index: usize,
    pub trajectory: Vec<Position>,
    pub actions: Vec<Action>,
    pub rss_dbm: Vec<f64>,
    pub rewards: Vec<f64>,
    pub outcome: Outcome,
    pub steps: usize,
}

impl EpisodeResult {
    /// Rewards summed in step order.
    pub fn cumulative_reward(&self) -> f64 {
        self.rewards.iter().fold(0.0, |acc, r| acc + r)
    }

    pub fn final_position(&self) -> Position {
        *self.trajectory.last().expect("trajectory holds the start")
    }
}

trait Driver {
    fn table(&self) -> &QTable;
    fn choose(&mut self, s: StateId, forbidden: ActionSet) -> Result<Action, AgentError>;
    fn blocked(&mut self, _s: StateId, _a: Action) {}
    fn learn(&mut self, _s: StateId, _a: Action, _r: f64, _next: StateId) {}
}

struct Learner<'a, R> {
    q: &'a mut QTable,
    epsilon: f64,
    rng: &'a mut R,
}

impl<R: Rng> Driver for Learner<'_, R> {
    fn table(&self) -> &QTable {
        self.q
    }

    fn choose(&mut self, s: StateId, forbidden: ActionSet) -> Result<Action, AgentError> {
        if forbidden.is_empty() {
            select_action(self.q, s, forbidden, self.epsilon, self.rng)
        } else if forbidden.is_full() {
            Err(AgentError::NoActionAvailable)
        } else {
            // After a blocked attempt, draw another action at random.
            Ok(crate::agent::random_action(forbidden, self.rng))
        }
    }

    fn blocked(&mut self, s: StateId, a: Action) {
        if let Some(p) = self.q.hyperparams().collision_penalty {
            self.q.update(s, a, -p, s);
        }
    }

    fn learn(&mut self, s: StateId, a: Action, r: f64, next: StateId) {
        self.q.update(s, a, r, next);
    }
}

struct Greedy<'a> {
    q: &'a QTable,
}

impl Driver for Greedy<'_> {
    fn table(&self) -> &QTable {
        self.q
    }

    fn choose(&mut self, s: StateId, forbidden: ActionSet) -> Result<Action, AgentError> {
        self.q
            .greedy_action(s, forbidden)
            .ok_or(AgentError::NoActionAvailable)
    }
}

impl EpisodeResult {
    fn empty(episode_index: usize) -> Self {
        Self {
            episode_index,
            trajectory: Vec::new(),
            actions: Vec::new(),
            rss_dbm: Vec::new(),
            rewards: Vec::new(),
            outcome: Outcome::StepLimit,
            steps: 0,
        }
    }
}

fn rollout<D: Driver>(
    env: &Environment,
    driver: &mut D,
    start: Position,
    limits: EpisodeLimits,
    episode_index: usize,
) -> Result<EpisodeResult, EpisodeError> {
    let mut result = EpisodeResult::empty(episode_index);
    rollout_into(env, driver, start, limits, episode_index, &mut result)?;
    Ok(result)
}

/// Like `rollout`, but reuses the buffers of `result`.
fn rollout_into<D: Driver>(
    env: &Environment,
    driver: &mut D,
    start: Position,
    limits: EpisodeLimits,
    episode_index: usize,
    result: &mut EpisodeResult,
) -> Result<(), EpisodeError> {
    if !env.plan.is_free(start) {
        return Err(EpisodeError::InvalidStart(start));
    }
    if driver.table().len() != env.states.len() {
        return Err(EpisodeError::TableMismatch {
            expected: env.states.len(),
            found: driver.table().len(),
        });
    }
    let (mut rss, mut state) = env
        .observe(start, INITIAL_HEADING)
        .ok_or(EpisodeError::InvalidStart(start))?;
    let mut pos = start;
    result.episode_index = episode_index;
    result.trajectory.clear();
    result.actions.clear();
    result.rss_dbm.clear();
    result.rewards.clear();
    result.trajectory.push(start);
    result.rss_dbm.push(rss);
    result.outcome = Outcome::StepLimit;
    result.steps = 0;
    if is_terminal(rss, env.threshold_dbm) {
        result.outcome = Outcome::Rescued;
        return Ok(());
    }

    'steps: for _ in 0..limits.max_steps {
        let mut forbidden = ActionSet::EMPTY;
        let (action, next) = loop {
            let a = match driver.choose(state, forbidden) {
                Ok(a) => a,
                Err(AgentError::NoActionAvailable) => {
                    result.outcome = Outcome::BoxedIn;
                    break 'steps;
                }
                Err(e) => return Err(e.into()),
            };
            match env.moves.destination(pos, a) {
                Some(next) => break (a, next),
                None => {
                    driver.blocked(state, a);
                    forbidden.insert(a);
                }
            }
        };
        let (next_rss, next_state) = env
            .observe(next, action)
            .expect("move table only yields free cells");
        let r = reward(rss, next_rss);
        driver.learn(state, action, r, next_state);

        result.trajectory.push(next);
        result.actions.push(action);
        result.rss_dbm.push(next_rss);
        result.rewards.push(r);
        pos = next;
        rss = next_rss;
        state = next_state;
        if is_terminal(rss, env.threshold_dbm) {
            result.outcome = Outcome::Rescued;
            break;
        }
    }
    result.steps = result.actions.len();
    Ok(())
}

/// One epsilon-greedy training episode; updates `q` in place.
pub fn run_episode<R: Rng>(
    env: &Environment,
    q: &mut QTable,
    start: Position,
    limits: EpisodeLimits,
    epsilon: f64,
    rng: &mut R,
    episode_index: usize,
) -> Result<EpisodeResult, EpisodeError> {
    let mut driver = Learner { q, epsilon, rng };
    rollout(env, &mut driver, start, limits, episode_index)
}

/// Greedy rollout with no updates. A blocked choice is replaced by the best
/// remaining action.
pub fn evaluate(
    env: &Environment,
    q: &QTable,
    start: Position,
    limits: EpisodeLimits,
) -> Result<EpisodeResult, EpisodeError> {
    rollout(env, &mut Greedy { q }, start, limits, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartRule {
    Fixed(Position),
    /// Uniform over free cells that are not already terminal.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSettings {
    pub hyperparams: Hyperparams,
    pub iterations: usize,
    pub limits: EpisodeLimits,
    pub master_seed: u64,
    pub start: StartRule,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingRecord {
    pub episode: usize,
    pub steps: usize,
    pub cum_reward: f64,
    pub outcome: Outcome,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    pub scenario: String,
    pub master_seed: u64,
    pub records: Vec<TrainingRecord>,
}

/// RNG for one episode: streams are `master_seed + episode`.
pub fn episode_rng(master_seed: u64, episode: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(master_seed.wrapping_add(episode as u64))
}

/// Runs `settings.iterations` episodes, calling `observe` after each.
pub fn train_with<F: FnMut(&EpisodeResult)>(
    env: &Environment,
    settings: &TrainingSettings,
    scenario: &str,
    mut observe: F,
) -> Result<(QTable, TrainingLog), EpisodeError> {
    settings.hyperparams.validate()?;
    if let StartRule::Fixed(p) = settings.start {
        if !env.plan.is_free(p) {
            return Err(EpisodeError::InvalidStart(p));
        }
    }
    let mut q = env.new_qtable(settings.hyperparams, settings.master_seed);
    let mut log = TrainingLog {
        scenario: scenario.to_owned(),
        master_seed: settings.master_seed,
        records: Vec::with_capacity(settings.iterations),
    };
    let mut epsilon = settings.hyperparams.epsilon;
    let mut result = EpisodeResult::empty(0);
    for episode in 0..settings.iterations {
        let mut rng = episode_rng(settings.master_seed, episode);
        let start = match settings.start {
            StartRule::Fixed(p) => p,
            StartRule::Random => {
                let cells = env.start_cells();
                if cells.is_empty() {
                    return Err(EpisodeError::NoStartCell);
                }
                cells[rng.random_range(0..cells.len())]
            }
        };
        let mut driver = Learner {
            q: &mut q,
            epsilon,
            rng: &mut rng,
        };
        rollout_into(
            env,
            &mut driver,
            start,
            settings.limits,
            episode,
            &mut result,
        )?;
        log.records.push(TrainingRecord {
            episode,
            steps: result.steps,
            cum_reward: result.cumulative_reward(),
            outcome: result.outcome,
            epsilon,
        });
        observe(&result);
        epsilon = settings.hyperparams.next_epsilon(epsilon);
    }
    Ok((q, log))
}

pub fn train_env(
    env: &Environment,
    settings: &TrainingSettings,
    scenario: &str,
) -> Result<(QTable, TrainingLog), EpisodeError> {
    train_with(env, settings, scenario, |_| {})
}
