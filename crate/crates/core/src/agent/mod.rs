//! Tabular Q-learning agent: RSS-labelled states, the Q-table with its
//! update rule, epsilon-greedy action selection, and a value-iteration
//! oracle over the same deterministic MDP.

mod oracle;
mod qtable;
mod state;

pub use oracle::{value_iteration_oracle, OracleSolution, ORACLE_MAX_SWEEPS, ORACLE_TOLERANCE};
pub(crate) use qtable::random_action;
pub use qtable::{greedy_policy, q_update, select_action, ActionSet, Hyperparams, QTable};
pub use state::{StateId, StateIndex, StateInfo, DEFAULT_RSS_QUANTUM_DB};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("no state matches RSS {rss_dbm:.2} dBm")]
    UnknownState { rss_dbm: f64 },
    #[error("RSS {rss_dbm:.2} dBm is shared by {count} locations")]
    AmbiguousState { rss_dbm: f64, count: usize },
    #[error("{count} quantized RSS values are shared by more than one location")]
    NonUniqueStates { count: usize },
    #[error("every action is blocked")]
    NoActionAvailable,
    #[error("invalid hyperparameter `{key}`: {reason}")]
    InvalidHyperparam { key: &'static str, reason: String },
    #[error("value iteration did not converge within {sweeps} sweeps")]
    NonTermination { sweeps: usize },
}
