use std::collections::HashMap;

use crate::geometry::{Action, Position};
use crate::propagation::{RssMap, INITIAL_HEADING};

use super::AgentError;

/// RSS resolution used to label states.
pub const DEFAULT_RSS_QUANTUM_DB: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub u32);

impl StateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateInfo {
    /// Location sensed in this state.
    pub cell: Position,
    /// First heading (in action order) that produces this reading.
    pub heading: Action,
    pub rss_dbm: f64,
    key: i64,
}

/// Assigns one state per distinct sensed reading at each location.
///
/// With an omnidirectional or fixed receiver that is one state per free cell.
/// With a heading-aligned directional receiver each cell contributes one state
/// per distinct quantized reading across the eight headings; headings that
/// read identically at the same cell are indistinguishable and share a state.
#[derive(Debug, Clone)]
pub struct StateIndex {
    width: u32,
    height: u32,
    layers: usize,
    quantum_db: f64,
    by_location: Vec<u32>,
    by_key: HashMap<i64, Vec<StateId>>,
    states: Vec<StateInfo>,
}

const NO_STATE: u32 = u32::MAX;

fn quantize(rss: f64, quantum_db: f64) -> i64 {
    (rss / quantum_db).round() as i64
}

impl StateIndex {
    pub fn new(map: &RssMap, quantum_db: f64) -> Self {
        assert!(quantum_db > 0.0, "quantum must be positive");
        let (w, h) = (map.width(), map.height());
        let layers = if map.heading_dependent() { 8 } else { 1 };
        let mut by_location = vec![NO_STATE; w as usize * h as usize * layers];
        let mut by_key: HashMap<i64, Vec<StateId>> = HashMap::new();
        let mut states: Vec<StateInfo> = Vec::new();

        for (cell, _) in map.iter() {
            let base = (cell.y as usize * w as usize + cell.x as usize) * layers;
            let first = states.len();
            for layer in 0..layers {
                let heading = if layers > 1 {
                    Action::ALL[layer]
                } else {
                    INITIAL_HEADING
                };
                let rss = map
                    .rss_heading(cell, heading)
                    .expect("map cell has a value");
                let key = quantize(rss, quantum_db);
                let id = match states[first..].iter().position(|s| s.key == key) {
                    Some(offset) => (first + offset) as u32,
                    None => {
                        let id = states.len() as u32;
                        states.push(StateInfo {
                            cell,
                            heading,
                            rss_dbm: rss,
                            key,
                        });
                        by_key.entry(key).or_default().push(StateId(id));
                        id
                    }
                };
                by_location[base + layer] = id;
            }
        }

        Self {
            width: w,
            height: h,
            layers,
            quantum_db,
            by_location,
            by_key,
            states,
        }
    }

    /// As [`StateIndex::new`], but fails unless every quantized reading
    /// identifies exactly one location.
    pub fn strict(map: &RssMap, quantum_db: f64) -> Result<Self, AgentError> {
        let index = Self::new(map, quantum_db);
        match index.collisions() {
            0 => Ok(index),
            count => Err(AgentError::NonUniqueStates { count }),
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn quantum_db(&self) -> f64 {
        self.quantum_db
    }

    pub fn info(&self, state: StateId) -> &StateInfo {
        &self.states[state.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (StateId, &StateInfo)> {
        self.states
            .iter()
            .enumerate()
            .map(|(i, s)| (StateId(i as u32), s))
    }

    /// State sensed at `pos` with the receiver pointing along `heading`.
    pub fn state_at(&self, pos: Position, heading: Action) -> Option<StateId> {
        if pos.x < 0 || pos.y < 0 || pos.x as u32 >= self.width || pos.y as u32 >= self.height {
            return None;
        }
        let layer = if self.layers > 1 { heading.index() } else { 0 };
        let id = self.by_location
            [(pos.y as usize * self.width as usize + pos.x as usize) * self.layers + layer];
        (id != NO_STATE).then_some(StateId(id))
    }

    /// Looks a reading up by its quantized value alone.
    pub fn state_for_rss(&self, rss_dbm: f64) -> Result<StateId, AgentError> {
        match self
            .by_key
            .get(&quantize(rss_dbm, self.quantum_db))
            .map(Vec::as_slice)
        {
            None | Some([]) => Err(AgentError::UnknownState { rss_dbm }),
            Some([id]) => Ok(*id),
            Some(ids) => Err(AgentError::AmbiguousState {
                rss_dbm,
                count: ids.len(),
            }),
        }
    }

    /// Number of quantized readings shared by states at different locations.
    pub fn collisions(&self) -> usize {
        self.by_key.values().filter(|ids| ids.len() > 1).count()
    }
}
