//! Finite descriptions of the schedulers produced by the engine.

use serde::{Deserialize, Serialize};

use crate::model::{ActionId, StateId};
use crate::transform::StepInterval;

/// A memory bit is set on arrival in `goal` while the step count lies in `window`
/// (always, when `window` is `None`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryBit {
    pub goal: Vec<StateId>,
    pub window: Option<StepInterval>,
}

impl MemoryBit {
    fn fires(&self, s: StateId, count: u64) -> bool {
        self.goal.binary_search(&s).is_ok() && self.window.is_none_or(|w| w.contains(count))
    }
}

/// Action used from step count `from` on, until the next run starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochRun {
    pub from: u64,
    pub action: ActionId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub state: StateId,
    pub memory: u32,
    /// Step-count dependent choices up to the horizon.
    pub epochs: Vec<EpochRun>,
    /// Choice once the step count exceeds the horizon.
    pub tail: Option<ActionId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchedulerMode {
    MemorylessDeterministic,
    EpochDependentDeterministic,
    Mixture,
}

/// Deterministic scheduler with finite memory and step-count dependent choices.
///
/// Only states with more than one enabled action are listed. The step count is
/// the number of Markovian steps of the digital path so far.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeterministicScheduler {
    pub memory: Vec<MemoryBit>,
    /// Digitization constant the step counts refer to.
    pub delta: Option<f64>,
    /// Last step count with explicit epoch decisions.
    pub horizon: Option<u64>,
    /// Sorted by `(state, memory)`.
    pub decisions: Vec<Decision>,
}

impl DeterministicScheduler {
    pub fn initial_memory(&self, s0: StateId) -> u32 {
        self.update_memory(0, s0, 0)
    }

    /// Memory after arriving in `s` with step count `count`.
    pub fn update_memory(&self, memory: u32, s: StateId, count: u64) -> u32 {
        let mut m = memory;
        for (b, bit) in self.memory.iter().enumerate() {
            if bit.fires(s, count) {
                m |= 1 << b;
            }
        }
        m
    }

    /// Memory after staying in `s` for the step counts `from..=to` (digitization self-loops).
    pub fn update_memory_span(&self, memory: u32, s: StateId, from: u64, to: u64) -> u32 {
        let mut m = memory;
        for (b, bit) in self.memory.iter().enumerate() {
            if from > to || bit.goal.binary_search(&s).is_err() {
                continue;
            }
            let hit = match bit.window {
                None => true,
                Some(w) => to >= w.lower && w.upper.is_none_or(|u| from <= u),
            };
            if hit {
                m |= 1 << b;
            }
        }
        m
    }

    pub fn decide(&self, s: StateId, memory: u32, count: u64) -> Option<ActionId> {
        let i = self.decisions.binary_search_by(|d| (d.state, d.memory).cmp(&(s, memory))).ok()?;
        let d = &self.decisions[i];
        match self.horizon {
            Some(h) if count <= h => {
                let k = d.epochs.partition_point(|r| r.from <= count);
                if k > 0 {
                    Some(d.epochs[k - 1].action)
                } else {
                    d.tail
                }
            }
            _ => d.tail,
        }
    }

    /// True when no choice depends on memory or step count.
    pub fn is_memoryless(&self) -> bool {
        let mut last: Option<(StateId, ActionId)> = None;
        for d in &self.decisions {
            let mut acts = d.epochs.iter().map(|r| r.action).chain(d.tail);
            let first = match acts.next() {
                Some(a) => a,
                None => continue,
            };
            if acts.any(|a| a != first) {
                return false;
            }
            if let Some((s, a)) = last {
                if s == d.state && a != first {
                    return false;
                }
            }
            last = Some((d.state, first));
        }
        true
    }
}

/// A scheduler as returned to callers: deterministic, or a one-off random
/// choice among deterministic components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SchedulerDescription {
    Deterministic(DeterministicScheduler),
    Mixture(Vec<(f64, DeterministicScheduler)>),
}

impl SchedulerDescription {
    pub fn mode(&self) -> SchedulerMode {
        match self {
            SchedulerDescription::Mixture(_) => SchedulerMode::Mixture,
            SchedulerDescription::Deterministic(d) if d.is_memoryless() => SchedulerMode::MemorylessDeterministic,
            SchedulerDescription::Deterministic(_) => SchedulerMode::EpochDependentDeterministic,
        }
    }

    pub fn components(&self) -> Vec<(f64, &DeterministicScheduler)> {
        match self {
            SchedulerDescription::Deterministic(d) => vec![(1.0, d)],
            SchedulerDescription::Mixture(v) => v.iter().map(|(w, d)| (*w, d)).collect(),
        }
    }
}
