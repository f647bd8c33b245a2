//! Simulation of Markov automata under timed and finite-memory schedulers,
//! Monte Carlo estimates with confidence intervals, and closed-form weights
//! of time-abstract and digital observations.

mod analytic;
mod sim;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{DeterministicScheduler, SchedulerDescription};
use crate::model::{ActionId, MarkovAutomaton, ModelError, StateId, StateSet};
use crate::transform::{StepInterval, TimeInterval};

pub use analytic::{abstraction_weight, ds_bounded_probability, time_abstract_expectation, WeightMode};
pub use sim::{digitize_path, digital_steps, estimate, simulate, EstimateOptions, MAX_PATH_STEPS, MIN_SAMPLES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonteCarloError {
    #[error("no stop condition reached within {0} steps")]
    HorizonTooSmall(usize),
    #[error("at least {min} samples are required, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("confidence level {0} is not in (0, 1)")]
    InvalidConfidence(f64),
    #[error("scheduler has no decision for state {0}")]
    NoDecision(StateId),
    #[error("scheduler chose action {action} which is not enabled in state {state}")]
    DisabledAction { state: StateId, action: ActionId },
    #[error("unsupported scheduler shape: {0}")]
    UnsupportedSchedulerShape(String),
    #[error("path is not consistent with the model: {0}")]
    InvalidPath(String),
    #[error("expected reward is infinite")]
    InfiniteReward,
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl MonteCarloError {
    pub fn code(&self) -> &'static str {
        match self {
            MonteCarloError::HorizonTooSmall(_) => "HorizonTooSmall",
            MonteCarloError::TooFewSamples { .. } => "TooFewSamples",
            MonteCarloError::InvalidConfidence(_) => "InvalidConfidence",
            MonteCarloError::NoDecision(_) => "NoDecision",
            MonteCarloError::DisabledAction { .. } => "DisabledAction",
            MonteCarloError::UnsupportedSchedulerShape(_) => "UnsupportedSchedulerShape",
            MonteCarloError::InvalidPath(_) => "InvalidPath",
            MonteCarloError::InfiniteReward => "InfiniteReward",
            MonteCarloError::Model(e) => e.code(),
        }
    }
}

/// Clock a threshold rule looks at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Clock {
    /// Total time elapsed since the start.
    TotalTime,
    /// Sojourn time of the most recent Markovian state.
    LastSojourn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    pub fn holds(self, x: f64, c: f64) -> bool {
        match self {
            Cmp::Lt => x < c,
            Cmp::Le => x <= c,
            Cmp::Gt => x > c,
            Cmp::Ge => x >= c,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub state: StateId,
    pub clock: Clock,
    pub cmp: Cmp,
    pub bound: f64,
    pub action: ActionId,
}

/// Timed scheduler: the first matching rule of a state decides, otherwise its default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScheduler {
    pub rules: Vec<ThresholdRule>,
    pub defaults: BTreeMap<StateId, ActionId>,
}

impl ThresholdScheduler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rule(mut self, state: StateId, clock: Clock, cmp: Cmp, bound: f64, action: ActionId) -> Self {
        self.rules.push(ThresholdRule { state, clock, cmp, bound, action });
        self
    }

    pub fn default_action(mut self, state: StateId, action: ActionId) -> Self {
        self.defaults.insert(state, action);
        self
    }

    /// Choice in `s` given the two clocks; `None` if neither a rule nor a default applies.
    pub fn decide(&self, s: StateId, total: f64, last: f64) -> Option<ActionId> {
        self.rules
            .iter()
            .filter(|r| r.state == s)
            .find(|r| {
                let x = match r.clock {
                    Clock::TotalTime => total,
                    Clock::LastSojourn => last,
                };
                r.cmp.holds(x, r.bound)
            })
            .map(|r| r.action)
            .or_else(|| self.defaults.get(&s).copied())
    }

    pub(crate) fn rules_of(&self, s: StateId) -> impl Iterator<Item = &ThresholdRule> {
        self.rules.iter().filter(move |r| r.state == s)
    }
}

/// Scheduler driving a simulation.
#[derive(Clone, Copy, Debug)]
pub enum SimScheduler<'a> {
    Threshold(&'a ThresholdScheduler),
    Description(&'a SchedulerDescription),
    Deterministic(&'a DeterministicScheduler),
}

impl<'a> From<&'a ThresholdScheduler> for SimScheduler<'a> {
    fn from(s: &'a ThresholdScheduler) -> Self {
        SimScheduler::Threshold(s)
    }
}

impl<'a> From<&'a SchedulerDescription> for SimScheduler<'a> {
    fn from(s: &'a SchedulerDescription) -> Self {
        SimScheduler::Description(s)
    }
}

impl<'a> From<&'a DeterministicScheduler> for SimScheduler<'a> {
    fn from(s: &'a DeterministicScheduler) -> Self {
        SimScheduler::Deterministic(s)
    }
}

/// One step of a timed path. `action` is `None` for Markovian steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub state: StateId,
    pub sojourn: f64,
    pub action: Option<ActionId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Goal,
    Horizon,
    Absorbed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub steps: Vec<PathStep>,
    /// State reached after the last step.
    pub last: StateId,
    pub terminated_by: Termination,
}

impl PathSample {
    /// Total elapsed time.
    pub fn duration(&self) -> f64 {
        self.steps.iter().map(|s| s.sojourn).sum()
    }

    /// Number of transitions.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// States and actions with the sojourn times dropped.
    pub fn time_abstract(&self) -> AbstractPath {
        AbstractPath {
            states: self.steps.iter().map(|s| s.state).chain(std::iter::once(self.last)).collect(),
            actions: self.steps.iter().map(|s| s.action).collect(),
        }
    }
}

/// Untimed path `states[0] actions[0] states[1] …`; `None` stands for ⊥.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractPath {
    pub states: Vec<StateId>,
    pub actions: Vec<Option<ActionId>>,
}

impl AbstractPath {
    pub fn start(s: StateId) -> Self {
        AbstractPath { states: vec![s], actions: Vec::new() }
    }

    pub fn push(&mut self, action: Option<ActionId>, next: StateId) {
        self.actions.push(action);
        self.states.push(next);
    }

    pub fn last(&self) -> StateId {
        *self.states.last().expect("paths are nonempty")
    }

    /// Number of ⊥ steps, i.e. digitization steps on a digital path.
    pub fn ds_count(&self) -> usize {
        self.actions.iter().filter(|a| a.is_none()).count()
    }
}

/// When a simulated path stops.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StopCondition {
    pub goal: Option<StateSet>,
    pub time_horizon: Option<f64>,
    pub max_steps: Option<usize>,
}

/// Path property estimated by [`estimate`].
#[derive(Clone, Debug, PartialEq)]
pub enum PathEvent {
    UntimedReach { goal: StateSet },
    TimedReach { goal: StateSet, interval: TimeInterval },
    /// Goal visited at a digitization step count inside `window`.
    DsBoundedReach { goal: StateSet, window: StepInterval, delta: f64 },
    /// Reward collected before the first visit of `goal`.
    RewardToGoal { reward: usize, goal: StateSet },
}

/// Sample mean with a normal-approximation confidence interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
    pub samples: usize,
    pub seed: u64,
    pub confidence: f64,
}

impl Estimate {
    pub fn interval(&self) -> (f64, f64) {
        (self.mean - self.half_width, self.mean + self.half_width)
    }

    pub fn contains(&self, x: f64) -> bool {
        (x - self.mean).abs() <= self.half_width
    }
}

pub(crate) fn check_model(ma: &MarkovAutomaton) -> Result<MarkovAutomaton, MonteCarloError> {
    Ok(ma.validated()?)
}
