//! Markov automata, MDPs, and model normalization.
//!
//! A Markov automaton mixes instantaneous probabilistic action transitions with
//! exponentially delayed Markovian transitions. After [`MarkovAutomaton::normalize`]
//! every state is either probabilistic (PS) or Markovian (MS).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{self, ChoiceGraph};

pub type StateId = usize;
pub type ActionId = usize;

/// Action id reserved for the Markovian pseudo action ⊥.
pub const MARKOVIAN_ACTION: ActionId = 0;
/// Name of ⊥ in files and reward tables.
pub const MARKOVIAN_ACTION_NAME: &str = "!markovian";
/// Absolute tolerance on distribution sums.
pub const PROB_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("model is invalid: {0}")]
    Invalid(String),
    #[error("model exhibits Zeno behavior in states {0:?}")]
    Zeno(Vec<StateId>),
    #[error("state {0} is not Markovian")]
    NotMarkovian(StateId),
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),
}

impl ModelError {
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::Invalid(_) => "InvalidModel",
            ModelError::Zeno(_) => "ZenoModel",
            ModelError::NotMarkovian(_) => "NotMarkovian",
            ModelError::InvalidMdp(_) => "InvalidMdp",
        }
    }
}

/// Sparse probability distribution over states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    entries: Vec<(StateId, f64)>,
}

impl Distribution {
    pub fn new(entries: Vec<(StateId, f64)>) -> Self {
        Distribution { entries }
    }

    pub fn dirac(s: StateId) -> Self {
        Distribution { entries: vec![(s, 1.0)] }
    }

    pub fn entries(&self) -> &[(StateId, f64)] {
        &self.entries
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn prob(&self, s: StateId) -> f64 {
        self.entries.iter().filter(|e| e.0 == s).map(|e| e.1).sum()
    }

    pub fn support(&self) -> impl Iterator<Item = StateId> + '_ {
        self.entries.iter().filter(|e| e.1 > 0.0).map(|e| e.0)
    }

    /// Checks the distribution invariants; returns a description of the first violation.
    pub fn check(&self, num_states: usize) -> Result<(), String> {
        if self.entries.is_empty() {
            return Err("empty distribution".into());
        }
        let mut seen = BTreeSet::new();
        for &(s, p) in &self.entries {
            if s >= num_states {
                return Err(format!("target {s} out of range"));
            }
            if !seen.insert(s) {
                return Err(format!("target {s} listed twice"));
            }
            if !(p > 0.0 && p <= 1.0 + PROB_TOLERANCE) || !p.is_finite() {
                return Err(format!("probability {p} for target {s} outside (0,1]"));
            }
        }
        let total = self.total();
        if (total - 1.0).abs() > PROB_TOLERANCE {
            return Err(format!("probabilities sum to {total}"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovianTransition {
    pub rate: f64,
    pub distribution: Distribution,
}

/// State reward rates and action rewards. Action rewards may use [`MARKOVIAN_ACTION`].
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardFunction {
    pub name: String,
    pub state_rewards: BTreeMap<StateId, f64>,
    pub action_rewards: BTreeMap<(StateId, ActionId), f64>,
}

impl RewardFunction {
    pub fn new(name: impl Into<String>) -> Self {
        RewardFunction { name: name.into(), ..Default::default() }
    }

    pub fn state_reward(&self, s: StateId) -> f64 {
        self.state_rewards.get(&s).copied().unwrap_or(0.0)
    }

    pub fn action_reward(&self, s: StateId, a: ActionId) -> f64 {
        self.action_rewards.get(&(s, a)).copied().unwrap_or(0.0)
    }
}

/// Explicit-state Markov automaton.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovAutomaton {
    pub num_states: usize,
    pub initial: StateId,
    /// Interned action names; index 0 is ⊥.
    pub action_names: Vec<String>,
    /// Probabilistic rows per state, in declaration order.
    pub prob_transitions: Vec<Vec<(ActionId, Distribution)>>,
    pub markovian: Vec<Option<MarkovianTransition>>,
    pub rewards: Vec<RewardFunction>,
    pub labels: Vec<BTreeSet<String>>,
}

impl MarkovAutomaton {
    pub fn new(num_states: usize, initial: StateId) -> Self {
        MarkovAutomaton {
            num_states,
            initial,
            action_names: vec![MARKOVIAN_ACTION_NAME.to_string()],
            prob_transitions: vec![Vec::new(); num_states],
            markovian: vec![None; num_states],
            rewards: Vec::new(),
            labels: vec![BTreeSet::new(); num_states],
        }
    }

    /// Interns an action name.
    pub fn action_id(&mut self, name: &str) -> ActionId {
        if let Some(i) = self.action_names.iter().position(|n| n == name) {
            return i;
        }
        self.action_names.push(name.to_string());
        self.action_names.len() - 1
    }

    pub fn find_action(&self, name: &str) -> Option<ActionId> {
        self.action_names.iter().position(|n| n == name)
    }

    pub fn add_probabilistic(&mut self, s: StateId, action: &str, dist: Distribution) -> ActionId {
        let a = self.action_id(action);
        self.prob_transitions[s].push((a, dist));
        a
    }

    pub fn set_markovian(&mut self, s: StateId, rate: f64, dist: Distribution) {
        self.markovian[s] = Some(MarkovianTransition { rate, distribution: dist });
    }

    pub fn add_label(&mut self, s: StateId, label: &str) {
        self.labels[s].insert(label.to_string());
    }

    pub fn reward_index(&self, name: &str) -> Option<usize> {
        self.rewards.iter().position(|r| r.name == name)
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l.contains(label))
    }

    pub fn states_with_label(&self, label: &str) -> StateSet {
        StateSet::from_fn(self.num_states, |s| self.labels[s].contains(label))
    }

    pub fn is_probabilistic(&self, s: StateId) -> bool {
        !self.prob_transitions[s].is_empty()
    }

    pub fn is_markovian(&self, s: StateId) -> bool {
        self.prob_transitions[s].is_empty() && self.markovian[s].is_some()
    }

    /// Returns `(PS, MS)`. States with neither transition kind belong to neither set.
    pub fn classify(&self) -> (StateSet, StateSet) {
        let ps = StateSet::from_fn(self.num_states, |s| self.is_probabilistic(s));
        let ms = StateSet::from_fn(self.num_states, |s| self.is_markovian(s));
        (ps, ms)
    }

    pub fn exit_rate(&self, s: StateId) -> Result<f64, ModelError> {
        match &self.markovian[s] {
            Some(m) if self.is_markovian(s) => Ok(m.rate),
            _ => Err(ModelError::NotMarkovian(s)),
        }
    }

    /// Maximum exit rate over Markovian states (0 if there are none).
    pub fn max_exit_rate(&self) -> f64 {
        (0..self.num_states)
            .filter(|&s| self.is_markovian(s))
            .map(|s| self.markovian[s].as_ref().unwrap().rate)
            .fold(0.0, f64::max)
    }

    /// Enabled actions of a normalized state: ⊥ for Markovian states.
    pub fn enabled_actions(&self, s: StateId) -> Vec<ActionId> {
        if self.is_probabilistic(s) {
            self.prob_transitions[s].iter().map(|(a, _)| *a).collect()
        } else if self.markovian[s].is_some() {
            vec![MARKOVIAN_ACTION]
        } else {
            Vec::new()
        }
    }

    /// Successor distribution of `(s, a)` in the normalized model.
    pub fn distribution(&self, s: StateId, a: ActionId) -> Option<&Distribution> {
        if a == MARKOVIAN_ACTION {
            if self.is_markovian(s) {
                self.markovian[s].as_ref().map(|m| &m.distribution)
            } else {
                None
            }
        } else {
            self.prob_transitions[s].iter().find(|(b, _)| *b == a).map(|(_, d)| d)
        }
    }

    /// Validates and normalizes: maximal progress, terminal completion.
    pub fn normalize(&self) -> (MarkovAutomaton, ValidationReport) {
        let mut report = ValidationReport::default();
        let mut out = self.clone();
        let n = self.num_states;
        if self.initial >= n {
            report.error(DiagnosticCode::StateOutOfRange, Location::model(), format!("initial state {} out of range", self.initial));
        }
        for s in 0..n {
            let mut seen = BTreeSet::new();
            for (a, dist) in &self.prob_transitions[s] {
                let name = self.action_names.get(*a).cloned().unwrap_or_else(|| format!("#{a}"));
                if *a == MARKOVIAN_ACTION || *a >= self.action_names.len() {
                    report.error(DiagnosticCode::InvalidAction, Location::action(s, &name), "invalid action id".into());
                }
                if !seen.insert(*a) {
                    report.error(
                        DiagnosticCode::DuplicateActionRow,
                        Location::action(s, &name),
                        format!("state {s} has two rows for action {name}"),
                    );
                }
                if let Err(msg) = dist.check(n) {
                    report.error(DiagnosticCode::NonStochasticRow, Location::action(s, &name), msg);
                }
            }
            if let Some(m) = &self.markovian[s] {
                if !(m.rate > 0.0) || !m.rate.is_finite() {
                    report.error(
                        DiagnosticCode::NonPositiveRate,
                        Location::action(s, MARKOVIAN_ACTION_NAME),
                        format!("rate {} is not positive", m.rate),
                    );
                }
                if let Err(msg) = m.distribution.check(n) {
                    report.error(DiagnosticCode::NonStochasticRow, Location::action(s, MARKOVIAN_ACTION_NAME), msg);
                }
                if !self.prob_transitions[s].is_empty() {
                    out.markovian[s] = None;
                    report.normalizations.push(Normalization::MarkovianDropped(s));
                }
            } else if self.prob_transitions[s].is_empty() {
                out.markovian[s] = Some(MarkovianTransition { rate: 1.0, distribution: Distribution::dirac(s) });
                report.normalizations.push(Normalization::SelfLoopAdded(s));
                report.warn(DiagnosticCode::TerminalState, Location::state(s), format!("terminal state {s} completed with a rate-1 self-loop"));
            }
        }
        for rf in &self.rewards {
            for (&s, &v) in &rf.state_rewards {
                if s >= n {
                    report.error(DiagnosticCode::StateOutOfRange, Location::state(s), format!("reward {} refers to state {s}", rf.name));
                    continue;
                }
                if !(v >= 0.0) || !v.is_finite() {
                    report.error(DiagnosticCode::NegativeReward, Location::state(s), format!("reward {} has value {v}", rf.name));
                }
                if v != 0.0 && !self.prob_transitions[s].is_empty() {
                    report.warn(
                        DiagnosticCode::StateRewardOnProbabilisticState,
                        Location::state(s),
                        format!("state reward of {} on probabilistic state {s} is ignored", rf.name),
                    );
                }
            }
            for (&(s, a), &v) in &rf.action_rewards {
                if s >= n || a >= self.action_names.len() {
                    report.error(DiagnosticCode::StateOutOfRange, Location::state(s), format!("reward {} refers to unknown row", rf.name));
                    continue;
                }
                if !(v >= 0.0) || !v.is_finite() {
                    report.error(DiagnosticCode::NegativeReward, Location::action(s, &self.action_names[a]), format!("reward {} has value {v}", rf.name));
                }
            }
        }
        for (k, d) in report.normalizations.iter().enumerate() {
            log::debug!("normalization {k}: {d}");
        }
        (out, report)
    }

    /// Normalizes, rejecting invalid or Zeno models.
    pub fn validated(&self) -> Result<MarkovAutomaton, ModelError> {
        let (ma, report) = self.normalize();
        if !report.errors.is_empty() {
            let msgs: Vec<String> = report.errors.iter().map(|d| d.to_string()).collect();
            return Err(ModelError::Invalid(msgs.join("; ")));
        }
        let zeno = ma.detect_zeno();
        if !zeno.is_empty() {
            return Err(ModelError::Zeno(zeno.iter().collect()));
        }
        Ok(ma)
    }

    /// States from which some scheduler stays in probabilistic states forever with positive probability.
    pub fn detect_zeno(&self) -> StateSet {
        let n = self.num_states;
        let ps: Vec<bool> = (0..n).map(|s| self.is_probabilistic(s)).collect();
        let view = MaChoices::new(self);
        // end components restricted to PS states
        let allowed: Vec<bool> = (0..ChoiceGraph::num_choices(&view))
            .map(|c| ps[view.owner[c]] && !view.markovian[c])
            .collect();
        let mecs = graph::maximal_end_components(&view, &ps, &allowed);
        let mut target = vec![false; n];
        for mec in &mecs {
            for &s in &mec.states {
                target[s] = true;
            }
        }
        let reach = graph::exists_reach(&view, &target, None);
        StateSet::from_fn(n, |s| reach[s])
    }

    /// Same automaton with action ids renumbered by first use: transitions in
    /// state order, then reward tables. Unused action names are dropped.
    pub fn canonical(&self) -> MarkovAutomaton {
        let mut map = vec![usize::MAX; self.action_names.len()];
        map[MARKOVIAN_ACTION] = MARKOVIAN_ACTION;
        let mut names = vec![MARKOVIAN_ACTION_NAME.to_string()];
        let mut visit = |a: ActionId, map: &mut Vec<usize>| {
            if map[a] == usize::MAX {
                map[a] = names.len();
                names.push(self.action_names[a].clone());
            }
        };
        for row in &self.prob_transitions {
            for (a, _) in row {
                visit(*a, &mut map);
            }
        }
        for rf in &self.rewards {
            for &(_, a) in rf.action_rewards.keys() {
                visit(a, &mut map);
            }
        }
        let mut out = self.clone();
        out.action_names = names;
        for row in &mut out.prob_transitions {
            for (a, _) in row.iter_mut() {
                *a = map[*a];
            }
        }
        for rf in &mut out.rewards {
            rf.action_rewards = rf.action_rewards.iter().map(|(&(s, a), &v)| ((s, map[a]), v)).collect();
        }
        out
    }
}

/// Choice-level view of a normalized MA used by graph algorithms.
pub(crate) struct MaChoices<'a> {
    pub(crate) row_groups: Vec<usize>,
    pub(crate) owner: Vec<StateId>,
    pub(crate) markovian: Vec<bool>,
    dists: Vec<&'a [(StateId, f64)]>,
}

impl<'a> MaChoices<'a> {
    pub(crate) fn new(ma: &'a MarkovAutomaton) -> Self {
        let mut row_groups = vec![0];
        let mut owner = Vec::new();
        let mut markovian = Vec::new();
        let mut dists = Vec::new();
        for s in 0..ma.num_states {
            if ma.is_probabilistic(s) {
                for (_, d) in &ma.prob_transitions[s] {
                    owner.push(s);
                    markovian.push(false);
                    dists.push(d.entries());
                }
            } else if let Some(m) = &ma.markovian[s] {
                owner.push(s);
                markovian.push(true);
                dists.push(m.distribution.entries());
            }
            row_groups.push(owner.len());
        }
        MaChoices { row_groups, owner, markovian, dists }
    }
}

impl ChoiceGraph for MaChoices<'_> {
    fn num_states(&self) -> usize {
        self.row_groups.len() - 1
    }
    fn choices(&self, s: usize) -> std::ops::Range<usize> {
        self.row_groups[s]..self.row_groups[s + 1]
    }
    fn successors(&self, c: usize) -> &[(usize, f64)] {
        self.dists[c]
    }
}

/// Dense set of states.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct StateSet {
    bits: Vec<bool>,
}

impl StateSet {
    pub fn empty(n: usize) -> Self {
        StateSet { bits: vec![false; n] }
    }

    pub fn from_fn(n: usize, f: impl Fn(StateId) -> bool) -> Self {
        StateSet { bits: (0..n).map(f).collect() }
    }

    pub fn from_states(n: usize, states: impl IntoIterator<Item = StateId>) -> Self {
        let mut set = StateSet::empty(n);
        for s in states {
            set.bits[s] = true;
        }
        set
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        StateSet { bits }
    }

    pub fn universe_size(&self) -> usize {
        self.bits.len()
    }

    pub fn contains(&self, s: StateId) -> bool {
        self.bits.get(s).copied().unwrap_or(false)
    }

    pub fn insert(&mut self, s: StateId) {
        self.bits[s] = true;
    }

    pub fn len(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn iter(&self) -> impl Iterator<Item = StateId> + '_ {
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn union(&self, other: &StateSet) -> StateSet {
        StateSet { bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagnosticCode {
    DuplicateActionRow,
    NonStochasticRow,
    NonPositiveRate,
    NegativeReward,
    StateOutOfRange,
    InvalidAction,
    TerminalState,
    StateRewardOnProbabilisticState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub state: Option<StateId>,
    pub action: Option<String>,
}

impl Location {
    pub fn model() -> Self {
        Location { state: None, action: None }
    }
    pub fn state(s: StateId) -> Self {
        Location { state: Some(s), action: None }
    }
    pub fn action(s: StateId, a: &str) -> Self {
        Location { state: Some(s), action: Some(a.to_string()) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub location: Location,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.code)?;
        if let Some(s) = self.location.state {
            write!(f, " at state {s}")?;
        }
        if let Some(a) = &self.location.action {
            write!(f, " action {a}")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    SelfLoopAdded(StateId),
    MarkovianDropped(StateId),
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Normalization::SelfLoopAdded(s) => write!(f, "added rate-1 self-loop at state {s}"),
            Normalization::MarkovianDropped(s) => write!(f, "dropped Markovian transition of probabilistic state {s}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Diagnostic>,
    pub warnings: Vec<Diagnostic>,
    pub normalizations: Vec<Normalization>,
}

impl ValidationReport {
    pub fn is_usable(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn is_clean(&self) -> bool {
        self.errors.is_empty() && self.warnings.is_empty() && self.normalizations.is_empty()
    }

    fn error(&mut self, code: DiagnosticCode, location: Location, message: String) {
        self.errors.push(Diagnostic { code, location, message });
    }

    fn warn(&mut self, code: DiagnosticCode, location: Location, message: String) {
        log::warn!("{message}");
        self.warnings.push(Diagnostic { code, location, message });
    }
}

/// Explicit MDP in compressed sparse row form.
///
/// Choices of state `s` are `row_groups[s]..row_groups[s+1]`; the entries of
/// choice `c` are `entries[rows[c]..rows[c+1]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mdp {
    pub num_states: usize,
    pub initial: StateId,
    pub action_names: Vec<String>,
    row_groups: Vec<usize>,
    choice_actions: Vec<ActionId>,
    rows: Vec<usize>,
    entries: Vec<(StateId, f64)>,
    /// Action reward vectors indexed by choice.
    pub rewards: Vec<ChoiceRewards>,
    pub labels: Vec<BTreeSet<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoiceRewards {
    pub name: String,
    pub values: Vec<f64>,
}

impl Mdp {
    pub fn num_choices(&self) -> usize {
        self.choice_actions.len()
    }

    pub fn choices(&self, s: StateId) -> std::ops::Range<usize> {
        self.row_groups[s]..self.row_groups[s + 1]
    }

    pub fn action(&self, c: usize) -> ActionId {
        self.choice_actions[c]
    }

    pub fn successors(&self, c: usize) -> &[(StateId, f64)] {
        &self.entries[self.rows[c]..self.rows[c + 1]]
    }

    /// Choice of `s` labelled `a`.
    pub fn choice_for(&self, s: StateId, a: ActionId) -> Option<usize> {
        self.choices(s).find(|&c| self.choice_actions[c] == a)
    }

    pub fn prob(&self, s: StateId, a: ActionId, t: StateId) -> f64 {
        self.choice_for(s, a)
            .map(|c| self.successors(c).iter().filter(|e| e.0 == t).map(|e| e.1).sum())
            .unwrap_or(0.0)
    }

    pub fn reward(&self, j: usize, s: StateId, a: ActionId) -> f64 {
        self.choice_for(s, a).map(|c| self.rewards[j].values[c]).unwrap_or(0.0)
    }

    pub fn num_transitions(&self) -> usize {
        self.entries.len()
    }
}

impl ChoiceGraph for Mdp {
    fn num_states(&self) -> usize {
        self.num_states
    }
    fn choices(&self, s: usize) -> std::ops::Range<usize> {
        Mdp::choices(self, s)
    }
    fn successors(&self, c: usize) -> &[(usize, f64)] {
        Mdp::successors(self, c)
    }
}

/// Incremental construction of an [`Mdp`]; states must be opened in order.
#[derive(Debug)]
pub struct MdpBuilder {
    mdp: Mdp,
    reward_names: Vec<String>,
    pending_rewards: Vec<Vec<f64>>,
}

impl MdpBuilder {
    pub fn new(action_names: Vec<String>, reward_names: Vec<String>) -> Self {
        let k = reward_names.len();
        MdpBuilder {
            mdp: Mdp {
                num_states: 0,
                initial: 0,
                action_names,
                row_groups: vec![0],
                choice_actions: Vec::new(),
                rows: vec![0],
                entries: Vec::new(),
                rewards: Vec::new(),
                labels: Vec::new(),
            },
            reward_names,
            pending_rewards: vec![Vec::new(); k],
        }
    }

    /// Starts a new state; subsequent choices belong to it.
    pub fn open_state(&mut self, labels: BTreeSet<String>) -> StateId {
        if self.mdp.num_states > 0 {
            self.mdp.row_groups.push(self.mdp.choice_actions.len());
        }
        self.mdp.labels.push(labels);
        self.mdp.num_states += 1;
        self.mdp.num_states - 1
    }

    pub fn add_choice(&mut self, action: ActionId, entries: &[(StateId, f64)], rewards: &[f64]) {
        self.mdp.choice_actions.push(action);
        self.mdp.entries.extend_from_slice(entries);
        self.mdp.rows.push(self.mdp.entries.len());
        for (j, r) in self.pending_rewards.iter_mut().enumerate() {
            r.push(rewards.get(j).copied().unwrap_or(0.0));
        }
    }

    pub fn build(mut self, initial: StateId) -> Result<Mdp, ModelError> {
        if self.mdp.num_states > 0 {
            self.mdp.row_groups.push(self.mdp.choice_actions.len());
        }
        self.mdp.initial = initial;
        self.mdp.rewards = self
            .reward_names
            .into_iter()
            .zip(self.pending_rewards)
            .map(|(name, values)| ChoiceRewards { name, values })
            .collect();
        let m = &self.mdp;
        if initial >= m.num_states {
            return Err(ModelError::InvalidMdp(format!("initial state {initial} out of range")));
        }
        for s in 0..m.num_states {
            if m.choices(s).is_empty() {
                return Err(ModelError::InvalidMdp(format!("state {s} has no enabled action")));
            }
            for c in m.choices(s) {
                let mut total = 0.0;
                for &(t, p) in m.successors(c) {
                    if t >= m.num_states || !(p >= 0.0) {
                        return Err(ModelError::InvalidMdp(format!("bad entry ({t}, {p}) in choice {c}")));
                    }
                    total += p;
                }
                if (total - 1.0).abs() > PROB_TOLERANCE {
                    return Err(ModelError::InvalidMdp(format!("choice {c} of state {s} sums to {total}")));
                }
            }
        }
        Ok(self.mdp)
    }
}
