//! Product of an MDP with one memory bit per objective whose goal set is not closed.
//!
//! A bit records that the objective has been settled: the goal was reached for
//! reachability and reward objectives, or reached inside the step window for
//! step-bounded ones. Objectives with closed goal sets need no bit since the
//! current state already tells whether the goal was visited.
//!
//! The product carries two layers with identical state and choice indexing:
//! the epoch layer (the model stepped through during the step-bounded prefix)
//! and the tail layer (used once every step window has been decided).

use std::collections::VecDeque;

use crate::graph::ChoiceGraph;
use crate::model::{Mdp, StateId, MARKOVIAN_ACTION};

use super::objective::{NormalizedObjective, ObjectiveKind};
use super::EngineError;

/// Arrival condition on the step count, inclusive bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Window {
    pub lo: u64,
    pub hi: Option<u64>,
}

impl Window {
    pub fn contains(&self, c: u64) -> bool {
        c >= self.lo && self.hi.is_none_or(|h| c <= h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Track {
    Reach,
    Reward(usize),
}

#[derive(Clone, Debug)]
pub(crate) struct ObjInfo {
    pub track: Track,
    pub goal: Vec<bool>,
    pub sign: f64,
    /// Mask value of the memory bit.
    pub bit: Option<u32>,
    /// Step window for step-bounded reachability.
    pub window: Option<Window>,
    /// Signed value collected at the initial state.
    pub offset: f64,
}

impl ObjInfo {
    pub fn is_min_reward(&self) -> bool {
        matches!(self.track, Track::Reward(_)) && self.sign < 0.0
    }

    pub fn is_max_reward(&self) -> bool {
        matches!(self.track, Track::Reward(_)) && self.sign > 0.0
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct EpochEntry {
    pub state: u32,
    pub base: u32,
    /// Timed bits that get set if the arrival step count lies in their window.
    pub pend: u32,
    pub p: f64,
}

#[derive(Debug)]
pub(crate) struct Product {
    pub objs: Vec<ObjInfo>,
    pub bits: u32,
    pub state: Vec<u32>,
    pub mask: Vec<u32>,
    index: Vec<u32>,
    pub initial: usize,
    pub row_groups: Vec<usize>,
    pub model_choice: Vec<u32>,
    pub inc: Vec<bool>,
    pub epoch_rows: Vec<usize>,
    pub epoch_entries: Vec<EpochEntry>,
    /// Signed step-independent rewards per objective and choice on the epoch layer.
    pub epoch_reward: Vec<Vec<f64>>,
    /// Signed arrival mass per objective and choice, earned when the arrival count is in the window.
    pub pending: Vec<Vec<f64>>,
    pub tail_rows: Vec<usize>,
    pub tail_entries: Vec<(usize, f64)>,
    pub tail_reward: Vec<Vec<f64>>,
    /// Last explicitly unrolled step count.
    pub horizon: u64,
    pub has_epochs: bool,
    /// Active timed bits for step counts `0..=horizon+1`.
    pub active: Vec<u32>,
}

impl Product {
    pub fn num_states(&self) -> usize {
        self.state.len()
    }

    pub fn choices(&self, x: usize) -> std::ops::Range<usize> {
        self.row_groups[x]..self.row_groups[x + 1]
    }

    pub fn lookup(&self, s: u32, mask: u32) -> usize {
        self.index[((s as usize) << self.bits) | mask as usize] as usize
    }

    pub fn epoch_target(&self, e: &EpochEntry, active: u32) -> usize {
        self.lookup(e.state, e.base | (e.pend & active))
    }

    pub fn active_at(&self, c: u64) -> u32 {
        self.active[(c.min(self.horizon + 1)) as usize]
    }

    /// Tail layer as a choice graph.
    pub fn tail_graph(&self) -> TailGraph<'_> {
        TailGraph { p: self }
    }
}

pub(crate) struct TailGraph<'a> {
    p: &'a Product,
}

impl ChoiceGraph for TailGraph<'_> {
    fn num_states(&self) -> usize {
        self.p.num_states()
    }
    fn choices(&self, s: usize) -> std::ops::Range<usize> {
        self.p.choices(s)
    }
    fn successors(&self, c: usize) -> &[(usize, f64)] {
        &self.p.tail_entries[self.p.tail_rows[c]..self.p.tail_rows[c + 1]]
    }
}

fn is_closed(mdp: &Mdp, goal: &[bool]) -> bool {
    (0..mdp.num_states).filter(|&s| goal[s]).all(|s| {
        mdp.choices(s)
            .all(|c| mdp.successors(c).iter().all(|&(t, p)| p <= 0.0 || goal[t]))
    })
}

fn same_shape(a: &Mdp, b: &Mdp) -> bool {
    a.num_states == b.num_states
        && a.initial == b.initial
        && (0..a.num_states).all(|s| a.choices(s) == b.choices(s))
        && (0..a.num_choices()).all(|c| a.action(c) == b.action(c))
}

struct LayerData {
    rows: Vec<usize>,
    entries: Vec<EpochEntry>,
    reward: Vec<Vec<f64>>,
    pending: Vec<Vec<f64>>,
}

pub(crate) fn build(epoch: &Mdp, tail: &Mdp, objectives: &[NormalizedObjective]) -> Result<Product, EngineError> {
    if !same_shape(epoch, tail) {
        return Err(EngineError::Unsupported("epoch and tail models differ in shape".into()));
    }
    let n = epoch.num_states;
    let mut objs = Vec::with_capacity(objectives.len());
    let mut bits = 0u32;
    for (i, o) in objectives.iter().enumerate() {
        let goal = o.kind.goal().bits().to_vec();
        if goal.len() != n {
            return Err(EngineError::Unsupported(format!("goal set of objective {i} has the wrong size")));
        }
        let closed = is_closed(epoch, &goal) && is_closed(tail, &goal);
        let mut bit = None;
        if !closed {
            bit = Some(1u32 << bits);
            bits += 1;
        }
        let (track, window) = match &o.kind {
            ObjectiveKind::UntimedReach { .. } => (Track::Reach, None),
            ObjectiveKind::TimedReach { .. } => {
                let j = o
                    .step_bound
                    .ok_or_else(|| EngineError::Unsupported(format!("objective {i} has a time bound but no step bound")))?;
                if j.is_all() {
                    (Track::Reach, None)
                } else if closed {
                    // a closed goal entered by step hi stays occupied through the window
                    (Track::Reach, Some(Window { lo: 0, hi: j.upper }))
                } else {
                    (Track::Reach, Some(Window { lo: j.lower, hi: j.upper }))
                }
            }
            ObjectiveKind::ExpReward { reward, .. } => {
                if *reward >= epoch.rewards.len() {
                    return Err(EngineError::Unsupported(format!("objective {i} refers to missing reward {reward}")));
                }
                (Track::Reward(*reward), None)
            }
            ObjectiveKind::ExpTime { .. } => {
                return Err(EngineError::Unsupported("expected time needs a Markov automaton".into()));
            }
        };
        let s0 = epoch.initial;
        let offset = match track {
            Track::Reach if goal[s0] && window.is_none_or(|w| w.contains(0)) => o.sign,
            _ => 0.0,
        };
        objs.push(ObjInfo { track, goal, sign: o.sign, bit, window, offset });
    }
    if bits > 16 {
        return Err(EngineError::Unsupported("too many objectives with open goal sets".into()));
    }
    let timed_windows: Vec<Window> = objs.iter().filter_map(|o| o.window).collect();
    let has_epochs = !timed_windows.is_empty();
    let horizon = timed_windows.iter().map(|w| w.hi.unwrap_or(w.lo)).max().unwrap_or(0);
    let mut active = Vec::with_capacity(horizon as usize + 2);
    for c in 0..=horizon + 1 {
        let mut a = 0;
        for o in &objs {
            if let (Some(b), Some(w)) = (o.bit, o.window) {
                if w.contains(c) {
                    a |= b;
                }
            }
        }
        active.push(a);
    }
    let mut variants = active.clone();
    variants.sort_unstable();
    variants.dedup();

    let untimed_bits: Vec<(u32, usize)> = objs.iter().enumerate().filter(|(_, o)| o.window.is_none()).filter_map(|(i, o)| o.bit.map(|b| (b, i))).collect();
    let timed_bits: Vec<(u32, usize)> = objs.iter().enumerate().filter(|(_, o)| o.window.is_some()).filter_map(|(i, o)| o.bit.map(|b| (b, i))).collect();
    let arrive = |mask: u32, t: StateId| -> (u32, u32) {
        let mut base = mask;
        for &(b, i) in &untimed_bits {
            if objs[i].goal[t] {
                base |= b;
            }
        }
        let mut pend = 0;
        for &(b, i) in &timed_bits {
            if objs[i].goal[t] && mask & b == 0 {
                pend |= b;
            }
        }
        (base, pend)
    };

    let s0 = epoch.initial;
    let (mut m0, p0) = arrive(0, s0);
    m0 |= p0 & active[0];
    let mut index = vec![u32::MAX; n << bits];
    let mut state = Vec::new();
    let mut mask = Vec::new();
    let mut queue = VecDeque::new();
    index[(s0 << bits) | m0 as usize] = 0;
    state.push(s0 as u32);
    mask.push(m0);
    queue.push_back(0usize);
    while let Some(x) = queue.pop_front() {
        let (s, m) = (state[x] as usize, mask[x]);
        for model in [epoch, tail] {
            for c in model.choices(s) {
                for &(t, p) in model.successors(c) {
                    if p <= 0.0 {
                        continue;
                    }
                    let (base, pend) = arrive(m, t);
                    for &a in &variants {
                        let m2 = base | (pend & a);
                        let slot = &mut index[(t << bits) | m2 as usize];
                        if *slot == u32::MAX {
                            *slot = state.len() as u32;
                            state.push(t as u32);
                            mask.push(m2);
                            queue.push_back(state.len() - 1);
                        }
                    }
                }
            }
        }
    }

    let mut row_groups = vec![0];
    let mut model_choice = Vec::new();
    let mut inc = Vec::new();
    for &s in &state {
        for c in epoch.choices(s as usize) {
            model_choice.push(c as u32);
            inc.push(epoch.action(c) == MARKOVIAN_ACTION);
        }
        row_groups.push(model_choice.len());
    }

    let layer = |model: &Mdp| -> LayerData {
        let d = objs.len();
        let mut rows = vec![0];
        let mut entries = Vec::new();
        let mut reward = vec![Vec::with_capacity(model_choice.len()); d];
        let mut pending = vec![Vec::new(); d];
        for (i, o) in objs.iter().enumerate() {
            if o.window.is_some() {
                pending[i] = Vec::with_capacity(model_choice.len());
            }
        }
        for x in 0..state.len() {
            let (s, m) = (state[x] as usize, mask[x]);
            for c in model.choices(s) {
                for &(t, p) in model.successors(c) {
                    if p > 0.0 {
                        let (base, pend) = arrive(m, t);
                        entries.push(EpochEntry { state: t as u32, base, pend, p });
                    }
                }
                rows.push(entries.len());
                let succ = &entries[rows[rows.len() - 2]..];
                for (i, o) in objs.iter().enumerate() {
                    let settled = match o.bit {
                        Some(b) => m & b != 0,
                        None => o.goal[s],
                    };
                    let arrival: f64 = match o.bit {
                        Some(b) if !settled => succ.iter().filter(|e| (e.base | e.pend) & b != 0).map(|e| e.p).sum(),
                        None if !settled => succ.iter().filter(|e| o.goal[e.state as usize]).map(|e| e.p).sum(),
                        _ => 0.0,
                    };
                    let r = match (o.track, o.window) {
                        (Track::Reach, None) => arrival,
                        (Track::Reach, Some(_)) => {
                            pending[i].push(o.sign * arrival);
                            0.0
                        }
                        (Track::Reward(j), _) if !settled => model.rewards[j].values[c],
                        (Track::Reward(_), _) => 0.0,
                    };
                    reward[i].push(o.sign * r);
                }
            }
        }
        LayerData { rows, entries, reward, pending }
    };

    let ep = layer(epoch);
    let tl = layer(tail);
    let a_tail = active[horizon as usize + 1];
    let lookup = |s: u32, m: u32| index[((s as usize) << bits) | m as usize] as usize;
    let tail_entries: Vec<(usize, f64)> = tl.entries.iter().map(|e| (lookup(e.state, e.base | (e.pend & a_tail)), e.p)).collect();
    let mut tail_reward = tl.reward;
    for (i, o) in objs.iter().enumerate() {
        if let Some(w) = o.window {
            if w.hi.is_none() {
                for (r, q) in tail_reward[i].iter_mut().zip(&tl.pending[i]) {
                    *r += q;
                }
            }
        }
    }
    Ok(Product {
        objs,
        bits,
        state,
        mask,
        index,
        initial: 0,
        row_groups,
        model_choice,
        inc,
        epoch_rows: ep.rows,
        epoch_entries: ep.entries,
        epoch_reward: ep.reward,
        pending: ep.pending,
        tail_rows: tl.rows,
        tail_entries,
        tail_reward,
        horizon,
        has_epochs,
        active,
    })
}
