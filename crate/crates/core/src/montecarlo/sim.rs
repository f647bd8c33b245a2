use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::engine::{DeterministicScheduler, SchedulerDescription};
use crate::graph::exists_reach;
use crate::model::{ActionId, Distribution, MarkovAutomaton, StateId, StateSet, MARKOVIAN_ACTION};
use crate::transform::underlying_mdp;

use super::{
    check_model, AbstractPath, Estimate, MonteCarloError, PathEvent, PathSample, PathStep, SimScheduler, StopCondition,
    Termination,
};

/// Transition cap per path.
pub const MAX_PATH_STEPS: usize = 1_000_000;
/// Smallest sample size accepted by [`estimate`].
pub const MIN_SAMPLES: usize = 1000;
const CHUNK: usize = 1024;

/// Number of digitization self-loops for a sojourn of `t`: the largest `m` with `mδ ≤ t`.
pub fn digital_steps(t: f64, delta: f64) -> u64 {
    let k = t / delta;
    let r = k.round();
    if (k - r).abs() <= 1e-12 * r.max(1.0) {
        r as u64
    } else {
        k.floor() as u64
    }
}

/// Stay of a path in one state.
pub(crate) struct Visit {
    pub state: StateId,
    pub enter: f64,
    /// Infinite in absorbing states.
    pub sojourn: f64,
    pub action: Option<ActionId>,
    /// Step counts (w.r.t. the walk's δ) at which the state is occupied.
    pub ds_from: u64,
    pub ds_to: u64,
    pub next: Option<StateId>,
}

pub(crate) trait Monitor {
    /// Called on arrival; returning `true` ends the walk.
    fn enter(&mut self, s: StateId, time: f64, ds: u64) -> bool;
    /// Called once the stay and the next transition are known.
    fn step(&mut self, v: &Visit) -> bool;
}

fn sample_dist(d: &Distribution, rng: &mut impl Rng) -> StateId {
    let u: f64 = rng.gen::<f64>() * d.total();
    let mut acc = 0.0;
    for &(t, p) in d.entries() {
        acc += p;
        if u < acc {
            return t;
        }
    }
    d.entries().last().expect("distributions are nonempty").0
}

fn pick_component<'a>(d: &'a SchedulerDescription, rng: &mut impl Rng) -> &'a DeterministicScheduler {
    match d {
        SchedulerDescription::Deterministic(s) => s,
        SchedulerDescription::Mixture(parts) => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for (w, s) in parts {
                acc += w;
                if u < acc {
                    return s;
                }
            }
            &parts.last().expect("mixtures are nonempty").1
        }
    }
}

fn is_absorbing(ma: &MarkovAutomaton, s: StateId) -> bool {
    ma.is_markovian(s) && ma.markovian[s].as_ref().is_some_and(|m| m.distribution.support().all(|t| t == s))
}

/// Runs one path of `ma` (already validated) and reports it to `mon`.
pub(crate) fn walk(
    ma: &MarkovAutomaton,
    sched: SimScheduler<'_>,
    rng: &mut ChaCha8Rng,
    ds_delta: Option<f64>,
    mon: &mut impl Monitor,
) -> Result<(), MonteCarloError> {
    let comp = match sched {
        SimScheduler::Description(d) => Some(pick_component(d, rng)),
        SimScheduler::Deterministic(d) => Some(d),
        SimScheduler::Threshold(_) => None,
    };
    let mut s = ma.initial;
    let (mut total, mut last, mut ds, mut count) = (0.0f64, 0.0f64, 0u64, 0u64);
    let mut memory = comp.map_or(0, |c| c.initial_memory(s));
    if mon.enter(s, total, ds) {
        return Ok(());
    }
    for _ in 0..MAX_PATH_STEPS {
        if ma.is_markovian(s) {
            let m = ma.markovian[s].as_ref().expect("Markovian state");
            if is_absorbing(ma, s) {
                let v = Visit { state: s, enter: total, sojourn: f64::INFINITY, action: None, ds_from: ds, ds_to: u64::MAX, next: None };
                mon.step(&v);
                return Ok(());
            }
            let t = Exp::new(m.rate).expect("positive rate").sample(rng);
            let next = sample_dist(&m.distribution, rng);
            let k = ds_delta.map_or(0, |d| digital_steps(t, d));
            let v = Visit { state: s, enter: total, sojourn: t, action: None, ds_from: ds, ds_to: ds + k, next: Some(next) };
            let stop = mon.step(&v);
            if let Some(c) = comp {
                let ks = c.delta.map_or(0, |d| digital_steps(t, d));
                memory = c.update_memory_span(memory, s, count + 1, count + ks);
                count += ks + 1;
                memory = c.update_memory(memory, next, count);
            }
            ds += k + 1;
            total += t;
            last = t;
            s = next;
            if stop || mon.enter(s, total, ds) {
                return Ok(());
            }
        } else {
            let a = match (sched, comp) {
                (SimScheduler::Threshold(th), _) => th.decide(s, total, last),
                (_, Some(c)) => c.decide(s, memory, count),
                _ => None,
            };
            let enabled = ma.enabled_actions(s);
            let a = match a {
                Some(a) => a,
                None if enabled.len() == 1 => enabled[0],
                None => return Err(MonteCarloError::NoDecision(s)),
            };
            let dist = ma.distribution(s, a).filter(|_| a != MARKOVIAN_ACTION);
            let dist = dist.ok_or(MonteCarloError::DisabledAction { state: s, action: a })?;
            let next = sample_dist(dist, rng);
            let v = Visit { state: s, enter: total, sojourn: 0.0, action: Some(a), ds_from: ds, ds_to: ds, next: Some(next) };
            let stop = mon.step(&v);
            if let Some(c) = comp {
                memory = c.update_memory(memory, next, count);
            }
            s = next;
            if stop || mon.enter(s, total, ds) {
                return Ok(());
            }
        }
    }
    Err(MonteCarloError::HorizonTooSmall(MAX_PATH_STEPS))
}

struct Recorder<'a> {
    stop: &'a StopCondition,
    steps: Vec<PathStep>,
    last: StateId,
    end: Option<Termination>,
}

impl Monitor for Recorder<'_> {
    fn enter(&mut self, s: StateId, _: f64, _: u64) -> bool {
        self.last = s;
        if self.stop.goal.as_ref().is_some_and(|g| g.contains(s)) {
            self.end = Some(Termination::Goal);
            return true;
        }
        if self.stop.max_steps.is_some_and(|m| self.steps.len() >= m) {
            self.end = Some(Termination::Horizon);
            return true;
        }
        false
    }

    fn step(&mut self, v: &Visit) -> bool {
        if v.next.is_none() {
            self.end = Some(Termination::Absorbed);
            return true;
        }
        self.steps.push(PathStep { state: v.state, sojourn: v.sojourn, action: v.action });
        if self.stop.time_horizon.is_some_and(|h| v.enter + v.sojourn > h) {
            self.end = Some(Termination::Horizon);
            self.last = v.next.unwrap();
            return true;
        }
        false
    }
}

/// Samples one timed path; the same seed gives the same path.
pub fn simulate<'a>(
    ma: &MarkovAutomaton,
    sched: impl Into<SimScheduler<'a>>,
    stop: &StopCondition,
    seed: u64,
) -> Result<PathSample, MonteCarloError> {
    let ma = check_model(ma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rec = Recorder { stop, steps: Vec::new(), last: ma.initial, end: None };
    walk(&ma, sched.into(), &mut rng, None, &mut rec)?;
    let terminated_by = rec.end.unwrap_or(Termination::Horizon);
    Ok(PathSample { steps: rec.steps, last: rec.last, terminated_by })
}

/// Digital path of a timed path: every Markovian stay of `t` becomes
/// `⌊t/δ⌋` ⊥ self-loops followed by the ⊥ move.
pub fn digitize_path(path: &PathSample, delta: f64) -> AbstractPath {
    let mut out = AbstractPath { states: Vec::new(), actions: Vec::new() };
    for st in &path.steps {
        if st.action.is_none() {
            for _ in 0..digital_steps(st.sojourn, delta) {
                out.states.push(st.state);
                out.actions.push(None);
            }
        }
        out.states.push(st.state);
        out.actions.push(st.action);
    }
    out.states.push(path.last);
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateOptions {
    pub samples: usize,
    pub confidence: f64,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions { samples: 100_000, confidence: 0.99, seed: 0, workers: None }
    }
}

struct EventMonitor<'a> {
    ma: &'a MarkovAutomaton,
    event: &'a PathEvent,
    live: &'a [bool],
    value: f64,
    infinite: bool,
}

fn goal_of(e: &PathEvent) -> &StateSet {
    match e {
        PathEvent::UntimedReach { goal }
        | PathEvent::TimedReach { goal, .. }
        | PathEvent::DsBoundedReach { goal, .. }
        | PathEvent::RewardToGoal { goal, .. } => goal,
    }
}

impl Monitor for EventMonitor<'_> {
    fn enter(&mut self, s: StateId, _: f64, ds: u64) -> bool {
        match self.event {
            PathEvent::UntimedReach { goal } if goal.contains(s) => {
                self.value = 1.0;
                true
            }
            PathEvent::RewardToGoal { goal, .. } => goal.contains(s),
            PathEvent::DsBoundedReach { window, .. } if window.upper.is_some_and(|u| ds > u) => true,
            _ => !self.live[s],
        }
    }

    fn step(&mut self, v: &Visit) -> bool {
        let absorbed = v.next.is_none();
        match self.event {
            PathEvent::UntimedReach { .. } => absorbed,
            PathEvent::TimedReach { goal, interval } => {
                let end = v.enter + v.sojourn;
                if goal.contains(v.state) && interval.upper.is_none_or(|u| v.enter <= u) && end >= interval.lower {
                    self.value = 1.0;
                    return true;
                }
                absorbed || interval.upper.is_some_and(|u| end > u)
            }
            PathEvent::DsBoundedReach { goal, window, .. } => {
                if goal.contains(v.state) && v.ds_to >= window.lower && window.upper.is_none_or(|u| v.ds_from <= u) {
                    self.value = 1.0;
                    return true;
                }
                absorbed
            }
            PathEvent::RewardToGoal { reward, .. } => {
                let rf = &self.ma.rewards[*reward];
                if absorbed {
                    self.infinite = rf.state_reward(v.state) > 0.0 || rf.action_reward(v.state, MARKOVIAN_ACTION) > 0.0;
                    return true;
                }
                let a = v.action.unwrap_or(MARKOVIAN_ACTION);
                self.value += rf.state_reward(v.state) * v.sojourn + rf.action_reward(v.state, a);
                false
            }
        }
    }
}

fn chunk_sums(
    ma: &MarkovAutomaton,
    sched: SimScheduler<'_>,
    event: &PathEvent,
    live: &[bool],
    seed: u64,
    k: usize,
    n: usize,
) -> Result<(f64, f64), MonteCarloError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    let ds_delta = match event {
        PathEvent::DsBoundedReach { delta, .. } => Some(*delta),
        _ => None,
    };
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..n {
        let mut mon = EventMonitor { ma, event, live, value: 0.0, infinite: false };
        walk(ma, sched, &mut rng, ds_delta, &mut mon)?;
        if mon.infinite {
            return Err(MonteCarloError::InfiniteReward);
        }
        sum += mon.value;
        sq += mon.value * mon.value;
    }
    Ok((sum, sq))
}

/// Estimates the probability (or expected reward) of `event` from `opts.samples` paths.
///
/// Samples are split into fixed chunks, each with its own ChaCha stream, so the
/// result does not depend on the number of workers.
pub fn estimate<'a>(
    ma: &MarkovAutomaton,
    sched: impl Into<SimScheduler<'a>>,
    event: &PathEvent,
    opts: &EstimateOptions,
) -> Result<Estimate, MonteCarloError> {
    if opts.samples < MIN_SAMPLES {
        return Err(MonteCarloError::TooFewSamples { min: MIN_SAMPLES, got: opts.samples });
    }
    if !(opts.confidence > 0.0 && opts.confidence < 1.0) {
        return Err(MonteCarloError::InvalidConfidence(opts.confidence));
    }
    let ma = check_model(ma)?;
    let sched = sched.into();
    // states from which the goal is still reachable at all
    let goal = goal_of(event);
    let live = match event {
        PathEvent::RewardToGoal { .. } => vec![true; ma.num_states],
        _ => exists_reach(&underlying_mdp(&ma), goal.bits(), None),
    };
    let n = opts.samples;
    let chunks = n.div_ceil(CHUNK);
    let run = || -> Vec<Result<(f64, f64), MonteCarloError>> {
        (0..chunks)
            .into_par_iter()
            .map(|k| chunk_sums(&ma, sched, event, &live, opts.seed, k, CHUNK.min(n - k * CHUNK)))
            .collect()
    };
    let parts = match opts.workers {
        Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        },
        None => run(),
    };
    let (mut sum, mut sq) = (0.0, 0.0);
    for p in parts {
        let (a, b) = p?;
        sum += a;
        sq += b;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    let z = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(0.5 + opts.confidence / 2.0);
    Ok(Estimate { mean, half_width: z * (var / nf).sqrt(), samples: n, seed: opts.seed, confidence: opts.confidence })
}
