//! Closed forms for time-abstract and digital projections of threshold schedulers.

use crate::model::{ActionId, MarkovAutomaton, StateId, StateSet, MARKOVIAN_ACTION};
use crate::transform::StepInterval;

use super::{check_model, AbstractPath, Clock, MonteCarloError, PathEvent, ThresholdScheduler};

/// Observation the projected scheduler conditions on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightMode {
    /// Only states and actions are seen.
    TimeAbstract,
    /// A digital path for constant δ: self-loops reveal sojourns up to δ.
    Digital(f64),
}

/// Paths below this probability are dropped during exploration.
const PRUNE: f64 = 1e-13;
const MAX_DEPTH: usize = 100_000;

fn check_path(ma: &MarkovAutomaton, path: &AbstractPath, digital: bool) -> Result<(), MonteCarloError> {
    if path.states.len() != path.actions.len() + 1 || path.states.iter().any(|&s| s >= ma.num_states) {
        return Err(MonteCarloError::InvalidPath("malformed path".into()));
    }
    if path.states[0] != ma.initial {
        return Err(MonteCarloError::InvalidPath("path does not start in the initial state".into()));
    }
    for (i, a) in path.actions.iter().enumerate() {
        let (s, t) = (path.states[i], path.states[i + 1]);
        let ok = match a {
            Some(a) => *a != MARKOVIAN_ACTION && ma.distribution(s, *a).is_some_and(|d| d.prob(t) > 0.0),
            None => ma.is_markovian(s) && (digital && s == t || ma.distribution(s, MARKOVIAN_ACTION).is_some_and(|d| d.prob(t) > 0.0)),
        };
        if !ok {
            return Err(MonteCarloError::InvalidPath(format!("no transition from {s} to {t} at step {i}")));
        }
    }
    Ok(())
}

/// Markovian stays of a path as `(state, self-loops)`.
fn markov_blocks(path: &AbstractPath, digital: bool) -> Vec<(StateId, u64)> {
    let mut out = Vec::new();
    let mut i = 0;
    let n = path.actions.len();
    while i < n {
        if path.actions[i].is_some() {
            i += 1;
            continue;
        }
        let s = path.states[i];
        let mut m = 0;
        if digital {
            // all but the last consecutive ⊥ step from s back to s are digitization self-loops
            while i + 1 < n && path.actions[i + 1].is_none() && path.states[i + 1] == s {
                m += 1;
                i += 1;
            }
        }
        out.push((s, m));
        i += 1;
    }
    out
}

fn tail_mass(rate: f64, a: f64, b: f64) -> f64 {
    let hi = if b.is_finite() { (-rate * b).exp() } else { 0.0 };
    (-rate * a).exp() - hi
}

/// Probability that `sched` picks `action` at the last state of `path`,
/// given only the time-abstract or digital observation of the path.
///
/// Closed forms exist when the last state's rules all use one clock that is
/// determined by a single Markovian stay and no earlier choice on the path
/// depended on time.
pub fn abstraction_weight(
    ma: &MarkovAutomaton,
    sched: &ThresholdScheduler,
    path: &AbstractPath,
    action: ActionId,
    mode: WeightMode,
) -> Result<f64, MonteCarloError> {
    let digital = matches!(mode, WeightMode::Digital(_));
    check_path(ma, path, digital)?;
    let s = path.last();
    if !ma.is_probabilistic(s) {
        return Err(MonteCarloError::InvalidPath(format!("state {s} is not probabilistic")));
    }
    let enabled = ma.enabled_actions(s);
    if !enabled.contains(&action) {
        return Ok(0.0);
    }
    let decide = |x: f64| -> Result<ActionId, MonteCarloError> {
        match sched.decide(s, x, x) {
            Some(a) => Ok(a),
            None if enabled.len() == 1 => Ok(enabled[0]),
            None => Err(MonteCarloError::NoDecision(s)),
        }
    };
    let rules: Vec<_> = sched.rules_of(s).collect();
    if rules.is_empty() || enabled.len() == 1 {
        return Ok(if decide(0.0)? == action { 1.0 } else { 0.0 });
    }
    let clock = rules[0].clock;
    if rules.iter().any(|r| r.clock != clock) {
        return Err(MonteCarloError::UnsupportedSchedulerShape(format!("state {s} mixes clocks")));
    }
    for i in 0..path.actions.len() {
        let p = path.states[i];
        if ma.is_probabilistic(p) && ma.enabled_actions(p).len() > 1 && sched.rules_of(p).next().is_some() {
            return Err(MonteCarloError::UnsupportedSchedulerShape(format!("timed choice in state {p} before the last state")));
        }
    }
    let blocks = markov_blocks(path, digital);
    let block = match clock {
        Clock::LastSojourn => blocks.last(),
        Clock::TotalTime if blocks.len() > 1 => {
            return Err(MonteCarloError::UnsupportedSchedulerShape("total time over several Markovian stays".into()))
        }
        Clock::TotalTime => blocks.first(),
    };
    let Some(&(b, m)) = block else {
        return Ok(if decide(0.0)? == action { 1.0 } else { 0.0 });
    };
    let rate = ma.exit_rate(b)?;
    let (lo, hi) = match mode {
        WeightMode::TimeAbstract => (0.0, f64::INFINITY),
        WeightMode::Digital(d) => {
            if ma.distribution(b, MARKOVIAN_ACTION).is_some_and(|d| d.prob(b) > 0.0) {
                return Err(MonteCarloError::UnsupportedSchedulerShape(format!(
                    "state {b} has a Markovian self-loop, its digital stay is ambiguous"
                )));
            }
            (m as f64 * d, (m + 1) as f64 * d)
        }
    };
    let mut cuts: Vec<f64> = rules.iter().map(|r| r.bound).filter(|&c| c > lo && c < hi).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut pts = vec![lo];
    pts.extend(cuts);
    pts.push(hi);
    let total = tail_mass(rate, lo, hi);
    if !(total > 0.0) {
        return Err(MonteCarloError::InvalidPath("observation has probability zero".into()));
    }
    let mut acc = 0.0;
    for w in pts.windows(2) {
        let x = if w[1].is_finite() { 0.5 * (w[0] + w[1]) } else { w[0] + 1.0 };
        if decide(x)? == action {
            acc += tail_mass(rate, w[0], w[1]);
        }
    }
    Ok(acc / total)
}

/// Probability of reaching `goal` within the step counts `window` on the
/// digitization, under the digital projection of `sched`.
pub fn ds_bounded_probability(
    ma: &MarkovAutomaton,
    sched: &ThresholdScheduler,
    goal: &StateSet,
    window: StepInterval,
    delta: f64,
) -> Result<f64, MonteCarloError> {
    let ma = check_model(ma)?;
    let upper = window
        .upper
        .ok_or_else(|| MonteCarloError::UnsupportedSchedulerShape("step window must be bounded".into()))?;
    let mut acc = 0.0;
    let mut stack = vec![(AbstractPath::start(ma.initial), 1.0f64, 0u64)];
    while let Some((path, prob, ds)) = stack.pop() {
        let s = path.last();
        if goal.contains(s) && window.contains(ds) {
            acc += prob;
            continue;
        }
        if ds > upper || prob < PRUNE {
            continue;
        }
        if path.actions.len() > MAX_DEPTH {
            return Err(MonteCarloError::HorizonTooSmall(MAX_DEPTH));
        }
        if ma.is_probabilistic(s) {
            for a in ma.enabled_actions(s) {
                let w = abstraction_weight(&ma, sched, &path, a, WeightMode::Digital(delta))?;
                if w == 0.0 {
                    continue;
                }
                for &(t, p) in ma.distribution(s, a).expect("enabled action").entries() {
                    let mut next = path.clone();
                    next.push(Some(a), t);
                    stack.push((next, prob * w * p, ds));
                }
            }
        } else {
            let m = ma.markovian[s].as_ref().expect("normalized state");
            let leave = -(-m.rate * delta).exp_m1();
            let mut stay = 1.0 - leave;
            for &(t, p) in m.distribution.entries() {
                let mut q = p * leave;
                if t == s {
                    q += stay;
                    stay = 0.0;
                }
                let mut next = path.clone();
                next.push(None, t);
                stack.push((next, prob * q, ds + 1));
            }
            if stay > 0.0 {
                let mut next = path.clone();
                next.push(None, s);
                stack.push((next, prob * stay, ds + 1));
            }
        }
    }
    Ok(acc)
}

/// Untimed reachability probability or expected reward to a goal on the
/// underlying MDP, under the time-abstract projection of `sched`.
///
/// Exact up to the pruned mass of paths below 1e-13.
pub fn time_abstract_expectation(ma: &MarkovAutomaton, sched: &ThresholdScheduler, event: &PathEvent) -> Result<f64, MonteCarloError> {
    let ma = check_model(ma)?;
    let (goal, reward) = match event {
        PathEvent::UntimedReach { goal } => (goal, None),
        PathEvent::RewardToGoal { reward, goal } => (goal, Some(&ma.rewards[*reward])),
        _ => return Err(MonteCarloError::UnsupportedSchedulerShape("only untimed events have a time-abstract value".into())),
    };
    let mut acc = 0.0;
    let mut stack = vec![(AbstractPath::start(ma.initial), 1.0f64, 0.0f64)];
    while let Some((path, prob, collected)) = stack.pop() {
        let s = path.last();
        if goal.contains(s) {
            acc += prob * if reward.is_some() { collected } else { 1.0 };
            continue;
        }
        if prob < PRUNE {
            continue;
        }
        if path.actions.len() > MAX_DEPTH {
            return Err(MonteCarloError::HorizonTooSmall(MAX_DEPTH));
        }
        if ma.is_probabilistic(s) {
            for a in ma.enabled_actions(s) {
                let w = abstraction_weight(&ma, sched, &path, a, WeightMode::TimeAbstract)?;
                if w == 0.0 {
                    continue;
                }
                let r = reward.map_or(0.0, |rf| rf.action_reward(s, a));
                for &(t, p) in ma.distribution(s, a).expect("enabled action").entries() {
                    let mut next = path.clone();
                    next.push(Some(a), t);
                    stack.push((next, prob * w * p, collected + r));
                }
            }
        } else {
            let m = ma.markovian[s].as_ref().expect("normalized state");
            let r = reward.map_or(0.0, |rf| rf.action_reward(s, MARKOVIAN_ACTION) + rf.state_reward(s) / m.rate);
            if m.distribution.support().all(|t| t == s) {
                // absorbing outside the goal
                if reward.is_some() && r > 0.0 {
                    return Err(MonteCarloError::InfiniteReward);
                }
                acc += prob * if reward.is_some() { collected } else { 0.0 };
                continue;
            }
            for &(t, p) in m.distribution.entries() {
                let mut next = path.clone();
                next.push(None, t);
                stack.push((next, prob * p, collected + r));
            }
        }
    }
    Ok(acc)
}
