//! Reductions from Markov automata to MDPs: the underlying MDP, digitization,
//! step-interval conversion and digitization error bounds.

use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{MarkovAutomaton, Mdp, MdpBuilder, ModelError, MARKOVIAN_ACTION};

/// Smallest digitization constant `choose_delta` will return.
pub const MIN_DELTA: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("interval {interval} is not well-formed for delta {delta}")]
    NotWellFormed { interval: TimeInterval, delta: f64 },
    #[error("digitization needs delta {needed:e}, below the supported minimum")]
    Diverges { needed: f64 },
    #[error("invalid time interval: {0}")]
    InvalidInterval(String),
    #[error("invalid digitization constant {0}")]
    InvalidDelta(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl TransformError {
    pub fn code(&self) -> &'static str {
        match self {
            TransformError::NotWellFormed { .. } => "NotWellFormed",
            TransformError::Diverges { .. } => "DigitizationDiverges",
            TransformError::InvalidInterval(_) => "InvalidInterval",
            TransformError::InvalidDelta(_) => "InvalidDelta",
            TransformError::Model(e) => e.code(),
        }
    }
}

/// Closed time interval `[lower, upper]`, `upper = None` meaning +∞.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeInterval {
    pub lower: f64,
    pub upper: Option<f64>,
}

impl TimeInterval {
    pub fn new(lower: f64, upper: Option<f64>) -> Result<Self, TransformError> {
        if !(lower >= 0.0) || !lower.is_finite() {
            return Err(TransformError::InvalidInterval(format!("lower bound {lower} must be finite and nonnegative")));
        }
        if let Some(b) = upper {
            if !b.is_finite() || !(b > lower) {
                return Err(TransformError::InvalidInterval(format!("upper bound {b} must exceed lower bound {lower}")));
            }
        }
        Ok(TimeInterval { lower, upper })
    }

    pub fn unbounded() -> Self {
        TimeInterval { lower: 0.0, upper: None }
    }

    /// `[0, ∞)`: no timing constraint at all.
    pub fn is_trivial(&self) -> bool {
        self.lower == 0.0 && self.upper.is_none()
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lower && self.upper.is_none_or(|b| t <= b)
    }
}

impl fmt::Display for TimeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.upper {
            Some(b) => write!(f, "[{}, {}]", self.lower, b),
            None => write!(f, "[{}, inf)", self.lower),
        }
    }
}

/// Consecutive step counts `{lower, …, upper}`; `upper = None` is unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepInterval {
    pub lower: u64,
    pub upper: Option<u64>,
}

impl StepInterval {
    pub fn all() -> Self {
        StepInterval { lower: 0, upper: None }
    }

    pub fn contains(&self, k: u64) -> bool {
        k >= self.lower && self.upper.is_none_or(|u| k <= u)
    }

    pub fn is_all(&self) -> bool {
        self.lower == 0 && self.upper.is_none()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorBounds {
    pub down: f64,
    pub up: f64,
}

/// Time-abstract MDP: Markovian transitions become ⊥ choices and state reward
/// rates are folded into ⊥ as `ρ(s)/E(s)`.
pub fn underlying_mdp(ma: &MarkovAutomaton) -> Mdp {
    build_mdp(ma, None)
}

/// Digitization with constant `delta`.
pub fn digitize(ma: &MarkovAutomaton, delta: f64) -> Mdp {
    build_mdp(ma, Some(delta))
}

fn build_mdp(ma: &MarkovAutomaton, delta: Option<f64>) -> Mdp {
    let names = ma.rewards.iter().map(|r| r.name.clone()).collect();
    let mut b = MdpBuilder::new(ma.action_names.clone(), names);
    let mut rew = vec![0.0; ma.rewards.len()];
    let mut entries = Vec::new();
    for s in 0..ma.num_states {
        b.open_state(ma.labels[s].clone());
        if ma.is_probabilistic(s) {
            for (a, dist) in &ma.prob_transitions[s] {
                for (j, rf) in ma.rewards.iter().enumerate() {
                    rew[j] = rf.action_reward(s, *a);
                }
                b.add_choice(*a, dist.entries(), &rew);
            }
        } else if let Some(m) = &ma.markovian[s] {
            let leave = match delta {
                Some(d) => -(-m.rate * d).exp_m1(),
                None => 1.0,
            };
            for (j, rf) in ma.rewards.iter().enumerate() {
                rew[j] = (rf.action_reward(s, MARKOVIAN_ACTION) + rf.state_reward(s) / m.rate) * leave;
            }
            entries.clear();
            let mut self_mass = 1.0 - leave;
            for &(t, p) in m.distribution.entries() {
                let mut q = p * leave;
                if t == s {
                    q += self_mass;
                    self_mass = 0.0;
                }
                entries.push((t, q));
            }
            if self_mass > 0.0 {
                entries.push((s, self_mass));
            }
            b.add_choice(MARKOVIAN_ACTION, &entries, &rew);
        } else {
            // only reachable for unnormalized input
            b.add_choice(MARKOVIAN_ACTION, &[(s, 1.0)], &[]);
        }
    }
    b.build(ma.initial).expect("normalized automaton yields a valid MDP")
}

fn steps_of(t: f64, delta: f64) -> Option<u64> {
    let k = t / delta;
    let r = k.round();
    if (k - r).abs() <= 1e-9 * r.abs().max(1.0) && r >= 0.0 {
        Some(r as u64)
    } else {
        None
    }
}

fn well_formed(interval: &TimeInterval, delta: f64) -> Result<(u64, Option<u64>), TransformError> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(TransformError::InvalidDelta(delta));
    }
    let bad = || TransformError::NotWellFormed { interval: *interval, delta };
    let da = steps_of(interval.lower, delta).ok_or_else(bad)?;
    let db = match interval.upper {
        Some(b) => Some(steps_of(b, delta).ok_or_else(bad)?),
        None => None,
    };
    Ok((da, db))
}

/// Step bounds `di(I)` for a well-formed interval.
pub fn digitize_interval(interval: &TimeInterval, delta: f64) -> Result<StepInterval, TransformError> {
    let (da, db) = well_formed(interval, delta)?;
    let lower = if da > 0 { da + 1 } else { 0 };
    Ok(StepInterval { lower, upper: db })
}

/// `ε↓` and `ε↑` for interval `I`, digitization constant `delta` and maximal exit rate `lambda`.
pub fn error_bounds(interval: &TimeInterval, delta: f64, lambda: f64) -> Result<ErrorBounds, TransformError> {
    let (da, db) = well_formed(interval, delta)?;
    // 1 - (1+λδ)^k e^{-λt}, evaluated in log space
    let miss = |k: u64, t: f64| -> f64 { (-((k as f64) * (lambda * delta).ln_1p() - lambda * t).exp_m1()).clamp(0.0, 1.0) };
    let down = if da > 0 { miss(da, interval.lower) } else { 0.0 };
    let up = match (da > 0, db) {
        (_, Some(db)) if da == 0 => miss(db, interval.upper.unwrap()),
        (true, Some(db)) => miss(db, interval.upper.unwrap()) - (-lambda * delta).exp_m1(),
        (true, None) => -(-lambda * delta).exp_m1(),
        (false, None) => 0.0,
        _ => unreachable!(),
    };
    Ok(ErrorBounds { down, up: up.min(1.0) })
}

fn to_ratio(x: f64) -> Option<Ratio<i64>> {
    let r = Ratio::<i64>::approximate_float(x)?;
    let back = *r.numer() as f64 / *r.denom() as f64;
    if (back - x).abs() <= 1e-12 * x.abs().max(1.0) {
        Some(r)
    } else {
        None
    }
}

fn ratio_gcd(a: Ratio<i64>, b: Ratio<i64>) -> Ratio<i64> {
    let num = (a.numer() * b.denom()).gcd(&(b.numer() * a.denom()));
    Ratio::new(num, a.denom() * b.denom())
}

/// Largest `δ = g/2^k`, `g` the gcd of all finite positive endpoints, such that
/// `ε↓ + ε↑ ≤ eta_digi` for every interval.
pub fn choose_delta(ma: &MarkovAutomaton, intervals: &[TimeInterval], eta_digi: f64) -> Result<f64, TransformError> {
    if !(eta_digi > 0.0) {
        return Err(TransformError::InvalidDelta(eta_digi));
    }
    let lambda = ma.max_exit_rate();
    let mut g: Option<Ratio<i64>> = None;
    for t in intervals.iter().flat_map(|i| std::iter::once(i.lower).chain(i.upper)) {
        if t <= 0.0 {
            continue;
        }
        let r = to_ratio(t).ok_or_else(|| TransformError::InvalidInterval(format!("endpoint {t} is not a representable rational")))?;
        g = Some(match g {
            None => r,
            Some(h) => ratio_gcd(h, r),
        });
    }
    let g = g.map(|r| *r.numer() as f64 / *r.denom() as f64).unwrap_or(1.0);
    let mut delta = g;
    loop {
        let mut ok = true;
        for i in intervals {
            let e = error_bounds(i, delta, lambda)?;
            if e.down + e.up > eta_digi {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(delta);
        }
        if delta / 2.0 < MIN_DELTA {
            // estimate the needed δ from the first-order behaviour of the bounds
            return Err(TransformError::Diverges { needed: delta / 2.0 });
        }
        delta /= 2.0;
    }
}

/// Per-objective digitization data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DigitizedInterval {
    pub interval: TimeInterval,
    pub steps: StepInterval,
    pub bounds: ErrorBounds,
}

/// Digitized MDP together with step intervals and error bounds.
#[derive(Clone, Debug)]
pub struct DigitizedModel {
    pub mdp: Mdp,
    pub delta: f64,
    pub lambda_max: f64,
    pub intervals: Vec<DigitizedInterval>,
}

pub fn digitized_model(ma: &MarkovAutomaton, delta: f64, intervals: &[TimeInterval]) -> Result<DigitizedModel, TransformError> {
    let lambda = ma.max_exit_rate();
    let mut out = Vec::with_capacity(intervals.len());
    for i in intervals {
        out.push(DigitizedInterval { interval: *i, steps: digitize_interval(i, delta)?, bounds: error_bounds(i, delta, lambda)? });
    }
    Ok(DigitizedModel { mdp: digitize(ma, delta), delta, lambda_max: lambda, intervals: out })
}
