//! Queries on Markov automata: routing to the underlying MDP or a digitization,
//! Pareto approximation, achievability and numerical queries.

use serde::{Deserialize, Serialize};

use crate::geometry::ErrorBox;
use crate::ingest::{QueryKind, QuerySpec};
use crate::model::{MarkovAutomaton, RewardFunction};
use crate::transform::{choose_delta, digitized_model, underlying_mdp, DigitizedInterval, TimeInterval};

use super::objective::{NormalizedObjective, Objective, ObjectiveKind};
use super::refine::{Approach, ApproxResult, RefineStatus, Refiner, MAX_SOLVES};
use super::scheduler::SchedulerDescription;
use super::solve::MultiObjectiveProblem;
use super::EngineError;

/// Name of the derived reward that counts sojourn time.
pub const TIME_REWARD: &str = "#time";

/// Margin by which strict thresholds must be exceeded inside the under set.
const STRICT_MARGIN: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisOptions {
    /// Total approximation budget.
    pub eta: f64,
    pub vi_eps: f64,
    /// Digitization constant; chosen from `eta` when `None`.
    pub delta: Option<f64>,
    pub max_solves: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions { eta: 1e-3, vi_eps: 1e-6, delta: None, max_solves: MAX_SOLVES }
    }
}

/// How a query is analysed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Plan {
    /// Untimed and reward objectives only: the underlying MDP, no error.
    Underlying,
    /// Some timed objective: digitization with constant `delta`.
    Digitized { delta: f64, lambda_max: f64, intervals: Vec<Option<DigitizedInterval>> },
}

impl Plan {
    pub fn delta(&self) -> Option<f64> {
        match self {
            Plan::Underlying => None,
            Plan::Digitized { delta, .. } => Some(*delta),
        }
    }
}

fn timed_intervals(objectives: &[Objective]) -> Vec<TimeInterval> {
    objectives.iter().filter_map(|o| o.kind.interval().copied()).collect()
}

/// Chooses between the underlying MDP and a digitization.
///
/// Half of `eta` goes to digitization, split evenly over the timed objectives
/// in Euclidean norm.
pub fn route(ma: &MarkovAutomaton, objectives: &[Objective], eta: f64, delta: Option<f64>) -> Result<Plan, EngineError> {
    let intervals = timed_intervals(objectives);
    if intervals.is_empty() {
        return Ok(Plan::Underlying);
    }
    let delta = match delta {
        Some(d) => d,
        None => choose_delta(ma, &intervals, eta / 2.0 / (intervals.len() as f64).sqrt())?,
    };
    let dm = digitized_model(ma, delta, &intervals)?;
    let mut it = dm.intervals.into_iter();
    let per_objective = objectives.iter().map(|o| o.kind.interval().map(|_| it.next().unwrap())).collect();
    Ok(Plan::Digitized { delta, lambda_max: dm.lambda_max, intervals: per_objective })
}

/// A query compiled to a product problem.
pub struct Prepared {
    pub problem: MultiObjectiveProblem,
    pub plan: Plan,
    /// Error box on the normalized scale.
    pub error_box: ErrorBox,
    pub objectives: Vec<NormalizedObjective>,
    /// Budget left for the geometric refinement.
    pub eta_geometric: f64,
}

/// Replaces expected-time objectives by a reward of rate 1 on Markovian states.
fn expand_time(ma: &MarkovAutomaton, objectives: &[Objective]) -> (MarkovAutomaton, Vec<Objective>) {
    if !objectives.iter().any(|o| matches!(o.kind, ObjectiveKind::ExpTime { .. })) {
        return (ma.clone(), objectives.to_vec());
    }
    let mut ma = ma.clone();
    let mut rf = RewardFunction::new(TIME_REWARD);
    for s in 0..ma.num_states {
        if ma.is_markovian(s) {
            rf.state_rewards.insert(s, 1.0);
        }
    }
    let j = ma.rewards.len();
    ma.rewards.push(rf);
    let objs = objectives
        .iter()
        .map(|o| match &o.kind {
            ObjectiveKind::ExpTime { goal } => Objective { kind: ObjectiveKind::ExpReward { reward: j, goal: goal.clone() }, ..o.clone() },
            _ => o.clone(),
        })
        .collect();
    (ma, objs)
}

pub fn prepare(ma: &MarkovAutomaton, objectives: &[Objective], opts: &AnalysisOptions) -> Result<Prepared, EngineError> {
    if !(opts.eta > 0.0) || !(opts.vi_eps > 0.0) {
        return Err(EngineError::Unsupported("eta and vi_eps must be positive".into()));
    }
    let ma = ma.validated()?;
    let (ma, objs) = expand_time(&ma, objectives);
    let plan = route(&ma, &objs, opts.eta, opts.delta)?;
    let d = objs.len();
    let mut error_box = ErrorBox::zero(d);
    let tail = underlying_mdp(&ma);
    let (problem, normalized, eta_geometric) = match &plan {
        Plan::Underlying => {
            let normalized: Vec<NormalizedObjective> = objs.iter().map(|o| NormalizedObjective::from_objective(o, None)).collect();
            (MultiObjectiveProblem::new(&tail, None, &normalized)?, normalized, opts.eta)
        }
        Plan::Digitized { delta, intervals, .. } => {
            let dm = crate::transform::digitize(&ma, *delta);
            let mut normalized = Vec::with_capacity(d);
            for (i, o) in objs.iter().enumerate() {
                let di = intervals[i].as_ref();
                normalized.push(NormalizedObjective::from_objective(o, di.map(|x| x.steps)));
                if let Some(x) = di {
                    let (down, up) = if o.sign() > 0.0 { (x.bounds.down, x.bounds.up) } else { (x.bounds.up, x.bounds.down) };
                    error_box.down[i] = down;
                    error_box.up[i] = up;
                }
            }
            let mut problem = MultiObjectiveProblem::new(&dm, Some(&tail), &normalized)?;
            problem.set_delta(Some(*delta));
            (problem, normalized, opts.eta / 2.0)
        }
    };
    log::info!(
        "plan {:?}, {} product states, {} collapsed",
        plan.delta(),
        problem.num_product_states(),
        problem.infinity_report().collapsed_states
    );
    Ok(Prepared { problem, plan, error_box, objectives: normalized, eta_geometric })
}

/// Approximates the achievable set of the objectives.
pub fn pareto(ma: &MarkovAutomaton, objectives: &[Objective], opts: &AnalysisOptions) -> Result<ApproxResult, EngineError> {
    let prep = prepare(ma, objectives, opts)?;
    let mut r = Refiner::new(&prep.problem, opts.vi_eps, opts.max_solves);
    let (gap, status) = r.refine_gap(prep.eta_geometric)?;
    r.result(gap, status, prep.error_box.clone(), prep.plan.delta())
}

/// Residual uncertainty of an undecided achievability query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// Distance from the shifted threshold point to the under set.
    pub distance: f64,
    pub error_box: ErrorBox,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    Achievable(SchedulerDescription),
    NotAchievable,
    Unknown(GapReport),
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Achievable(_) => "Achievable",
            Verdict::NotAchievable => "NotAchievable",
            Verdict::Unknown(_) => "Unknown",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AchievabilityResult {
    pub verdict: Verdict,
    /// Thresholds on the normalized scale.
    pub target: Vec<f64>,
    pub approx: Option<ApproxResult>,
}

fn witness(r: &Refiner, weights: &[(usize, f64)]) -> SchedulerDescription {
    let parts: Vec<(usize, f64)> = weights.iter().copied().filter(|e| e.1 > 1e-12).collect();
    let total: f64 = parts.iter().map(|e| e.1).sum();
    if parts.len() == 1 {
        return SchedulerDescription::Deterministic(r.solves[parts[0].0].scheduler.clone());
    }
    SchedulerDescription::Mixture(parts.iter().map(|&(k, w)| (w / total, r.solves[k].scheduler.clone())).collect())
}

/// Decides whether `t` (normalized, ≥ thresholds) is achievable in the automaton.
fn decide(r: &mut Refiner, t: &[f64], strict: &[bool], eb: &ErrorBox) -> Result<Verdict, EngineError> {
    let x: Vec<f64> = (0..t.len()).map(|i| t[i] + eb.down[i] + if strict[i] { STRICT_MARGIN } else { 0.0 }).collect();
    let distance = match r.approach(&x)? {
        Approach::Inside(w) => return Ok(Verdict::Achievable(witness(r, &w))),
        Approach::Excluded => None,
        Approach::Stalled(d) => Some(d),
    };
    let y: Vec<f64> = (0..t.len()).map(|i| t[i] - eb.up[i]).collect();
    let gap = |d: Option<f64>, r: &Refiner| -> f64 {
        d.unwrap_or_else(|| crate::geometry::nearest_point(&r.points(), &vec![true; t.len()], &x).0)
    };
    match r.approach(&y)? {
        Approach::Excluded => Ok(Verdict::NotAchievable),
        _ => Ok(Verdict::Unknown(GapReport { distance: gap(distance, r), error_box: eb.clone() })),
    }
}

fn status_of(r: &Refiner) -> RefineStatus {
    if r.exhausted() {
        RefineStatus::IterationCap
    } else {
        RefineStatus::Converged
    }
}

pub fn achievability(ma: &MarkovAutomaton, objectives: &[Objective], opts: &AnalysisOptions) -> Result<AchievabilityResult, EngineError> {
    let prep = prepare(ma, objectives, opts)?;
    let mut target = Vec::new();
    let mut strict = Vec::new();
    for (i, o) in prep.objectives.iter().enumerate() {
        let th = o.threshold.ok_or_else(|| EngineError::Unsupported(format!("objective {i} has no threshold")))?;
        target.push(th.value);
        strict.push(th.relation.is_strict());
    }
    let report = prep.problem.infinity_report();
    if report.jointly_forced || !report.forced.is_empty() {
        return Ok(AchievabilityResult { verdict: Verdict::NotAchievable, target, approx: None });
    }
    if let Some(&i) = report.unbounded.first() {
        return Err(EngineError::InfiniteValue(i));
    }
    let mut r = Refiner::new(&prep.problem, opts.vi_eps, opts.max_solves);
    let verdict = decide(&mut r, &target, &strict, &prep.error_box)?;
    let approx = r.result(r.gap()?, status_of(&r), prep.error_box.clone(), prep.plan.delta())?;
    Ok(AchievabilityResult { verdict, target, approx: Some(approx) })
}

/// Bracket around the optimum of a numerical query, on the objective's own scale.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NumericalResult {
    pub objective: usize,
    pub lo: f64,
    pub hi: f64,
    /// Achieves the end of the bracket that is certainly attainable.
    pub witness: SchedulerDescription,
    pub approx: ApproxResult,
}

pub fn numerical_query(
    ma: &MarkovAutomaton,
    objectives: &[Objective],
    optimize: usize,
    opts: &AnalysisOptions,
) -> Result<NumericalResult, EngineError> {
    let prep = prepare(ma, objectives, opts)?;
    let d = prep.objectives.len();
    if optimize >= d {
        return Err(EngineError::Unsupported(format!("objective {optimize} does not exist")));
    }
    let report = prep.problem.infinity_report();
    if report.jointly_forced || !report.forced.is_empty() {
        return Err(EngineError::Infeasible);
    }
    let mut t = vec![0.0; d];
    let mut strict = vec![false; d];
    for (i, o) in prep.objectives.iter().enumerate() {
        if i == optimize {
            continue;
        }
        let th = o.threshold.ok_or_else(|| EngineError::Unsupported(format!("objective {i} has no threshold")))?;
        t[i] = th.value;
        strict[i] = th.relation.is_strict();
    }
    let eb = &prep.error_box;
    let mut r = Refiner::new(&prep.problem, opts.vi_eps, opts.max_solves);
    r.init()?;
    let best = r.solves[optimize].point[optimize];
    let mut hi = best + eb.up[optimize];
    let eta = opts.eta;

    // find an attainable value, stepping down geometrically
    let mut lo = None;
    let mut step = eta.max(1e-3);
    let mut v = best - eb.down[optimize];
    for _ in 0..64 {
        t[optimize] = v;
        match decide(&mut r, &t, &strict, eb)? {
            Verdict::Achievable(w) => {
                lo = Some((v, w));
                break;
            }
            Verdict::NotAchievable => hi = hi.min(v),
            Verdict::Unknown(_) => {}
        }
        v -= step;
        step *= 2.0;
        if v < -1e12 {
            break;
        }
    }
    let (mut lo, mut wit) = lo.ok_or(EngineError::Infeasible)?;

    let tol = eta / 4.0;
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let m = 0.5 * (a + b);
        t[optimize] = m;
        match decide(&mut r, &t, &strict, eb)? {
            Verdict::Achievable(w) => {
                a = m;
                lo = m;
                wit = w;
            }
            Verdict::NotAchievable => {
                b = m;
                hi = hi.min(m);
            }
            Verdict::Unknown(_) => b = m,
        }
        if r.exhausted() {
            break;
        }
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let m = 0.5 * (a + b);
        t[optimize] = m;
        match decide(&mut r, &t, &strict, eb)? {
            Verdict::NotAchievable => b = m,
            _ => a = m,
        }
        if r.exhausted() {
            break;
        }
    }
    hi = b;
    let o = &prep.objectives[optimize];
    let (mut lo_v, mut hi_v) = if o.sign > 0.0 { (lo, hi) } else { (-hi, -lo) };
    if matches!(o.kind, ObjectiveKind::UntimedReach { .. } | ObjectiveKind::TimedReach { .. }) {
        lo_v = lo_v.clamp(0.0, 1.0);
        hi_v = hi_v.clamp(0.0, 1.0);
    }
    let approx = r.result(r.gap()?, status_of(&r), eb.clone(), prep.plan.delta())?;
    Ok(NumericalResult { objective: optimize, lo: lo_v, hi: hi_v, witness: wit, approx })
}

/// Result of any query kind.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum QueryOutcome {
    Pareto(ApproxResult),
    Achievability(AchievabilityResult),
    Numerical(NumericalResult),
}

pub fn analyze(ma: &MarkovAutomaton, query: &QuerySpec, opts: &AnalysisOptions) -> Result<QueryOutcome, EngineError> {
    match query.kind {
        QueryKind::Pareto => Ok(QueryOutcome::Pareto(pareto(ma, &query.objectives, opts)?)),
        QueryKind::Achievability => Ok(QueryOutcome::Achievability(achievability(ma, &query.objectives, opts)?)),
        QueryKind::Numerical => {
            let o = query.optimize.ok_or_else(|| EngineError::Unsupported("numerical query without optimized objective".into()))?;
            Ok(QueryOutcome::Numerical(numerical_query(ma, &query.objectives, o, opts)?))
        }
    }
}
