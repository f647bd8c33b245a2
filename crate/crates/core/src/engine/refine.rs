//! Weighted-sum refinement of under/over approximations of the achievable set.

use serde::{Deserialize, Serialize};

use crate::geometry::{self, dot, from_halfspaces, hull, nearest_point, translate, ErrorBox, Halfspace, Polytope, Shift, TOL};

use super::solve::{MultiObjectiveProblem, WeightedSolve};
use super::EngineError;

/// Default number of weighted solves before giving up.
pub const MAX_SOLVES: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RefineStatus {
    Converged,
    IterationCap,
}

/// Approximation of the achievable set on the normalized (maximizing) scale.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ApproxResult {
    pub dim: usize,
    /// Under-approximation, already shifted down by the error box.
    pub under: Polytope,
    /// Over-approximation, already shifted up by the error box.
    pub over: Polytope,
    pub error_box: ErrorBox,
    pub solves: Vec<WeightedSolve>,
    /// Largest distance of an over vertex to the unshifted under set.
    pub gap: f64,
    /// `gap` plus the Euclidean norm of `ε↓ + ε↑`.
    pub eta_achieved: f64,
    pub status: RefineStatus,
    pub delta: Option<f64>,
}

impl ApproxResult {
    /// Every under vertex satisfies every over halfspace up to `slack`.
    pub fn is_sandwiched(&self, slack: f64) -> bool {
        self.under.vertices.iter().all(|v| self.over.halfspaces.iter().all(|h| h.slack(v) >= -slack))
    }
}

/// Result of steering the refinement towards one point.
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Approach {
    /// The point lies in the under set; convex weights over the solves.
    Inside(Vec<(usize, f64)>),
    /// Some over halfspace excludes the point.
    Excluded,
    /// Neither could be shown; remaining distance to the under set.
    Stalled(f64),
}

/// Incremental refinement state shared by Pareto, achievability and numerical queries.
pub struct Refiner<'a> {
    problem: &'a MultiObjectiveProblem,
    vi_eps: f64,
    max_solves: usize,
    pub solves: Vec<WeightedSolve>,
    pub halfspaces: Vec<Halfspace>,
    flags: Vec<bool>,
}

impl<'a> Refiner<'a> {
    pub fn new(problem: &'a MultiObjectiveProblem, vi_eps: f64, max_solves: usize) -> Self {
        let d = problem.dim();
        Refiner { problem, vi_eps, max_solves: max_solves.max(d), solves: Vec::new(), halfspaces: Vec::new(), flags: vec![true; d] }
    }

    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.solves.iter().map(|s| s.point.clone()).collect()
    }

    pub fn exhausted(&self) -> bool {
        self.solves.len() >= self.max_solves
    }

    /// Runs one weighted solve and records its point and halfspace.
    pub fn solve(&mut self, w: &[f64]) -> Result<usize, EngineError> {
        let s = self.problem.solve(w, self.vi_eps)?;
        let we = s.weights.clone();
        let b = self.solves.iter().map(|t| dot(&we, &t.point)).fold(dot(&we, &s.point), f64::max);
        log::debug!("solve {}: w = {:?}, point = {:?}", self.solves.len(), we, s.point);
        self.halfspaces.push(Halfspace::new(we, b));
        self.solves.push(s);
        Ok(self.solves.len() - 1)
    }

    /// Solves the unit weight vectors once.
    pub fn init(&mut self) -> Result<(), EngineError> {
        if !self.solves.is_empty() {
            return Ok(());
        }
        let d = self.dim();
        for i in 0..d {
            let mut w = vec![0.0; d];
            w[i] = 1.0;
            self.solve(&w)?;
        }
        Ok(())
    }

    pub fn under(&self) -> Result<Polytope, EngineError> {
        Ok(hull(&self.points(), &self.flags)?)
    }

    pub fn over(&self) -> Result<Polytope, EngineError> {
        Ok(from_halfspaces(self.dim(), &self.halfspaces, &self.flags)?)
    }

    fn direction(&self, from: &[f64], to: &[f64], dist: f64) -> Vec<f64> {
        let mut w: Vec<f64> = to.iter().zip(from).map(|(a, b)| ((a - b) / dist).max(0.0)).collect();
        if w.iter().sum::<f64>() <= 1e-12 {
            w = vec![1.0; self.dim()];
        }
        w
    }

    /// Largest distance of an over vertex to the under set, without solving.
    pub fn gap(&self) -> Result<f64, EngineError> {
        let points = self.points();
        let over = self.over()?;
        Ok(over.vertices.iter().map(|v| nearest_point(&points, &self.flags, v).0).fold(0.0, f64::max))
    }

    /// Refines until every over vertex is within `eta` of the under set.
    pub fn refine_gap(&mut self, eta: f64) -> Result<(f64, RefineStatus), EngineError> {
        self.init()?;
        loop {
            let points = self.points();
            let over = self.over()?;
            let mut worst: Option<(f64, Vec<f64>, Vec<f64>)> = None;
            for v in &over.vertices {
                let (dist, near, _) = nearest_point(&points, &self.flags, v);
                let w = self.direction(&near, v, dist.max(1e-300));
                let better = match &worst {
                    None => true,
                    Some((bd, bw, _)) => dist > bd + 1e-12 || ((dist - bd).abs() <= 1e-12 && w < *bw),
                };
                if better {
                    worst = Some((dist, w, v.clone()));
                }
            }
            let (gap, w, v) = match worst {
                Some(x) => x,
                None => return Ok((0.0, RefineStatus::Converged)),
            };
            if gap <= eta {
                return Ok((gap, RefineStatus::Converged));
            }
            if self.exhausted() {
                return Ok((gap, RefineStatus::IterationCap));
            }
            let k = self.solve(&w)?;
            let cut = self.halfspaces[k].slack(&v) < -1e-12;
            let (after, _, _) = nearest_point(&self.points(), &self.flags, &v);
            if !cut && after >= gap - 1e-12 {
                log::debug!("refinement stalled at gap {gap}");
                return Ok((gap, RefineStatus::IterationCap));
            }
        }
    }

    /// Refines towards `target` until it is inside the under set or cut off.
    pub(crate) fn approach(&mut self, target: &[f64]) -> Result<Approach, EngineError> {
        self.init()?;
        loop {
            if self.halfspaces.iter().any(|h| h.slack(target) < -TOL) {
                return Ok(Approach::Excluded);
            }
            let (dist, near, weights) = nearest_point(&self.points(), &self.flags, target);
            if dist <= TOL {
                return Ok(Approach::Inside(weights));
            }
            if self.exhausted() {
                return Ok(Approach::Stalled(dist));
            }
            let w = self.direction(&near, target, dist);
            let k = self.solve(&w)?;
            let cut = self.halfspaces[k].slack(target) < -TOL;
            let (after, _, _) = nearest_point(&self.points(), &self.flags, target);
            if !cut && after >= dist - 1e-12 {
                return Ok(Approach::Stalled(after));
            }
        }
    }

    /// Packs the current state, shifting by `error_box`.
    pub fn result(&self, gap: f64, status: RefineStatus, error_box: ErrorBox, delta: Option<f64>) -> Result<ApproxResult, EngineError> {
        let under = translate(&self.under()?, &error_box, Shift::Down);
        let over = translate(&self.over()?, &error_box, Shift::Up);
        let band: Vec<f64> = error_box.down.iter().zip(&error_box.up).map(|(a, b)| a + b).collect();
        Ok(ApproxResult {
            dim: self.dim(),
            under,
            over,
            eta_achieved: gap + geometry::norm(&band),
            error_box,
            solves: self.solves.clone(),
            gap,
            status,
            delta,
        })
    }
}

/// Approximates the achievable set of `problem` up to `eta`.
pub fn pareto_refine(problem: &MultiObjectiveProblem, eta: f64, vi_eps: f64) -> Result<ApproxResult, EngineError> {
    if !(eta > 0.0) {
        return Err(EngineError::Unsupported(format!("eta must be positive, got {eta}")));
    }
    let mut r = Refiner::new(problem, vi_eps, MAX_SOLVES);
    let (gap, status) = r.refine_gap(eta)?;
    r.result(gap, status, ErrorBox::zero(problem.dim()), None)
}
