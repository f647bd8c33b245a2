//! Weighted value iteration on the product: backward sweep over step counts,
//! then value iteration on the end-component quotient for the tail.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::graph::{maximal_end_components, prob1_max, tarjan_scc, ChoiceGraph};
use crate::model::{ActionId, Mdp};
use crate::transform::StepInterval;

use super::objective::NormalizedObjective;
use super::product::{self, Product};
use super::scheduler::{Decision, DeterministicScheduler, EpochRun, MemoryBit};
use super::EngineError;

/// Total sweep budget of one weighted solve.
pub const MAX_SWEEPS: u64 = 10_000_000;
/// Lower bound on the weight of minimized reward objectives, relative to the largest weight.
pub const MIN_REWARD_WEIGHT: f64 = 1e-4;

const NONE: u32 = u32::MAX;

/// Result of one weighted solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightedSolve {
    /// Weights actually optimized: unit ℓ1 norm, with the floor for minimized rewards applied.
    pub weights: Vec<f64>,
    /// Objective values at the initial state on the normalized scale.
    pub point: Vec<f64>,
    pub weighted_value: f64,
    pub scheduler: DeterministicScheduler,
    pub sweeps: u64,
}

/// Outcome of the end-component analysis.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InfinityReport {
    /// Maximized reward objectives that some scheduler drives to +∞.
    pub unbounded: Vec<usize>,
    /// Minimized reward objectives that are +∞ under every scheduler.
    pub forced: Vec<usize>,
    /// No single scheduler keeps all minimized rewards finite.
    pub jointly_forced: bool,
    /// Product states merged into collapsed end components.
    pub collapsed_states: usize,
    pub quotient_states: usize,
}

impl InfinityReport {
    pub fn is_finite(&self) -> bool {
        self.unbounded.is_empty() && !self.jointly_forced
    }
}

struct Quotient {
    members: Vec<Vec<u32>>,
    is_mec: Vec<bool>,
    /// Per MEC node: internal zero-reward choices.
    internal: Vec<Vec<u32>>,
    groups: Vec<usize>,
    origin: Vec<u32>,
    rows: Vec<usize>,
    entries: Vec<(usize, f64)>,
    sccs: Vec<(Vec<u32>, bool)>,
}

struct EpochGraph {
    entries: Vec<(usize, f64)>,
    sccs: Vec<(Vec<u32>, bool)>,
}

/// A multi-objective problem prepared for repeated weighted solves.
pub struct MultiObjectiveProblem {
    pub(crate) product: Product,
    objectives: Vec<NormalizedObjective>,
    action_of: Vec<ActionId>,
    allowed: Vec<bool>,
    quotient: Quotient,
    /// Distinct active masks and the index of each step count's mask.
    variant_at: Vec<u8>,
    variants: Vec<EpochGraph>,
    report: InfinityReport,
    delta: Option<f64>,
}

fn settled(p: &Product, i: usize, x: usize) -> bool {
    let o = &p.objs[i];
    match o.bit {
        Some(b) => p.mask[x] & b != 0,
        None => o.goal[p.state[x] as usize],
    }
}

fn finite_region(p: &Product, objs: &[usize], allowed: &mut [bool]) -> Vec<bool> {
    let g = p.tail_graph();
    let n = p.num_states();
    let all = vec![true; n];
    loop {
        let zero: Vec<bool> =
            (0..allowed.len()).map(|c| allowed[c] && objs.iter().all(|&i| p.tail_reward[i][c] == 0.0)).collect();
        let mut target: Vec<bool> = (0..n).map(|x| objs.iter().all(|&i| settled(p, i, x))).collect();
        for m in maximal_end_components(&g, &all, &zero) {
            for s in m.states {
                target[s] = true;
            }
        }
        let f = prob1_max(&g, &target, Some(allowed));
        let mut changed = false;
        for x in 0..n {
            for c in p.choices(x) {
                if allowed[c] && (!f[x] || g.successors(c).iter().any(|&(t, q)| q > 0.0 && !f[t])) {
                    allowed[c] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            return f;
        }
    }
}

fn forward_reach(g: &impl ChoiceGraph, init: usize, allowed: &[bool]) -> Vec<bool> {
    let mut seen = vec![false; g.num_states()];
    seen[init] = true;
    let mut work = vec![init];
    while let Some(x) = work.pop() {
        for c in g.choices(x) {
            if !allowed[c] {
                continue;
            }
            for &(t, q) in g.successors(c) {
                if q > 0.0 && !seen[t] {
                    seen[t] = true;
                    work.push(t);
                }
            }
        }
    }
    seen
}

fn sccs_of(n: usize, succ: impl FnMut(usize, &mut Vec<usize>), self_loop: impl Fn(usize) -> bool) -> Vec<(Vec<u32>, bool)> {
    tarjan_scc(n, &vec![true; n], succ)
        .into_iter()
        .map(|c| {
            let trivial = c.len() == 1 && !self_loop(c[0]);
            (c.into_iter().map(|x| x as u32).collect(), trivial)
        })
        .collect()
}

/// Picks the first choice within a relative tie tolerance of the best value.
fn argmax(values: &[(u32, f64)]) -> (u32, f64) {
    let best = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * (1.0 + best.abs());
    let pick = values.iter().find(|v| v.1 >= best - tol).map(|v| v.0).unwrap_or(NONE);
    (pick, best)
}

impl MultiObjectiveProblem {
    /// Prepares `objectives` on `epoch`, with `tail` (same shape, same values
    /// once no step window is pending) used after the last step window.
    pub fn new(epoch: &Mdp, tail: Option<&Mdp>, objectives: &[NormalizedObjective]) -> Result<Self, EngineError> {
        if objectives.is_empty() {
            return Err(EngineError::Unsupported("no objectives".into()));
        }
        let tail = tail.unwrap_or(epoch);
        let p = product::build(epoch, tail, objectives)?;
        let n = p.num_states();
        let nc = p.model_choice.len();
        let action_of: Vec<ActionId> = p.model_choice.iter().map(|&c| epoch.action(c as usize)).collect();
        let d = p.objs.len();
        let min_objs: Vec<usize> = (0..d).filter(|&i| p.objs[i].is_min_reward()).collect();
        let mut report = InfinityReport::default();
        for &i in &min_objs {
            let mut allowed = vec![true; nc];
            if !finite_region(&p, &[i], &mut allowed)[p.initial] {
                report.forced.push(i);
            }
        }
        let mut allowed = vec![true; nc];
        if !min_objs.is_empty() {
            let f = finite_region(&p, &min_objs, &mut allowed);
            report.jointly_forced = !f[p.initial];
        }
        let g = p.tail_graph();
        let all = vec![true; n];
        let reach = forward_reach(&g, p.initial, &allowed);
        let mecs = maximal_end_components(&g, &all, &allowed);
        for i in (0..d).filter(|&i| p.objs[i].is_max_reward()) {
            let hit = mecs
                .iter()
                .any(|m| reach[m.states[0]] && m.choices.iter().any(|&c| p.tail_reward[i][c] > 0.0));
            if hit {
                report.unbounded.push(i);
            }
        }

        let zero: Vec<bool> = (0..nc).map(|c| allowed[c] && (0..d).all(|i| p.tail_reward[i][c] == 0.0)).collect();
        let zmecs = maximal_end_components(&g, &all, &zero);
        let quotient = build_quotient(&p, &allowed, zmecs);
        report.collapsed_states = quotient.is_mec.iter().zip(&quotient.members).filter(|(m, _)| **m).map(|(_, v)| v.len()).sum();
        report.quotient_states = quotient.members.len();

        let mut variant_at = Vec::new();
        let mut variants = Vec::new();
        if p.has_epochs {
            let mut seen: HashMap<u32, u8> = HashMap::new();
            for c in 0..=p.horizon + 1 {
                let a = p.active_at(c);
                let next = seen.len() as u8;
                let v = *seen.entry(a).or_insert(next);
                if v as usize == variants.len() {
                    variants.push(epoch_graph(&p, &allowed, a)?);
                }
                variant_at.push(v);
            }
        }
        Ok(MultiObjectiveProblem {
            product: p,
            objectives: objectives.to_vec(),
            action_of,
            allowed,
            quotient,
            variant_at,
            variants,
            report,
            delta: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.objectives.len()
    }

    /// Records the digitization constant that step counts refer to.
    pub fn set_delta(&mut self, delta: Option<f64>) {
        self.delta = delta;
    }

    pub fn objectives(&self) -> &[NormalizedObjective] {
        &self.objectives
    }

    pub fn infinity_report(&self) -> &InfinityReport {
        &self.report
    }

    pub fn num_product_states(&self) -> usize {
        self.product.num_states()
    }

    /// Weights as optimized: unit ℓ1 norm, minimized rewards floored.
    pub fn effective_weights(&self, w: &[f64]) -> Result<Vec<f64>, EngineError> {
        let d = self.dim();
        if w.len() != d || w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) || w.iter().sum::<f64>() <= 0.0 {
            return Err(EngineError::InvalidWeights(w.to_vec()));
        }
        let sum: f64 = w.iter().sum();
        let mut v: Vec<f64> = w.iter().map(|x| x / sum).collect();
        let top = v.iter().cloned().fold(0.0, f64::max);
        for (i, o) in self.product.objs.iter().enumerate() {
            if o.is_min_reward() {
                v[i] = v[i].max(MIN_REWARD_WEIGHT * top);
            }
        }
        let sum: f64 = v.iter().sum();
        Ok(v.iter().map(|x| x / sum).collect())
    }

    /// Maximizes `w · value` over all schedulers.
    pub fn solve(&self, w: &[f64], vi_eps: f64) -> Result<WeightedSolve, EngineError> {
        if let Some(&i) = self.report.unbounded.first() {
            return Err(EngineError::InfiniteValue(i));
        }
        if self.report.jointly_forced {
            let i = self.report.forced.first().copied().unwrap_or_else(|| {
                (0..self.dim()).find(|&i| self.product.objs[i].is_min_reward()).unwrap_or(0)
            });
            return Err(EngineError::InfiniteValue(i));
        }
        if !(vi_eps > 0.0) {
            return Err(EngineError::Unsupported(format!("value iteration precision must be positive, got {vi_eps}")));
        }
        let w = self.effective_weights(w)?;
        let mut sweeps = 0u64;
        let tail = self.solve_tail(&w, vi_eps, &mut sweeps)?;
        let p = &self.product;
        let d = self.dim();
        let (values, epochs) = if p.has_epochs {
            let (v, runs) = self.solve_epochs(&w, vi_eps, &tail, &mut sweeps)?;
            (v, Some(runs))
        } else {
            (tail.values.clone(), None)
        };
        let x0 = p.initial;
        let point: Vec<f64> = (0..d).map(|i| p.objs[i].offset + values[x0 * d + i]).collect();
        let weighted_value = w.iter().zip(&point).map(|(a, b)| a * b).sum();
        let scheduler = self.describe(&tail.choice, epochs);
        Ok(WeightedSolve { weights: w, point, weighted_value, scheduler, sweeps })
    }

    fn solve_tail(&self, w: &[f64], eps: f64, sweeps: &mut u64) -> Result<TailSolution, EngineError> {
        let p = &self.product;
        let q = &self.quotient;
        let d = self.dim();
        let nodes = q.members.len();
        let reward = |qc: usize, i: usize| -> f64 {
            match q.origin[qc] {
                NONE => 0.0,
                c => p.tail_reward[i][c as usize],
            }
        };
        let wr: Vec<f64> = (0..q.origin.len()).map(|qc| (0..d).map(|i| w[i] * reward(qc, i)).sum()).collect();
        let succ = |qc: usize| &q.entries[q.rows[qc]..q.rows[qc + 1]];
        let mut val = vec![0.0; nodes];
        let mut pick = vec![NONE; nodes];
        let mut buf = Vec::new();
        for (scc, trivial) in &q.sccs {
            loop {
                let mut delta: f64 = 0.0;
                for &u in scc {
                    let u = u as usize;
                    let range = q.groups[u]..q.groups[u + 1];
                    if range.is_empty() {
                        continue;
                    }
                    let best = range
                        .map(|qc| wr[qc] + succ(qc).iter().map(|&(t, pr)| pr * val[t]).sum::<f64>())
                        .fold(f64::NEG_INFINITY, f64::max);
                    delta = delta.max((best - val[u]).abs());
                    val[u] = best;
                }
                *sweeps += 1;
                if *sweeps > MAX_SWEEPS {
                    return Err(EngineError::NonConvergence { sweeps: *sweeps });
                }
                if *trivial || delta < eps {
                    break;
                }
            }
            for &u in scc {
                let u = u as usize;
                buf.clear();
                for qc in q.groups[u]..q.groups[u + 1] {
                    buf.push((qc as u32, wr[qc] + succ(qc).iter().map(|&(t, pr)| pr * val[t]).sum::<f64>()));
                }
                if !buf.is_empty() {
                    pick[u] = argmax(&buf).0;
                }
            }
        }
        // per-objective values of the induced policy
        let mut vals = vec![0.0; nodes * d];
        for (scc, trivial) in &q.sccs {
            loop {
                let mut delta: f64 = 0.0;
                for &u in scc {
                    let u = u as usize;
                    let qc = pick[u];
                    if qc == NONE {
                        continue;
                    }
                    let qc = qc as usize;
                    for i in 0..d {
                        let v = reward(qc, i) + succ(qc).iter().map(|&(t, pr)| pr * vals[t * d + i]).sum::<f64>();
                        delta = delta.max((v - vals[u * d + i]).abs());
                        vals[u * d + i] = v;
                    }
                }
                *sweeps += 1;
                if *sweeps > MAX_SWEEPS {
                    return Err(EngineError::NonConvergence { sweeps: *sweeps });
                }
                if *trivial || delta < eps {
                    break;
                }
            }
        }
        // back to product states
        let n = p.num_states();
        let mut weighted = vec![0.0; n];
        let mut values = vec![0.0; n * d];
        let mut choice = vec![NONE; n];
        for u in 0..nodes {
            for &x in &q.members[u] {
                let x = x as usize;
                weighted[x] = val[u];
                values[x * d..(x + 1) * d].copy_from_slice(&vals[u * d..(u + 1) * d]);
            }
            let qc = pick[u];
            if !q.is_mec[u] {
                if qc != NONE {
                    choice[q.members[u][0] as usize] = q.origin[qc as usize];
                }
                continue;
            }
            let exit = if qc == NONE { NONE } else { q.origin[qc as usize] };
            self.attract(u, exit, &mut choice);
        }
        Ok(TailSolution { weighted, values, choice })
    }

    /// Fills choices inside a collapsed end component: walk towards the owner
    /// of `exit`, or stay inside when `exit` is `NONE`.
    fn attract(&self, u: usize, exit: u32, choice: &mut [u32]) {
        let p = &self.product;
        let q = &self.quotient;
        let g = p.tail_graph();
        let owner = |c: u32| -> usize {
            let c = c as usize;
            let x = p.row_groups.partition_point(|&r| r <= c) - 1;
            x
        };
        let members = &q.members[u];
        let internal = &q.internal[u];
        if exit == NONE {
            for &c in internal {
                let x = owner(c);
                if choice[x] == NONE {
                    choice[x] = c;
                }
            }
            return;
        }
        let target = owner(exit);
        choice[target] = exit;
        let mut done: HashMap<usize, bool> = members.iter().map(|&x| (x as usize, false)).collect();
        done.insert(target, true);
        let mut remaining = members.len() - 1;
        while remaining > 0 {
            let mut newly = Vec::new();
            for &c in internal {
                let x = owner(c);
                if done[&x] || newly.iter().any(|&(y, _)| y == x) {
                    continue;
                }
                if g.successors(c as usize).iter().any(|&(t, pr)| pr > 0.0 && done.get(&t) == Some(&true)) {
                    newly.push((x, c));
                }
            }
            if newly.is_empty() {
                break;
            }
            for (x, c) in newly {
                choice[x] = c;
                done.insert(x, true);
                remaining -= 1;
            }
        }
    }

    fn solve_epochs(
        &self,
        w: &[f64],
        eps: f64,
        tail: &TailSolution,
        sweeps: &mut u64,
    ) -> Result<(Vec<f64>, Vec<Vec<EpochRun>>), EngineError> {
        let p = &self.product;
        let d = self.dim();
        let n = p.num_states();
        let timed: Vec<usize> = (0..d).filter(|&i| p.objs[i].window.is_some()).collect();
        let base_wr: Vec<f64> = (0..p.model_choice.len()).map(|c| (0..d).map(|i| w[i] * p.epoch_reward[i][c]).sum()).collect();
        let mut w_next = tail.weighted.clone();
        let mut v_next = tail.values.clone();
        let mut w_cur = vec![0.0; n];
        let mut v_cur = vec![0.0; n * d];
        let mut pick = vec![NONE; n];
        let multi: Vec<bool> = (0..n).map(|x| p.choices(x).len() > 1).collect();
        let mut runs: Vec<Vec<EpochRun>> = vec![Vec::new(); n];
        let mut buf = Vec::new();
        for c in (0..=p.horizon).rev() {
            let cur = &self.variants[self.variant_at[c as usize] as usize];
            let next = &self.variants[self.variant_at[c as usize + 1] as usize];
            let q_weighted = |pc: usize, w_cur: &[f64]| -> f64 {
                let step = p.inc[pc];
                let cp = c + step as u64;
                let mut r = base_wr[pc];
                for &i in &timed {
                    if p.objs[i].window.unwrap().contains(cp) {
                        r += w[i] * p.pending[i][pc];
                    }
                }
                let (g, vals) = if step { (next, w_next.as_slice()) } else { (cur, w_cur) };
                r + g.entries[p.epoch_rows[pc]..p.epoch_rows[pc + 1]].iter().map(|&(t, pr)| pr * vals[t]).sum::<f64>()
            };
            for (scc, trivial) in &cur.sccs {
                loop {
                    let mut delta: f64 = 0.0;
                    for &x in scc {
                        let x = x as usize;
                        let mut best = f64::NEG_INFINITY;
                        for pc in p.choices(x) {
                            if self.allowed[pc] {
                                best = best.max(q_weighted(pc, &w_cur));
                            }
                        }
                        if best == f64::NEG_INFINITY {
                            best = 0.0;
                        }
                        delta = delta.max((best - w_cur[x]).abs());
                        w_cur[x] = best;
                    }
                    *sweeps += 1;
                    if *sweeps > MAX_SWEEPS {
                        return Err(EngineError::NonConvergence { sweeps: *sweeps });
                    }
                    if *trivial || delta < eps {
                        break;
                    }
                }
                for &x in scc {
                    let x = x as usize;
                    buf.clear();
                    for pc in p.choices(x) {
                        if self.allowed[pc] {
                            buf.push((pc as u32, q_weighted(pc, &w_cur)));
                        }
                    }
                    pick[x] = if buf.is_empty() { NONE } else { argmax(&buf).0 };
                }
                loop {
                    let mut delta: f64 = 0.0;
                    for &x in scc {
                        let x = x as usize;
                        if pick[x] == NONE {
                            continue;
                        }
                        let pc = pick[x] as usize;
                        let step = p.inc[pc];
                        let cp = c + step as u64;
                        let g = if step { next } else { cur };
                        let ents = &g.entries[p.epoch_rows[pc]..p.epoch_rows[pc + 1]];
                        for i in 0..d {
                            let mut r = p.epoch_reward[i][pc];
                            if let Some(win) = p.objs[i].window {
                                if win.contains(cp) {
                                    r += p.pending[i][pc];
                                }
                            }
                            let vals = if step { &v_next } else { &v_cur };
                            let v = r + ents.iter().map(|&(t, pr)| pr * vals[t * d + i]).sum::<f64>();
                            delta = delta.max((v - v_cur[x * d + i]).abs());
                            v_cur[x * d + i] = v;
                        }
                    }
                    *sweeps += 1;
                    if *sweeps > MAX_SWEEPS {
                        return Err(EngineError::NonConvergence { sweeps: *sweeps });
                    }
                    if *trivial || delta < eps {
                        break;
                    }
                }
            }
            for x in 0..n {
                if !multi[x] || pick[x] == NONE {
                    continue;
                }
                let a = self.action_of[pick[x] as usize];
                match runs[x].last_mut() {
                    Some(r) if r.action == a => r.from = c,
                    _ => runs[x].push(EpochRun { from: c, action: a }),
                }
            }
            std::mem::swap(&mut w_cur, &mut w_next);
            std::mem::swap(&mut v_cur, &mut v_next);
        }
        for r in &mut runs {
            r.reverse();
        }
        Ok((v_next, runs))
    }

    fn describe(&self, tail_choice: &[u32], epochs: Option<Vec<Vec<EpochRun>>>) -> DeterministicScheduler {
        let p = &self.product;
        let mut memory = vec![MemoryBit { goal: Vec::new(), window: None }; p.bits as usize];
        for o in &p.objs {
            if let Some(b) = o.bit {
                let goal = (0..o.goal.len()).filter(|&s| o.goal[s]).collect();
                let window = o.window.map(|w| StepInterval { lower: w.lo, upper: w.hi });
                memory[b.trailing_zeros() as usize] = MemoryBit { goal, window };
            }
        }
        let mut decisions = Vec::new();
        for x in 0..p.num_states() {
            if p.choices(x).len() < 2 {
                continue;
            }
            let tail = match tail_choice[x] {
                NONE => None,
                c => Some(self.action_of[c as usize]),
            };
            let runs = epochs.as_ref().map(|e| e[x].clone()).unwrap_or_default();
            if tail.is_none() && runs.is_empty() {
                continue;
            }
            decisions.push(Decision { state: p.state[x] as usize, memory: p.mask[x], epochs: runs, tail });
        }
        decisions.sort_by_key(|d| (d.state, d.memory));
        DeterministicScheduler {
            memory,
            delta: self.delta,
            horizon: if p.has_epochs { Some(p.horizon) } else { None },
            decisions,
        }
    }
}

struct TailSolution {
    weighted: Vec<f64>,
    values: Vec<f64>,
    choice: Vec<u32>,
}

fn build_quotient(p: &Product, allowed: &[bool], mecs: Vec<crate::graph::EndComponent>) -> Quotient {
    let n = p.num_states();
    let g = p.tail_graph();
    let mut node_of = vec![NONE; n];
    let mut members = Vec::new();
    let mut is_mec = Vec::new();
    let mut internal = Vec::new();
    let mut internal_choice = vec![false; p.model_choice.len()];
    for m in mecs {
        let id = members.len() as u32;
        for &s in &m.states {
            node_of[s] = id;
        }
        for &c in &m.choices {
            internal_choice[c] = true;
        }
        members.push(m.states.iter().map(|&s| s as u32).collect::<Vec<_>>());
        is_mec.push(true);
        internal.push(m.choices.iter().map(|&c| c as u32).collect());
    }
    for x in 0..n {
        if node_of[x] == NONE {
            node_of[x] = members.len() as u32;
            members.push(vec![x as u32]);
            is_mec.push(false);
            internal.push(Vec::new());
        }
    }
    let mut groups = vec![0];
    let mut origin = Vec::new();
    let mut rows = vec![0];
    let mut entries: Vec<(usize, f64)> = Vec::new();
    for u in 0..members.len() {
        for &x in &members[u] {
            for c in p.choices(x as usize) {
                if !allowed[c] || internal_choice[c] {
                    continue;
                }
                let start = entries.len();
                for &(t, q) in g.successors(c) {
                    let v = node_of[t] as usize;
                    match entries[start..].iter_mut().find(|e| e.0 == v) {
                        Some(e) => e.1 += q,
                        None => entries.push((v, q)),
                    }
                }
                rows.push(entries.len());
                origin.push(c as u32);
            }
        }
        if is_mec[u] {
            rows.push(entries.len());
            origin.push(NONE);
        }
        groups.push(origin.len());
    }
    let sccs = sccs_of(
        members.len(),
        |u, out| {
            for qc in groups[u]..groups[u + 1] {
                out.extend(entries[rows[qc]..rows[qc + 1]].iter().map(|e| e.0));
            }
        },
        |u| (groups[u]..groups[u + 1]).any(|qc| entries[rows[qc]..rows[qc + 1]].iter().any(|e| e.0 == u)),
    );
    Quotient { members, is_mec, internal, groups, origin, rows, entries, sccs }
}

fn epoch_graph(p: &Product, allowed: &[bool], active: u32) -> Result<EpochGraph, EngineError> {
    let entries: Vec<(usize, f64)> = p.epoch_entries.iter().map(|e| (p.epoch_target(e, active), e.p)).collect();
    let n = p.num_states();
    let instant = |pc: usize| allowed[pc] && !p.inc[pc];
    let succ = |x: usize, out: &mut Vec<usize>| {
        for pc in p.choices(x) {
            if instant(pc) {
                out.extend(entries[p.epoch_rows[pc]..p.epoch_rows[pc + 1]].iter().map(|e| e.0));
            }
        }
    };
    let self_loop = |x: usize| {
        p.choices(x).any(|pc| instant(pc) && entries[p.epoch_rows[pc]..p.epoch_rows[pc + 1]].iter().any(|e| e.0 == x))
    };
    let sccs = sccs_of(n, succ, self_loop);
    if sccs.iter().any(|(_, t)| !t) {
        // cycles of instantaneous choices must not be closable
        struct G<'a> {
            p: &'a Product,
            e: &'a [(usize, f64)],
        }
        impl ChoiceGraph for G<'_> {
            fn num_states(&self) -> usize {
                self.p.num_states()
            }
            fn choices(&self, s: usize) -> std::ops::Range<usize> {
                self.p.choices(s)
            }
            fn successors(&self, c: usize) -> &[(usize, f64)] {
                &self.e[self.p.epoch_rows[c]..self.p.epoch_rows[c + 1]]
            }
        }
        let mask: Vec<bool> = (0..p.model_choice.len()).map(instant).collect();
        if !maximal_end_components(&G { p, e: &entries }, &vec![true; n], &mask).is_empty() {
            return Err(EngineError::Unsupported("end component without Markovian steps in a step-bounded analysis".into()));
        }
    }
    Ok(EpochGraph { entries, sccs })
}

/// Weighted solve of `objectives` on a single MDP.
pub fn weighted_value_iteration(
    mdp: &Mdp,
    objectives: &[NormalizedObjective],
    w: &[f64],
    vi_eps: f64,
) -> Result<WeightedSolve, EngineError> {
    MultiObjectiveProblem::new(mdp, None, objectives)?.solve(w, vi_eps)
}

/// End-component analysis of `objectives` on `mdp`.
pub fn preprocess_end_components(mdp: &Mdp, objectives: &[NormalizedObjective]) -> Result<InfinityReport, EngineError> {
    Ok(MultiObjectiveProblem::new(mdp, None, objectives)?.report)
}
