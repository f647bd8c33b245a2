#![allow(dead_code)]

use std::collections::BTreeSet;

use mamoc::engine::objective::{Direction, NormalizedObjective, Objective, ObjectiveKind};
use mamoc::engine::MultiObjectiveProblem;
use mamoc::ingest::parse_model;
use mamoc::model::{MarkovAutomaton, Mdp, MdpBuilder, StateSet, MARKOVIAN_ACTION};
use mamoc::transform::{StepInterval, TimeInterval};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> MarkovAutomaton {
    let path = format!("{}/../../models/{name}", env!("CARGO_MANIFEST_DIR"));
    parse_model(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn set(n: usize, states: &[usize]) -> StateSet {
    StateSet::from_states(n, states.iter().copied())
}

pub fn norm(objs: &[Objective]) -> Vec<NormalizedObjective> {
    objs.iter().map(|o| NormalizedObjective::from_objective(o, None)).collect()
}

// ---------------------------------------------------------------------------
// random MDPs against brute force

pub fn random_mdp(rng: &mut ChaCha8Rng, all_steps: bool) -> (Mdp, Vec<Vec<(usize, f64)>>) {
    let n = rng.gen_range(2..=6);
    let names = vec!["!markovian".to_string(), "a".to_string(), "b".to_string()];
    let mut b = MdpBuilder::new(names, vec!["r".into()]);
    let mut rewards = Vec::new();
    for _ in 0..n {
        b.open_state(BTreeSet::new());
        let k = rng.gen_range(1..=2);
        let mut rs = Vec::new();
        for a in 0..k {
            let m = rng.gen_range(1..=3);
            let mut succ: Vec<(usize, f64)> = Vec::new();
            for _ in 0..m {
                let t = rng.gen_range(0..n);
                let p: f64 = rng.gen_range(0.1..1.0);
                match succ.iter_mut().find(|e| e.0 == t) {
                    Some(e) => e.1 += p,
                    None => succ.push((t, p)),
                }
            }
            let total: f64 = succ.iter().map(|e| e.1).sum();
            succ.iter_mut().for_each(|e| e.1 /= total);
            let r = if rng.gen_bool(0.5) { rng.gen_range(0.0..2.0) } else { 0.0 };
            let action = if all_steps { MARKOVIAN_ACTION } else { a + 1 };
            b.add_choice(action, &succ, &[r]);
            rs.push((0, r));
        }
        rewards.push(rs);
    }
    (b.build(0).unwrap(), rewards)
}

/// Rebuilds `mdp` with every state in `absorbing` replaced by a rewardless self-loop.
fn make_absorbing(mdp: &Mdp, absorbing: &[bool]) -> Mdp {
    let mut b = MdpBuilder::new(mdp.action_names.clone(), vec!["r".into()]);
    for s in 0..mdp.num_states {
        b.open_state(BTreeSet::new());
        if absorbing[s] {
            b.add_choice(1, &[(s, 1.0)], &[0.0]);
        } else {
            for c in mdp.choices(s) {
                b.add_choice(mdp.action(c), mdp.successors(c), &[mdp.rewards[0].values[c]]);
            }
        }
    }
    b.build(mdp.initial).unwrap()
}

/// Every deterministic memoryless scheduler as a choice index per state.
pub fn all_schedulers(mdp: &Mdp) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for s in 0..mdp.num_states {
        out = out.into_iter().flat_map(|p| mdp.choices(s).map(move |c| [p.clone(), vec![c]].concat())).collect();
    }
    out
}

/// Values of a fixed chain: probability of hitting each goal and expected
/// reward collected before `stop`; `None` when it diverges.
pub struct ChainValues {
    pub reach: Vec<Vec<f64>>,
    pub reward: Option<Vec<f64>>,
}

pub fn chain_values(mdp: &Mdp, pick: &[usize], goals: &[Vec<bool>], stop: &[bool]) -> ChainValues {
    let n = mdp.num_states;
    let succ = |s: usize| mdp.successors(pick[s]).iter().filter(|e| e.1 > 0.0).map(|e| e.0).collect::<Vec<_>>();
    // states reachable from s0
    let mut seen = vec![false; n];
    let mut stack = vec![mdp.initial];
    seen[mdp.initial] = true;
    while let Some(s) = stack.pop() {
        for t in succ(s) {
            if !seen[t] {
                seen[t] = true;
                stack.push(t);
            }
        }
    }
    // can reach `stop` in the chain
    let reaches = |target: &[bool]| -> Vec<bool> {
        let mut r = target.to_vec();
        loop {
            let mut changed = false;
            for s in 0..n {
                if !r[s] && succ(s).iter().any(|&t| r[t]) {
                    r[s] = true;
                    changed = true;
                }
            }
            if !changed {
                return r;
            }
        }
    };
    let solve = |known: &dyn Fn(usize) -> Option<f64>, r: &dyn Fn(usize) -> f64| -> Vec<f64> {
        let free: Vec<usize> = (0..n).filter(|&s| known(s).is_none()).collect();
        let idx = |s: usize| free.iter().position(|&x| x == s);
        let m = free.len();
        if m == 0 {
            return (0..n).map(|s| known(s).unwrap()).collect();
        }
        let mut a = nalgebra::DMatrix::<f64>::identity(m, m);
        let mut rhs = nalgebra::DVector::<f64>::zeros(m);
        for (i, &s) in free.iter().enumerate() {
            rhs[i] = r(s);
            for &(t, p) in mdp.successors(pick[s]) {
                match idx(t) {
                    Some(j) => a[(i, j)] -= p,
                    None => rhs[i] += p * known(t).unwrap(),
                }
            }
        }
        let x = a.lu().solve(&rhs).expect("transient part is invertible");
        (0..n).map(|s| known(s).unwrap_or_else(|| x[idx(s).unwrap()])).collect()
    };
    let reach = goals
        .iter()
        .map(|g| {
            let can = reaches(g);
            solve(&|s| if g[s] { Some(1.0) } else if !can[s] { Some(0.0) } else { None }, &|_| 0.0)
        })
        .collect();
    // recurrent states: everything they reach reaches them back
    let recurrent: Vec<bool> = (0..n)
        .map(|s| {
            let mut only = vec![false; n];
            only[s] = true;
            let back = reaches(&only);
            let mut fwd = vec![false; n];
            let mut stack = vec![s];
            fwd[s] = true;
            while let Some(x) = stack.pop() {
                for t in succ(x) {
                    if !fwd[t] {
                        fwd[t] = true;
                        stack.push(t);
                    }
                }
            }
            (0..n).all(|t| !fwd[t] || back[t])
        })
        .collect();
    let earns = |s: usize| mdp.rewards[0].values[pick[s]] > 0.0;
    let diverges = (0..n).any(|s| seen[s] && recurrent[s] && !stop[s] && earns(s));
    let reward = if diverges {
        None
    } else {
        Some(solve(&|s| if stop[s] || !seen[s] || (recurrent[s] && !earns(s)) { Some(0.0) } else { None }, &|s| mdp.rewards[0].values[pick[s]]))
    };
    ChainValues { reach, reward }
}

/// Weighted solves of two reachability goals plus a reward against every
/// deterministic memoryless scheduler. Returns the number of finite cases.
pub fn check_unbounded(seed: u64, cases: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for case in 0..cases {
        let (raw, _) = random_mdp(&mut rng, false);
        let n = raw.num_states;
        let g1 = rng.gen_range(0..n);
        let g2 = rng.gen_range(0..n);
        let mut absorbing = vec![false; n];
        absorbing[g1] = true;
        absorbing[g2] = true;
        let mdp = make_absorbing(&raw, &absorbing);
        let goals = vec![set(n, &[g1]), set(n, &[g2])];
        let stop = goals[0].union(&goals[1]);
        let dir = if rng.gen_bool(0.5) { Direction::Minimize } else { Direction::Maximize };
        let objs = norm(&[
            Objective::reach(goals[0].clone(), Direction::Maximize),
            Objective::reach(goals[1].clone(), Direction::Maximize),
            Objective::reward(0, stop.clone(), dir),
        ]);
        let w: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
        let problem = MultiObjectiveProblem::new(&mdp, None, &objs).unwrap();
        let we = problem.effective_weights(&w).unwrap();

        let gb: Vec<Vec<bool>> = goals.iter().map(|g| g.bits().to_vec()).collect();
        let mut best = f64::NEG_INFINITY;
        let mut infinite = false;
        for pick in all_schedulers(&mdp) {
            let v = chain_values(&mdp, &pick, &gb, stop.bits());
            let s0 = mdp.initial;
            let r = match (dir, &v.reward) {
                (Direction::Minimize, Some(r)) => -r[s0],
                (Direction::Minimize, None) => continue,
                (Direction::Maximize, Some(r)) => r[s0],
                (Direction::Maximize, None) => {
                    infinite = true;
                    continue;
                }
            };
            best = best.max(we[0] * v.reach[0][s0] + we[1] * v.reach[1][s0] + we[2] * r);
        }
        let got = problem.solve(&w, 1e-10);
        if infinite || best == f64::NEG_INFINITY {
            assert!(got.is_err(), "case {case}: expected an infinity, got {:?}", got.map(|s| s.point));
            continue;
        }
        let got = got.unwrap_or_else(|e| panic!("case {case}: {e}"));
        let value: f64 = we.iter().zip(&got.point).map(|(a, b)| a * b).sum();
        assert!((value - best).abs() < 1e-5, "case {case}: {value} vs {best}");
        checked += 1;
    }
    checked
}

/// Exhaustive DP over (state, steps, hit flags) for step-bounded reachability.
fn horizon_dp(mdp: &Mdp, goals: &[Vec<bool>], windows: &[StepInterval], w: &[f64]) -> f64 {
    let horizon = windows.iter().map(|j| j.upper.unwrap()).max().unwrap();
    let d = goals.len();
    let hits = |s: usize, k: u64| -> u32 { (0..d).filter(|&i| goals[i][s] && windows[i].contains(k)).fold(0, |m, i| m | 1 << i) };
    fn go(mdp: &Mdp, s: usize, k: u64, f: u32, h: u64, w: &[f64], hits: &dyn Fn(usize, u64) -> u32) -> f64 {
        if k == h {
            return (0..w.len()).filter(|&i| f & (1 << i) != 0).map(|i| w[i]).sum();
        }
        mdp.choices(s)
            .map(|c| mdp.successors(c).iter().map(|&(t, p)| p * go(mdp, t, k + 1, f | hits(t, k + 1), h, w, hits)).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }
    let s0 = mdp.initial;
    go(mdp, s0, 0, hits(s0, 0), horizon, w, &hits)
}

/// Step-bounded weighted solves against exhaustive finite-horizon DP.
pub fn check_step_bounded(seed: u64, cases: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let (mdp, _) = random_mdp(&mut rng, true);
        let n = mdp.num_states;
        let d = rng.gen_range(1..=2);
        let mut goals = Vec::new();
        let mut windows = Vec::new();
        let mut objs = Vec::new();
        for _ in 0..d {
            let g: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
            let hi = rng.gen_range(0..=4u64);
            let lo = rng.gen_range(0..=hi);
            let j = StepInterval { lower: lo, upper: Some(hi) };
            let obj = Objective::reach(StateSet::from_bits(g.clone()), Direction::Maximize);
            let kind = ObjectiveKind::TimedReach { goal: StateSet::from_bits(g.clone()), interval: TimeInterval::new(lo as f64, Some(hi as f64 + 0.5)).unwrap() };
            objs.push(NormalizedObjective { kind, step_bound: Some(j), ..NormalizedObjective::from_objective(&obj, None) });
            goals.push(g);
            windows.push(j);
        }
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(0.01..1.0)).collect();
        let problem = MultiObjectiveProblem::new(&mdp, None, &objs).unwrap();
        let we = problem.effective_weights(&w).unwrap();
        let got = problem.solve(&w, 1e-10).unwrap_or_else(|e| panic!("case {case}: {e}"));
        let value: f64 = we.iter().zip(&got.point).map(|(a, b)| a * b).sum();
        let want = horizon_dp(&mdp, &goals, &windows, &we);
        assert!((value - want).abs() < 1e-5, "case {case}: {value} vs {want}");
        assert!((got.weighted_value - want).abs() < 1e-5, "case {case}: weighted {} vs {want}", got.weighted_value);
    }
}
