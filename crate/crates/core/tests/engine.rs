use std::collections::BTreeSet;

use mamoc::engine::objective::{Direction, Objective, Relation};
use mamoc::engine::{
    achievability, numerical_query, pareto, preprocess_end_components, qualitative_reach, route, weighted_value_iteration,
    AnalysisOptions, MultiObjectiveProblem, Plan, RefineStatus, Refiner, SchedulerMode, Verdict,
};
use mamoc::geometry::contains;
use mamoc::model::{Distribution, MarkovAutomaton, Mdp, MdpBuilder, RewardFunction, StateSet};
use mamoc::transform::{underlying_mdp, TimeInterval};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;

use common::{check_step_bounded, check_unbounded, fixture, norm, random_mdp, set};

fn race_pair() -> (MarkovAutomaton, Vec<Objective>) {
    let ma = fixture("fig4a.ma");
    let objs = vec![Objective::reach(set(5, &[2]), Direction::Maximize), Objective::reach(set(5, &[4]), Direction::Maximize)];
    (ma, objs)
}

#[test]
fn qualitative_on_race() {
    let mdp = underlying_mdp(&fixture("fig4a.ma"));
    let (prob0, prob1) = qualitative_reach(&mdp, &set(5, &[2]), Direction::Maximize);
    assert_eq!(prob1.iter().collect::<Vec<_>>(), vec![0, 1, 2]);
    assert_eq!(prob0.iter().collect::<Vec<_>>(), vec![3, 4]);
    let (prob0, prob1) = qualitative_reach(&mdp, &set(5, &[2]), Direction::Minimize);
    assert_eq!(prob1.iter().collect::<Vec<_>>(), vec![2]);
    assert_eq!(prob0.iter().collect::<Vec<_>>(), vec![0, 1, 3, 4]);
}

#[test]
fn qualitative_unreachable_goal() {
    let mdp = underlying_mdp(&fixture("fig4a.ma"));
    let (prob0, prob1) = qualitative_reach(&mdp, &StateSet::empty(5), Direction::Maximize);
    assert_eq!(prob0.len(), 5);
    assert!(prob1.is_empty());
}

#[test]
fn weighted_solves_on_race() {
    let (ma, objs) = race_pair();
    let mdp = underlying_mdp(&ma);
    let s = weighted_value_iteration(&mdp, &norm(&objs), &[1.0, 0.0], 1e-6).unwrap();
    assert!((s.point[0] - 1.0).abs() < 1e-9 && s.point[1].abs() < 1e-9, "{:?}", s.point);
    let alpha = ma.find_action("alpha").unwrap();
    assert_eq!(s.scheduler.decide(1, 0, 0), Some(alpha));
    let s = weighted_value_iteration(&mdp, &norm(&objs), &[1.0, 1.0], 1e-6).unwrap();
    assert!((s.point[0] + s.point[1] - 1.0).abs() < 1e-9);
    assert!((s.weighted_value - 0.5).abs() < 1e-9);
}

#[test]
fn goal_at_initial_state() {
    let (ma, _) = race_pair();
    let mdp = underlying_mdp(&ma);
    let objs = norm(&[Objective::reach(set(5, &[0]), Direction::Maximize)]);
    for w in [[1.0], [0.3]] {
        let s = weighted_value_iteration(&mdp, &objs, &w, 1e-6).unwrap();
        assert!((s.point[0] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn invalid_weights_rejected() {
    let (ma, objs) = race_pair();
    let mdp = underlying_mdp(&ma);
    assert!(weighted_value_iteration(&mdp, &norm(&objs), &[0.0, 0.0], 1e-6).is_err());
    assert!(weighted_value_iteration(&mdp, &norm(&objs), &[-1.0, 1.0], 1e-6).is_err());
}

#[test]
fn routing() {
    let (ma, mut objs) = race_pair();
    assert_eq!(route(&ma, &objs, 1e-2, None).unwrap(), Plan::Underlying);
    objs[1] = Objective::timed_reach(set(5, &[4]), TimeInterval::new(0.0, Some(2.0)).unwrap(), Direction::Maximize);
    match route(&ma, &objs, 1e-2, None).unwrap() {
        Plan::Digitized { delta, intervals, .. } => {
            assert!(delta > 0.0);
            assert!(intervals[0].is_none());
            assert_eq!(intervals[1].as_ref().unwrap().bounds.down, 0.0);
        }
        p => panic!("unexpected plan {p:?}"),
    }
}

#[test]
fn pareto_race_front() {
    let (ma, objs) = race_pair();
    let r = pareto(&ma, &objs, &AnalysisOptions::default()).unwrap();
    assert_eq!(r.status, RefineStatus::Converged);
    assert!(r.eta_achieved <= 1e-3);
    for v in &r.under.vertices {
        assert!((v[0] + v[1] - 1.0).abs() < 2e-3);
    }
    assert!(!contains(&r.over, &[0.51, 0.51]));
    assert!(r.is_sandwiched(1e-7));
}

#[test]
fn pareto_single_objective() {
    let (ma, objs) = race_pair();
    let r = pareto(&ma, &objs[1..], &AnalysisOptions::default()).unwrap();
    assert_eq!(r.solves.len(), 1);
    assert_eq!(r.under.vertices.len(), 1);
    assert!((r.under.vertices[0][0] - 1.0).abs() < 1e-9);
    assert!(contains(&r.over, &[1.0]) && !contains(&r.over, &[1.0 + 1e-6]));
}

#[test]
fn achievability_on_race() {
    let (ma, objs) = race_pair();
    let opts = AnalysisOptions::default();
    let th = |v: f64| -> Vec<Objective> { objs.iter().map(|o| o.clone().with_threshold(Relation::GreaterEq, v)).collect() };
    let r = achievability(&ma, &th(0.5), &opts).unwrap();
    match &r.verdict {
        Verdict::Achievable(w) => {
            assert_eq!(w.mode(), SchedulerMode::Mixture);
            let total: f64 = w.components().iter().map(|c| c.0).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        v => panic!("expected achievable, got {v:?}"),
    }
    assert_eq!(achievability(&ma, &th(0.7), &opts).unwrap().verdict, Verdict::NotAchievable);
}

#[test]
fn timed_threshold_inside_band_is_unknown() {
    let ma = fixture("fig4a.ma");
    let truth = 1.0 - 3.0 * (-2.0f64).exp();
    let obj = Objective::timed_reach(set(5, &[4]), TimeInterval::new(0.0, Some(2.0)).unwrap(), Direction::Maximize);
    let opts = AnalysisOptions { eta: 0.1, delta: Some(0.125), ..AnalysisOptions::default() };
    let r = achievability(&ma, &[obj.with_threshold(Relation::GreaterEq, truth)], &opts).unwrap();
    match r.verdict {
        Verdict::Unknown(g) => {
            assert!(g.distance > 0.0);
            assert!(g.error_box.up[0] > 0.0);
        }
        v => panic!("expected unknown, got {v:?}"),
    }
}

#[test]
fn numerical_queries_on_race() {
    let (ma, objs) = race_pair();
    let opts = AnalysisOptions::default();
    let r = numerical_query(&ma, &objs[..1], 0, &opts).unwrap();
    assert!(r.lo >= 1.0 - 1e-3 && r.hi <= 1.0 + 1e-9 && r.lo <= r.hi, "{} {}", r.lo, r.hi);

    let side = vec![objs[0].clone().with_threshold(Relation::GreaterEq, 0.5), objs[1].clone()];
    let r = numerical_query(&ma, &side, 1, &opts).unwrap();
    assert!(r.lo <= 0.5 + 1e-9 && r.hi >= 0.5 - 1e-9 && r.hi - r.lo <= 1e-3, "{} {}", r.lo, r.hi);

    let time = vec![Objective::time(set(5, &[2, 4]), Direction::Minimize)];
    let r = numerical_query(&ma, &time, 0, &opts).unwrap();
    assert!(r.lo <= 1.0 + 1e-6 && r.hi >= 1.0 - 1e-6 && r.hi - r.lo <= 1e-3, "{} {}", r.lo, r.hi);
}

#[test]
fn numerical_query_infeasible() {
    let (ma, objs) = race_pair();
    let side = vec![objs[0].clone().with_threshold(Relation::GreaterEq, 0.7), objs[1].clone().with_threshold(Relation::GreaterEq, 0.7), objs[0].clone()];
    assert!(numerical_query(&ma, &side, 2, &AnalysisOptions::default()).is_err());
}

/// Two absorbing states with a positive self-loop reward, reached from the start.
fn both_infinite() -> Mdp {
    let mut b = MdpBuilder::new(vec!["!markovian".into(), "a".into(), "b".into()], vec!["r1".into(), "r2".into()]);
    b.open_state(BTreeSet::new());
    b.add_choice(1, &[(1, 1.0)], &[0.0, 0.0]);
    b.add_choice(2, &[(2, 1.0)], &[0.0, 0.0]);
    b.open_state(BTreeSet::new());
    b.add_choice(0, &[(1, 1.0)], &[1.0, 1.0]);
    b.open_state(BTreeSet::new());
    b.add_choice(0, &[(2, 1.0)], &[1.0, 1.0]);
    b.open_state(BTreeSet::new());
    b.add_choice(0, &[(3, 1.0)], &[0.0, 0.0]);
    b.build(0).unwrap()
}

#[test]
fn both_rewards_forced_infinite() {
    let mdp = both_infinite();
    let goal = set(4, &[3]);
    let objs = norm(&[Objective::reward(0, goal.clone(), Direction::Minimize), Objective::reward(1, goal, Direction::Minimize)]);
    let rep = preprocess_end_components(&mdp, &objs).unwrap();
    assert_eq!(rep.forced, vec![0, 1]);
    assert!(rep.jointly_forced);
    assert!(!rep.is_finite());
}

#[test]
fn positive_loop_off_goal_path() {
    // state 1 loops with reward, state 2 leads to the goal
    let mut b = MdpBuilder::new(vec!["!markovian".into(), "a".into(), "b".into()], vec!["r".into()]);
    b.open_state(BTreeSet::new());
    b.add_choice(1, &[(1, 1.0)], &[0.0]);
    b.add_choice(2, &[(2, 1.0)], &[0.0]);
    b.open_state(BTreeSet::new());
    b.add_choice(0, &[(1, 1.0)], &[1.0]);
    b.open_state(BTreeSet::new());
    b.add_choice(0, &[(3, 1.0)], &[2.0]);
    b.open_state(BTreeSet::new());
    b.add_choice(0, &[(3, 1.0)], &[0.0]);
    let mdp = b.build(0).unwrap();
    let goal = set(4, &[3]);
    let min = norm(&[Objective::reward(0, goal.clone(), Direction::Minimize)]);
    let rep = preprocess_end_components(&mdp, &min).unwrap();
    assert!(rep.is_finite() && rep.forced.is_empty());
    let s = weighted_value_iteration(&mdp, &min, &[1.0], 1e-8).unwrap();
    assert!((s.point[0] + 2.0).abs() < 1e-9);

    let max = norm(&[Objective::reward(0, goal, Direction::Maximize)]);
    let rep = preprocess_end_components(&mdp, &max).unwrap();
    assert_eq!(rep.unbounded, vec![0]);
    assert!(weighted_value_iteration(&mdp, &max, &[1.0], 1e-8).is_err());
}

#[test]
fn reward_free_trap_is_collapsed() {
    let mut b = MdpBuilder::new(vec!["!markovian".into(), "a".into(), "b".into()], vec!["r".into()]);
    b.open_state(BTreeSet::new());
    b.add_choice(1, &[(1, 0.5), (2, 0.5)], &[1.0]);
    b.open_state(BTreeSet::new());
    b.add_choice(0, &[(1, 1.0)], &[0.0]);
    b.open_state(BTreeSet::new());
    b.add_choice(0, &[(2, 1.0)], &[0.0]);
    let mdp = b.build(0).unwrap();
    let objs = norm(&[Objective::reward(0, set(3, &[2]), Direction::Maximize)]);
    let rep = preprocess_end_components(&mdp, &objs).unwrap();
    assert!(rep.is_finite());
    assert!(rep.collapsed_states >= 1);
    let s = weighted_value_iteration(&mdp, &objs, &[1.0], 1e-8).unwrap();
    assert!((s.point[0] - 1.0).abs() < 1e-9);
}

#[test]
fn achievability_with_forced_infinite_min_reward() {
    let mut ma = MarkovAutomaton::new(2, 0);
    ma.set_markovian(0, 1.0, Distribution::dirac(0));
    ma.set_markovian(1, 1.0, Distribution::dirac(1));
    let mut rf = RewardFunction::new("r");
    rf.state_rewards.insert(0, 1.0);
    ma.rewards.push(rf);
    let obj = Objective::reward(0, set(2, &[1]), Direction::Minimize).with_threshold(Relation::LessEq, 5.0);
    let r = achievability(&ma, &[obj], &AnalysisOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::NotAchievable);
}

#[test]
fn single_objective_matches_plain_value_iteration() {
    // Pmax of reaching s6 in the seven-state automaton, against an independent VI
    let ma = fixture("fig2a.ma");
    let mdp = underlying_mdp(&ma);
    let goal = set(7, &[6]);
    let objs = norm(&[Objective::reach(goal.clone(), Direction::Maximize)]);
    let vi_eps = 1e-8;
    let s = weighted_value_iteration(&mdp, &objs, &[1.0], vi_eps).unwrap();
    let v = plain_reach_max(&mdp, &goal, 1e-12);
    assert!((s.point[0] - v[mdp.initial]).abs() <= 2.0 * vi_eps, "{} vs {}", s.point[0], v[mdp.initial]);
}

/// Textbook Pmax value iteration started from the prob0 states at 0.
fn plain_reach_max(mdp: &Mdp, goal: &StateSet, eps: f64) -> Vec<f64> {
    let n = mdp.num_states;
    let mut x: Vec<f64> = (0..n).map(|s| if goal.contains(s) { 1.0 } else { 0.0 }).collect();
    loop {
        let mut delta = 0.0f64;
        for s in 0..n {
            if goal.contains(s) {
                continue;
            }
            let v = mdp
                .choices(s)
                .map(|c| mdp.successors(c).iter().map(|&(t, p)| p * x[t]).sum::<f64>())
                .fold(0.0, f64::max);
            delta = delta.max((v - x[s]).abs());
            x[s] = v;
        }
        if delta < eps {
            return x;
        }
    }
}

#[test]
fn scaling_weights_keeps_decisions() {
    let (ma, objs) = race_pair();
    let mdp = underlying_mdp(&ma);
    let objs = norm(&objs);
    for w in [[0.3, 0.7], [0.9, 0.1], [0.5, 0.5]] {
        let a = weighted_value_iteration(&mdp, &objs, &w, 1e-8).unwrap();
        let b = weighted_value_iteration(&mdp, &objs, &[w[0] * 7.5, w[1] * 7.5], 1e-8).unwrap();
        assert_eq!(a.scheduler, b.scheduler);
    }
}

#[test]
fn refinement_is_monotone() {
    let ma = fixture("fig4a.ma");
    let objs = vec![
        Objective::reach(set(5, &[2]), Direction::Maximize),
        Objective::timed_reach(set(5, &[4]), TimeInterval::new(0.0, Some(2.0)).unwrap(), Direction::Maximize),
    ];
    let opts = AnalysisOptions { eta: 0.05, delta: Some(0.25), ..AnalysisOptions::default() };
    let prep = mamoc::engine::prepare(&ma, &objs, &opts).unwrap();
    let mut r = Refiner::new(&prep.problem, opts.vi_eps, 40);
    r.init().unwrap();
    let mut under = r.under().unwrap();
    let mut over = r.over().unwrap();
    let mut last_gap = f64::INFINITY;
    for round in 0..6 {
        let (gap, _) = r.refine_gap(0.5f64.powi(round + 2)).unwrap();
        let (u, o) = (r.under().unwrap(), r.over().unwrap());
        assert!(under.vertices.iter().all(|v| contains(&u, v)));
        assert!(o.vertices.iter().all(|v| contains(&over, v)));
        assert!(gap <= last_gap + 1e-12);
        last_gap = gap;
        under = u;
        over = o;
    }
}

#[test]
fn timed_vertex_within_error_band() {
    let ma = fixture("fig4a.ma");
    let truth = 1.0 - 3.0 * (-2.0f64).exp();
    let objs = vec![
        Objective::reach(set(5, &[2]), Direction::Maximize),
        Objective::timed_reach(set(5, &[4]), TimeInterval::new(0.0, Some(2.0)).unwrap(), Direction::Maximize),
    ];
    let opts = AnalysisOptions { eta: 0.02, delta: Some(0.125), ..AnalysisOptions::default() };
    let r = pareto(&ma, &objs, &opts).unwrap();
    assert!(r.is_sandwiched(1e-7));
    let best = r.solves.iter().map(|s| s.point[1]).fold(f64::MIN, f64::max);
    assert!(best - r.error_box.down[1] <= truth + 1e-9 && truth <= best + r.error_box.up[1] + 1e-9);
    assert!(contains(&r.under, &[0.0, best - r.error_box.down[1]]));
    assert!(!contains(&r.over, &[0.0, truth + r.error_box.up[1] + 0.05]));
}


#[test]
fn random_unbounded_against_enumeration() {
    let checked = check_unbounded(7, 200);
    assert!(checked > 100, "only {checked} finite cases");
}

#[test]
fn random_step_bounded_against_dp() {
    check_step_bounded(11, 200);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn argmax_invariant_under_scaling(seed in 0u64..10_000, c in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mdp, _) = random_mdp(&mut rng, false);
        let n = mdp.num_states;
        let objs = norm(&[
            Objective::reach(set(n, &[rng.gen_range(0..n)]), Direction::Maximize),
            Objective::reach(set(n, &[rng.gen_range(0..n)]), Direction::Maximize),
        ]);
        let w = [rng.gen_range(0.0..1.0), rng.gen_range(0.01..1.0)];
        let a = weighted_value_iteration(&mdp, &objs, &w, 1e-9).unwrap();
        let b = weighted_value_iteration(&mdp, &objs, &[w[0] * c, w[1] * c], 1e-9).unwrap();
        prop_assert_eq!(a.scheduler, b.scheduler);
    }

    #[test]
    fn under_inside_over(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mdp, _) = random_mdp(&mut rng, false);
        let n = mdp.num_states;
        let objs = norm(&[
            Objective::reach(set(n, &[rng.gen_range(0..n)]), Direction::Maximize),
            Objective::reach(set(n, &[rng.gen_range(0..n)]), Direction::Maximize),
        ]);
        let problem = MultiObjectiveProblem::new(&mdp, None, &objs).unwrap();
        let r = mamoc::engine::pareto_refine(&problem, 1e-3, 1e-9).unwrap();
        prop_assert!(r.is_sandwiched(1e-7));
        if r.status == RefineStatus::Converged {
            prop_assert!(r.eta_achieved <= 1e-3);
        }
        // midpoints of under vertices stay inside
        for a in &r.under.vertices {
            for b in &r.under.vertices {
                let m: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
                prop_assert!(contains(&r.under, &m));
            }
        }
    }
}

