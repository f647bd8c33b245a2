use mamoc::ingest::parse_model;
use mamoc::model::{MarkovAutomaton, RewardFunction, StateSet};
use mamoc::montecarlo::{
    abstraction_weight, digital_steps, digitize_path, ds_bounded_probability, estimate, simulate, time_abstract_expectation, AbstractPath,
    Clock, Cmp, EstimateOptions, MonteCarloError, PathEvent, PathSample, PathStep, StopCondition, Termination, ThresholdScheduler,
    WeightMode,
};
use mamoc::transform::{StepInterval, TimeInterval};
use proptest::prelude::*;

fn fixture(name: &str) -> MarkovAutomaton {
    let path = format!("{}/../../models/{name}", env!("CARGO_MANIFEST_DIR"));
    parse_model(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn set(n: usize, states: &[usize]) -> StateSet {
    StateSet::from_states(n, states.iter().copied())
}

fn act(ma: &MarkovAutomaton, name: &str) -> usize {
    ma.find_action(name).unwrap()
}

/// Race fixture: alpha at s1 iff the sojourn in s0 was at most ln 2.
fn race_scheduler(ma: &MarkovAutomaton) -> ThresholdScheduler {
    ThresholdScheduler::new()
        .rule(1, Clock::LastSojourn, Cmp::Le, 2f64.ln(), act(ma, "alpha"))
        .default_action(1, act(ma, "beta"))
}

/// Seven-state fixture: alpha at s3 iff the sojourn in s0 was at most one, gamma at s4.
fn seven_scheduler(ma: &MarkovAutomaton) -> ThresholdScheduler {
    ThresholdScheduler::new()
        .rule(3, Clock::LastSojourn, Cmp::Le, 1.0, act(ma, "alpha"))
        .default_action(3, act(ma, "beta"))
        .default_action(4, act(ma, "gamma"))
}

fn opts(seed: u64) -> EstimateOptions {
    EstimateOptions { samples: 100_000, confidence: 0.99, seed, workers: None }
}

fn path(states: &[usize], actions: &[Option<usize>]) -> AbstractPath {
    AbstractPath { states: states.to_vec(), actions: actions.to_vec() }
}

#[test]
fn race_threshold_splits_evenly() {
    let ma = fixture("fig4a.ma");
    let sched = race_scheduler(&ma);
    for (goal, seed) in [(2, 1), (4, 2)] {
        let est = estimate(&ma, &sched, &PathEvent::UntimedReach { goal: set(5, &[goal]) }, &opts(seed)).unwrap();
        assert!(est.contains(0.5), "{goal}: {est:?}");
        assert!(est.half_width > 0.0 && est.half_width < 0.01);
    }
}

#[test]
fn time_abstraction_keeps_untimed_values() {
    let ma = fixture("fig4a.ma");
    let sched = race_scheduler(&ma);
    for goal in [2, 4] {
        let v = time_abstract_expectation(&ma, &sched, &PathEvent::UntimedReach { goal: set(5, &[goal]) }).unwrap();
        assert!((v - 0.5).abs() < 1e-12, "{v}");
    }
}

#[test]
fn seven_state_threshold_reaches_s6() {
    let ma = fixture("fig2a.ma");
    let sched = seven_scheduler(&ma);
    let est = estimate(&ma, &sched, &PathEvent::UntimedReach { goal: set(7, &[6]) }, &opts(3)).unwrap();
    assert!(est.contains(1.0 - (-1f64).exp()), "{est:?}");
}

#[test]
fn initial_goal_terminates_at_once() {
    let ma = fixture("fig4a.ma");
    let sched = race_scheduler(&ma);
    let stop = StopCondition { goal: Some(set(5, &[0])), ..Default::default() };
    let p = simulate(&ma, &sched, &stop, 9).unwrap();
    assert!(p.is_empty());
    assert_eq!(p.duration(), 0.0);
    assert_eq!(p.last, 0);
    assert_eq!(p.terminated_by, Termination::Goal);
}

#[test]
fn simulate_is_reproducible_and_well_formed() {
    let ma = fixture("fig2a.ma");
    let sched = seven_scheduler(&ma);
    let stop = StopCondition { goal: Some(set(7, &[1, 2, 6])), ..Default::default() };
    for seed in 0..200 {
        let p = simulate(&ma, &sched, &stop, seed).unwrap();
        assert_eq!(p, simulate(&ma, &sched, &stop, seed).unwrap());
        assert_eq!(p.terminated_by, Termination::Goal);
        for st in &p.steps {
            if st.action.is_some() {
                assert_eq!(st.sojourn, 0.0);
            } else {
                assert!(st.sojourn > 0.0);
            }
        }
    }
}

#[test]
fn step_and_time_horizons_stop_paths() {
    let ma = fixture("fig2a.ma");
    let sched = seven_scheduler(&ma);
    let stop = StopCondition { max_steps: Some(2), ..Default::default() };
    let p = simulate(&ma, &sched, &stop, 4).unwrap();
    assert_eq!(p.len(), 2);
    assert_eq!(p.terminated_by, Termination::Horizon);

    let stop = StopCondition { time_horizon: Some(0.5), ..Default::default() };
    for seed in 0..50 {
        let p = simulate(&ma, &sched, &stop, seed).unwrap();
        let before_last: f64 = p.steps[..p.len().saturating_sub(1)].iter().map(|s| s.sojourn).sum();
        assert!(before_last <= 0.5);
    }
}

#[test]
fn digitized_example_path() {
    let ma = fixture("fig2a.ma");
    let (beta, eta) = (act(&ma, "beta"), act(&ma, "eta"));
    let p = PathSample {
        steps: vec![
            PathStep { state: 0, sojourn: 1.1, action: None },
            PathStep { state: 3, sojourn: 0.0, action: Some(beta) },
            PathStep { state: 4, sojourn: 0.0, action: Some(eta) },
            PathStep { state: 5, sojourn: 0.3, action: None },
        ],
        last: 4,
        terminated_by: Termination::Horizon,
    };
    let d = digitize_path(&p, 0.4);
    assert_eq!(d, path(&[0, 0, 0, 3, 4, 5, 4], &[None, None, None, Some(beta), Some(eta), None]));
    assert_eq!(d.ds_count(), 4);
    assert_eq!(p.time_abstract(), path(&[0, 3, 4, 5, 4], &[None, Some(beta), Some(eta), None]));
}

#[test]
fn sojourn_on_a_grid_point_counts_the_boundary() {
    assert_eq!(digital_steps(0.8, 0.4), 2);
    assert_eq!(digital_steps(0.3, 0.1), 3);
    assert_eq!(digital_steps(0.39, 0.4), 0);
    assert_eq!(digital_steps(0.0, 0.4), 0);
}

#[test]
fn elapsed_time_bounded_by_digital_steps() {
    let ma = fixture("fig2a.ma");
    let sched = seven_scheduler(&ma);
    let stop = StopCondition { goal: Some(set(7, &[1, 2, 6])), ..Default::default() };
    for seed in 0..10_000 {
        let p = simulate(&ma, &sched, &stop, seed).unwrap();
        for delta in [0.05, 0.4, 1.5] {
            let d = digitize_path(&p, delta);
            assert!(p.duration() <= d.ds_count() as f64 * delta + 1e-12, "seed {seed}");
        }
    }
}

#[test]
fn erlang_deadline_under_beta() {
    let ma = fixture("fig4a.ma");
    let sched = ThresholdScheduler::new().default_action(1, act(&ma, "beta"));
    let ev = PathEvent::TimedReach { goal: set(5, &[4]), interval: TimeInterval::new(0.0, Some(2.0)).unwrap() };
    let est = estimate(&ma, &sched, &ev, &opts(5)).unwrap();
    let exact = 1.0 - 3.0 * (-2f64).exp();
    assert!((exact - 0.59399).abs() < 1e-5);
    assert!(est.contains(exact), "{est:?}");
}

#[test]
fn zero_rewards_give_zero() {
    let mut ma = fixture("fig2a.ma");
    ma.rewards.push(RewardFunction::new("none"));
    let sched = seven_scheduler(&ma);
    let ev = PathEvent::RewardToGoal { reward: 0, goal: set(7, &[4, 6]) };
    let est = estimate(&ma, &sched, &ev, &EstimateOptions { samples: 1000, ..opts(0) }).unwrap();
    assert_eq!(est.mean, 0.0);
    assert_eq!(est.half_width, 0.0);
}

fn seven_with_sojourn_reward() -> MarkovAutomaton {
    let mut ma = fixture("fig2a.ma");
    let mut r = RewardFunction::new("rho");
    r.state_rewards.insert(0, 1.0);
    ma.rewards.push(r);
    ma
}

#[test]
fn sojourn_reward_sums_to_one_across_branches() {
    let ma = seven_with_sojourn_reward();
    let sched = seven_scheduler(&ma);
    let ev = PathEvent::RewardToGoal { reward: 0, goal: set(7, &[4, 6]) };
    let est = estimate(&ma, &sched, &ev, &opts(6)).unwrap();
    assert!(est.contains(1.0), "{est:?}");
    let exact = time_abstract_expectation(&ma, &sched, &ev).unwrap();
    assert!((exact - 1.0).abs() < 1e-12);

    // alpha branch collects E[T; T <= 1], beta branch E[T; T > 1] for T ~ Exp(1)
    let alpha_part = 1.0 - 2.0 * (-1f64).exp();
    let beta_part = 2.0 * (-1f64).exp();
    assert!((alpha_part + beta_part - exact).abs() < 1e-12);
}

#[test]
fn time_abstract_weight_of_alpha() {
    let ma = fixture("fig2a.ma");
    let sched = seven_scheduler(&ma);
    let p = path(&[0, 3], &[None]);
    let (alpha, beta) = (act(&ma, "alpha"), act(&ma, "beta"));
    let wa = abstraction_weight(&ma, &sched, &p, alpha, WeightMode::TimeAbstract).unwrap();
    let wb = abstraction_weight(&ma, &sched, &p, beta, WeightMode::TimeAbstract).unwrap();
    assert!((wa - (1.0 - (-1f64).exp())).abs() < 1e-9);
    assert!((wa + wb - 1.0).abs() < 1e-12);
}

#[test]
fn digital_weights_of_alpha() {
    let ma = fixture("fig2a.ma");
    let sched = seven_scheduler(&ma);
    let alpha = act(&ma, "alpha");
    let two = path(&[0, 0, 0, 3], &[None, None, None]);
    let w2 = abstraction_weight(&ma, &sched, &two, alpha, WeightMode::Digital(0.4)).unwrap();
    let e = |x: f64| (-x).exp();
    let exact = (e(0.8) - e(1.0)) / (e(0.8) - e(1.2));
    assert!((w2 - exact).abs() < 1e-6);
    assert!((w2 - 0.549834).abs() < 1e-6);

    let one = path(&[0, 0, 3], &[None, None]);
    assert_eq!(abstraction_weight(&ma, &sched, &one, alpha, WeightMode::Digital(0.4)).unwrap(), 1.0);
    let three = path(&[0, 0, 0, 0, 3], &[None, None, None, None]);
    assert_eq!(abstraction_weight(&ma, &sched, &three, alpha, WeightMode::Digital(0.4)).unwrap(), 0.0);
}

#[test]
fn weights_reject_bad_paths_and_shapes() {
    let ma = fixture("fig2a.ma");
    let alpha = act(&ma, "alpha");
    let sched = seven_scheduler(&ma);
    let bad = path(&[0, 4], &[None]);
    assert!(matches!(abstraction_weight(&ma, &sched, &bad, alpha, WeightMode::TimeAbstract), Err(MonteCarloError::InvalidPath(_))));
    let mixed = sched.clone().rule(3, Clock::TotalTime, Cmp::Gt, 3.0, alpha);
    let p = path(&[0, 3], &[None]);
    assert!(matches!(
        abstraction_weight(&ma, &mixed, &p, alpha, WeightMode::TimeAbstract),
        Err(MonteCarloError::UnsupportedSchedulerShape(_))
    ));
}

#[test]
fn analytic_ds_probability_matches_simulation() {
    let ma = fixture("fig2a.ma");
    let sched = seven_scheduler(&ma);
    let goal = set(7, &[6]);
    let window = StepInterval { lower: 0, upper: Some(5) };
    let exact = ds_bounded_probability(&ma, &sched, &goal, window, 0.4).unwrap();
    assert!((exact - (1.0 - (-1f64).exp())).abs() < 1e-12, "{exact}");
    let est = estimate(&ma, &sched, &PathEvent::DsBoundedReach { goal, window, delta: 0.4 }, &opts(7)).unwrap();
    assert!(est.contains(exact), "{est:?}");
}

#[test]
fn narrow_ds_window_against_simulation() {
    // s6 is entered at count m + 1 after m self-loops in s0 and then kept, so {2} needs m <= 1
    let ma = fixture("fig2a.ma");
    let sched = seven_scheduler(&ma);
    let goal = set(7, &[6]);
    let window = StepInterval { lower: 2, upper: Some(2) };
    let exact = ds_bounded_probability(&ma, &sched, &goal, window, 0.4).unwrap();
    assert!((exact - (1.0 - (-0.8f64).exp())).abs() < 1e-12, "{exact}");
    let est = estimate(&ma, &sched, &PathEvent::DsBoundedReach { goal, window, delta: 0.4 }, &opts(8)).unwrap();
    assert!(est.contains(exact), "{exact} {est:?}");
}

#[test]
fn estimates_are_reproducible_across_workers() {
    let ma = fixture("fig4a.ma");
    let sched = race_scheduler(&ma);
    let ev = PathEvent::UntimedReach { goal: set(5, &[2]) };
    let base = EstimateOptions { samples: 20_000, confidence: 0.99, seed: 42, workers: Some(1) };
    let a = estimate(&ma, &sched, &ev, &base).unwrap();
    let b = estimate(&ma, &sched, &ev, &base).unwrap();
    let c = estimate(&ma, &sched, &ev, &EstimateOptions { workers: Some(4), ..base.clone() }).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.mean.to_bits(), c.mean.to_bits());
    assert_eq!(a.half_width.to_bits(), c.half_width.to_bits());
    let d = estimate(&ma, &sched, &ev, &EstimateOptions { seed: 43, ..base }).unwrap();
    assert_ne!(a.mean, d.mean);
}

#[test]
fn partition_of_absorbing_goals_sums_to_one() {
    let ma = fixture("fig2a.ma");
    let sched = seven_scheduler(&ma);
    let mut total = 0.0;
    let mut hw = 0.0;
    for (i, goal) in [1, 2, 6].into_iter().enumerate() {
        let e = estimate(&ma, &sched, &PathEvent::UntimedReach { goal: set(7, &[goal]) }, &opts(100 + i as u64)).unwrap();
        total += e.mean;
        hw += e.half_width;
    }
    assert!((total - 1.0).abs() <= hw, "{total} ± {hw}");
}

#[test]
fn sample_and_confidence_checks() {
    let ma = fixture("fig4a.ma");
    let sched = race_scheduler(&ma);
    let ev = PathEvent::UntimedReach { goal: set(5, &[2]) };
    let few = EstimateOptions { samples: 999, ..opts(0) };
    assert!(matches!(estimate(&ma, &sched, &ev, &few), Err(MonteCarloError::TooFewSamples { min: 1000, got: 999 })));
    let conf = EstimateOptions { confidence: 1.0, ..opts(0) };
    assert!(matches!(estimate(&ma, &sched, &ev, &conf), Err(MonteCarloError::InvalidConfidence(_))));
    let empty = ThresholdScheduler::new();
    let small = EstimateOptions { samples: 1000, ..opts(0) };
    assert!(matches!(estimate(&ma, &empty, &ev, &small), Err(MonteCarloError::NoDecision(1))));
}

#[test]
fn reward_in_absorbing_state_is_infinite() {
    let mut ma = fixture("fig2a.ma");
    let mut r = RewardFunction::new("trap");
    r.state_rewards.insert(1, 1.0);
    ma.rewards.push(r);
    let sched = seven_scheduler(&ma);
    let ev = PathEvent::RewardToGoal { reward: 0, goal: set(7, &[6]) };
    let small = EstimateOptions { samples: 1000, ..opts(0) };
    assert_eq!(estimate(&ma, &sched, &ev, &small), Err(MonteCarloError::InfiniteReward));
    assert_eq!(time_abstract_expectation(&ma, &sched, &ev), Err(MonteCarloError::InfiniteReward));
}

proptest! {
    #[test]
    fn digital_weights_form_a_distribution(bound in 0.05f64..3.0, loops in 0usize..8, delta in 0.05f64..0.8) {
        let ma = fixture("fig2a.ma");
        let (alpha, beta) = (act(&ma, "alpha"), act(&ma, "beta"));
        let sched = ThresholdScheduler::new()
            .rule(3, Clock::LastSojourn, Cmp::Le, bound, alpha)
            .default_action(3, beta);
        let mut p = AbstractPath::start(0);
        for _ in 0..=loops {
            p.push(None, 0);
        }
        *p.states.last_mut().unwrap() = 3;
        let wa = abstraction_weight(&ma, &sched, &p, alpha, WeightMode::Digital(delta)).unwrap();
        let wb = abstraction_weight(&ma, &sched, &p, beta, WeightMode::Digital(delta)).unwrap();
        prop_assert!((0.0..=1.0).contains(&wa));
        prop_assert!((wa + wb - 1.0).abs() < 1e-12);
        let lo = loops as f64 * delta;
        if bound >= lo + delta {
            prop_assert_eq!(wa, 1.0);
        }
        if bound <= lo {
            prop_assert_eq!(wa, 0.0);
        }
    }
}
