use mamoc::engine::objective::{Direction, ObjectiveKind, Relation};
use mamoc::ingest::{generate_benchmark, parse_model, parse_query, serialize_model, BenchmarkParams, IngestError, QueryKind};
use mamoc::model::{Distribution, MarkovAutomaton, RewardFunction, MARKOVIAN_ACTION};
use mamoc::transform::TimeInterval;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture(name: &str) -> MarkovAutomaton {
    let path = format!("{}/../../models/{name}", env!("CARGO_MANIFEST_DIR"));
    parse_model(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn fig2a_fixture_parses() {
    let ma = fixture("fig2a.ma");
    assert_eq!(ma.num_states, 7);
    assert!(ma.rewards.is_empty());
    let rates: Vec<f64> = ma.markovian.iter().flatten().map(|m| m.rate).collect();
    assert_eq!(rates, vec![1.0, 1.0, 1.0, 5.0, 1.0]);
    let (norm, report) = ma.normalize();
    assert!(report.is_clean());
    assert_eq!(norm, ma);
}

#[test]
fn too_many_state_blocks() {
    let text = "@type: ma\n@states: 2\n@initial: 0\nstate 0\n  rate 1\n    0 : 1\nstate 1\nstate 2\n";
    match parse_model(text) {
        Err(IngestError::UnknownState { line, col, .. }) => assert_eq!((line, col), (8, 7)),
        other => panic!("unexpected {other:?}"),
    }
    let text = "@type: ma\n@states: 2\n@initial: 0\nstate 0\nstate 1\nstate 1\n";
    assert!(matches!(parse_model(text), Err(IngestError::DuplicateDeclaration { line: 6, .. })));
}

#[test]
fn syntax_errors_carry_positions() {
    let text = "@type: ma\n@states: 2\n@initial: 0\nstate 0\n  rate 1\n    1 = 1\n";
    match parse_model(text) {
        Err(IngestError::Syntax { line, col, .. }) => assert_eq!((line, col), (6, 7)),
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(parse_model("@states: 1\n"), Err(IngestError::Syntax { .. })));
    let text = "@type: ma\n@states: 1\n@initial: 0\nstate 0\n  action a\n    0 : 1\n  action a\n    0 : 1\n";
    assert!(matches!(parse_model(text), Err(IngestError::DuplicateDeclaration { line: 7, .. })));
    let text = "@type: ma\n@states: 1\n@initial: 3\n";
    assert!(matches!(parse_model(text), Err(IngestError::UnknownState { line: 3, .. })));
}

#[test]
fn rewards_and_quoted_labels() {
    let text = r#"
@type: ma
@states: 2
@initial: 0
state 0 "two words" init
  action go   # comment
    1 : 1.0
state 1
  rate 2.5
    0 : 0.25
    1 : 0.75
@rewards cost
  state 1 : 1.5
  action 0 go : 3
  action 1 !markovian : 0.5
@end
"#;
    let ma = parse_model(text).unwrap();
    assert!(ma.labels[0].contains("two words"));
    let go = ma.find_action("go").unwrap();
    assert_eq!(ma.rewards[0].action_reward(0, go), 3.0);
    assert_eq!(ma.rewards[0].action_reward(1, MARKOVIAN_ACTION), 0.5);
    assert_eq!(ma.rewards[0].state_reward(1), 1.5);
    assert_eq!(parse_model(&serialize_model(&ma)).unwrap(), ma);
}

fn random_ma(seed: u64, n: usize) -> MarkovAutomaton {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ma = MarkovAutomaton::new(n, rng.gen_range(0..n));
    let dist = |rng: &mut ChaCha8Rng| {
        let k = rng.gen_range(1..=3.min(n));
        let mut targets: Vec<usize> = Vec::new();
        while targets.len() < k {
            let t = rng.gen_range(0..n);
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        let w: Vec<f64> = targets.iter().map(|_| rng.gen_range(0.1..1.0)).collect();
        let sum: f64 = w.iter().sum();
        Distribution::new(targets.into_iter().zip(w.iter().map(|x| x / sum)).collect())
    };
    let names = ["a", "b", "go left", "c_1"];
    for s in 0..n {
        let kind = rng.gen_range(0..4);
        if kind != 1 {
            let k = rng.gen_range(1..=3);
            for name in names.iter().take(k) {
                let d = dist(&mut rng);
                ma.add_probabilistic(s, name, d);
            }
        }
        if kind != 0 {
            let d = dist(&mut rng);
            ma.set_markovian(s, rng.gen_range(0.1..10.0), d);
        }
        if rng.gen_bool(0.3) {
            ma.add_label(s, if rng.gen_bool(0.5) { "goal" } else { "x\"y" });
        }
    }
    let mut rf = RewardFunction::new("r");
    for s in 0..n {
        if rng.gen_bool(0.3) {
            rf.state_rewards.insert(s, rng.gen_range(0.0..5.0));
        }
        if let Some(&(a, _)) = ma.prob_transitions[s].first() {
            rf.action_rewards.insert((s, a), rng.gen_range(0.0..2.0));
        }
    }
    ma.rewards.push(rf);
    ma
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn parse_inverts_serialize(seed in any::<u64>(), n in 1usize..=50) {
        let ma = random_ma(seed, n);
        let back = parse_model(&serialize_model(&ma)).unwrap();
        prop_assert_eq!(back, ma.canonical());
    }
}

#[test]
fn benchmark_round_trip_and_validity() {
    for p in [BenchmarkParams::jobs(1, 1), BenchmarkParams::polling(1, 1), BenchmarkParams::stream(1), BenchmarkParams::mutex(1), BenchmarkParams::jobs(4, 2), BenchmarkParams::stream(5)] {
        let b = generate_benchmark(&p).unwrap();
        let back = parse_model(&serialize_model(&b.model)).unwrap();
        assert_eq!(back, b.model.canonical(), "{p:?}");
        let (norm, report) = b.model.normalize();
        assert!(report.errors.is_empty(), "{p:?}: {:?}", report.errors);
        assert!(norm.detect_zeno().is_empty(), "{p:?}");
        for q in &b.queries {
            parse_query(q, &b.model).unwrap_or_else(|e| panic!("{p:?} {q}: {e}"));
        }
    }
}

fn binom(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[test]
fn jobs_counts() {
    let b = generate_benchmark(&BenchmarkParams::jobs(2, 1)).unwrap();
    assert_eq!(b.model.num_states, 8);
    let b = generate_benchmark(&BenchmarkParams::jobs(10, 2)).unwrap();
    assert_eq!(b.model.num_states, 12_554);
    for (n, k) in [(6, 3), (10, 2)] {
        let m = generate_benchmark(&BenchmarkParams::jobs(n, k)).unwrap().model;
        let most = (0..m.num_states).map(|s| m.prob_transitions[s].len()).max().unwrap();
        assert!(most <= binom(n, k));
    }
}

#[test]
fn other_family_counts() {
    let polling = generate_benchmark(&BenchmarkParams::polling(3, 2)).unwrap().model;
    assert_eq!(polling.num_states, 990);
    assert_eq!(polling.classify().1.len(), 508);
    let stream = generate_benchmark(&BenchmarkParams::stream(30)).unwrap().model;
    assert_eq!(stream.num_states, 1_426);
}

#[test]
fn invalid_params() {
    assert!(matches!(generate_benchmark(&BenchmarkParams::jobs(2, 3)), Err(IngestError::InvalidParams(_))));
    assert!(matches!(generate_benchmark(&BenchmarkParams::stream(0)), Err(IngestError::InvalidParams(_))));
}

#[test]
fn query_shapes() {
    let ma = fixture("fig4a.ma");
    let q = parse_query(r#"pareto: Pmax[F "s2"]; Pmax[F[0,2] "s4"]"#, &ma).unwrap();
    assert_eq!(q.kind, QueryKind::Pareto);
    assert!(matches!(q.objectives[0].kind, ObjectiveKind::UntimedReach { .. }));
    match &q.objectives[1].kind {
        ObjectiveKind::TimedReach { interval, goal } => {
            assert_eq!(*interval, TimeInterval::new(0.0, Some(2.0)).unwrap());
            assert_eq!(goal.iter().collect::<Vec<_>>(), vec![4]);
        }
        k => panic!("{k:?}"),
    }

    let q = parse_query(r#"achieve: P>=0.5[F "s2"]; P>=0.5[F "s4"]"#, &ma).unwrap();
    assert_eq!(q.kind, QueryKind::Achievability);
    for o in &q.objectives {
        let t = o.threshold.unwrap();
        assert_eq!((t.relation, t.value), (Relation::GreaterEq, 0.5));
        assert_eq!(o.direction, Direction::Maximize);
    }

    let q = parse_query(r#"numerical: Rmin{"time"}[F "s2" | "s4"]; P>=0.9[F[0,1] "s2"]"#, &ma).unwrap();
    assert_eq!(q.kind, QueryKind::Numerical);
    assert_eq!(q.optimize, Some(0));
    assert!(matches!(&q.objectives[0].kind, ObjectiveKind::ExpTime { goal } if goal.len() == 2));
    assert_eq!(q.objectives[0].direction, Direction::Minimize);

    let q = parse_query(r#"pareto: Pmax[F[0,inf] "s2"]"#, &ma).unwrap();
    assert!(matches!(q.objectives[0].kind, ObjectiveKind::UntimedReach { .. }));
}

#[test]
fn query_errors() {
    let ma = fixture("fig4a.ma");
    assert!(matches!(parse_query(r#"pareto: Pmax[F "nope"]"#, &ma), Err(IngestError::UnknownLabel(_))));
    assert!(matches!(parse_query(r#"pareto: Rmax{"cost"}[F "s2"]"#, &ma), Err(IngestError::UnknownRewardName(_))));
    assert!(matches!(parse_query(r#"achieve: Pmax[F "s2"]"#, &ma), Err(IngestError::MixedQueryShape(_))));
    assert!(matches!(parse_query(r#"pareto: P>=0.2[F "s2"]"#, &ma), Err(IngestError::MixedQueryShape(_))));
    assert!(matches!(parse_query(r#"numerical: Pmax[F "s2"]; Pmax[F "s4"]"#, &ma), Err(IngestError::MixedQueryShape(_))));
    match parse_query(r#"pareto: Pmax[G "s2"]"#, &ma) {
        Err(IngestError::Syntax { line: 1, col: 14, .. }) => {}
        other => panic!("{other:?}"),
    }
    assert!(matches!(parse_query(r#"pareto: Pmax[F[2,1] "s2"]"#, &ma), Err(IngestError::Syntax { .. })));
    assert!(matches!(parse_query(r#"pareto: Pmax[F "s2"] extra"#, &ma), Err(IngestError::Syntax { .. })));
}
