//! Generators for the job scheduling, polling, stream and mutex families.
//!
//! Rate constants not fixed by the original case studies are chosen here:
//!
//! * jobs: job `i` (1-based) runs at rate `1 + 2(i-1)/(N-1)`, rate 1 for `N = 1`.
//! * polling: arrivals at rate 4 per station, a job of type `j` is served at
//!   rate `2j`. A poll keeps the served job in the queue with probability 0.1.
//!   The encoding has 990 states for `N = 3, K = 2` (the original tool reports
//!   1 020 with the same 508 Markovian states; its extra probabilistic states
//!   are an artifact of its process-algebraic front end).
//! * stream: packages arrive at rate 3 and are played at rate 5.
//! * mutex: a critical section for job `j` is left at rate `j`; when no process
//!   is thinking and the section is free, a waiting process enters uniformly at random.

use std::collections::{HashMap, VecDeque};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::model::{Distribution, MarkovAutomaton, RewardFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Jobs,
    Polling,
    Stream,
    Mutex,
}

/// Family plus size parameters. `k` is used by jobs (processors) and polling (queue capacity).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkParams {
    pub family: Family,
    pub n: usize,
    pub k: usize,
}

impl BenchmarkParams {
    pub fn jobs(n: usize, k: usize) -> Self {
        BenchmarkParams { family: Family::Jobs, n, k }
    }
    pub fn polling(n: usize, k: usize) -> Self {
        BenchmarkParams { family: Family::Polling, n, k }
    }
    pub fn stream(n: usize) -> Self {
        BenchmarkParams { family: Family::Stream, n, k: 1 }
    }
    pub fn mutex(n: usize) -> Self {
        BenchmarkParams { family: Family::Mutex, n, k: 1 }
    }
}

/// A generated model with its label and reward names and the standard
/// objective combinations as Pareto query strings.
#[derive(Clone, Debug)]
pub struct Benchmark {
    pub model: MarkovAutomaton,
    pub labels: Vec<String>,
    pub rewards: Vec<String>,
    pub queries: Vec<String>,
}

struct Choice<K> {
    action: String,
    targets: Vec<(K, f64)>,
    rewards: Vec<(usize, f64)>,
}

enum Body<K> {
    Actions(Vec<Choice<K>>),
    /// Successors with rates; empty means absorbing.
    Rates(Vec<(K, f64)>),
}

struct Node<K> {
    labels: Vec<&'static str>,
    state_rewards: Vec<(usize, f64)>,
    body: Body<K>,
}

fn merge<K: Eq + Clone>(items: &[(K, f64)]) -> Vec<(K, f64)> {
    let mut out: Vec<(K, f64)> = Vec::new();
    for (k, v) in items {
        match out.iter_mut().find(|e| e.0 == *k) {
            Some(e) => e.1 += v,
            None => out.push((k.clone(), *v)),
        }
    }
    out
}

/// Breadth-first state space construction from `init`.
fn explore<K, F>(init: K, reward_names: &[&str], mut expand: F) -> MarkovAutomaton
where
    K: Eq + Hash + Clone,
    F: FnMut(&K) -> Node<K>,
{
    let mut index: HashMap<K, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    index.insert(init.clone(), 0);
    queue.push_back(init);
    let mut nodes = Vec::new();
    let lookup = |k: &K, index: &mut HashMap<K, usize>, queue: &mut VecDeque<K>| -> usize {
        if let Some(&i) = index.get(k) {
            return i;
        }
        let i = index.len();
        index.insert(k.clone(), i);
        queue.push_back(k.clone());
        i
    };
    while let Some(k) = queue.pop_front() {
        let node = expand(&k);
        let body = match node.body {
            Body::Actions(choices) => Body::Actions(
                choices
                    .into_iter()
                    .map(|c| Choice {
                        targets: merge(&c.targets).iter().map(|(t, p)| (lookup(t, &mut index, &mut queue), *p)).collect(),
                        action: c.action,
                        rewards: c.rewards,
                    })
                    .collect(),
            ),
            Body::Rates(r) => Body::Rates(merge(&r).iter().map(|(t, p)| (lookup(t, &mut index, &mut queue), *p)).collect()),
        };
        nodes.push(Node { labels: node.labels, state_rewards: node.state_rewards, body });
    }
    let mut ma = MarkovAutomaton::new(nodes.len(), 0);
    ma.rewards = reward_names.iter().map(|n| RewardFunction::new(*n)).collect();
    for (s, node) in nodes.into_iter().enumerate() {
        for l in node.labels {
            ma.add_label(s, l);
        }
        for (j, v) in node.state_rewards {
            if v != 0.0 {
                ma.rewards[j].state_rewards.insert(s, v);
            }
        }
        match node.body {
            Body::Actions(choices) => {
                for c in choices {
                    let a = ma.add_probabilistic(s, &c.action, Distribution::new(c.targets));
                    for (j, v) in c.rewards {
                        if v != 0.0 {
                            ma.rewards[j].action_rewards.insert((s, a), v);
                        }
                    }
                }
            }
            Body::Rates(r) if r.is_empty() => ma.set_markovian(s, 1.0, Distribution::dirac(s)),
            Body::Rates(r) => {
                let total: f64 = r.iter().map(|e| e.1).sum();
                ma.set_markovian(s, total, Distribution::new(r.iter().map(|&(t, q)| (t, q / total)).collect()));
            }
        }
    }
    ma
}

pub fn generate_benchmark(p: &BenchmarkParams) -> Result<Benchmark, IngestError> {
    if p.n == 0 || p.k == 0 {
        return Err(IngestError::InvalidParams("all parameters must be at least 1".into()));
    }
    match p.family {
        Family::Jobs if p.k > p.n => Err(IngestError::InvalidParams(format!("jobs needs K <= N, got N={} K={}", p.n, p.k))),
        Family::Jobs if p.n > 20 => Err(IngestError::InvalidParams("jobs supports at most 20 jobs".into())),
        Family::Jobs => Ok(jobs(p.n, p.k)),
        Family::Polling if p.n > 9 => Err(IngestError::InvalidParams("polling supports at most 9 job types".into())),
        Family::Polling => Ok(polling(p.n, p.k)),
        Family::Stream => Ok(stream(p.n)),
        Family::Mutex => Ok(mutex(p.n)),
    }
}

/// Rate of job `i` (0-based) among `n`.
pub fn job_rate(i: usize, n: usize) -> f64 {
    if n == 1 {
        1.0
    } else {
        1.0 + 2.0 * i as f64 / (n - 1) as f64
    }
}

fn subsets_of_size(items: &[usize], k: usize) -> Vec<u32> {
    let mut out = Vec::new();
    fn rec(items: &[usize], k: usize, start: usize, acc: u32, out: &mut Vec<u32>) {
        if k == 0 {
            out.push(acc);
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k {
                break;
            }
            rec(items, k - 1, i + 1, acc | 1 << items[i], out);
        }
    }
    rec(items, k, 0, 0, &mut out);
    out
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum JobState {
    /// Completed set; the scheduler picks which jobs to run next.
    Pick(u32),
    /// Completed set and running set.
    Run(u32, u32),
    Done,
}

fn jobs(n: usize, k: usize) -> Benchmark {
    let all: u32 = if n == 32 { u32::MAX } else { (1 << n) - 1 };
    let half = n.div_ceil(2);
    let labels_of = |done: u32| {
        let mut l = Vec::new();
        if done.count_ones() as usize >= half {
            l.push("half");
        }
        if done & 1 != 0 && done & (1 << (n - 1)) == 0 {
            l.push("lowfirst");
        }
        l
    };
    let ma = explore(JobState::Pick(0), &["waiting"], |st| match *st {
        JobState::Pick(done) => {
            let open: Vec<usize> = (0..n).filter(|i| done & (1 << i) == 0).collect();
            let m = open.len().min(k);
            let choices = subsets_of_size(&open, m)
                .into_iter()
                .map(|run| {
                    let name: Vec<String> = (0..n).filter(|i| run & (1 << i) != 0).map(|i| (i + 1).to_string()).collect();
                    Choice { action: format!("run_{}", name.join("_")), targets: vec![(JobState::Run(done, run), 1.0)], rewards: vec![] }
                })
                .collect();
            let mut labels = labels_of(done);
            if done == 0 {
                labels.push("init");
            }
            Node { labels, state_rewards: vec![], body: Body::Actions(choices) }
        }
        JobState::Run(done, run) => {
            let waiting = (all & !done & !run).count_ones() as f64;
            let succ = (0..n)
                .filter(|i| run & (1 << i) != 0)
                .map(|i| {
                    let d = done | 1 << i;
                    let t = if d == all { JobState::Done } else { JobState::Pick(d) };
                    (t, job_rate(i, n))
                })
                .collect();
            Node { labels: labels_of(done), state_rewards: vec![(0, waiting)], body: Body::Rates(succ) }
        }
        JobState::Done => {
            let mut labels = labels_of(all);
            labels.push("done");
            Node { labels, state_rewards: vec![], body: Body::Rates(vec![]) }
        }
    });
    let horizon = |d: usize| format_num(n as f64 / (d * k) as f64);
    let e1 = "Tmin[F \"done\"]".to_string();
    let e2 = "Tmin[F \"half\"]".to_string();
    let e3 = "Rmin{\"waiting\"}[F \"done\"]".to_string();
    let pl = "Pmin[F \"lowfirst\"]".to_string();
    let p1 = format!("Pmax[F[0,{}] \"done\"]", horizon(2));
    let p2 = format!("Pmax[F[0,{}] \"half\"]", horizon(4));
    let mut queries = vec![pareto(&[&e1, &e2, &e3]), pareto(&[&e1, &p2])];
    // with a single job no state is labelled lowfirst
    if n > 1 {
        queries.push(pareto(&[&pl, &e1, &e2, &e3]));
        queries.push(pareto(&[&pl, &e3, &p1, &p2]));
    }
    Benchmark { model: ma, labels: names(&["init", "done", "half", "lowfirst"]), rewards: names(&["waiting"]), queries }
}

fn format_num(x: f64) -> String {
    format!("{x}")
}

fn pareto(objs: &[&String]) -> String {
    let parts: Vec<&str> = objs.iter().map(|s| s.as_str()).collect();
    format!("pareto: {}", parts.join("; "))
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

const POLL_ARRIVAL: f64 = 4.0;
const POLL_KEEP: f64 = 0.1;

#[derive(Clone, PartialEq, Eq, Hash)]
struct Station {
    /// A job has arrived and its type is still to be chosen.
    pending: bool,
    queue: Vec<u8>,
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct PollState {
    stations: [Station; 2],
    /// Type of the job in service, 0 when the server is free.
    serving: u8,
}

fn polling(n: usize, k: usize) -> Benchmark {
    let idle = Station { pending: false, queue: Vec::new() };
    let init = PollState { stations: [idle.clone(), idle], serving: 0 };
    let reward_names = ["processed1", "processed2", "waiting1", "waiting2"];
    let mut first = true;
    let ma = explore(init, &reward_names, |st| {
        let mut labels = Vec::new();
        if first {
            labels.push("init");
            first = false;
        }
        for (i, name) in ["q1full", "q2full"].iter().enumerate() {
            if st.stations[i].queue.len() == k {
                labels.push(*name);
            }
        }
        let mut choices = Vec::new();
        for i in 0..2 {
            if st.stations[i].pending {
                for j in 1..=n as u8 {
                    let mut t = st.clone();
                    t.stations[i].pending = false;
                    t.stations[i].queue.push(j);
                    choices.push(Choice { action: format!("arrive{}_type{j}", i + 1), targets: vec![(t, 1.0)], rewards: vec![] });
                }
            }
        }
        if st.serving == 0 {
            for i in 0..2 {
                let s = &st.stations[i];
                if !s.pending && !s.queue.is_empty() {
                    let head = s.queue[0];
                    let mut keep = st.clone();
                    keep.serving = head;
                    let mut take = keep.clone();
                    take.stations[i].queue.remove(0);
                    choices.push(Choice {
                        action: format!("poll{}", i + 1),
                        targets: vec![(keep, POLL_KEEP), (take, 1.0 - POLL_KEEP)],
                        rewards: vec![(i, 1.0)],
                    });
                }
            }
        }
        if !choices.is_empty() {
            return Node { labels, state_rewards: vec![], body: Body::Actions(choices) };
        }
        let mut rates = Vec::new();
        for i in 0..2 {
            if st.stations[i].queue.len() < k {
                let mut t = st.clone();
                t.stations[i].pending = true;
                rates.push((t, POLL_ARRIVAL));
            }
        }
        if st.serving != 0 {
            let mut t = st.clone();
            t.serving = 0;
            rates.push((t, 2.0 * st.serving as f64));
        }
        let waiting = vec![(2, st.stations[0].queue.len() as f64), (3, st.stations[1].queue.len() as f64)];
        Node { labels, state_rewards: waiting, body: Body::Rates(rates) }
    });
    let e = |i: usize| format!("Rmax{{\"processed{i}\"}}[F \"q{i}full\"]");
    let w = |i: usize| format!("Rmin{{\"waiting{i}\"}}[F \"q{i}full\"]");
    let p = |i: usize| format!("Pmin[F[0,2] \"q{i}full\"]");
    let (e1, e2, e3, e4, p1, p2) = (e(1), e(2), w(1), w(2), p(1), p(2));
    let queries = vec![pareto(&[&e1, &e2]), pareto(&[&e1, &e2, &e3, &e4]), pareto(&[&p1, &p2]), pareto(&[&e1, &e2, &p1, &p2])];
    Benchmark {
        model: ma,
        labels: names(&["init", "q1full", "q2full"]),
        rewards: names(&reward_names),
        queries,
    }
}

const STREAM_ARRIVAL: f64 = 3.0;
const STREAM_PLAY: f64 = 5.0;
const STREAM_FORCED_START: f64 = 0.01;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Phase {
    /// A package was received (or the buffer ran dry) while not playing.
    Decide,
    Buffering,
    Playing,
    Finished,
}

/// Phase, packages received, packages whose playback has started.
type StreamState = (Phase, usize, usize);

fn stream(n: usize) -> Benchmark {
    let ma = explore((Phase::Decide, 0, 0), &["buffering", "underruns"], |&(ph, recv, played)| match ph {
        Phase::Decide => {
            let mut labels = Vec::new();
            let underrun = recv == played && recv > 0;
            if recv == 0 {
                labels.push("init");
            }
            if underrun {
                labels.push("underrun");
            }
            let mut choices = Vec::new();
            let tick = if underrun { vec![(1, 1.0)] } else { vec![] };
            if recv < n {
                let targets: Vec<(StreamState, f64)> = if played < recv {
                    vec![((Phase::Buffering, recv, played), 1.0 - STREAM_FORCED_START), ((Phase::Playing, recv, played + 1), STREAM_FORCED_START)]
                } else {
                    vec![((Phase::Buffering, recv, played), 1.0)]
                };
                choices.push(Choice { action: "buffer".into(), targets, rewards: tick.clone() });
            }
            if played < recv {
                choices.push(Choice { action: "start".into(), targets: vec![((Phase::Playing, recv, played + 1), 1.0)], rewards: tick });
            }
            Node { labels, state_rewards: vec![], body: Body::Actions(choices) }
        }
        Phase::Buffering => Node {
            labels: vec![],
            state_rewards: vec![(0, 1.0)],
            body: Body::Rates(vec![((Phase::Decide, recv + 1, played), STREAM_ARRIVAL)]),
        },
        Phase::Playing => {
            let mut rates = Vec::new();
            if recv < n {
                rates.push(((Phase::Playing, recv + 1, played), STREAM_ARRIVAL));
            }
            if played < recv {
                rates.push(((Phase::Playing, recv, played + 1), STREAM_PLAY));
            } else if recv < n {
                rates.push(((Phase::Decide, recv, played), STREAM_PLAY));
            } else {
                rates.push(((Phase::Finished, recv, played), STREAM_PLAY));
            }
            Node { labels: vec!["playing"], state_rewards: vec![], body: Body::Rates(rates) }
        }
        Phase::Finished => Node { labels: vec!["playing", "done"], state_rewards: vec![], body: Body::Rates(vec![]) },
    });
    let e1 = "Rmin{\"buffering\"}[F \"done\"]".to_string();
    let e2 = "Rmin{\"underruns\"}[F \"done\"]".to_string();
    let e3 = "Tmin[F \"playing\"]".to_string();
    let p1 = "Pmin[F[0,2] \"underrun\"]".to_string();
    let p2 = "Pmax[F[0,0.5] \"playing\"]".to_string();
    let mut queries = vec![pareto(&[&e1, &e2])];
    // a single package can never run dry
    if n > 1 {
        queries.extend([pareto(&[&e3, &p1]), pareto(&[&p1, &p2]), pareto(&[&e1, &e3, &p1])]);
    }
    Benchmark {
        model: ma,
        labels: names(&["init", "underrun", "playing", "done"]),
        rewards: names(&["buffering", "underruns"]),
        queries,
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Proc {
    Think,
    Wait(u8),
    Crit(u8),
}

fn mutex(n: usize) -> Benchmark {
    const CRIT: [&str; 3] = ["crit1", "crit2", "crit3"];
    let ma = explore([Proc::Think; 3], &[], |st| {
        let mut labels: Vec<&'static str> = Vec::new();
        if st.iter().all(|p| *p == Proc::Think) {
            labels.push("init");
        }
        let mut crit = None;
        for (i, p) in st.iter().enumerate() {
            if let Proc::Crit(j) = p {
                labels.push(CRIT[i]);
                crit = Some((i, *j));
            }
        }
        let mut choices = Vec::new();
        for i in 0..3 {
            if st[i] == Proc::Think {
                for j in 1..=n as u8 {
                    let mut t = *st;
                    t[i] = Proc::Wait(j);
                    choices.push(Choice { action: format!("p{}_job{j}", i + 1), targets: vec![(t, 1.0)], rewards: vec![] });
                }
            }
        }
        if !choices.is_empty() {
            return Node { labels, state_rewards: vec![], body: Body::Actions(choices) };
        }
        match crit {
            Some((i, j)) => {
                let mut t = *st;
                t[i] = Proc::Think;
                Node { labels, state_rewards: vec![], body: Body::Rates(vec![(t, j as f64)]) }
            }
            None => {
                let waiting: Vec<usize> = (0..3).filter(|&i| matches!(st[i], Proc::Wait(_))).collect();
                let p = 1.0 / waiting.len() as f64;
                let targets = waiting
                    .iter()
                    .map(|&i| {
                        let mut t = *st;
                        if let Proc::Wait(j) = t[i] {
                            t[i] = Proc::Crit(j);
                        }
                        (t, p)
                    })
                    .collect();
                Node { labels, state_rewards: vec![], body: Body::Actions(vec![Choice { action: "enter".into(), targets, rewards: vec![] }]) }
            }
        }
    });
    let p = |i: usize, t: &str| format!("Pmax[F[0,{t}] \"crit{i}\"]");
    let (a1, a2, a3, b1, b2, b3) = (p(1, "0.5"), p(2, "0.5"), p(3, "0.5"), p(1, "1"), p(2, "1"), p(3, "1"));
    let queries = vec![pareto(&[&a1, &a2, &a3]), pareto(&[&b1, &b2, &b3])];
    Benchmark { model: ma, labels: names(&["init", "crit1", "crit2", "crit3"]), rewards: vec![], queries }
}
