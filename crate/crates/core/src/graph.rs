//! Graph algorithms on choice-structured models: SCCs, end components,
//! qualitative reachability.

use std::ops::Range;

/// A state/choice/successor structure shared by MAs, MDPs and products.
pub trait ChoiceGraph {
    fn num_states(&self) -> usize;
    fn choices(&self, s: usize) -> Range<usize>;
    fn successors(&self, c: usize) -> &[(usize, f64)];
    fn num_choices(&self) -> usize {
        let n = self.num_states();
        if n == 0 {
            0
        } else {
            self.choices(n - 1).end
        }
    }
}

/// Tarjan's algorithm, iterative. Components come out in reverse topological
/// order: every component precedes the components that can reach it.
pub fn tarjan_scc<F>(n: usize, active: &[bool], mut succ: F) -> Vec<Vec<usize>>
where
    F: FnMut(usize, &mut Vec<usize>),
{
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0usize;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut buf = Vec::new();
    for v in 0..n {
        if active[v] {
            buf.clear();
            succ(v, &mut buf);
            adj[v] = buf.iter().copied().filter(|&w| active[w]).collect();
        }
    }
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if !active[root] || index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos < adj[v].len() {
                let w = adj[v][*pos];
                *pos += 1;
                if index[w] == UNSEEN {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
            }
        }
    }
    comps
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EndComponent {
    pub states: Vec<usize>,
    /// Choices that stay inside the component.
    pub choices: Vec<usize>,
}

/// Maximal end components of the sub-model given by the state and choice masks.
pub fn maximal_end_components<G: ChoiceGraph + ?Sized>(
    g: &G,
    state_mask: &[bool],
    choice_mask: &[bool],
) -> Vec<EndComponent> {
    let n = g.num_states();
    let mut in_set = state_mask.to_vec();
    let mut enabled = vec![false; g.num_choices()];
    for s in 0..n {
        if in_set[s] {
            for c in g.choices(s) {
                enabled[c] = choice_mask[c];
            }
        }
    }
    let mut comp_of = vec![usize::MAX; n];
    loop {
        let comps = tarjan_scc(n, &in_set, |v, out| {
            for c in g.choices(v) {
                if enabled[c] {
                    out.extend(g.successors(c).iter().filter(|e| e.1 > 0.0).map(|e| e.0));
                }
            }
        });
        for (i, comp) in comps.iter().enumerate() {
            for &s in comp {
                comp_of[s] = i;
            }
        }
        let mut changed = false;
        for s in 0..n {
            if !in_set[s] {
                continue;
            }
            let mut any = false;
            for c in g.choices(s) {
                if !enabled[c] {
                    continue;
                }
                let stays = g
                    .successors(c)
                    .iter()
                    .filter(|e| e.1 > 0.0)
                    .all(|&(t, _)| in_set[t] && comp_of[t] == comp_of[s]);
                if stays {
                    any = true;
                } else {
                    enabled[c] = false;
                    changed = true;
                }
            }
            if !any {
                in_set[s] = false;
                changed = true;
            }
        }
        if !changed {
            let mut out = Vec::new();
            for comp in comps {
                let states: Vec<usize> = comp.into_iter().filter(|&s| in_set[s]).collect();
                if states.is_empty() {
                    continue;
                }
                let choices = states.iter().flat_map(|&s| g.choices(s)).filter(|&c| enabled[c]).collect();
                out.push(EndComponent { states, choices });
            }
            return out;
        }
    }
}

fn predecessors<G: ChoiceGraph + ?Sized>(g: &G, mask: Option<&[bool]>) -> (Vec<Vec<usize>>, Vec<usize>) {
    let n = g.num_states();
    let mut owner = vec![0; g.num_choices()];
    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in 0..n {
        for c in g.choices(s) {
            owner[c] = s;
            if mask.is_some_and(|m| !m[c]) {
                continue;
            }
            for &(t, p) in g.successors(c) {
                if p > 0.0 {
                    pred[t].push(c);
                }
            }
        }
    }
    (pred, owner)
}

/// States with a path to `target` using enabled choices.
pub fn exists_reach<G: ChoiceGraph + ?Sized>(g: &G, target: &[bool], mask: Option<&[bool]>) -> Vec<bool> {
    let (pred, owner) = predecessors(g, mask);
    let mut seen = target.to_vec();
    let mut work: Vec<usize> = (0..g.num_states()).filter(|&s| target[s]).collect();
    while let Some(t) = work.pop() {
        for &c in &pred[t] {
            let s = owner[c];
            if !seen[s] {
                seen[s] = true;
                work.push(s);
            }
        }
    }
    seen
}

/// States from which some scheduler avoids `target` forever (probability 0 under min).
pub fn can_avoid<G: ChoiceGraph + ?Sized>(g: &G, target: &[bool], mask: Option<&[bool]>) -> Vec<bool> {
    let n = g.num_states();
    let mut set: Vec<bool> = (0..n).map(|s| !target[s]).collect();
    loop {
        let mut changed = false;
        for s in 0..n {
            if !set[s] {
                continue;
            }
            let ok = g.choices(s).any(|c| {
                mask.is_none_or(|m| m[c]) && g.successors(c).iter().all(|&(t, p)| p <= 0.0 || set[t])
            });
            if !ok {
                set[s] = false;
                changed = true;
            }
        }
        if !changed {
            return set;
        }
    }
}

/// States from which some scheduler reaches `target` with probability 1.
pub fn prob1_max<G: ChoiceGraph + ?Sized>(g: &G, target: &[bool], mask: Option<&[bool]>) -> Vec<bool> {
    let n = g.num_states();
    let (pred, owner) = predecessors(g, mask);
    let mut u = vec![true; n];
    loop {
        // attractor of target inside u using choices that stay in u
        let mut r = target.to_vec();
        let mut work: Vec<usize> = (0..n).filter(|&s| target[s]).collect();
        while let Some(t) = work.pop() {
            for &c in &pred[t] {
                let s = owner[c];
                if r[s] || !u[s] {
                    continue;
                }
                if g.successors(c).iter().all(|&(x, p)| p <= 0.0 || u[x]) {
                    r[s] = true;
                    work.push(s);
                }
            }
        }
        if r == u {
            return u;
        }
        u = r;
    }
}

/// States from which every scheduler reaches `target` with probability 1.
pub fn prob1_min<G: ChoiceGraph + ?Sized>(g: &G, target: &[bool], mask: Option<&[bool]>) -> Vec<bool> {
    let avoid = can_avoid(g, target, mask);
    // a state fails iff it can reach an avoiding state without passing the target
    let n = g.num_states();
    let (pred, owner) = predecessors(g, mask);
    let mut bad = avoid.clone();
    let mut work: Vec<usize> = (0..n).filter(|&s| avoid[s]).collect();
    while let Some(t) = work.pop() {
        for &c in &pred[t] {
            let s = owner[c];
            if !bad[s] && !target[s] {
                bad[s] = true;
                work.push(s);
            }
        }
    }
    bad.iter().map(|b| !b).collect()
}
