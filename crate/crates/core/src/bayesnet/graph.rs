//! Graph algorithms over parent lists.

use std::collections::{BTreeSet, VecDeque};

fn children_lists(parents: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut children = vec![Vec::new(); parents.len()];
    for (c, ps) in parents.iter().enumerate() {
        for &p in ps {
            children[p].push(c);
        }
    }
    children
}

/// Some node on a directed cycle, if any.
pub(crate) fn find_cycle(parents: &[Vec<usize>]) -> Option<usize> {
    let order = kahn(parents);
    if order.len() == parents.len() {
        return None;
    }
    let placed: BTreeSet<usize> = order.into_iter().collect();
    (0..parents.len()).find(|v| !placed.contains(v))
}

/// Kahn's algorithm, smallest index first among ready nodes.
fn kahn(parents: &[Vec<usize>]) -> Vec<usize> {
    let n = parents.len();
    let children = children_lists(parents);
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: BTreeSet<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    order
}

pub(crate) fn topological_order(parents: &[Vec<usize>]) -> Vec<usize> {
    let order = kahn(parents);
    debug_assert_eq!(order.len(), parents.len(), "structure is acyclic");
    order
}

/// Whether `to` is reachable from `from` along directed edges.
pub(crate) fn has_path(parents: &[Vec<usize>], from: usize, to: usize) -> bool {
    let children = children_lists(parents);
    let mut seen = vec![false; parents.len()];
    let mut stack = vec![from];
    while let Some(v) = stack.pop() {
        if v == to {
            return true;
        }
        if std::mem::replace(&mut seen[v], true) {
            continue;
        }
        stack.extend(children[v].iter().copied());
    }
    false
}

pub(crate) fn markov_blanket(parents: &[Vec<usize>], v: usize) -> Vec<usize> {
    let mut blanket: BTreeSet<usize> = parents[v].iter().copied().collect();
    for (c, ps) in parents.iter().enumerate() {
        if ps.contains(&v) {
            blanket.insert(c);
            blanket.extend(ps.iter().copied());
        }
    }
    blanket.remove(&v);
    blanket.into_iter().collect()
}

/// Nodes d-connected to `source` given `observed` (Bayes-ball). The source
/// itself and observed nodes are never included.
pub(crate) fn reachable(parents: &[Vec<usize>], source: usize, observed: &[usize]) -> BTreeSet<usize> {
    let n = parents.len();
    let children = children_lists(parents);
    let mut is_observed = vec![false; n];
    for &z in observed {
        is_observed[z] = true;
    }

    // observed nodes and their ancestors: the ones that open a collider
    let mut opens_collider = vec![false; n];
    let mut stack: Vec<usize> = observed.to_vec();
    while let Some(v) = stack.pop() {
        if std::mem::replace(&mut opens_collider[v], true) {
            continue;
        }
        stack.extend(parents[v].iter().copied());
    }

    const UP: usize = 0; // ball arrived from a child
    const DOWN: usize = 1; // ball arrived from a parent
    let mut visited = vec![[false; 2]; n];
    let mut out = BTreeSet::new();
    let mut queue = VecDeque::from([(source, UP)]);
    while let Some((v, dir)) = queue.pop_front() {
        if std::mem::replace(&mut visited[v][dir], true) {
            continue;
        }
        if !is_observed[v] && v != source {
            out.insert(v);
        }
        if dir == UP && !is_observed[v] {
            queue.extend(parents[v].iter().map(|&p| (p, UP)));
            queue.extend(children[v].iter().map(|&c| (c, DOWN)));
        } else if dir == DOWN {
            if !is_observed[v] {
                queue.extend(children[v].iter().map(|&c| (c, DOWN)));
            }
            if opens_collider[v] {
                queue.extend(parents[v].iter().map(|&p| (p, UP)));
            }
        }
    }
    out
}
