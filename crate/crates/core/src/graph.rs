//! In-memory algorithms for the small graphs that extraction produces:
//! certificates, skeletons and sparsifiers.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

/// `f64` ordered by `total_cmp`, for heaps.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// A cut: its total weight and the vertices on one side.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub value: f64,
    /// Sorted, nonempty, and not every vertex.
    pub side: Vec<u32>,
}

/// Global minimum cut of an undirected weighted multigraph by Stoer–Wagner.
/// Parallel edges add up. `None` when `n < 2`. Ties resolve towards smaller
/// vertex ids, so the output is deterministic.
pub fn stoer_wagner(n: usize, edges: &[(u32, u32, f64)]) -> Option<Cut> {
    if n < 2 {
        return None;
    }
    let mut adj: Vec<BTreeMap<u32, f64>> = vec![BTreeMap::new(); n];
    for &(u, v, w) in edges {
        if u != v {
            *adj[u as usize].entry(v).or_insert(0.0) += w;
            *adj[v as usize].entry(u).or_insert(0.0) += w;
        }
    }
    let mut members: Vec<Vec<u32>> = (0..n as u32).map(|v| vec![v]).collect();
    let mut active: Vec<bool> = vec![true; n];
    let mut best: Option<Cut> = None;
    let mut weight = vec![0.0f64; n];
    let mut added = vec![false; n];
    for remaining in (2..=n).rev() {
        let start = active.iter().position(|&a| a).unwrap();
        weight.iter_mut().for_each(|w| *w = 0.0);
        added.iter_mut().for_each(|a| *a = false);
        let mut heap = BinaryHeap::new();
        heap.push((Key(0.0), std::cmp::Reverse(start as u32)));
        let (mut prev, mut last) = (usize::MAX, usize::MAX);
        let mut count = 0;
        while count < remaining {
            let (Key(w), std::cmp::Reverse(v)) = match heap.pop() {
                Some(x) => x,
                None => {
                    // disconnected: continue from the next unreached vertex
                    let v = (0..n).find(|&v| active[v] && !added[v]).unwrap();
                    (Key(0.0), std::cmp::Reverse(v as u32))
                }
            };
            let v = v as usize;
            if added[v] || w != weight[v] {
                continue;
            }
            added[v] = true;
            count += 1;
            prev = last;
            last = v;
            for (&x, &wx) in &adj[v] {
                let x = x as usize;
                if !added[x] {
                    weight[x] += wx;
                    heap.push((Key(weight[x]), std::cmp::Reverse(x as u32)));
                }
            }
        }
        let cut = weight[last];
        if best.as_ref().is_none_or(|b| cut < b.value) {
            let mut side = members[last].clone();
            side.sort_unstable();
            best = Some(Cut { value: cut, side });
        }
        // merge `last` into `prev`
        let moved = std::mem::take(&mut adj[last]);
        for (x, wx) in moved {
            let xi = x as usize;
            adj[xi].remove(&(last as u32));
            if xi != prev {
                *adj[prev].entry(x).or_insert(0.0) += wx;
                *adj[xi].entry(prev as u32).or_insert(0.0) += wx;
            }
        }
        let m = std::mem::take(&mut members[last]);
        members[prev].extend(m);
        active[last] = false;
    }
    best
}

struct Arc {
    to: usize,
    cap: f64,
}

/// Dinic max-flow on an undirected graph with capacities.
pub struct FlowNetwork {
    arcs: Vec<Arc>,
    out: Vec<Vec<usize>>,
}

impl FlowNetwork {
    pub fn new(n: usize, edges: &[(u32, u32, f64)]) -> Self {
        let mut g = Self {
            arcs: Vec::with_capacity(2 * edges.len()),
            out: vec![Vec::new(); n],
        };
        for &(u, v, c) in edges {
            if u != v {
                // an undirected edge is a pair of arcs, each the other's residual
                g.out[u as usize].push(g.arcs.len());
                g.arcs.push(Arc { to: v as usize, cap: c });
                g.out[v as usize].push(g.arcs.len());
                g.arcs.push(Arc { to: u as usize, cap: c });
            }
        }
        g
    }

    fn levels(&self, s: usize, eps: f64) -> Vec<usize> {
        let mut level = vec![usize::MAX; self.out.len()];
        level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for &a in &self.out[v] {
                let to = self.arcs[a].to;
                if self.arcs[a].cap > eps && level[to] == usize::MAX {
                    level[to] = level[v] + 1;
                    q.push_back(to);
                }
            }
        }
        level
    }

    fn augment(&mut self, v: usize, t: usize, limit: f64, level: &[usize], it: &mut [usize], eps: f64) -> f64 {
        if v == t {
            return limit;
        }
        while it[v] < self.out[v].len() {
            let a = self.out[v][it[v]];
            let to = self.arcs[a].to;
            if self.arcs[a].cap > eps && level[to] == level[v] + 1 {
                let pushed = self.augment(to, t, limit.min(self.arcs[a].cap), level, it, eps);
                if pushed > eps {
                    self.arcs[a].cap -= pushed;
                    self.arcs[a ^ 1].cap += pushed;
                    return pushed;
                }
            }
            it[v] += 1;
        }
        0.0
    }

    /// Maximum `s`-`t` flow, stopping once it reaches `cap`. Returns the
    /// flow value and, when the flow is below `cap`, the source side of a
    /// minimum cut.
    pub fn max_flow(&mut self, s: usize, t: usize, cap: f64) -> (f64, Option<Vec<u32>>) {
        let eps = 1e-12;
        let mut flow = 0.0;
        loop {
            let level = self.levels(s, eps);
            if level[t] == usize::MAX {
                let side = (0..self.out.len())
                    .filter(|&v| level[v] != usize::MAX)
                    .map(|v| v as u32)
                    .collect();
                return (flow, Some(side));
            }
            let mut it = vec![0; self.out.len()];
            loop {
                let f = self.augment(s, t, f64::INFINITY, &level, &mut it, eps);
                if f <= eps {
                    break;
                }
                flow += f;
                if flow >= cap {
                    return (flow, None);
                }
            }
        }
    }
}

/// Minimum `s`-`t` cut value and source side.
pub fn min_st_cut(n: usize, edges: &[(u32, u32, f64)], s: u32, t: u32) -> Cut {
    let mut g = FlowNetwork::new(n, edges);
    let (value, side) = g.max_flow(s as usize, t as usize, f64::INFINITY);
    Cut {
        value,
        side: side.unwrap(),
    }
}
