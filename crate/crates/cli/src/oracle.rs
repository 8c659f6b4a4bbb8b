//! In-memory reference answers for `--oracle-check` on small inputs.

use std::collections::BTreeMap;

use extsketch::graph::{stoer_wagner, FlowNetwork};
use extsketch::stream::{EdgeUpdate, HyperUpdate};

/// Largest vertex count the oracles are run on.
pub const MAX_VERTICES: u32 = 4096;

/// The densest-subgraph oracle runs a max-flow per bisection step.
pub const MAX_DENSEST_VERTICES: u32 = 512;

/// Edges alive at the end of a graph stream, with their weights.
pub fn final_edges(updates: &[EdgeUpdate]) -> Vec<(u32, u32, f64)> {
    let mut live: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for u in updates {
        let key = (u.u.min(u.v), u.u.max(u.v));
        if u.delete {
            live.remove(&key);
        } else {
            live.insert(key, u.weight);
        }
    }
    live.into_iter().map(|((u, v), w)| (u, v, w)).collect()
}

pub fn final_hyperedges(updates: &[HyperUpdate]) -> Vec<Vec<u32>> {
    let mut live: BTreeMap<Vec<u32>, ()> = BTreeMap::new();
    for u in updates {
        if u.delete {
            live.remove(&u.vertices);
        } else {
            live.insert(u.vertices.clone(), ());
        }
    }
    live.into_keys().collect()
}

struct Dsu(Vec<u32>);

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu((0..n as u32).collect())
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.0[x as usize] != x {
            let p = self.0[x as usize];
            self.0[x as usize] = self.0[p as usize];
            x = p;
        }
        x
    }

    /// Links the larger root under the smaller, so roots are minimum ids.
    fn union(&mut self, a: u32, b: u32) -> bool {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        self.0[hi as usize] = lo;
        true
    }
}

/// Component labels (minimum vertex id) of a hypergraph; edges are 2-sets.
pub fn labels(n: u32, sets: impl IntoIterator<Item = Vec<u32>>) -> Vec<u32> {
    let mut d = Dsu::new(n as usize);
    for s in sets {
        for w in s.windows(2) {
            d.union(w[0], w[1]);
        }
    }
    (0..n).map(|v| d.find(v)).collect()
}

pub fn is_bipartite(n: u32, edges: &[(u32, u32, f64)]) -> bool {
    let mut adj = vec![Vec::new(); n as usize];
    for &(u, v, _) in edges {
        adj[u as usize].push(v);
        adj[v as usize].push(u);
    }
    let mut color = vec![u8::MAX; n as usize];
    for s in 0..n as usize {
        if color[s] != u8::MAX {
            continue;
        }
        color[s] = 0;
        let mut stack = vec![s];
        while let Some(x) = stack.pop() {
            for &y in &adj[x] {
                let y = y as usize;
                if color[y] == u8::MAX {
                    color[y] = 1 - color[x];
                    stack.push(y);
                } else if color[y] == color[x] {
                    return false;
                }
            }
        }
    }
    true
}

/// Minimum spanning forest weight by Kruskal.
pub fn msf_weight(n: u32, edges: &[(u32, u32, f64)]) -> f64 {
    let mut sorted = edges.to_vec();
    sorted.sort_by(|a, b| a.2.total_cmp(&b.2));
    let mut d = Dsu::new(n as usize);
    sorted.iter().filter(|e| d.union(e.0, e.1)).map(|e| e.2).sum()
}

/// Global minimum cut, with unit weights.
pub fn min_cut(n: u32, edges: &[(u32, u32, f64)]) -> u64 {
    let unit: Vec<_> = edges.iter().map(|&(u, v, _)| (u, v, 1.0)).collect();
    stoer_wagner(n as usize, &unit).map_or(0, |c| c.value.round() as u64)
}

/// Maximum density `|E(S)| / |S|` by parametric min cut: for a guess `g`,
/// the cut around `{s} ∪ S` costs `m n + 2 g |S| - 2 |E(S)|`, so it drops
/// below `m n` exactly when some `S` is denser than `g`. Densities differ by
/// at least `1 / n^2`, so the densest set seen once the bracket is that
/// narrow is optimal.
pub fn densest(n: u32, edges: &[(u32, u32, f64)]) -> f64 {
    let m = edges.len() as f64;
    if edges.is_empty() {
        return 0.0;
    }
    let nn = n as usize;
    let mut deg = vec![0.0; nn];
    for &(u, v, _) in edges {
        deg[u as usize] += 1.0;
        deg[v as usize] += 1.0;
    }
    let density_of = |side: &[u32]| -> f64 {
        let mut inside = vec![false; nn];
        let mut k = 0;
        for &x in side {
            if (x as usize) < nn {
                inside[x as usize] = true;
                k += 1;
            }
        }
        let e = edges.iter().filter(|&&(u, v, _)| inside[u as usize] && inside[v as usize]).count();
        if k == 0 { 0.0 } else { e as f64 / k as f64 }
    };
    let (s, t) = (nn, nn + 1);
    let (mut lo, mut hi) = (0.0, m);
    let mut best = 1.0 / 2.0;
    while hi - lo >= 1.0 / (n as f64 * n as f64) {
        let g = (lo + hi) / 2.0;
        let mut arcs: Vec<(u32, u32, f64)> = edges.iter().map(|&(u, v, _)| (u, v, 1.0)).collect();
        for v in 0..nn {
            arcs.push((s as u32, v as u32, m));
            arcs.push((v as u32, t as u32, m + 2.0 * g - deg[v]));
        }
        let mut net = FlowNetwork::new(nn + 2, &arcs);
        let (flow, side) = net.max_flow(s, t, f64::INFINITY);
        let side = side.unwrap_or_default();
        if flow < m * n as f64 - 1e-7 && side.len() > 1 {
            best = f64::max(best, density_of(&side));
            lo = g;
        } else {
            hi = g;
        }
    }
    best
}
