//! Stream generators and exact oracles shared by the integration tests.
#![allow(dead_code)]

use extsketch::sketch::EdgeKey;
use extsketch::stream::EdgeUpdate;
use rand::Rng;
use std::collections::BTreeSet;

/// Legal dynamic stream: random inserts, deletes of live edges with
/// probability `p_delete`. Returns the stream and the surviving edges.
pub fn dynamic_stream(
    n: u32,
    len: usize,
    p_delete: f64,
    rng: &mut impl Rng,
) -> (Vec<EdgeUpdate>, BTreeSet<EdgeKey>) {
    let mut live = BTreeSet::new();
    let mut out = Vec::with_capacity(len);
    let max_edges = n as usize * (n as usize - 1) / 2;
    while out.len() < len {
        if !live.is_empty() && (live.len() == max_edges || rng.gen_bool(p_delete)) {
            let k = rng.gen_range(0..live.len());
            let e: EdgeKey = *live.iter().nth(k).unwrap();
            live.remove(&e);
            out.push(EdgeUpdate::delete(e.u, e.v));
        } else {
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if a == b {
                continue;
            }
            let e = EdgeKey::new(a, b).unwrap();
            if live.insert(e) {
                out.push(EdgeUpdate::insert(a, b));
            }
        }
    }
    (out, live)
}

/// Insert every edge of `edges`, plus `churn` insert/delete pairs of
/// absent edges that cancel out.
pub fn stream_of(edges: &[(u32, u32)], n: u32, churn: usize, rng: &mut impl Rng) -> Vec<EdgeUpdate> {
    let set: BTreeSet<EdgeKey> = edges.iter().map(|&(a, b)| EdgeKey::new(a, b).unwrap()).collect();
    let mut out: Vec<EdgeUpdate> = edges.iter().map(|&(a, b)| EdgeUpdate::insert(a, b)).collect();
    let non_edges = (n as usize * n.saturating_sub(1) as usize / 2).saturating_sub(set.len());
    let mut extra = 0;
    while extra < churn && n > 1 {
        if non_edges == 0 || (!edges.is_empty() && rng.gen_bool(0.5)) {
            // delete a real edge after its insertion, then insert it again
            let (a, b) = edges[rng.gen_range(0..edges.len())];
            let key = EdgeKey::new(a, b).unwrap();
            let first = out.iter().position(|u| EdgeKey::new(u.u, u.v).ok() == Some(key)).unwrap();
            let del = rng.gen_range(first + 1..=out.len());
            out.insert(del, EdgeUpdate::delete(a, b));
            let ins = rng.gen_range(del + 1..=out.len());
            out.insert(ins, EdgeUpdate::insert(a, b));
            extra += 1;
            continue;
        }
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a == b || set.contains(&EdgeKey::new(a, b).unwrap()) {
            continue;
        }
        let at = rng.gen_range(0..=out.len());
        out.insert(at, EdgeUpdate::insert(a, b));
        let later = rng.gen_range(at + 1..=out.len());
        out.insert(later, EdgeUpdate::delete(a, b));
        extra += 1;
    }
    out
}

pub struct Dsu(pub Vec<u32>);

impl Dsu {
    pub fn new(n: usize) -> Self {
        Dsu((0..n as u32).collect())
    }

    pub fn find(&mut self, mut x: u32) -> u32 {
        while self.0[x as usize] != x {
            let p = self.0[x as usize];
            self.0[x as usize] = self.0[p as usize];
            x = p;
        }
        x
    }

    /// Union towards the smaller root; false if already joined.
    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        self.0[a.max(b) as usize] = a.min(b);
        true
    }

    /// Label per vertex: the smallest vertex of its set.
    pub fn labels(&mut self) -> Vec<u32> {
        (0..self.0.len() as u32).map(|x| self.find(x)).collect()
    }
}

/// Component labels (smallest member) of the graph on `n` vertices.
pub fn oracle_labels<'a>(n: usize, edges: impl IntoIterator<Item = &'a EdgeKey>) -> Vec<u32> {
    let mut d = Dsu::new(n);
    for e in edges {
        d.union(e.u, e.v);
    }
    d.labels()
}

pub fn random_graph(n: u32, p: f64, rng: &mut impl Rng) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                out.push((u, v));
            }
        }
    }
    out
}

/// Global min cut by the O(V^3) matrix form of Stoer–Wagner.
pub fn oracle_min_cut(n: usize, edges: &[(u32, u32, f64)]) -> f64 {
    if n < 2 {
        return f64::INFINITY;
    }
    let mut w = vec![vec![0.0f64; n]; n];
    for &(u, v, c) in edges {
        if u != v {
            w[u as usize][v as usize] += c;
            w[v as usize][u as usize] += c;
        }
    }
    let mut alive: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    while alive.len() > 1 {
        let mut conn = vec![0.0f64; n];
        let mut used = vec![false; n];
        let (mut s, mut t) = (alive[0], alive[0]);
        for _ in 0..alive.len() {
            let next = *alive
                .iter()
                .filter(|&&v| !used[v])
                .max_by(|&&a, &&b| conn[a].partial_cmp(&conn[b]).unwrap().then(b.cmp(&a)))
                .unwrap();
            used[next] = true;
            s = t;
            t = next;
            for &v in &alive {
                conn[v] += w[next][v];
            }
        }
        best = best.min(conn[t] - w[t][t]);
        for &v in &alive {
            let x = w[t][v];
            w[s][v] += x;
            w[v][s] += x;
        }
        alive.retain(|&v| v != t);
    }
    best
}

/// Edge connectivity of a simple graph.
pub fn oracle_lambda(n: usize, edges: &[(u32, u32)]) -> usize {
    let e: Vec<(u32, u32, f64)> = edges.iter().map(|&(a, b)| (a, b, 1.0)).collect();
    oracle_min_cut(n, &e) as usize
}

/// Exhaustive edge connectivity, for tiny graphs.
pub fn brute_lambda(n: usize, edges: &[(u32, u32)]) -> usize {
    (1..(1u64 << n) - 1)
        .filter(|m| m & 1 == 1)
        .map(|m| edges.iter().filter(|&&(u, v)| (m >> u & 1) != (m >> v & 1)).count())
        .min()
        .unwrap_or(usize::MAX)
}

/// Unit-capacity s-t max flow by BFS augmenting paths on a matrix.
pub fn oracle_st_cut(n: usize, edges: &[(u32, u32)], s: u32, t: u32) -> usize {
    let mut cap = vec![vec![0i64; n]; n];
    for &(u, v) in edges {
        cap[u as usize][v as usize] += 1;
        cap[v as usize][u as usize] += 1;
    }
    let (s, t) = (s as usize, t as usize);
    let mut flow = 0;
    loop {
        let mut prev = vec![usize::MAX; n];
        prev[s] = s;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            for y in 0..n {
                if cap[x][y] > 0 && prev[y] == usize::MAX {
                    prev[y] = x;
                    queue.push_back(y);
                }
            }
        }
        if prev[t] == usize::MAX {
            return flow;
        }
        let mut y = t;
        while y != s {
            let x = prev[y];
            cap[x][y] -= 1;
            cap[y][x] += 1;
            y = x;
        }
        flow += 1;
    }
}

/// Kruskal minimum spanning forest weight.
pub fn oracle_msf(n: usize, edges: &[(u32, u32, f64)]) -> f64 {
    let mut e = edges.to_vec();
    e.sort_by(|a, b| a.2.total_cmp(&b.2));
    let mut dsu = Dsu::new(n);
    e.iter().filter(|&&(u, v, _)| dsu.union(u, v)).map(|e| e.2).sum()
}

/// Proper 2-coloring exists.
pub fn oracle_bipartite(n: usize, edges: &[(u32, u32)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u as usize].push(v as usize);
        adj[v as usize].push(u as usize);
    }
    let mut color = vec![u8::MAX; n];
    for s in 0..n {
        if color[s] != u8::MAX {
            continue;
        }
        color[s] = 0;
        let mut stack = vec![s];
        while let Some(x) = stack.pop() {
            for &y in &adj[x] {
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

/// Quadratic greedy peeling: min degree first, smaller id on ties; the
/// largest suffix wins ties in density. Returns (density, sorted suffix).
pub fn oracle_peel(n: usize, edges: &[(u32, u32)]) -> (f64, Vec<u32>) {
    let mut alive = vec![true; n];
    let mut m = edges.len();
    let mut best = (m as f64 / n as f64, 0usize);
    let mut order = Vec::new();
    for step in 0..n {
        let deg = |v: usize| {
            edges
                .iter()
                .filter(|&&(a, b)| alive[a as usize] && alive[b as usize] && (a as usize == v || b as usize == v))
                .count()
        };
        let x = (0..n).filter(|&v| alive[v]).min_by_key(|&v| (deg(v), v)).unwrap();
        m -= deg(x);
        alive[x] = false;
        order.push(x as u32);
        let left = n - step - 1;
        if left > 0 && m as f64 / left as f64 > best.0 {
            best = (m as f64 / left as f64, step + 1);
        }
    }
    let mut s = order[best.1..].to_vec();
    s.sort();
    (best.0, s)
}

/// Exact maximum density |E(S)|/|S| by parametric max-flow on the
/// standard construction, searching over the finitely many candidate ratios.
pub fn oracle_densest(n: usize, edges: &[(u32, u32)]) -> f64 {
    let m = edges.len() as f64;
    if edges.is_empty() {
        return 0.0;
    }
    let mut deg = vec![0.0f64; n];
    for &(u, v) in edges {
        deg[u as usize] += 1.0;
        deg[v as usize] += 1.0;
    }
    // some S has density > g iff the min cut is below m n
    let denser = |g: f64| -> bool {
        let (s, t) = (n, n + 1);
        let mut cap = vec![vec![0.0f64; n + 2]; n + 2];
        for &(u, v) in edges {
            cap[u as usize][v as usize] += 1.0;
            cap[v as usize][u as usize] += 1.0;
        }
        for v in 0..n {
            cap[s][v] = m;
            cap[v][t] = m + 2.0 * g - deg[v];
        }
        let flow = dense_max_flow(&mut cap, s, t);
        flow < m * n as f64 - 1e-7
    };
    let (mut lo, mut hi) = (0.0, m);
    let gap = 1.0 / (n as f64 * n as f64);
    while hi - lo >= gap / 4.0 {
        let mid = (lo + hi) / 2.0;
        if denser(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // snap to the unique ratio a/b, b <= n, inside the bracket
    let mut best = lo;
    for b in 1..=n {
        let a = (hi * b as f64).floor();
        let r = a / b as f64;
        if r >= lo - 1e-12 && r <= hi + 1e-12 {
            best = r;
            break;
        }
    }
    best
}

fn dense_max_flow(cap: &mut [Vec<f64>], s: usize, t: usize) -> f64 {
    let n = cap.len();
    let mut flow = 0.0;
    loop {
        let mut level = vec![usize::MAX; n];
        level[s] = 0;
        let mut q = std::collections::VecDeque::from([s]);
        while let Some(x) = q.pop_front() {
            for y in 0..n {
                if cap[x][y] > 1e-12 && level[y] == usize::MAX {
                    level[y] = level[x] + 1;
                    q.push_back(y);
                }
            }
        }
        if level[t] == usize::MAX {
            return flow;
        }
        let mut it = vec![0usize; n];
        loop {
            let f = dfs(cap, &level, &mut it, s, t, f64::INFINITY);
            if f <= 1e-12 {
                break;
            }
            flow += f;
        }
    }
}

fn dfs(cap: &mut [Vec<f64>], level: &[usize], it: &mut [usize], x: usize, t: usize, lim: f64) -> f64 {
    if x == t {
        return lim;
    }
    while it[x] < cap.len() {
        let y = it[x];
        if cap[x][y] > 1e-12 && level[y] == level[x] + 1 {
            let f = dfs(cap, level, it, y, t, lim.min(cap[x][y]));
            if f > 1e-12 {
                cap[x][y] -= f;
                cap[y][x] += f;
                return f;
            }
        }
        it[x] += 1;
    }
    0.0
}

/// Component labels (smallest member) of a plain edge list.
pub fn labels_of(n: u32, edges: &[(u32, u32)]) -> Vec<u32> {
    let mut dsu = Dsu::new(n as usize);
    for &(u, v) in edges {
        dsu.union(u, v);
    }
    dsu.labels()
}

/// Background `G(n, p)` with a denser planted set.
pub fn planted(n: u32, k: u32, p: f64, q: f64, rng: &mut impl Rng) -> Vec<(u32, u32)> {
    let mut ids: Vec<u32> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(&mut ids[..], rng);
    let inside: BTreeSet<u32> = ids[..k as usize].iter().copied().collect();
    let mut out = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let pr = if inside.contains(&u) && inside.contains(&v) { q } else { p };
            if rng.gen_bool(pr) {
                out.push((u, v));
            }
        }
    }
    out
}
