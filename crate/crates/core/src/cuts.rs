//! Minimum cuts and cut sparsifiers from k-skeletons of subsampled graphs.
//!
//! Level `i` of a [`SkeletonStack`] sketches the subgraph `G_i` that keeps
//! each edge with probability `2^-i`. Levels are nested (`G_{i+1} ⊆ G_i`)
//! and membership is a hash of the edge index, so a deletion reaches exactly
//! the levels its insertion reached. Each level holds `k` layers, from which
//! a k-connectivity certificate `H_i` is extracted on demand.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use crate::em::{ext_sort_by, BlockDevice, ExtArray, Reader, Writer};
use crate::error::{Error, Result};
use crate::graph::{stoer_wagner, FlowNetwork};
use crate::ingest::{GraphScheme, LayerRoute, SketchArray};
use crate::kconn::{extract_certificate, CutValue, KConnConfig};
use crate::sketch::{hash, EdgeKey};

/// Tunables of the skeleton stack.
#[derive(Debug, Clone, Copy)]
pub struct CutsConfig {
    /// Levels are `0..=ceil(c_levels * log2 V)`.
    pub c_levels: f64,
    /// Scale of `k`: `ceil(c_k eps^-2 log2 V)` for min cut and
    /// `ceil(c_k eps^-2 log2^2 V)` for sparsifiers.
    pub c_k: f64,
    pub kconn: KConnConfig,
}

impl Default for CutsConfig {
    fn default() -> Self {
        Self {
            c_levels: 2.0,
            c_k: 3.0,
            kconn: KConnConfig::default(),
        }
    }
}

fn log2v(n: u32) -> f64 {
    (n.max(2) as f64).log2()
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon {eps} outside (0, 1]")));
    }
    Ok(())
}

/// `k` sketch layers for each of the nested subsampling levels.
#[derive(Debug, Clone)]
pub struct SkeletonStack {
    scheme: GraphScheme,
    k: usize,
    levels: usize,
}

impl SkeletonStack {
    pub fn new(num_vertices: u32, k: usize, levels: usize, seed: u64) -> Result<Self> {
        if k == 0 || levels == 0 {
            return Err(Error::InvalidParams("skeleton stack needs k >= 1 and a level".into()));
        }
        let route = LayerRoute::NestedLevels {
            key: hash::derive(seed, 0x5355_4253_414d),
            per_level: k,
            levels,
        };
        let scheme = GraphScheme::stacked(num_vertices, seed, k * levels, route)?;
        Ok(Self { scheme, k, levels })
    }

    fn levels_for(num_vertices: u32, cfg: &CutsConfig) -> usize {
        (cfg.c_levels * log2v(num_vertices)).ceil() as usize + 1
    }

    /// Stack sized for a `(1 + eps)` minimum cut estimate.
    pub fn for_min_cut(num_vertices: u32, eps: f64, seed: u64, cfg: &CutsConfig) -> Result<Self> {
        check_eps(eps)?;
        let k = (cfg.c_k * log2v(num_vertices) / (eps * eps)).ceil() as usize;
        Self::new(num_vertices, k.max(1), Self::levels_for(num_vertices, cfg), seed)
    }

    /// Stack sized for an `eps` cut sparsifier.
    pub fn for_sparsifier(num_vertices: u32, eps: f64, seed: u64, cfg: &CutsConfig) -> Result<Self> {
        check_eps(eps)?;
        let l = log2v(num_vertices);
        let k = (cfg.c_k * l * l / (eps * eps)).ceil() as usize;
        Self::new(num_vertices, k.max(1), Self::levels_for(num_vertices, cfg), seed)
    }

    /// The scheme to ingest the stream with.
    pub fn scheme(&self) -> &GraphScheme {
        &self.scheme
    }

    pub fn num_vertices(&self) -> u32 {
        self.scheme.num_vertices()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Deepest level `edge` belongs to; it is in `G_0 ..= G_level`.
    pub fn level_of(&self, edge: EdgeKey) -> usize {
        match self.scheme.route() {
            LayerRoute::NestedLevels { key, levels, .. } => {
                LayerRoute::level_of(key, edge.index(self.num_vertices()), levels)
            }
            _ => unreachable!(),
        }
    }

    /// Edges of the certificate `H_level`, extracted from a copy of that
    /// level's layers. `sketches` is left unchanged.
    pub fn level_certificate(
        &self,
        dev: &mut BlockDevice,
        sketches: &SketchArray,
        level: usize,
        cfg: &KConnConfig,
    ) -> Result<Vec<(u32, u32)>> {
        if level >= self.levels {
            return Err(Error::InvalidArgument(format!(
                "level {level} outside 0..{}",
                self.levels
            )));
        }
        let lw = self.scheme.layer_words();
        if sketches.words != self.k * self.levels * lw || sketches.slots != self.num_vertices() as usize {
            return Err(Error::ParamMismatch("sketch array does not match the skeleton stack".into()));
        }
        let layers = level * self.k..(level + 1) * self.k;
        let sub = self.scheme.sub_stack(layers)?;
        let window = sketches.window(dev, level * self.k * lw, self.k * lw)?;
        let cert = extract_certificate(dev, window, &sub, cfg)?;
        let edges = cert.edges_vec(dev)?.into_iter().map(|(u, v, _)| (u, v)).collect();
        cert.free(dev);
        Ok(edges)
    }
}

/// First level whose value (capped at `k`) is below `k`, by binary search.
/// Values are expected to be non-increasing in the level. If the levels
/// evaluated on the way contradict that, levels are scanned from zero
/// instead and the flag is set.
fn search_levels(
    levels: usize,
    k: usize,
    mut value: impl FnMut(usize) -> Result<usize>,
) -> Result<Option<(usize, bool)>> {
    let mut seen = BTreeMap::new();
    let mut eval = |i: usize, seen: &mut BTreeMap<usize, usize>| -> Result<usize> {
        if let Some(&v) = seen.get(&i) {
            return Ok(v);
        }
        let v = value(i)?.min(k);
        seen.insert(i, v);
        Ok(v)
    };
    if eval(levels - 1, &mut seen)? >= k {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0, levels - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if eval(mid, &mut seen)? < k {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    if lo > 0 {
        eval(lo - 1, &mut seen)?;
    }
    let monotone = seen.values().zip(seen.values().skip(1)).all(|(a, b)| a >= b);
    if monotone {
        return Ok(Some((lo, false)));
    }
    for i in 0..levels {
        if eval(i, &mut seen)? < k {
            return Ok(Some((i, true)));
        }
    }
    unreachable!()
}

/// Result of [`approx_min_cut`].
#[derive(Debug, Clone)]
pub struct MinCutEstimate {
    /// `2^level * skeleton_cut`.
    pub estimate: u64,
    /// First level whose certificate has a cut below `k`.
    pub level: usize,
    /// Minimum cut of that level's certificate.
    pub skeleton_cut: usize,
    /// One side of the certificate's minimum cut.
    pub side: Vec<u32>,
    /// The binary search was abandoned for a linear scan.
    pub fallback: bool,
    /// Levels evaluated, with the certificate cut found there.
    pub evaluated: Vec<(usize, CutValue)>,
}

/// Estimate the minimum cut from an ingested skeleton stack.
pub fn approx_min_cut(
    dev: &mut BlockDevice,
    stack: &SkeletonStack,
    sketches: &SketchArray,
    cfg: &KConnConfig,
) -> Result<MinCutEstimate> {
    let n = stack.num_vertices() as usize;
    if n < 2 {
        return Err(Error::InvalidArgument("minimum cut needs at least two vertices".into()));
    }
    let k = stack.k();
    let mut memo: BTreeMap<usize, (CutValue, Vec<u32>)> = BTreeMap::new();
    let mut evaluated = Vec::new();
    let found = search_levels(stack.levels(), k, |i| {
        let h: Vec<(u32, u32, f64)> = stack
            .level_certificate(dev, sketches, i, cfg)?
            .into_iter()
            .map(|(u, v)| (u, v, 1.0))
            .collect();
        let cut = stoer_wagner(n, &h).unwrap();
        let c = cut.value as usize;
        let value = if c < k { CutValue::Exact(c) } else { CutValue::AtLeast(k) };
        log::debug!("level {i}: certificate of {} edges, cut {value:?}", h.len());
        evaluated.push((i, value));
        memo.insert(i, (value, cut.side));
        Ok(c)
    })?;
    let Some((level, fallback)) = found else {
        return Err(Error::Saturated {
            k,
            levels: stack.levels() - 1,
        });
    };
    let (value, side) = memo.remove(&level).unwrap();
    let CutValue::Exact(c) = value else { unreachable!() };
    Ok(MinCutEstimate {
        estimate: (c as u64) << level,
        level,
        skeleton_cut: c,
        side,
        fallback,
        evaluated,
    })
}

/// Sorted, deduplicated one-word array of vertex ids.
pub fn vertex_set(dev: &mut BlockDevice, side: &[u32]) -> Result<ExtArray> {
    let mut s: Vec<u64> = side.iter().map(|&v| v as u64).collect();
    s.sort_unstable();
    s.dedup();
    dev.array_from_records(&s)
}

/// Append to each record of `arr` (sorted by word `at`) whether that word is
/// in the sorted set `side`.
fn mark(dev: &mut BlockDevice, arr: &ExtArray, at: usize, side: &ExtArray) -> Result<ExtArray> {
    let rw = arr.record_words();
    let out = dev.alloc_array(arr.len(), rw + 1);
    let mut w = Writer::new(dev, out);
    let mut r = Reader::new(dev, arr);
    let mut sr = Reader::new(dev, side);
    let mut rec = vec![0u64; rw + 1];
    let mut s = [0u64; 1];
    let mut has = sr.next_into(dev, &mut s)?;
    while r.next_into(dev, &mut rec[..rw])? {
        while has && s[0] < rec[at] {
            has = sr.next_into(dev, &mut s)?;
        }
        rec[rw] = (has && s[0] == rec[at]) as u64;
        w.push_words(dev, &rec)?;
    }
    drop(r);
    drop(sr);
    w.finish(dev)
}

/// Edges of `edges` (two-word `(u, v)` records) with exactly one endpoint in
/// `side` (a sorted one-word array, see [`vertex_set`]). Two sort and
/// marking passes; the output is ordered by `v`.
pub fn recover_cut_edges(dev: &mut BlockDevice, side: &ExtArray, edges: &ExtArray) -> Result<ExtArray> {
    if edges.record_words() != 2 || side.record_words() != 1 {
        return Err(Error::InvalidArgument("expected (u, v) edges and a one-word vertex set".into()));
    }
    let by_u = ext_sort_by(dev, edges, |w| w[0])?;
    let marked = mark(dev, &by_u, 0, side)?;
    dev.free(by_u);
    let by_v = ext_sort_by(dev, &marked, |w| w[1])?;
    dev.free(marked);
    let both = mark(dev, &by_v, 1, side)?;
    dev.free(by_v);
    let out = dev.alloc_array(both.len(), 2);
    let mut w = Writer::new(dev, out);
    let mut r = Reader::new(dev, &both);
    let mut rec = [0u64; 4];
    while r.next_into(dev, &mut rec)? {
        if rec[2] != rec[3] {
            w.push_words(dev, &rec[..2])?;
        }
    }
    drop(r);
    dev.free(both);
    w.finish(dev)
}

/// Weighted subgraph approximating every cut of the input.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSparsifier {
    pub num_vertices: u32,
    /// `(u, v, weight)` with `u < v`, sorted; weights are powers of two.
    pub edges: Vec<(u32, u32, u64)>,
    /// Edges whose level search fell back to a linear scan.
    pub fallbacks: usize,
}

impl WeightedSparsifier {
    /// Total weight crossing the cut `in_side`.
    pub fn cut_value(&self, in_side: impl Fn(u32) -> bool) -> u64 {
        self.edges
            .iter()
            .filter(|&&(u, v, _)| in_side(u) != in_side(v))
            .map(|e| e.2)
            .sum()
    }

    pub fn weighted_edges(&self) -> Vec<(u32, u32, f64)> {
        self.edges.iter().map(|&(u, v, w)| (u, v, w as f64)).collect()
    }

    /// One `u v weight` line per edge.
    pub fn write(&self, out: &mut impl Write) -> Result<()> {
        for &(u, v, w) in &self.edges {
            writeln!(out, "{u} {v} {w}")?;
        }
        Ok(())
    }
}

/// Build a cut sparsifier from an ingested skeleton stack. Each edge `e` of
/// some certificate gets `j(e)`, the first level where the connectivity of
/// its endpoints in `H_j` drops below `k`, and is kept with weight `2^j(e)`
/// when it belongs to `H_j(e)`.
pub fn build_sparsifier(
    dev: &mut BlockDevice,
    stack: &SkeletonStack,
    sketches: &SketchArray,
    cfg: &KConnConfig,
) -> Result<WeightedSparsifier> {
    let n = stack.num_vertices() as usize;
    let k = stack.k();
    let mut certs: Vec<Vec<(u32, u32, f64)>> = Vec::with_capacity(stack.levels());
    let mut members: Vec<BTreeSet<(u32, u32)>> = Vec::with_capacity(stack.levels());
    let mut union = BTreeSet::new();
    for i in 0..stack.levels() {
        let h = stack.level_certificate(dev, sketches, i, cfg)?;
        union.extend(h.iter().copied());
        certs.push(h.iter().map(|&(u, v)| (u, v, 1.0)).collect());
        members.push(h.into_iter().collect());
    }
    let mut edges = Vec::new();
    let mut fallbacks = 0;
    for &(u, v) in &union {
        let found = search_levels(stack.levels(), k, |i| {
            let mut g = FlowNetwork::new(n, &certs[i]);
            Ok(g.max_flow(u as usize, v as usize, k as f64).0.round() as usize)
        })?;
        let Some((j, fallback)) = found else {
            return Err(Error::Saturated {
                k,
                levels: stack.levels() - 1,
            });
        };
        fallbacks += fallback as usize;
        if members[j].contains(&(u, v)) {
            edges.push((u, v, 1u64 << j));
        }
    }
    Ok(WeightedSparsifier {
        num_vertices: stack.num_vertices(),
        edges,
        fallbacks,
    })
}

/// Minimum `s`-`t` cut of the sparsifier, weights as capacities.
pub fn query_st_cut(h: &WeightedSparsifier, s: u32, t: u32) -> Result<f64> {
    for x in [s, t] {
        if x >= h.num_vertices {
            return Err(Error::VertexOutOfRange {
                vertex: x as u64,
                num_vertices: h.num_vertices as u64,
            });
        }
    }
    if s == t {
        return Err(Error::InvalidArgument(format!("s and t are both {s}")));
    }
    let mut g = FlowNetwork::new(h.num_vertices as usize, &h.weighted_edges());
    Ok(g.max_flow(s as usize, t as usize, f64::INFINITY).0)
}
