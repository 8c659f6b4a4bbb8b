//! Algorithms assembled from the connectivity sketch: bipartiteness, MST
//! weight, hypergraph components and densest subgraph.

mod densest;

pub use densest::{
    charikar_peel, densest_subgraph, BucketScheme, DensestConfig, DensestResult, Peeling,
};

use serde::Serialize;

use crate::cc::{boruvka_extract, CcConfig, Components};
use crate::em::BlockDevice;
use crate::error::{Error, Result};
use crate::ingest::{ingest, GraphScheme, HyperScheme, LayerRoute};
use crate::sketch::hash;
use crate::stream::{EdgeUpdate, HyperUpdate};

/// The two double-cover edges `(u, v + n)` and `(u + n, v)` of an update.
pub fn double_cover(up: &EdgeUpdate, n: u32) -> [EdgeUpdate; 2] {
    let mk = |a, b| EdgeUpdate {
        u: a,
        v: b,
        delete: up.delete,
        weight: 1.0,
    };
    [mk(up.u, up.v + n), mk(up.u + n, up.v)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BipartiteResult {
    pub bipartite: bool,
    /// Components of the graph.
    pub cc_graph: usize,
    /// Components of its double cover.
    pub cc_cover: usize,
    /// Both extractions finished without hitting a cap.
    pub complete: bool,
}

/// Test bipartiteness: the double cover has twice as many components as
/// the graph exactly when no component contains an odd cycle.
pub fn bipartite_test(
    dev: &mut BlockDevice,
    num_vertices: u32,
    updates: &[EdgeUpdate],
    seed: u64,
    cfg: &CcConfig,
) -> Result<BipartiteResult> {
    let n = num_vertices;
    let g = GraphScheme::single(n, hash::derive(seed, 1));
    let d = GraphScheme::single(2 * n, hash::derive(seed, 2));
    let (ga, _) = ingest(dev, g.clone(), updates)?;
    let cover: Vec<EdgeUpdate> = updates.iter().flat_map(|u| double_cover(u, n)).collect();
    let (da, _) = ingest(dev, d.clone(), &cover)?;
    let gc = boruvka_extract(dev, &ga, 0, g.layer(0), cfg)?;
    let dc = boruvka_extract(dev, &da, 0, d.layer(0), cfg)?;
    dev.free(ga.arr);
    dev.free(da.arr);
    let res = BipartiteResult {
        bipartite: dc.num_components == 2 * gc.num_components,
        cc_graph: gc.num_components,
        cc_cover: dc.num_components,
        complete: gc.complete() && dc.complete(),
    };
    gc.free(dev);
    dc.free(dev);
    Ok(res)
}

/// Weight of a minimum spanning forest with every weight rounded up to a
/// power of `1 + eps`, from the component counts `cc[i]` of the subgraphs
/// `G_i` of edges with weight at most `(1 + eps)^i`, `i = 0..=r`.
///
/// A forest of the rounded weights has `cc[i-1] - cc[i]` edges of weight
/// `(1 + eps)^i` (with `cc[-1] = n`), which telescopes to
/// `n - cc[r] (1 + eps)^r + sum_{i<r} eps (1 + eps)^i cc[i]`.
pub fn mst_formula(num_vertices: usize, eps: f64, cc: &[usize]) -> f64 {
    let r = cc.len() - 1;
    let b = 1.0 + eps;
    let tail: f64 = (0..r).map(|i| eps * b.powi(i as i32) * cc[i] as f64).sum();
    num_vertices as f64 - cc[r] as f64 * b.powi(r as i32) + tail
}

#[derive(Debug, Clone, Serialize)]
pub struct MstEstimate {
    /// Within `[w(F), (1 + eps) w(F)]` for a minimum spanning forest `F`.
    pub estimate: f64,
    /// Component counts per weight threshold.
    pub cc: Vec<usize>,
    pub complete: bool,
}

/// Approximate minimum spanning forest weight. Weights must lie in
/// `[1, max_weight]`; each update reaches the thresholds at or above it.
pub fn mst_weight(
    dev: &mut BlockDevice,
    num_vertices: u32,
    updates: &[EdgeUpdate],
    eps: f64,
    max_weight: f64,
    seed: u64,
    cfg: &CcConfig,
) -> Result<MstEstimate> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon {eps} must be positive")));
    }
    let base = 1.0 + eps;
    let r = LayerRoute::weight_class(base, max_weight);
    let scheme = GraphScheme::stacked(
        num_vertices,
        seed,
        r + 1,
        LayerRoute::WeightClasses { base, max_weight },
    )?;
    let (arr, _) = ingest(dev, scheme.clone(), updates)?;
    let lw = scheme.layer_words();
    let mut cc = Vec::with_capacity(r + 1);
    let mut complete = true;
    for l in 0..=r {
        let comps = boruvka_extract(dev, &arr, l * lw, scheme.layer(l), cfg)?;
        cc.push(comps.num_components);
        complete &= comps.complete();
        comps.free(dev);
    }
    dev.free(arr.arr);
    Ok(MstEstimate {
        estimate: mst_formula(num_vertices as usize, eps, &cc),
        cc,
        complete,
    })
}

/// Components of a hypergraph stream with hyperedges of at most `rank`
/// vertices.
pub fn hypergraph_components(
    dev: &mut BlockDevice,
    num_vertices: u32,
    rank: usize,
    updates: &[HyperUpdate],
    seed: u64,
    cfg: &CcConfig,
) -> Result<Components> {
    let scheme = HyperScheme::new(num_vertices, rank, seed)?;
    let (arr, _) = ingest(dev, scheme.clone(), updates)?;
    let comps = boruvka_extract(dev, &arr, 0, &scheme, cfg)?;
    dev.free(arr.arr);
    Ok(comps)
}
