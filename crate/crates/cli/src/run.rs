//! One pipeline per command: ingest the stream, extract, and render results.

use serde::Serialize;
use serde_json::{json, Value};

use extsketch::apps::{self, BucketScheme, DensestConfig};
use extsketch::cc::{boruvka_extract, CcConfig};
use extsketch::cuts::{self, CutsConfig, SkeletonStack};
use extsketch::em::BlockDevice;
use extsketch::ingest::{ingest, GraphScheme, HyperScheme, VertexScheme};
use extsketch::kconn::{self, KConnConfig};
use extsketch::stream::{EdgeUpdate, HyperUpdate};

use crate::error::CliError;
use crate::oracle;

/// One sketch ingestion a pipeline performs: `updates` updates into `slots`
/// slots of `phi` words.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Ingestion {
    pub updates: usize,
    pub slots: usize,
    pub phi: usize,
}

/// What a pipeline produced.
pub struct Outcome {
    /// Printed on stdout and included in the report.
    pub summary: Value,
    /// Content of the result file.
    pub result: Vec<u8>,
    /// Secondary result file content, for commands that have one.
    pub extra: Option<Vec<u8>>,
    pub ingestions: Vec<Ingestion>,
    /// Every extraction finished without hitting a cap.
    pub complete: bool,
    /// `--oracle-check` verdict.
    pub oracle: Option<Value>,
}

impl Outcome {
    fn new(summary: Value, result: Vec<u8>, ingestions: Vec<Ingestion>, complete: bool) -> Self {
        Self {
            summary,
            result,
            extra: None,
            ingestions,
            complete,
            oracle: None,
        }
    }
}

fn too_large(n: u32, limit: u32) -> Option<Value> {
    (n > limit).then(|| json!({ "skipped": format!("more than {limit} vertices") }))
}

pub fn cc(
    dev: &mut BlockDevice,
    n: u32,
    updates: &[EdgeUpdate],
    seed: u64,
    check: bool,
) -> Result<Outcome, CliError> {
    let scheme = GraphScheme::single(n, seed);
    let phi = scheme.sketch_words();
    let (arr, _) = ingest(dev, scheme.clone(), updates)?;
    let comps = boruvka_extract(dev, &arr, 0, scheme.layer(0), &CcConfig::default())?;
    dev.free(arr.arr);
    let mut result = Vec::new();
    comps.write_labels(dev, &mut result)?;
    let mut forest = Vec::new();
    comps.write_forest(dev, &mut forest)?;
    let summary = json!({
        "command": "cc",
        "components": comps.num_components,
        "forest_edges": comps.forest.len(),
        "stats": comps.stats,
    });
    let oracle = check.then(|| {
        too_large(n, oracle::MAX_VERTICES).unwrap_or_else(|| {
            let want = oracle::labels(n, oracle::final_edges(updates).iter().map(|&(u, v, _)| vec![u, v]));
            let got = comps.labels_vec(dev).unwrap_or_default();
            json!({ "agrees": got == want })
        })
    });
    let complete = comps.complete();
    comps.free(dev);
    let mut out = Outcome::new(summary, result, vec![Ingestion { updates: updates.len(), slots: n as usize, phi }], complete);
    out.extra = Some(forest);
    out.oracle = oracle;
    Ok(out)
}

pub fn hypercc(
    dev: &mut BlockDevice,
    n: u32,
    rank: usize,
    updates: &[HyperUpdate],
    seed: u64,
    check: bool,
) -> Result<Outcome, CliError> {
    let phi = HyperScheme::new(n, rank, seed)?.sketch_words();
    let comps = apps::hypergraph_components(dev, n, rank, updates, seed, &CcConfig::default())?;
    let mut result = Vec::new();
    comps.write_labels(dev, &mut result)?;
    let summary = json!({
        "command": "hypercc",
        "components": comps.num_components,
        "stats": comps.stats,
    });
    let oracle = check.then(|| {
        too_large(n, oracle::MAX_VERTICES).unwrap_or_else(|| {
            let want = oracle::labels(n, oracle::final_hyperedges(updates));
            let got = comps.labels_vec(dev).unwrap_or_default();
            json!({ "agrees": got == want })
        })
    });
    let complete = comps.complete();
    comps.free(dev);
    let mut out = Outcome::new(summary, result, vec![Ingestion { updates: updates.len(), slots: n as usize, phi }], complete);
    out.oracle = oracle;
    Ok(out)
}

pub fn bipartite(
    dev: &mut BlockDevice,
    n: u32,
    updates: &[EdgeUpdate],
    seed: u64,
    check: bool,
) -> Result<Outcome, CliError> {
    let r = apps::bipartite_test(dev, n, updates, seed, &CcConfig::default())?;
    let phi = GraphScheme::single(n, seed).sketch_words();
    let phi2 = GraphScheme::single(2 * n, seed).sketch_words();
    let summary = json!({ "command": "bipartite", "result": r });
    let ingestions = vec![
        Ingestion { updates: updates.len(), slots: n as usize, phi },
        Ingestion { updates: 2 * updates.len(), slots: 2 * n as usize, phi: phi2 },
    ];
    let result = format!("bipartite {}\n", r.bipartite).into_bytes();
    let mut out = Outcome::new(summary, result, ingestions, r.complete);
    out.oracle = check.then(|| {
        too_large(n, oracle::MAX_VERTICES).unwrap_or_else(|| {
            let want = oracle::is_bipartite(n, &oracle::final_edges(updates));
            json!({ "bipartite": want, "agrees": want == r.bipartite })
        })
    });
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
pub fn mstweight(
    dev: &mut BlockDevice,
    n: u32,
    updates: &[EdgeUpdate],
    eps: f64,
    max_weight: f64,
    seed: u64,
    check: bool,
) -> Result<Outcome, CliError> {
    let r = apps::mst_weight(dev, n, updates, eps, max_weight, seed, &CcConfig::default())?;
    let layer = GraphScheme::single(n, seed).sketch_words();
    let summary = json!({ "command": "mstweight", "epsilon": eps, "result": r });
    let ingestions = vec![Ingestion { updates: updates.len(), slots: n as usize, phi: layer * r.cc.len() }];
    let result = format!("mst_weight {}\n", r.estimate).into_bytes();
    let mut out = Outcome::new(summary, result, ingestions, r.complete);
    out.oracle = check.then(|| {
        too_large(n, oracle::MAX_VERTICES).unwrap_or_else(|| {
            let w = oracle::msf_weight(n, &oracle::final_edges(updates));
            let ok = r.estimate >= w - 1e-9 * w.max(1.0) && r.estimate <= (1.0 + eps) * w + 1e-9 * w.max(1.0);
            json!({ "msf_weight": w, "agrees": ok })
        })
    });
    Ok(out)
}

pub fn kconn(
    dev: &mut BlockDevice,
    n: u32,
    updates: &[EdgeUpdate],
    k: usize,
    seed: u64,
    check: bool,
) -> Result<Outcome, CliError> {
    let scheme = kconn::kconn_scheme(n, k, seed)?;
    let phi = scheme.sketch_words();
    let (arr, _) = ingest(dev, scheme.clone(), updates)?;
    let cert = kconn::extract_certificate(dev, arr, &scheme, &KConnConfig::default())?;
    let cut = kconn::min_cut_upto_k(dev, &cert, k)?;
    let mut result = Vec::new();
    cert.write(dev, &mut result)?;
    let summary = json!({
        "command": "kconn",
        "k": k,
        "certificate_edges": cert.edges.len(),
        "forest_sizes": cert.forest_sizes,
        "min_cut": cut,
        "deletion_io": cert.deletion_io,
        "extraction_io": cert.extraction_io,
    });
    let complete = cert.complete();
    let oracle = check.then(|| {
        too_large(n, oracle::MAX_VERTICES).unwrap_or_else(|| {
            let lambda = oracle::min_cut(n, &oracle::final_edges(updates));
            let got = match cut {
                kconn::CutValue::Exact(c) => c as u64,
                kconn::CutValue::AtLeast(c) => c as u64,
            };
            json!({ "min_cut": lambda, "agrees": lambda.min(k as u64) == got })
        })
    });
    cert.free(dev);
    let mut out = Outcome::new(summary, result, vec![Ingestion { updates: updates.len(), slots: n as usize, phi }], complete);
    out.oracle = oracle;
    Ok(out)
}

pub fn mincut(
    dev: &mut BlockDevice,
    n: u32,
    updates: &[EdgeUpdate],
    eps: f64,
    seed: u64,
    check: bool,
) -> Result<Outcome, CliError> {
    let cfg = CutsConfig::default();
    let stack = SkeletonStack::for_min_cut(n, eps, seed, &cfg)?;
    let phi = stack.scheme().sketch_words();
    let (arr, _) = ingest(dev, stack.scheme().clone(), updates)?;
    let est = cuts::approx_min_cut(dev, &stack, &arr, &cfg.kconn)?;
    // edges of the chosen level's certificate that cross the cut
    let h = stack.level_certificate(dev, &arr, est.level, &cfg.kconn)?;
    dev.free(arr.arr);
    let recs: Vec<[u64; 2]> = h.iter().map(|&(u, v)| [u as u64, v as u64]).collect();
    let edges = dev.array_from_records(&recs)?;
    let side = cuts::vertex_set(dev, &est.side)?;
    let crossing = cuts::recover_cut_edges(dev, &side, &edges)?;
    let mut extra = Vec::new();
    for [u, v] in dev.read_all::<[u64; 2]>(&crossing)? {
        extra.extend(format!("{u} {v}\n").into_bytes());
    }
    for a in [edges, side, crossing] {
        dev.free(a);
    }
    let summary = json!({
        "command": "mincut",
        "epsilon": eps,
        "estimate": est.estimate,
        "level": est.level,
        "skeleton_cut": est.skeleton_cut,
        "k": stack.k(),
        "levels": stack.levels(),
        "fallback": est.fallback,
        "side": est.side,
    });
    let side_ids: Vec<String> = est.side.iter().map(|v| v.to_string()).collect();
    let result = format!("min_cut {}\nside {}\n", est.estimate, side_ids.join(" ")).into_bytes();
    let mut out = Outcome::new(
        summary,
        result,
        vec![Ingestion { updates: updates.len(), slots: n as usize, phi }],
        true,
    );
    out.extra = Some(extra);
    out.oracle = check.then(|| {
        too_large(n, oracle::MAX_VERTICES).unwrap_or_else(|| {
            let lambda = oracle::min_cut(n, &oracle::final_edges(updates)) as f64;
            let e = est.estimate as f64;
            json!({ "min_cut": lambda, "agrees": e >= lambda && e <= (1.0 + eps) * lambda })
        })
    });
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
pub fn sparsify(
    dev: &mut BlockDevice,
    n: u32,
    updates: &[EdgeUpdate],
    eps: f64,
    st: Option<(u32, u32)>,
    seed: u64,
    check: bool,
) -> Result<Outcome, CliError> {
    let cfg = CutsConfig::default();
    let stack = SkeletonStack::for_sparsifier(n, eps, seed, &cfg)?;
    let phi = stack.scheme().sketch_words();
    let (arr, _) = ingest(dev, stack.scheme().clone(), updates)?;
    let h = cuts::build_sparsifier(dev, &stack, &arr, &cfg.kconn)?;
    dev.free(arr.arr);
    let st_cut = match st {
        Some((s, t)) => Some(cuts::query_st_cut(&h, s, t)?),
        None => None,
    };
    let mut result = Vec::new();
    h.write(&mut result)?;
    let summary = json!({
        "command": "sparsify",
        "epsilon": eps,
        "edges": h.edges.len(),
        "k": stack.k(),
        "levels": stack.levels(),
        "fallbacks": h.fallbacks,
        "st_cut": st_cut,
    });
    let mut out = Outcome::new(summary, result, vec![Ingestion { updates: updates.len(), slots: n as usize, phi }], true);
    out.oracle = check.then(|| {
        too_large(n, oracle::MAX_VERTICES).unwrap_or_else(|| {
            let g = oracle::final_edges(updates);
            let within = |exact: f64, approx: f64| (approx - exact).abs() <= eps * exact + 1e-9;
            // the global minimum cut and every single-vertex cut
            let lambda = oracle::min_cut(n, &g) as f64;
            let hw = h.weighted_edges();
            let h_lambda = extsketch::graph::stoer_wagner(n as usize, &hw).map_or(0.0, |c| c.value);
            let mut deg = vec![0.0; n as usize];
            for &(u, v, _) in &g {
                deg[u as usize] += 1.0;
                deg[v as usize] += 1.0;
            }
            let singles = (0..n).filter(|&x| within(deg[x as usize], h.cut_value(|y| y == x) as f64)).count();
            json!({
                "min_cut": lambda,
                "sparsifier_min_cut": h_lambda,
                "vertex_cuts_within": singles,
                "agrees": within(lambda, h_lambda) && singles == n as usize,
            })
        })
    });
    Ok(out)
}

pub fn densest(
    dev: &mut BlockDevice,
    n: u32,
    updates: &[EdgeUpdate],
    eps: f64,
    seed: u64,
    check: bool,
) -> Result<Outcome, CliError> {
    let cfg = DensestConfig { eps, ..DensestConfig::default() };
    let r = apps::densest_subgraph(dev, n, updates, seed, &cfg)?;
    let phi = BucketScheme::new(n, r.buckets, r.sketches_per_bucket, seed)?.sketch_words();
    let summary = json!({
        "command": "densest",
        "epsilon": eps,
        "estimate": r.estimate,
        "vertices": r.vertices,
        "sample_rate": r.sample_rate,
        "total_edges": r.total_edges,
        "sampled_edges": r.sampled_edges,
        "buckets": r.buckets,
        "sketches_per_bucket": r.sketches_per_bucket,
        "sample_density": r.peeling.density,
    });
    let ingestions = vec![Ingestion { updates: updates.len(), slots: r.buckets, phi }];
    let mut out = Outcome::new(summary, format!("density {}\n", r.estimate).into_bytes(), ingestions, true);
    out.extra = Some(r.vertices.iter().map(|v| format!("{v}\n")).collect::<String>().into_bytes());
    out.oracle = check.then(|| {
        too_large(n, oracle::MAX_DENSEST_VERTICES).unwrap_or_else(|| {
            let d = oracle::densest(n, &oracle::final_edges(updates));
            let ok = r.estimate >= d / (2.0 * (1.0 + eps)) && r.estimate <= (1.0 + eps) * d;
            json!({ "density": d, "agrees": ok })
        })
    });
    Ok(out)
}
