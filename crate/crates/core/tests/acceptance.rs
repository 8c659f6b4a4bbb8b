//! Acceptance suite: one pass/fail line per criterion. Run with
//! `cargo test --release --test acceptance`.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::{
    labels_of, oracle_bipartite, oracle_densest, oracle_lambda, oracle_min_cut, oracle_msf,
    oracle_peel, oracle_st_cut, planted, random_graph, stream_of, Dsu,
};
use extsketch::apps::{bipartite_test, densest_subgraph, hypergraph_components, mst_weight, DensestConfig};
use extsketch::cc::{boruvka_extract, CcConfig, Relocation};
use extsketch::cuts::{approx_min_cut, build_sparsifier, query_st_cut, CutsConfig, SkeletonStack};
use extsketch::em::{cost, BlockDevice, EmParams};
use extsketch::ingest::{
    ingest, predicted_io, GraphScheme, HyperScheme, IngestState, LayerRoute, Routing, TaggedUpdate,
    VertexScheme, INGEST_IO_CONSTANT,
};
use extsketch::kconn::{extract_certificate, kconn_scheme, min_cut_upto_k, CutValue, KConnConfig, Schedule};
use extsketch::sketch::{merge_into, EdgeKey, SketchParams, Sketcher, Side};
use extsketch::stream::{parse_stream, write_graph_stream, EdgeUpdate, HyperUpdate, Updates};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rate(ok: usize, total: usize) -> String {
    format!("{ok}/{total} ({:.1}%)", 100.0 * ok as f64 / total as f64)
}

/// Legal dynamic stream over `n` vertices with a fraction of deletions.
fn dynamic(n: u32, len: usize, p_delete: f64, rng: &mut impl Rng) -> (Vec<EdgeUpdate>, Vec<(u32, u32)>) {
    let mut live: Vec<(u32, u32)> = Vec::new();
    let mut pos: HashMap<(u32, u32), usize> = HashMap::new();
    let mut out = Vec::with_capacity(len);
    let max = n as usize * (n as usize - 1) / 2;
    while out.len() < len {
        if !live.is_empty() && (live.len() == max || rng.gen_bool(p_delete)) {
            let i = rng.gen_range(0..live.len());
            let e = live.swap_remove(i);
            pos.remove(&e);
            if i < live.len() {
                pos.insert(live[i], i);
            }
            out.push(EdgeUpdate::delete(e.1, e.0));
        } else {
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if a == b {
                continue;
            }
            let e = (a.min(b), a.max(b));
            if pos.contains_key(&e) {
                continue;
            }
            pos.insert(e, live.len());
            live.push(e);
            out.push(EdgeUpdate::insert(a, b));
        }
    }
    live.sort();
    (out, live)
}

fn unit(edges: &[(u32, u32)]) -> Vec<(u32, u32, f64)> {
    edges.iter().map(|&(u, v)| (u, v, 1.0)).collect()
}

// 1 --------------------------------------------------------------------------

fn sketch_all(sk: &Sketcher, n: u32, ups: &[(u32, u32, i64)]) -> Vec<Vec<u64>> {
    let mut out = vec![sk.zero(); n as usize];
    for &(a, b, d) in ups {
        let e = EdgeKey::new(a, b).unwrap();
        for (x, side) in [(e.u, Side::Left), (e.v, Side::Right)] {
            sk.update(&mut out[x as usize], e.index(n), side.sign() * d);
        }
    }
    out
}

fn sketch_algebra() -> Outcome {
    let mut r = rng(1);
    let trials = 1000;
    let mut failures = Vec::new();
    let mut total_updates = 0usize;
    for t in 0..trials {
        let n = r.gen_range(2..=512u32);
        let len = if t % 100 == 0 { 100_000 } else { (10f64.powf(r.gen_range(0.0..4.3))) as usize };
        let ups: Vec<(u32, u32, i64)> = (0..len)
            .map(|_| {
                let a = r.gen_range(0..n);
                let b = (a + r.gen_range(1..n)) % n;
                (a, b, if r.gen_bool(0.3) { -1 } else { 1 })
            })
            .collect();
        total_updates += len;
        let sk = Sketcher::new(SketchParams::for_graph(n, r.gen()));
        let split = r.gen_range(0..=len);
        let joint = sketch_all(&sk, n, &ups);
        // linearity: sketch(x) + sketch(y) = sketch(x ++ y)
        let mut sum = sketch_all(&sk, n, &ups[..split]);
        for (s, y) in sum.iter_mut().zip(sketch_all(&sk, n, &ups[split..])) {
            merge_into(s, &y);
        }
        if sum != joint {
            failures.push(format!("trial {t}: linearity"));
        }
        // permutation invariance
        let mut shuffled = ups.clone();
        shuffled.shuffle(&mut r);
        if sketch_all(&sk, n, &shuffled) != joint {
            failures.push(format!("trial {t}: permutation"));
        }
        // cancellation: the stream followed by its inverse, interleaved
        shuffled.extend(ups.iter().map(|&(a, b, d)| (b, a, -d)));
        shuffled.shuffle(&mut r);
        if sketch_all(&sk, n, &shuffled).iter().any(|s| s.iter().any(|&w| w != 0)) {
            failures.push(format!("trial {t}: cancellation"));
        }
    }
    ensure(failures.is_empty(), || failures.join(", "))?;
    Ok(format!("{trials} streams, {total_updates} updates, 0 failures"))
}

// 2 --------------------------------------------------------------------------

/// Every update expanded and applied straight to full in-memory records.
fn direct<S: VertexScheme>(scheme: &S, inputs: &[S::Input]) -> Vec<Vec<u64>> {
    let mut out = vec![vec![0u64; scheme.sketch_words()]; scheme.num_slots()];
    let mut tagged: Vec<TaggedUpdate> = Vec::new();
    for x in inputs {
        tagged.clear();
        scheme.expand(x, &mut tagged).unwrap();
        for t in &tagged {
            scheme.apply(&mut out[t.target as usize], 0, t);
        }
    }
    out
}

/// Layer-aware oracle for graph schemes, through the plain sketcher.
fn direct_graph(scheme: &GraphScheme, ups: &[EdgeUpdate]) -> Vec<Vec<u64>> {
    let n = scheme.num_vertices();
    let lw = scheme.layer_words();
    let mut out = vec![vec![0u64; scheme.sketch_words()]; n as usize];
    for u in ups {
        let e = EdgeKey::new(u.u, u.v).unwrap();
        let (lo, hi) = scheme.layer_range(e, u.weight).unwrap();
        let d = if u.delete { -1 } else { 1 };
        for (x, side) in [(e.u, Side::Left), (e.v, Side::Right)] {
            for l in lo..hi {
                scheme.layer(l).update(&mut out[x as usize][l * lw..(l + 1) * lw], e.index(n), side.sign() * d);
            }
        }
    }
    out
}

fn ingested<S: VertexScheme + Clone>(p: EmParams, scheme: &S, inputs: &[S::Input], routing: Routing) -> Vec<Vec<u64>> {
    let mut dev = BlockDevice::new(p).unwrap();
    let mut st = IngestState::with_routing(&mut dev, scheme.clone(), routing).unwrap();
    for x in inputs {
        st.feed(x).unwrap();
    }
    let (arr, _) = st.finalize().unwrap();
    assert!(dev.ram_peak() <= p.ram_words, "RAM budget exceeded");
    arr.read_all(&mut dev).unwrap()
}

fn ingestion_equivalence() -> Outcome {
    let mut r = rng(2);
    let mut corpus: Vec<(String, GraphScheme, Vec<EdgeUpdate>)> = Vec::new();
    for n in [2u32, 17, 100, 300] {
        let (ups, _) = dynamic(n, 6 * n as usize, 0.3, &mut r);
        corpus.push((format!("dynamic V={n}"), GraphScheme::single(n, r.gen()), ups));
    }
    let star: Vec<EdgeUpdate> = (1..200).map(|v| EdgeUpdate::insert(0, v)).collect();
    corpus.push(("star V=200".into(), GraphScheme::single(200, 5), star));
    let mut path: Vec<EdgeUpdate> = (0..127).map(|v| EdgeUpdate::insert(v, v + 1)).collect();
    path.extend((0..127).step_by(2).map(|v| EdgeUpdate::delete(v + 1, v)));
    corpus.push(("path with deletions V=128".into(), GraphScheme::single(128, 6), path));
    let (mut sorted, _) = dynamic(64, 2000, 0.2, &mut r);
    sorted.sort_by_key(|u| (u.u.min(u.v), u.delete));
    corpus.push(("vertex-sorted V=64".into(), GraphScheme::single(64, 7), sorted));
    let (ups, _) = dynamic(40, 800, 0.3, &mut r);
    let nested = LayerRoute::NestedLevels { key: 99, per_level: 2, levels: 4 };
    corpus.push(("nested levels V=40".into(), GraphScheme::stacked(40, 8, 8, nested).unwrap(), ups));
    let weighted: Vec<EdgeUpdate> = random_graph(50, 0.2, &mut r)
        .into_iter()
        .map(|(u, v)| EdgeUpdate::weighted(u, v, r.gen_range(1.0..64.0)))
        .collect();
    let classes = LayerRoute::WeightClasses { base: 2.0, max_weight: 64.0 };
    corpus.push(("weight classes V=50".into(), GraphScheme::stacked(50, 9, 7, classes).unwrap(), weighted));
    let (ups, _) = dynamic(48, 600, 0.3, &mut r);
    // sketches wider than the smallest RAM go through windows
    corpus.push(("16 layers V=48".into(), GraphScheme::stacked(48, 10, 16, LayerRoute::All).unwrap(), ups));

    let grid = [(1 << 12, 1 << 6), (1 << 14, 1 << 7), (1 << 16, 1 << 8)];
    let mut runs = 0;
    for (name, scheme, ups) in &corpus {
        let expect = direct(scheme, ups);
        ensure(expect == direct_graph(scheme, ups), || format!("{name}: oracles disagree"))?;
        for (m, b) in grid {
            for routing in [Routing::Auto, Routing::Direct, Routing::Sort] {
                let got = ingested(EmParams::new(m, b).unwrap(), scheme, ups, routing);
                ensure(got == expect, || format!("{name}, M={m} B={b} {routing:?}: not bit-identical"))?;
                runs += 1;
            }
        }
    }
    let n = 30;
    let hyper = HyperScheme::new(n, 3, 11).unwrap();
    let mut hups = Vec::new();
    for _ in 0..300 {
        let mut s: Vec<u32> = (0..n).collect();
        s.shuffle(&mut r);
        hups.push(HyperUpdate::new(s[..r.gen_range(2..=3)].to_vec(), false));
    }
    let expect = direct(&hyper, &hups);
    for (m, b) in grid {
        let got = ingested(EmParams::new(m, b).unwrap(), &hyper, &hups, Routing::Auto);
        ensure(got == expect, || format!("hypergraph, M={m} B={b}: not bit-identical"))?;
        runs += 1;
    }
    Ok(format!("{} streams x 3 machines, {runs} runs bit-identical", corpus.len() + 1))
}

// 3 --------------------------------------------------------------------------

fn connectivity() -> Outcome {
    let mut r = rng(3);
    let trials = 1000usize;
    let (mut exact, mut sound) = (0, 0);
    let mut unsound = Vec::new();
    for t in 0..trials {
        let n = r.gen_range(2..=256u32);
        let len = r.gen_range(0..=4 * n as usize);
        let (ups, live) = dynamic(n, len, 0.3, &mut r);
        let relocation = if t % 2 == 0 { Relocation::InPlace } else { Relocation::Sorted };
        let cfg = CcConfig { relocation, ..CcConfig::default() };
        let mut dev = BlockDevice::new(EmParams::new(1 << 14, 128).unwrap()).unwrap();
        let scheme = GraphScheme::single(n, t as u64);
        let (arr, _) = ingest(&mut dev, scheme.clone(), &ups).unwrap();
        let c = boruvka_extract(&mut dev, &arr, 0, scheme.layer(0), &cfg).unwrap();
        let labels = c.labels_vec(&mut dev).unwrap();
        let truth = labels_of(n, &live);
        let live_set: BTreeSet<(u32, u32)> = live.iter().copied().collect();
        let mut d = Dsu::new(n as usize);
        let forest_ok = c
            .forest_vec(&mut dev)
            .unwrap()
            .iter()
            .all(|&(u, v)| live_set.contains(&(u, v)) && d.union(u, v));
        let no_wrong_merge = (0..n as usize).all(|v| truth[v] == truth[labels[v] as usize]);
        if forest_ok && no_wrong_merge {
            sound += 1;
        } else {
            unsound.push(t);
        }
        exact += (labels == truth) as usize;
    }
    ensure(sound == trials, || format!("unsound trials {unsound:?}"))?;
    ensure(exact * 100 >= 99 * trials, || format!("exact {}", rate(exact, trials)))?;
    Ok(format!("exact {}, sound {}", rate(exact, trials), rate(sound, trials)))
}

// 4 --------------------------------------------------------------------------

fn ingest_io(p: EmParams, scheme: &GraphScheme, ups: &[EdgeUpdate]) -> u64 {
    let mut dev = BlockDevice::new(p).unwrap();
    let (arr, _) = ingest(&mut dev, scheme.clone(), ups).unwrap();
    let io = dev.io_snapshot().total();
    dev.free(arr.arr);
    io
}

fn ingestion_scaling() -> Outcome {
    let mut r = rng(4);
    let grid = [(1 << 12, 1 << 6), (1 << 14, 1 << 7), (1 << 16, 1 << 8)];
    let n = 256u32;
    let scheme = GraphScheme::single(n, 4);
    let phi = scheme.sketch_words();
    let (long, _) = dynamic(n, 1 << 19, 0.3, &mut r);
    let mut worst_bound: f64 = 0.0;
    let mut doubling = Vec::new();
    let mut adversarial: Vec<f64> = Vec::new();
    let pairs: Vec<(u32, u32)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    let mut distinct: Vec<EdgeUpdate> = pairs.choose_multiple(&mut r, 1 << 14).map(|&(u, v)| EdgeUpdate::insert(u, v)).collect();
    for (m, b) in grid {
        let p = EmParams::new(m, b).unwrap();
        let half = ingest_io(p, &scheme, &long[..1 << 18]);
        let full = ingest_io(p, &scheme, &long);
        let ratio = full as f64 / half as f64;
        doubling.push(ratio);
        ensure((1.8..=2.2).contains(&ratio), || format!("M={m} B={b}: doubling N scaled I/O by {ratio:.3}"))?;
        for (len, io) in [(1 << 18, half), (1 << 19, full)] {
            worst_bound = worst_bound.max(io as f64 / predicted_io(&p, len, n as usize, phi));
        }
        distinct.shuffle(&mut r);
        let random = ingest_io(p, &scheme, &distinct);
        worst_bound = worst_bound.max(random as f64 / predicted_io(&p, distinct.len(), n as usize, phi));
        let mut orders: Vec<Vec<EdgeUpdate>> = Vec::new();
        let mut by_vertex = distinct.clone();
        by_vertex.sort_by_key(|u| (u.u, u.v));
        orders.push(by_vertex.clone());
        by_vertex.reverse();
        orders.push(by_vertex);
        let mut by_hi = distinct.clone();
        by_hi.sort_by_key(|u| (u.v % 2, u.v, u.u));
        orders.push(by_hi);
        // round robin over vertices: consecutive updates hit different buffers
        let mut rr = distinct.clone();
        rr.sort_by_key(|u| (u.v.wrapping_mul(2654435761) % 97, u.u));
        orders.push(rr);
        for o in &orders {
            let io = ingest_io(p, &scheme, o);
            adversarial.push(io as f64 / random as f64);
            worst_bound = worst_bound.max(io as f64 / predicted_io(&p, o.len(), n as usize, phi));
        }
    }
    let worst_adv = adversarial.iter().cloned().fold(0.0, f64::max);
    ensure(worst_adv <= 3.0, || format!("adversarial order costs {worst_adv:.2}x random"))?;
    ensure(worst_bound <= INGEST_IO_CONSTANT, || format!("measured/predicted {worst_bound:.2} > c = {INGEST_IO_CONSTANT}"))?;
    Ok(format!(
        "doubling ratios {:?}, worst adversarial/random {worst_adv:.2}, worst measured/predicted {worst_bound:.2} <= c = {INGEST_IO_CONSTANT}",
        doubling.iter().map(|x| (x * 1000.0).round() / 1000.0).collect::<Vec<_>>()
    ))
}

// 5 --------------------------------------------------------------------------

fn extraction_io() -> Outcome {
    const C: f64 = 24.0;
    let mut worst: f64 = 0.0;
    let mut worst_at = String::new();
    let (mut sorted_paths, mut in_place_paths) = (0, 0);
    for (m, b) in [(1 << 12, 1 << 6), (1 << 14, 1 << 7), (1 << 16, 1 << 8)] {
        for n in [16u32, 32, 64, 256, 512] {
            let mut r = rng(n as u64 + m as u64);
            let edges = random_graph(n, 3.0 / n as f64, &mut r);
            let ups = stream_of(&edges, n, edges.len() / 4, &mut r);
            let p = EmParams::new(m, b).unwrap();
            let scheme = GraphScheme::single(n, 5);
            let phi = scheme.sketch_words();
            let mut dev = BlockDevice::new(p).unwrap();
            let (arr, _) = ingest(&mut dev, scheme.clone(), &ups).unwrap();
            let before = dev.io_snapshot();
            let c = boruvka_extract(&mut dev, &arr, 0, scheme.layer(0), &CcConfig::default()).unwrap();
            let io = dev.io_snapshot().since(&before).total();
            let labels = c.labels_vec(&mut dev).unwrap();
            ensure(c.complete() && labels == labels_of(n, &edges), || format!("M={m} B={b} V={n}: wrong labels"))?;
            if c.stats.sorted_relocation {
                ensure(phi < b, || format!("V={n}: sorted relocation with phi {phi} >= B {b}"))?;
                sorted_paths += 1;
            } else {
                in_place_paths += 1;
            }
            let ratio = io as f64 / cost::sort((n as usize * phi) as f64, &p);
            if ratio > worst {
                worst = ratio;
                worst_at = format!("M={m} B={b} V={n}");
            }
        }
    }
    ensure(sorted_paths > 0 && in_place_paths > 0, || "both relocation paths must run".into())?;
    ensure(worst <= C, || format!("extraction I/O {worst:.2} x sort(V phi) at {worst_at}"))?;
    Ok(format!(
        "worst extraction I/O {worst:.2} x sort(V phi) <= c = {C} (at {worst_at}); {sorted_paths} runs with phi < B (sorted), {in_place_paths} with phi >= B"
    ))
}

// 6 --------------------------------------------------------------------------

fn kconnectivity() -> Outcome {
    let mut r = rng(6);
    let trials = 50;
    let (mut ok, mut disjoint) = (0, 0);
    for t in 0..trials {
        let n = r.gen_range(6..=64u32);
        let k = r.gen_range(1..=6usize);
        let edges = random_graph(n, r.gen_range(0.1..0.5), &mut r);
        let ups = stream_of(&edges, n, edges.len(), &mut r);
        let mut dev = BlockDevice::new(EmParams::new(1 << 14, 128).unwrap()).unwrap();
        let scheme = kconn_scheme(n, k, 600 + t).unwrap();
        let (arr, _) = ingest(&mut dev, scheme.clone(), &ups).unwrap();
        let cert = extract_certificate(&mut dev, arr, &scheme, &KConnConfig::default()).unwrap();
        let truth: BTreeSet<(u32, u32)> = edges.iter().copied().collect();
        let mut seen = BTreeSet::new();
        let mut dis = true;
        for (u, v, _) in cert.edges_vec(&mut dev).unwrap() {
            dis &= truth.contains(&(u, v)) && seen.insert((u, v));
        }
        disjoint += dis as usize;
        let h: Vec<(u32, u32)> = seen.into_iter().collect();
        let (lg, lh) = (oracle_lambda(n as usize, &edges), oracle_lambda(n as usize, &h));
        let agree = (1..=k).all(|kk| (lh >= kk) == (lg >= kk));
        let want = if lg < k { CutValue::Exact(lg) } else { CutValue::AtLeast(k) };
        ok += (agree && min_cut_upto_k(&mut dev, &cert, k).unwrap() == want) as usize;
    }
    ensure(disjoint == trials as usize, || format!("edge-disjoint in {}", rate(disjoint, trials as usize)))?;
    ensure(ok * 100 >= 98 * trials as usize, || format!("certificate {}", rate(ok, trials as usize)))?;

    let n = 32u32;
    let edges = random_graph(n, 0.8, &mut r);
    let ups = stream_of(&edges, n, 0, &mut r);
    let mut io = Vec::new();
    for schedule in [Schedule::Logarithmic, Schedule::Naive] {
        let cfg = KConnConfig { block_size: Some(2), schedule, ..KConnConfig::default() };
        let mut dev = BlockDevice::new(EmParams::new(1 << 14, 128).unwrap()).unwrap();
        let scheme = kconn_scheme(n, 16, 9).unwrap();
        let (arr, _) = ingest(&mut dev, scheme.clone(), &ups).unwrap();
        io.push(extract_certificate(&mut dev, arr, &scheme, &cfg).unwrap().deletion_io as f64);
    }
    let kp = 8.0f64;
    let limit = (kp.log2() + 1.0) / kp;
    let ratio = io[0] / io[1];
    ensure(ratio <= limit, || format!("schedule/naive deletion I/O {ratio:.3} > {limit:.3}"))?;
    Ok(format!(
        "disjoint {}, certificate {}, deletion I/O schedule/naive {ratio:.3} <= {limit:.3} (k' = 8 blocks)",
        rate(disjoint, trials as usize),
        rate(ok, trials as usize)
    ))
}

// 7 --------------------------------------------------------------------------

fn min_cut() -> Outcome {
    let mut r = rng(7);
    let trials = 30;
    let mut ok = 0;
    for t in 0..trials {
        let n = r.gen_range(16..=64u32);
        let eps = if t % 2 == 0 { 0.5 } else { 0.25 };
        let edges = random_graph(n, r.gen_range(0.3..0.9), &mut r);
        let truth = oracle_min_cut(n as usize, &unit(&edges));
        let cfg = CutsConfig::default();
        let stack = SkeletonStack::for_min_cut(n, eps, 700 + t, &cfg).unwrap();
        let ups = stream_of(&edges, n, edges.len() / 4, &mut r);
        let mut dev = BlockDevice::new(EmParams::new(1 << 15, 128).unwrap()).unwrap();
        let (sk, _) = ingest(&mut dev, stack.scheme().clone(), &ups).unwrap();
        let est = approx_min_cut(&mut dev, &stack, &sk, &cfg.kconn).unwrap().estimate as f64;
        ok += (est >= truth && est <= (1.0 + eps) * truth) as usize;
    }
    ensure(ok * 100 >= 95 * trials as usize, || format!("in band {}", rate(ok, trials as usize)))?;
    Ok(format!("estimate in [lambda, (1+eps) lambda] in {}", rate(ok, trials as usize)))
}

// 8 --------------------------------------------------------------------------

fn sparsify(n: u32, eps: f64, edges: &[(u32, u32)], seed: u64) -> extsketch::cuts::WeightedSparsifier {
    let cfg = CutsConfig::default();
    let stack = SkeletonStack::for_sparsifier(n, eps, seed, &cfg).unwrap();
    let ups = stream_of(edges, n, edges.len() / 4, &mut rng(seed));
    let mut dev = BlockDevice::new(EmParams::new(1 << 15, 128).unwrap()).unwrap();
    let (sk, _) = ingest(&mut dev, stack.scheme().clone(), &ups).unwrap();
    build_sparsifier(&mut dev, &stack, &sk, &cfg.kconn).unwrap()
}

fn within(exact: f64, approx: f64, eps: f64) -> bool {
    (1.0 - eps) * exact <= approx && approx <= (1.0 + eps) * exact
}

fn sparsifier() -> Outcome {
    let eps = 0.5;
    let mut r = rng(8);
    let trials = 20;
    let mut ok = 0;
    for t in 0..trials {
        let n = r.gen_range(6..=16u32);
        let edges = random_graph(n, r.gen_range(0.3..0.9), &mut r);
        let h = sparsify(n, eps, &edges, 800 + t);
        let all = (1u64..(1 << (n - 1))).all(|mask| {
            let side = |v: u32| v < n - 1 && mask >> v & 1 == 1;
            let g = edges.iter().filter(|&&(u, v)| side(u) != side(v)).count() as f64;
            within(g, h.cut_value(side) as f64, eps)
        });
        ok += all as usize;
    }
    ensure(ok * 100 >= 95 * trials as usize, || format!("all-cuts sandwich {}", rate(ok, trials as usize)))?;
    let mut st_ok = 0;
    for t in 0..trials {
        let n = r.gen_range(8..=32u32);
        let edges = random_graph(n, r.gen_range(0.2..0.6), &mut r);
        let h = sparsify(n, eps, &edges, 850 + t);
        let s = r.gen_range(0..n);
        let tt = (s + r.gen_range(1..n)) % n;
        let truth = oracle_st_cut(n as usize, &edges, s, tt) as f64;
        st_ok += within(truth, query_st_cut(&h, s, tt).unwrap(), eps) as usize;
    }
    ensure(st_ok * 100 >= 95 * trials as usize, || format!("s-t queries {}", rate(st_ok, trials as usize)))?;
    Ok(format!(
        "all cuts within 1 +- {eps} in {}, s-t queries in {}",
        rate(ok, trials as usize),
        rate(st_ok, trials as usize)
    ))
}

// 9 --------------------------------------------------------------------------

fn bipartite(n: u32, edges: &[(u32, u32)], seed: u64) -> bool {
    let ups = stream_of(edges, n, edges.len() / 2, &mut rng(seed));
    let mut dev = BlockDevice::new(EmParams::new(1 << 14, 128).unwrap()).unwrap();
    bipartite_test(&mut dev, n, &ups, seed, &CcConfig::default()).unwrap().bipartite
}

fn bipartiteness() -> Outcome {
    let (mut ok, mut total) = (0usize, 0usize);
    for n in 1..=6u32 {
        let pairs: Vec<(u32, u32)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        for mask in 0u64..1 << pairs.len() {
            let edges: Vec<(u32, u32)> = (0..pairs.len()).filter(|i| mask >> i & 1 == 1).map(|i| pairs[i]).collect();
            ok += (bipartite(n, &edges, mask ^ (n as u64) << 32) == oracle_bipartite(n as usize, &edges)) as usize;
            total += 1;
        }
    }
    let mut r = rng(9);
    let (mut rok, trials) = (0, 1000);
    for t in 0..trials {
        let n = r.gen_range(2..=64u32);
        let edges = random_graph(n, r.gen_range(0.5..2.0) / n as f64, &mut r);
        rok += (bipartite(n, &edges, 900 + t as u64) == oracle_bipartite(n as usize, &edges)) as usize;
    }
    ensure(ok * 100 >= 99 * total, || format!("exhaustive {}", rate(ok, total)))?;
    ensure(rok * 100 >= 99 * trials, || format!("random {}", rate(rok, trials)))?;
    Ok(format!("exhaustive V <= 6 {}, random {}", rate(ok, total), rate(rok, trials)))
}

// 10 -------------------------------------------------------------------------

fn mst() -> Outcome {
    let eps = 0.25;
    let w_max = 100.0;
    let mut r = rng(10);
    let trials = 20;
    let mut ok = 0;
    for t in 0..trials {
        let n = r.gen_range(16..=128u32);
        let mut edges: Vec<(u32, u32)> = (1..n).map(|v| (r.gen_range(0..v), v)).collect();
        edges.extend(random_graph(n, 4.0 / n as f64, &mut r));
        let set: BTreeSet<(u32, u32)> = edges.into_iter().collect();
        let weighted: Vec<(u32, u32, f64)> = set.iter().map(|&(u, v)| (u, v, r.gen_range(1.0..=w_max))).collect();
        let ups: Vec<EdgeUpdate> = weighted.iter().map(|&(u, v, w)| EdgeUpdate::weighted(u, v, w)).collect();
        let mut dev = BlockDevice::new(EmParams::new(1 << 14, 128).unwrap()).unwrap();
        let est = mst_weight(&mut dev, n, &ups, eps, w_max, 1000 + t, &CcConfig::default()).unwrap().estimate;
        let truth = oracle_msf(n as usize, &weighted);
        ok += (est >= truth - 1e-9 && est <= (1.0 + eps) * truth + 1e-9) as usize;
    }
    ensure(ok * 100 >= 95 * trials as usize, || format!("in band {}", rate(ok, trials as usize)))?;
    for n in [2u32, 17, 128] {
        let tree: Vec<EdgeUpdate> = (1..n).map(|v| EdgeUpdate::insert(r.gen_range(0..v), v)).collect();
        let mut dev = BlockDevice::new(EmParams::new(1 << 14, 128).unwrap()).unwrap();
        let est = mst_weight(&mut dev, n, &tree, eps, w_max, n as u64, &CcConfig::default()).unwrap().estimate;
        ensure(est == (n - 1) as f64, || format!("unit tree on {n} vertices gave {est}"))?;
    }
    Ok(format!("estimate in [w(T), (1+eps) w(T)] in {}, unit trees exact", rate(ok, trials as usize)))
}

// 11 -------------------------------------------------------------------------

fn hypergraphs() -> Outcome {
    let mut r = rng(11);
    let trials = 200;
    let mut ok = 0;
    for t in 0..trials {
        let n = r.gen_range(3..=64u32);
        let triples = (n * (n - 1) * (n - 2) / 6) as usize;
        let m = r.gen_range(0..=n as usize).min(triples);
        let mut live: BTreeSet<Vec<u32>> = BTreeSet::new();
        let mut ups = Vec::new();
        while live.len() < m {
            let mut ids: Vec<u32> = (0..n).collect();
            ids.shuffle(&mut r);
            let mut e = ids[..3].to_vec();
            e.sort();
            if live.insert(e.clone()) {
                ups.push(HyperUpdate::new(e, false));
            }
        }
        // delete and re-insert some, delete others for good
        for e in live.clone().iter().take(m / 3) {
            ups.push(HyperUpdate::new(e.clone(), true));
            if r.gen_bool(0.5) {
                ups.push(HyperUpdate::new(e.clone(), false));
            } else {
                live.remove(e);
            }
        }
        let mut dev = BlockDevice::new(EmParams::new(1 << 14, 128).unwrap()).unwrap();
        let c = hypergraph_components(&mut dev, n, 3, &ups, 1100 + t, &CcConfig::default()).unwrap();
        let mut d = Dsu::new(n as usize);
        for e in &live {
            d.union(e[0], e[1]);
            d.union(e[1], e[2]);
        }
        let truth: Vec<u32> = (0..n).map(|v| d.find(v)).collect();
        let truth = min_labels(&truth);
        ok += (c.labels_vec(&mut dev).unwrap() == truth) as usize;
    }
    ensure(ok * 100 >= 99 * trials as usize, || format!("3-uniform {}", rate(ok, trials as usize)))?;
    let checks = 50;
    for t in 0..checks {
        let n = r.gen_range(2..=64u32);
        let edges = random_graph(n, 1.5 / n as f64, &mut r);
        let ups = stream_of(&edges, n, edges.len() / 3, &mut r);
        let hups: Vec<HyperUpdate> = ups.iter().map(|u| HyperUpdate::new(vec![u.u, u.v], u.delete)).collect();
        let mut dev = BlockDevice::new(EmParams::new(1 << 14, 128).unwrap()).unwrap();
        let hc = hypergraph_components(&mut dev, n, 2, &hups, 1200 + t, &CcConfig::default()).unwrap();
        let scheme = GraphScheme::single(n, 1200 + t);
        let (arr, _) = ingest(&mut dev, scheme.clone(), &ups).unwrap();
        let gc = boruvka_extract(&mut dev, &arr, 0, scheme.layer(0), &CcConfig::default()).unwrap();
        let (hl, gl) = (hc.labels_vec(&mut dev).unwrap(), gc.labels_vec(&mut dev).unwrap());
        ensure(hl == gl, || format!("rank-2 check {t}: labelings differ"))?;
    }
    Ok(format!("3-uniform labeling exact in {}, rank 2 equals graph labeling in {checks}/{checks}", rate(ok, trials as usize)))
}

/// Relabel each vertex by the smallest id in its class.
fn min_labels(roots: &[u32]) -> Vec<u32> {
    let mut first: HashMap<u32, u32> = HashMap::new();
    roots.iter().enumerate().map(|(v, &r)| *first.entry(r).or_insert(v as u32)).collect()
}

// 12 -------------------------------------------------------------------------

fn densest() -> Outcome {
    let eps = 0.5;
    let mut r = rng(12);
    let trials = 20;
    let mut ok = 0;
    let mut details = Vec::new();
    for t in 0..trials {
        let n = r.gen_range(112..=128u32);
        let edges = planted(n, n / 2, 0.4, 0.9, &mut r);
        let ups = stream_of(&edges, n, edges.len() / 10, &mut r);
        let mut dev = BlockDevice::new(EmParams::new(1 << 16, 256).unwrap()).unwrap();
        let cfg = DensestConfig { eps, ..DensestConfig::default() };
        let res = densest_subgraph(&mut dev, n, &ups, 1300 + t, &cfg).map_err(|e| format!("trial {t}: {e}"))?;
        let (d, vs) = oracle_peel(n as usize, &res.sample);
        ensure(res.peeling.density == d && res.peeling.vertices == vs, || format!("trial {t}: peeling differs from oracle"))?;
        let exact = oracle_densest(n as usize, &edges);
        let hit = res.estimate >= exact / (2.0 * (1.0 + eps)) && res.estimate <= (1.0 + eps) * exact;
        ok += hit as usize;
        if !hit {
            details.push(format!("trial {t}: {:.2} vs d* {exact:.2}", res.estimate));
        }
    }
    ensure(ok * 100 >= 90 * trials as usize, || format!("in band {}; {}", rate(ok, trials as usize), details.join(", ")))?;
    Ok(format!("estimate in [d*/(2(1+eps)), (1+eps) d*] in {}, peeling exact on every sample", rate(ok, trials as usize)))
}

// 13 -------------------------------------------------------------------------

/// Everything a connectivity trial produces, rendered to bytes.
fn cc_trial_bytes(path: &std::path::Path, seed: u64, cfg: &CcConfig, p: EmParams) -> Vec<u8> {
    let stream = parse_stream(std::io::BufReader::new(std::fs::File::open(path).unwrap())).unwrap();
    let Updates::Graph(ups) = stream.updates else { panic!("graph stream expected") };
    let n = stream.header.num_vertices;
    let mut dev = BlockDevice::new(p).unwrap();
    let scheme = GraphScheme::single(n, seed);
    let (arr, _) = ingest(&mut dev, scheme.clone(), &ups).unwrap();
    let c = boruvka_extract(&mut dev, &arr, 0, scheme.layer(0), cfg).unwrap();
    let mut out = Vec::new();
    c.write_labels(&mut dev, &mut out).unwrap();
    c.write_forest(&mut dev, &mut out).unwrap();
    out.extend(format!("{:?} {:?}\n", c.stats, dev.io_snapshot()).into_bytes());
    out
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(13);
    let p = EmParams::new(1 << 12, 64).unwrap();
    let mut failing = 0;
    for t in 0..20u64 {
        let n = r.gen_range(8..=200u32);
        let (ups, live) = dynamic(n, 3 * n as usize, 0.3, &mut r);
        let path = dir.path().join(format!("trial{t}.txt"));
        write_graph_stream(std::fs::File::create(&path).unwrap(), n, None, &ups).unwrap();
        // a round cap of one makes most trials fail: those must fail identically
        let cfg = CcConfig { max_rounds: Some(if t % 2 == 0 { 1 } else { 64 }), ..CcConfig::default() };
        let a = cc_trial_bytes(&path, t, &cfg, p);
        let b = cc_trial_bytes(&path, t, &cfg, p);
        ensure(a == b, || format!("trial {t}: reruns differ"))?;
        let expect: Vec<u8> = labels_of(n, &live).iter().enumerate().flat_map(|(v, l)| format!("{v} {l}\n").into_bytes()).collect();
        failing += (!a.starts_with(&expect)) as usize;
    }
    ensure(failing > 0, || "no failing trial was exercised".into())?;

    // min cut from a stream file, twice
    let edges = random_graph(24, 0.4, &mut r);
    let path = dir.path().join("mincut.txt");
    let ups = stream_of(&edges, 24, 10, &mut r);
    write_graph_stream(std::fs::File::create(&path).unwrap(), 24, None, &ups).unwrap();
    let run = || {
        let s = parse_stream(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
        let Updates::Graph(ups) = s.updates else { unreachable!() };
        let cfg = CutsConfig::default();
        let stack = SkeletonStack::for_min_cut(24, 0.5, 77, &cfg).unwrap();
        let mut dev = BlockDevice::new(EmParams::new(1 << 14, 128).unwrap()).unwrap();
        let (sk, _) = ingest(&mut dev, stack.scheme().clone(), &ups).unwrap();
        let e = approx_min_cut(&mut dev, &stack, &sk, &cfg.kconn).unwrap();
        format!("{} {} {:?} {:?} {:?}", e.estimate, e.level, e.side, e.evaluated, dev.io_snapshot())
    };
    ensure(run() == run(), || "min cut reruns differ".into())?;
    Ok(format!("20 connectivity trials ({failing} failing) and a min cut rerun byte-identically from their stream files"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("sketch algebra", sketch_algebra),
        ("ingestion equivalence", ingestion_equivalence),
        ("connectivity correctness", connectivity),
        ("ingestion I/O scaling", ingestion_scaling),
        ("extraction I/O", extraction_io),
        ("k-connectivity", kconnectivity),
        ("approximate min cut", min_cut),
        ("cut sparsifier", sparsifier),
        ("bipartiteness", bipartiteness),
        ("MST weight", mst),
        ("hypergraph connectivity", hypergraphs),
        ("densest subgraph", densest),
        ("reproducibility", reproducibility),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        let start = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
