//! Densest subgraph from a bucketed edge sketch.
//!
//! Potential edges are hashed into `T = ceil(V / eps²)` buckets. Each bucket
//! keeps an exact count of its surviving edges and a run of independent
//! ℓ₀-sketches of its edge set, so a stream update touches one contiguous
//! bucket record. After the stream every bucket draws `X_b ~ Bin(E_b, p)`
//! and recovers `X_b` distinct edges by querying its sketches in turn, each
//! query seeing the edges recovered before it deleted. Greedy peeling of the
//! sampled graph, scaled by `1/p`, estimates the densest subgraph density.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ingest::{ingest, TaggedUpdate, VertexScheme};
use crate::em::{ext_sort_by, BlockDevice, ExtArray, Reader, Writer};
use crate::error::{Error, Result};
use crate::sketch::hash::{self, PolyHash};
use crate::sketch::{EdgeKey, Sample, SketchHeader, SketchParams, Sketcher};
use crate::stream::EdgeUpdate;

/// Bucket records: one counter word, then the ℓ₀-sketches.
#[derive(Debug, Clone)]
pub struct BucketScheme {
    num_vertices: u32,
    buckets: usize,
    hash: PolyHash,
    sketches: Vec<Sketcher>,
}

impl BucketScheme {
    /// `buckets` buckets of `per_bucket` sketches, assigned by a polynomial
    /// hash of degree `ceil(log2 V)`.
    pub fn new(num_vertices: u32, buckets: usize, per_bucket: usize, seed: u64) -> Result<Self> {
        if buckets == 0 || per_bucket == 0 {
            return Err(Error::InvalidParams("bucket scheme needs buckets and sketches".into()));
        }
        let degree = crate::sketch::ceil_log2(num_vertices.max(2) as u64) as usize;
        let base = Sketcher::new(SketchParams::for_graph(num_vertices, hash::derive(seed, 1)));
        let sketches = (0..per_bucket as u64)
            .map(|j| base.with_seed(hash::derive(seed, 0x4255_434b_0000 + j)))
            .collect();
        Ok(Self {
            num_vertices,
            buckets,
            hash: PolyHash::new(hash::derive(seed, 2), degree),
            sketches,
        })
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn per_bucket(&self) -> usize {
        self.sketches.len()
    }

    pub fn sketch_words_each(&self) -> usize {
        self.sketches[0].words()
    }

    pub fn bucket_of(&self, edge: EdgeKey) -> usize {
        self.hash.bucket(edge.index(self.num_vertices), self.buckets as u64) as usize
    }

    /// Word offset of sketch `j` inside a bucket record.
    pub fn sketch_offset(&self, j: usize) -> usize {
        1 + j * self.sketch_words_each()
    }

    pub fn sketcher(&self, j: usize) -> &Sketcher {
        &self.sketches[j]
    }
}

impl VertexScheme for BucketScheme {
    type Input = EdgeUpdate;

    fn num_slots(&self) -> usize {
        self.buckets
    }

    fn sketch_words(&self) -> usize {
        1 + self.sketches.len() * self.sketch_words_each()
    }

    fn max_copies(&self) -> usize {
        1
    }

    fn expand(&self, up: &EdgeUpdate, out: &mut Vec<TaggedUpdate>) -> Result<()> {
        let e = EdgeKey::checked(up.u, up.v, self.num_vertices)?;
        out.push(TaggedUpdate {
            key: e.index(self.num_vertices),
            target: self.bucket_of(e) as u32,
            negative: up.delete,
            tag: 0,
            aux: 0,
        });
        Ok(())
    }

    fn apply(&self, window: &mut [u64], offset: usize, up: &TaggedUpdate) {
        let coef = up.coef();
        if offset == 0 {
            window[0] = window[0].wrapping_add(coef as u64);
        }
        let sw = self.sketch_words_each();
        let end = offset + window.len();
        for (j, sk) in self.sketches.iter().enumerate() {
            let (ss, se) = (self.sketch_offset(j), self.sketch_offset(j) + sw);
            if se <= offset || ss >= end {
                continue;
            }
            if ss >= offset && se <= end {
                sk.update(&mut window[ss - offset..se - offset], up.key, coef);
            } else {
                let s = ss.max(offset);
                let e = se.min(end);
                sk.update_window(&mut window[s - offset..e - offset], s - ss, up.key, coef);
            }
        }
    }

    fn header_words(&self) -> Vec<u64> {
        let mut h = SketchHeader {
            params: *self.sketches[0].params(),
        }
        .to_words()
        .to_vec();
        h.extend([self.buckets as u64, self.sketches.len() as u64]);
        h
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DensestConfig {
    pub eps: f64,
    /// Sketches per bucket: `ceil(sketch_factor * log2(V)^2)`.
    pub sketch_factor: f64,
    /// Fixed sampling rate. Skips the density precondition and the
    /// small-bucket check, which both presume the derived rate.
    pub sample_rate: Option<f64>,
}

impl Default for DensestConfig {
    fn default() -> Self {
        Self {
            eps: 0.5,
            sketch_factor: 2.0,
            sample_rate: None,
        }
    }
}

/// Draw from `Bin(n, p)` by inverse transform.
pub fn binomial(n: u64, p: f64, rng: &mut impl Rng) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    let u: f64 = rng.gen();
    let odds = (p / (1.0 - p)).ln();
    let mut ln_pmf = n as f64 * (1.0 - p).ln();
    let mut cdf = 0.0;
    for k in 0..n {
        cdf += ln_pmf.exp();
        if u < cdf {
            return k;
        }
        ln_pmf += ((n - k) as f64 / (k + 1) as f64).ln() + odds;
    }
    n
}

/// Outcome of greedy peeling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Peeling {
    /// Best `|E(S)| / |S|` over all peeling suffixes `S`.
    pub density: f64,
    pub num_edges: u64,
    /// The suffix attaining it, sorted.
    pub vertices: Vec<u32>,
    /// Removal order.
    pub order: Vec<u32>,
}

/// Charikar's greedy peeling on the `(u, v)` records of `edges` over
/// vertices `0..n`. Every step sorts the live vertices by `(degree, id)`
/// and removes the first. Ties in density keep the larger suffix.
pub fn charikar_peel(dev: &mut BlockDevice, n: u32, edges: &ExtArray) -> Result<Peeling> {
    if n == 0 {
        return Err(Error::InvalidArgument("peeling needs a vertex".into()));
    }
    let both = dev.alloc_array(2 * edges.len(), 2);
    let mut w = Writer::new(dev, both);
    let mut r = Reader::new(dev, edges);
    let mut e = [0u64; 2];
    while r.next_into(dev, &mut e)? {
        w.push_words(dev, &e)?;
        w.push_words(dev, &[e[1], e[0]])?;
    }
    drop(r);
    let both = w.finish(dev)?;
    let mut adj = ext_sort_by(dev, &both, |w| w[0] << 32 | w[1])?;
    dev.free(both);
    let ids: Vec<u64> = (0..n as u64).collect();
    let mut alive = dev.array_from_records(&ids)?;

    let mut m = edges.len() as u64;
    let mut best = (m as f64 / n as f64, m, 0usize);
    let mut order = Vec::with_capacity(n as usize);
    for step in 0..n as usize {
        // (degree, vertex) for every live vertex
        let degs = dev.alloc_array(alive.len(), 2);
        let mut w = Writer::new(dev, degs);
        let mut ar = Reader::new(dev, &alive);
        let mut er = Reader::new(dev, &adj);
        let mut has = er.next_into(dev, &mut e)?;
        let mut v = [0u64; 1];
        while ar.next_into(dev, &mut v)? {
            let mut d = 0u64;
            while has && e[0] == v[0] {
                d += 1;
                has = er.next_into(dev, &mut e)?;
            }
            w.push_words(dev, &[d, v[0]])?;
        }
        drop(ar);
        drop(er);
        let degs = w.finish(dev)?;
        let sorted = ext_sort_by(dev, &degs, |w| w[0] << 32 | w[1])?;
        dev.free(degs);
        let mut first = [0u64; 2];
        dev.read_record_words(&sorted, 0, &mut first)?;
        dev.free(sorted);
        let [d, x] = first;
        order.push(x as u32);
        m -= d;

        let kept = dev.alloc_array(adj.len(), 2);
        let mut w = Writer::new(dev, kept);
        let mut r = Reader::new(dev, &adj);
        while r.next_into(dev, &mut e)? {
            if e[0] != x && e[1] != x {
                w.push_words(dev, &e)?;
            }
        }
        drop(r);
        let kept = w.finish(dev)?;
        dev.free(std::mem::replace(&mut adj, kept));
        let rest = dev.alloc_array(alive.len() - 1, 1);
        let mut w = Writer::new(dev, rest);
        let mut r = Reader::new(dev, &alive);
        while r.next_into(dev, &mut v)? {
            if v[0] != x {
                w.push_words(dev, &v)?;
            }
        }
        drop(r);
        let rest = w.finish(dev)?;
        dev.free(std::mem::replace(&mut alive, rest));

        let left = n as usize - step - 1;
        if left > 0 && m as f64 / left as f64 > best.0 {
            best = (m as f64 / left as f64, m, step + 1);
        }
    }
    dev.free(adj);
    dev.free(alive);
    let mut vertices = order[best.2..].to_vec();
    vertices.sort_unstable();
    Ok(Peeling {
        density: best.0,
        num_edges: best.1,
        vertices,
        order,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DensestResult {
    /// Peeled density of the sample, scaled by `1/p`.
    pub estimate: f64,
    pub vertices: Vec<u32>,
    pub sample_rate: f64,
    pub total_edges: u64,
    pub sampled_edges: u64,
    pub buckets: usize,
    pub sketches_per_bucket: usize,
    /// The sampled graph `H'`.
    pub sample: Vec<(u32, u32)>,
    /// Peeling of the sampled graph.
    pub peeling: Peeling,
}

/// Estimate the densest subgraph of a dynamic graph stream.
pub fn densest_subgraph(
    dev: &mut BlockDevice,
    num_vertices: u32,
    updates: &[EdgeUpdate],
    seed: u64,
    cfg: &DensestConfig,
) -> Result<DensestResult> {
    let eps = cfg.eps;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon {eps} outside (0, 1]")));
    }
    let n = num_vertices;
    let lg = (n.max(2) as f64).log2();
    let buckets = (n as f64 / (eps * eps)).ceil().max(1.0) as usize;
    let per_bucket = (cfg.sketch_factor * lg * lg).ceil().max(1.0) as usize;
    let scheme = BucketScheme::new(n, buckets, per_bucket, seed)?;
    let (arr, _) = ingest(dev, scheme.clone(), updates)?;
    let phi = arr.words;

    let mut counts = Vec::with_capacity(buckets);
    let mut c = [0u64; 1];
    for b in 0..buckets {
        dev.read_words(&arr.arr, (b * phi) as u64, &mut c)?;
        let x = c[0] as i64;
        if x < 0 {
            return Err(Error::Corrupt(format!("bucket {b} counts {x} edges")));
        }
        counts.push(x as u64);
    }
    let total: u64 = counts.iter().sum();
    let p = match cfg.sample_rate {
        Some(p) => p.clamp(0.0, 1.0),
        None => {
            let ratio = eps * eps * total as f64 / n as f64;
            if ratio < lg {
                return Err(Error::DensityPrecondition {
                    ratio,
                    required: lg,
                });
            }
            let limit = 4.0 * ratio;
            if let Some((b, &e)) = counts.iter().enumerate().find(|(_, &e)| e as f64 > limit) {
                return Err(Error::BucketOverflow {
                    bucket: b,
                    edges: e,
                    limit,
                });
            }
            (n as f64 * lg / (eps * eps * total as f64)).min(1.0)
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(hash::derive(seed, 0x42494e));
    let sw = scheme.sketch_words_each();
    if sw + dev.block_words() > dev.ram_words() / 2 {
        return Err(Error::RecordTooLarge {
            record_words: sw,
            ram_words: dev.ram_words(),
        });
    }
    let sample = dev.alloc_array(total as usize, 2);
    let mut w = Writer::new(dev, sample);
    let mut sampled = 0u64;
    {
        let _lease = dev.lease(sw);
        let mut buf = vec![0u64; sw];
        for (b, &eb) in counts.iter().enumerate() {
            let want = binomial(eb, p, &mut rng);
            let mut got: Vec<u64> = Vec::with_capacity(want as usize);
            let mut j = 0;
            while (got.len() as u64) < want {
                if j == per_bucket {
                    return Err(Error::RecoveryShortfall {
                        bucket: b,
                        recovered: got.len() as u64,
                        wanted: want,
                    });
                }
                let sk = scheme.sketcher(j);
                dev.read_words(&arr.arr, (b * phi + scheme.sketch_offset(j)) as u64, &mut buf)?;
                for &idx in &got {
                    sk.update(&mut buf, idx, -1);
                }
                match sk.sample_where(&buf, |i| EdgeKey::from_index(i, n).is_some()) {
                    Sample::Index(i) => got.push(i),
                    Sample::Fail => {}
                    Sample::Empty => {
                        return Err(Error::RecoveryShortfall {
                            bucket: b,
                            recovered: got.len() as u64,
                            wanted: want,
                        })
                    }
                }
                j += 1;
            }
            for idx in got {
                let e = EdgeKey::from_index(idx, n).unwrap();
                w.push_words(dev, &[e.u as u64, e.v as u64])?;
                sampled += 1;
            }
        }
    }
    let sample = w.finish(dev)?;
    dev.free(arr.arr);
    log::debug!("densest: E = {total}, p = {p:.4}, sampled {sampled} edges");
    let peeling = charikar_peel(dev, n, &sample)?;
    let edges = dev
        .read_all::<(u64, u64)>(&sample)?
        .into_iter()
        .map(|(u, v)| (u as u32, v as u32))
        .collect();
    dev.free(sample);
    Ok(DensestResult {
        estimate: if p > 0.0 { peeling.density / p } else { 0.0 },
        vertices: peeling.vertices.clone(),
        sample_rate: p,
        total_edges: total,
        sampled_edges: sampled,
        buckets,
        sketches_per_bucket: per_bucket,
        sample: edges,
        peeling,
    })
}
