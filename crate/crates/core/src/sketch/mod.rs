//! Linear ℓ₀-sampling vertex sketches.
//!
//! A sketch is `C` independent samplers, each with `L` nested subsampling
//! levels. Level `l` of copy `c` sees the coordinates whose hash depth is at
//! least `l` and stores a one-sparse recovery bucket:
//!
//! * `γ` the signed sum of coefficients (wrapping `i64`),
//! * `σ` the signed sum of `coefficient * index` (wrapping `i64`),
//! * `τ` the fingerprint `Σ coefficient * z_c^index mod p`, `p = 2^61 - 1`.
//!
//! A bucket is accepted as one-sparse when `γ = ±1`, `i = γσ` is a valid
//! index that hashes to the bucket's level, and `τ = γ z_c^i`. Buckets are
//! stored as three consecutive words; copy `c`, level `l` starts at word
//! `3 (c L + l)`.

pub mod field;
pub mod hash;
mod hyper;

pub use hyper::HyperCodec;

use std::sync::Arc;

use crate::error::{Error, Result};

/// Default copy multiplier `c₀`.
pub const DEFAULT_C0: f64 = 2.0;

/// Number of header words in a serialized sketch array.
pub const HEADER_WORDS: usize = 8;
const MAGIC: u64 = 0x4558_5453_4b45_5431;

/// Dimensions and seed of one sketch family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SketchParams {
    pub num_vertices: u32,
    /// Size of the coordinate space.
    pub domain: u64,
    pub levels: usize,
    pub copies: usize,
    pub seed: u64,
}

/// `ceil(log2 x)`, zero for `x <= 1`.
pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

impl SketchParams {
    /// Graph sketches over edge indices `u V + v`: `L = ceil(log2 V²) + 2`,
    /// `C = ceil(c₀ log2 V)`.
    pub fn for_graph(num_vertices: u32, seed: u64) -> Self {
        let v = num_vertices.max(1) as u64;
        Self::for_domain(num_vertices, v * v, DEFAULT_C0, seed)
    }

    /// Sketches over an arbitrary coordinate space of size `domain`, with
    /// `C = ceil(c₀ log2(domain) / 2)` copies.
    pub fn for_domain(num_vertices: u32, domain: u64, c0: f64, seed: u64) -> Self {
        let domain = domain.max(1);
        let levels = ceil_log2(domain) as usize + 2;
        let half_log = (domain as f64).log2() / 2.0;
        let copies = ((c0 * half_log - 1e-9).ceil() as usize).max(1);
        Self {
            num_vertices,
            domain,
            levels,
            copies,
            seed,
        }
    }

    /// Words per vertex sketch, `3 C L`.
    pub fn words(&self) -> usize {
        3 * self.copies * self.levels
    }

    pub fn header(&self) -> SketchHeader {
        SketchHeader { params: *self }
    }
}

/// Serialized header of a sketch array: magic, V, L, C, seed, p, domain,
/// words per sketch, each one little-endian word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SketchHeader {
    pub params: SketchParams,
}

impl SketchHeader {
    pub fn to_words(&self) -> [u64; HEADER_WORDS] {
        let p = &self.params;
        [
            MAGIC,
            p.num_vertices as u64,
            p.levels as u64,
            p.copies as u64,
            p.seed,
            field::P,
            p.domain,
            p.words() as u64,
        ]
    }

    pub fn from_words(w: &[u64]) -> Result<Self> {
        if w.len() < HEADER_WORDS {
            return Err(Error::Corrupt("truncated sketch header".into()));
        }
        if w[0] != MAGIC {
            return Err(Error::Corrupt(format!("bad magic {:#x}", w[0])));
        }
        if w[5] != field::P {
            return Err(Error::Corrupt(format!("unsupported prime {}", w[5])));
        }
        let params = SketchParams {
            num_vertices: u32::try_from(w[1]).map_err(|_| Error::Corrupt("vertex count".into()))?,
            levels: w[2] as usize,
            copies: w[3] as usize,
            seed: w[4],
            domain: w[6],
        };
        if params.levels == 0
            || params.copies == 0
            || params.levels != ceil_log2(params.domain.max(1)) as usize + 2
            || w[7] != params.words() as u64
        {
            return Err(Error::Corrupt("inconsistent sketch dimensions".into()));
        }
        Ok(Self { params })
    }
}

/// Outcome of querying a sketch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sample {
    /// Every bucket is zero: the summarized vector is zero.
    Empty,
    /// A verified nonzero coordinate.
    Index(u64),
    /// Nonzero vector but no bucket passed the one-sparse test.
    Fail,
}

/// Update and query logic for one sketch family, with the per-copy hash
/// keys and fingerprint power tables precomputed.
#[derive(Debug, Clone)]
pub struct Sketcher {
    params: SketchParams,
    keys: Vec<u64>,
    powers: Arc<Vec<field::PowTable>>,
}

impl Sketcher {
    pub fn new(params: SketchParams) -> Self {
        let bits = ceil_log2(params.domain).max(1);
        let keys = (0..params.copies as u64)
            .map(|c| hash::derive(params.seed, 2 * c))
            .collect();
        let powers = (0..params.copies as u64)
            .map(|c| {
                let z = 2 + hash::derive(params.seed, 2 * c + 1) % (field::P - 3);
                field::PowTable::new(z, bits)
            })
            .collect();
        Self {
            params,
            keys,
            powers: Arc::new(powers),
        }
    }

    /// An independent sketch family of the same shape: subsampling keys are
    /// derived from `seed`, fingerprint tables are shared with `self`.
    pub fn with_seed(&self, seed: u64) -> Self {
        let params = SketchParams { seed, ..self.params };
        let keys = (0..params.copies as u64)
            .map(|c| hash::derive(seed, 2 * c))
            .collect();
        Self {
            params,
            keys,
            powers: Arc::clone(&self.powers),
        }
    }

    pub fn params(&self) -> &SketchParams {
        &self.params
    }

    pub fn words(&self) -> usize {
        self.params.words()
    }

    pub fn zero(&self) -> Vec<u64> {
        vec![0; self.words()]
    }

    #[inline]
    fn depth(&self, copy: usize, index: u64) -> usize {
        (hash::depth(self.keys[copy], index) as usize).min(self.params.levels - 1)
    }

    /// Add `coef` at coordinate `index`.
    pub fn update(&self, s: &mut [u64], index: u64, coef: i64) {
        debug_assert_eq!(s.len(), self.words());
        debug_assert!(index < self.params.domain);
        let levels = self.params.levels;
        let c_res = field::from_i64(coef);
        let dsig = (coef as u64).wrapping_mul(index);
        for c in 0..self.params.copies {
            let d = self.depth(c, index);
            let f = field::mul(c_res, self.powers[c].pow(index));
            let base = 3 * c * levels;
            for b in s[base..base + 3 * (d + 1)].chunks_exact_mut(3) {
                b[0] = b[0].wrapping_add(coef as u64);
                b[1] = b[1].wrapping_add(dsig);
                b[2] = field::add(b[2], f);
            }
        }
    }

    /// Like [`update`](Self::update) but only touching the words
    /// `[offset, offset + window.len())` of the sketch, held in `window`.
    pub fn update_window(&self, window: &mut [u64], offset: usize, index: u64, coef: i64) {
        let levels = self.params.levels;
        let end = offset + window.len();
        let first_copy = offset / (3 * levels);
        let last_copy = end.div_ceil(3 * levels).min(self.params.copies);
        let c_res = field::from_i64(coef);
        let dsig = (coef as u64).wrapping_mul(index);
        for c in first_copy..last_copy {
            let d = self.depth(c, index);
            let f = field::mul(c_res, self.powers[c].pow(index));
            for l in 0..=d {
                let base = 3 * (c * levels + l);
                for (t, delta) in [(0, coef as u64), (1, dsig)] {
                    let w = base + t;
                    if w >= offset && w < end {
                        let x = &mut window[w - offset];
                        *x = x.wrapping_add(delta);
                    }
                }
                let w = base + 2;
                if w >= offset && w < end {
                    let x = &mut window[w - offset];
                    *x = field::add(*x, f);
                }
            }
        }
    }

    /// Query for a nonzero coordinate.
    pub fn sample(&self, s: &[u64]) -> Sample {
        self.sample_where(s, |_| true)
    }

    /// Query, additionally requiring `accept(index)` of a recovered index.
    pub fn sample_where(&self, s: &[u64], accept: impl Fn(u64) -> bool) -> Sample {
        debug_assert_eq!(s.len(), self.words());
        let levels = self.params.levels;
        let mut nonzero = false;
        for c in 0..self.params.copies {
            for l in (0..levels).rev() {
                let b = 3 * (c * levels + l);
                let (g, sg, t) = (s[b] as i64, s[b + 1] as i64, s[b + 2]);
                if g == 0 && sg == 0 && t == 0 {
                    continue;
                }
                nonzero = true;
                if g != 1 && g != -1 {
                    continue;
                }
                let idx = sg.wrapping_mul(g);
                if idx < 0 || idx as u64 >= self.params.domain {
                    continue;
                }
                let idx = idx as u64;
                if self.depth(c, idx) < l || !accept(idx) {
                    continue;
                }
                let z = self.powers[c].pow(idx);
                let expect = if g == 1 { z } else { field::neg(z) };
                if t == expect {
                    return Sample::Index(idx);
                }
            }
        }
        if nonzero {
            Sample::Fail
        } else {
            Sample::Empty
        }
    }
}

/// Componentwise sum `dst += src`.
pub fn merge_into(dst: &mut [u64], src: &[u64]) {
    assert_eq!(dst.len() % 3, 0);
    merge_window(dst, src, 0);
}

/// Componentwise sum over the words `[offset, offset + dst.len())` of two
/// sketches, held in `dst` and `src`.
pub fn merge_window(dst: &mut [u64], src: &[u64], offset: usize) {
    assert_eq!(dst.len(), src.len(), "sketch size mismatch");
    for (i, (d, s)) in dst.iter_mut().zip(src).enumerate() {
        *d = if (offset + i) % 3 == 2 {
            field::add(*d, *s)
        } else {
            d.wrapping_add(*s)
        };
    }
}

pub fn is_zero(s: &[u64]) -> bool {
    s.iter().all(|&w| w == 0)
}

/// Undirected edge with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeKey {
    pub u: u32,
    pub v: u32,
}

impl EdgeKey {
    /// Normalizes endpoint order; rejects self-loops.
    pub fn new(a: u32, b: u32) -> Result<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(Self { u: a, v: b }),
            std::cmp::Ordering::Greater => Ok(Self { u: b, v: a }),
            std::cmp::Ordering::Equal => Err(Error::SelfLoop(a, b)),
        }
    }

    pub fn checked(a: u32, b: u32, num_vertices: u32) -> Result<Self> {
        for x in [a, b] {
            if x >= num_vertices {
                return Err(Error::VertexOutOfRange {
                    vertex: x as u64,
                    num_vertices: num_vertices as u64,
                });
            }
        }
        Self::new(a, b)
    }

    /// `u V + v`.
    pub fn index(&self, num_vertices: u32) -> u64 {
        self.u as u64 * num_vertices as u64 + self.v as u64
    }

    pub fn from_index(index: u64, num_vertices: u32) -> Option<Self> {
        let n = num_vertices as u64;
        if n == 0 {
            return None;
        }
        let (u, v) = (index / n, index % n);
        (u < v && v < n).then_some(Self {
            u: u as u32,
            v: v as u32,
        })
    }
}

/// Which endpoint's sketch an update copy is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn sign(self) -> i64 {
        match self {
            Side::Left => 1,
            Side::Right => -1,
        }
    }

    pub fn of(edge: EdgeKey, vertex: u32) -> Option<Side> {
        if vertex == edge.u {
            Some(Side::Left)
        } else if vertex == edge.v {
            Some(Side::Right)
        } else {
            None
        }
    }
}

/// Sketch of one vertex's incident-edge vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexSketch {
    pub words: Vec<u64>,
}

impl VertexSketch {
    pub fn new(sk: &Sketcher) -> Self {
        Self { words: sk.zero() }
    }

    pub fn from_words(sk: &Sketcher, words: Vec<u64>) -> Result<Self> {
        if words.len() != sk.words() {
            return Err(Error::ParamMismatch(format!(
                "{} words, sketcher expects {}",
                words.len(),
                sk.words()
            )));
        }
        Ok(Self { words })
    }

    /// Apply `delta` of `edge` as seen from the given endpoint.
    pub fn update_edge(&mut self, sk: &Sketcher, edge: EdgeKey, side: Side, delta: i64) -> Result<()> {
        let n = sk.params().num_vertices;
        if edge.v >= n {
            return Err(Error::VertexOutOfRange {
                vertex: edge.v as u64,
                num_vertices: n as u64,
            });
        }
        sk.update(&mut self.words, edge.index(n), side.sign() * delta);
        Ok(())
    }

    /// Apply `delta` of a hyperedge as seen from its `position`-th vertex.
    pub fn update_hyperedge(
        &mut self,
        sk: &Sketcher,
        codec: &HyperCodec,
        tuple: &[u32],
        position: usize,
        delta: i64,
    ) -> Result<()> {
        codec.for_each_slot(tuple, position, |coord, sign| {
            sk.update(&mut self.words, coord, sign * delta)
        })
    }

    pub fn merge(&mut self, other: &VertexSketch) {
        merge_into(&mut self.words, &other.words);
    }

    pub fn is_zero(&self) -> bool {
        is_zero(&self.words)
    }

    pub fn sample(&self, sk: &Sketcher) -> Sample {
        sk.sample(&self.words)
    }

    /// Sample an edge; indices that do not decode to an edge are skipped.
    pub fn sample_edge(&self, sk: &Sketcher) -> EdgeSample {
        let n = sk.params().num_vertices;
        match sk.sample_where(&self.words, |i| EdgeKey::from_index(i, n).is_some()) {
            Sample::Empty => EdgeSample::Empty,
            Sample::Fail => EdgeSample::Fail,
            Sample::Index(i) => EdgeSample::Edge(EdgeKey::from_index(i, n).unwrap()),
        }
    }
}

/// [`Sample`] decoded as an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeSample {
    Empty,
    Edge(EdgeKey),
    Fail,
}
