use super::{TaggedUpdate, VertexScheme};
use crate::error::{Error, Result};
use crate::sketch::{hash, EdgeKey, HyperCodec, SketchHeader, SketchParams, Sketcher};
use crate::stream::{EdgeUpdate, HyperUpdate};

const MAX_LAYERS: usize = (1 << 12) - 1;

/// Which layers of a stacked graph sketch an edge update reaches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerRoute {
    /// Every layer.
    All,
    /// Nested subsampling levels of `per_level` layers each: an edge with
    /// hash depth `d` under `key` reaches levels `0..=min(d, levels-1)`.
    NestedLevels {
        key: u64,
        per_level: usize,
        levels: usize,
    },
    /// Weight thresholds `base^i`: an edge of weight `w` reaches layers
    /// `i >= class(w)`, the smallest `i` with `w <= base^i`.
    WeightClasses { base: f64, max_weight: f64 },
}

impl LayerRoute {
    /// Level reached by `index` under a [`LayerRoute::NestedLevels`] key.
    pub fn level_of(key: u64, index: u64, levels: usize) -> usize {
        (hash::depth(key, index) as usize).min(levels - 1)
    }

    /// Smallest `i` with `w <= base^i`, tolerant to rounding at exact powers.
    pub fn weight_class(base: f64, w: f64) -> usize {
        if w <= 1.0 {
            return 0;
        }
        let x = w.ln() / base.ln();
        let r = x.round();
        if (x - r).abs() < 1e-9 {
            r as usize
        } else {
            x.ceil() as usize
        }
    }
}

/// Stack of independent graph sketch layers per vertex, laid out layer after
/// layer inside each vertex record.
#[derive(Debug, Clone)]
pub struct GraphScheme {
    num_vertices: u32,
    layers: Vec<Sketcher>,
    route: LayerRoute,
}

impl GraphScheme {
    /// One connectivity sketch per vertex.
    pub fn single(num_vertices: u32, seed: u64) -> Self {
        Self::stacked(num_vertices, seed, 1, LayerRoute::All).unwrap()
    }

    pub fn stacked(num_vertices: u32, seed: u64, layers: usize, route: LayerRoute) -> Result<Self> {
        if layers == 0 || layers > MAX_LAYERS {
            return Err(Error::InvalidParams(format!(
                "{layers} layers outside [1, {MAX_LAYERS}]"
            )));
        }
        match route {
            LayerRoute::NestedLevels {
                per_level, levels, ..
            } if per_level * levels != layers || levels == 0 => {
                return Err(Error::InvalidParams("level layout does not match layer count".into()));
            }
            LayerRoute::WeightClasses { base, max_weight } => {
                if !(base > 1.0) || max_weight < 1.0 {
                    return Err(Error::InvalidParams("weight classes need base > 1, W >= 1".into()));
                }
                if LayerRoute::weight_class(base, max_weight) + 1 != layers {
                    return Err(Error::InvalidParams("weight classes do not match layer count".into()));
                }
            }
            _ => {}
        }
        let base = Sketcher::new(SketchParams::for_graph(num_vertices, seed));
        let layers = (0..layers as u64)
            .map(|l| base.with_seed(hash::derive(seed, 0x4c41_5945_5200 + l)))
            .collect();
        Ok(Self {
            num_vertices,
            layers,
            route,
        })
    }

    pub fn num_vertices(&self) -> u32 {
        self.num_vertices
    }

    pub fn layers(&self) -> &[Sketcher] {
        &self.layers
    }

    pub fn layer(&self, l: usize) -> &Sketcher {
        &self.layers[l]
    }

    pub fn layer_words(&self) -> usize {
        self.layers[0].words()
    }

    pub fn route(&self) -> LayerRoute {
        self.route
    }

    /// The layers `range` as a stack of their own, reached by every update.
    /// Matches a window of this scheme's sketch array layer for layer.
    pub fn sub_stack(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.is_empty() || range.end > self.layers.len() {
            return Err(Error::InvalidParams(format!(
                "layer range {range:?} outside 0..{}",
                self.layers.len()
            )));
        }
        Ok(Self {
            num_vertices: self.num_vertices,
            layers: self.layers[range].to_vec(),
            route: LayerRoute::All,
        })
    }

    /// Layer range `[lo, hi)` an update reaches.
    pub fn layer_range(&self, edge: EdgeKey, weight: f64) -> Result<(usize, usize)> {
        let n = self.layers.len();
        Ok(match self.route {
            LayerRoute::All => (0, n),
            LayerRoute::NestedLevels {
                key,
                per_level,
                levels,
            } => {
                let d = LayerRoute::level_of(key, edge.index(self.num_vertices), levels);
                (0, (d + 1) * per_level)
            }
            LayerRoute::WeightClasses { base, max_weight } => {
                if !(1.0..=max_weight).contains(&weight) {
                    return Err(Error::WeightOutOfRange { weight, max_weight });
                }
                (LayerRoute::weight_class(base, weight).min(n - 1), n)
            }
        })
    }
}

impl VertexScheme for GraphScheme {
    type Input = EdgeUpdate;

    fn num_slots(&self) -> usize {
        self.num_vertices as usize
    }

    fn sketch_words(&self) -> usize {
        self.layers.len() * self.layer_words()
    }

    fn max_copies(&self) -> usize {
        2
    }

    fn expand(&self, up: &EdgeUpdate, out: &mut Vec<TaggedUpdate>) -> Result<()> {
        let e = EdgeKey::checked(up.u, up.v, self.num_vertices)?;
        let (lo, hi) = self.layer_range(e, up.weight)?;
        let aux = (lo | hi << 12) as u32;
        let key = e.index(self.num_vertices);
        for (target, tag, negative) in [(e.u, 0, up.delete), (e.v, 1, !up.delete)] {
            out.push(TaggedUpdate {
                key,
                target,
                negative,
                tag,
                aux,
            });
        }
        Ok(())
    }

    fn apply(&self, window: &mut [u64], offset: usize, up: &TaggedUpdate) {
        let lw = self.layer_words();
        let (lo, hi) = ((up.aux & 0xfff) as usize, (up.aux >> 12) as usize);
        let end = offset + window.len();
        let coef = up.coef();
        for l in lo..hi {
            let (ls, le) = (l * lw, (l + 1) * lw);
            if le <= offset || ls >= end {
                continue;
            }
            if ls >= offset && le <= end {
                self.layers[l].update(&mut window[ls - offset..le - offset], up.key, coef);
            } else {
                let s = ls.max(offset);
                let e = le.min(end);
                self.layers[l].update_window(&mut window[s - offset..e - offset], s - ls, up.key, coef);
            }
        }
    }

    fn header_words(&self) -> Vec<u64> {
        let mut h = self.layers[0].params().header().to_words().to_vec();
        h.push(self.layers.len() as u64);
        h
    }
}

/// Hypergraph connectivity sketch over the pair-slot encoding.
#[derive(Debug, Clone)]
pub struct HyperScheme {
    codec: HyperCodec,
    sketcher: Sketcher,
}

impl HyperScheme {
    pub fn new(num_vertices: u32, rank: usize, seed: u64) -> Result<Self> {
        let codec = HyperCodec::new(num_vertices, rank)?;
        let params =
            SketchParams::for_domain(num_vertices, codec.domain(), crate::sketch::DEFAULT_C0, seed);
        Ok(Self {
            codec,
            sketcher: Sketcher::new(params),
        })
    }

    pub fn codec(&self) -> &HyperCodec {
        &self.codec
    }

    pub fn sketcher(&self) -> &Sketcher {
        &self.sketcher
    }
}

impl VertexScheme for HyperScheme {
    type Input = HyperUpdate;

    fn num_slots(&self) -> usize {
        self.codec.num_vertices() as usize
    }

    fn sketch_words(&self) -> usize {
        self.sketcher.words()
    }

    fn max_copies(&self) -> usize {
        self.codec.rank()
    }

    fn expand(&self, up: &HyperUpdate, out: &mut Vec<TaggedUpdate>) -> Result<()> {
        self.codec.validate(&up.vertices)?;
        let key = self.codec.code(&up.vertices);
        for (i, &v) in up.vertices.iter().enumerate() {
            out.push(TaggedUpdate {
                key,
                target: v,
                negative: up.delete,
                tag: i as u8,
                aux: up.vertices.len() as u32,
            });
        }
        Ok(())
    }

    fn apply(&self, window: &mut [u64], offset: usize, up: &TaggedUpdate) {
        let i = up.tag as usize;
        for j in 0..up.aux as usize {
            if j == i {
                continue;
            }
            let coord = self.codec.coordinate(up.key, i, j);
            let sign = if i < j { 1 } else { -1 };
            self.sketcher.update_window(window, offset, coord, sign * up.coef());
        }
    }

    fn header_words(&self) -> Vec<u64> {
        let mut h = SketchHeader {
            params: *self.sketcher.params(),
        }
        .to_words()
        .to_vec();
        h.push(self.codec.rank() as u64);
        h
    }
}
