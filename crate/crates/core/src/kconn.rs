//! k-edge-connectivity certificates from `k` stacked sketch layers.
//!
//! Forest `F_i` is a spanning forest of `G` minus the earlier forests,
//! extracted from layer `i` after those forests have been deleted from it.
//! Deletion is exact by linearity. Layers are grouped into blocks of
//! `block_size` layers; with the logarithmic schedule, block `i ≥ 1`
//! first receives, together with the next `2^ψ - 1` blocks, the forests of
//! blocks `i - 2^ψ .. i`, where `2^ψ` is the largest power of two dividing
//! `i`. Inside a block each extracted forest is deleted from the rest of the
//! block. Over all blocks every layer sees each earlier forest exactly once.

use std::io::Write;
use std::ops::Range;

use serde::Serialize;

use crate::cc::{boruvka_extract, CcConfig, CcStats};
use crate::em::{ext_sort_by, BlockDevice, ExtArray, Reader, Writer};
use crate::error::{Error, Result};
use crate::graph::stoer_wagner;
use crate::ingest::{GraphScheme, LayerRoute, SketchArray};
use crate::sketch::{EdgeKey, Side};

/// Which layers receive each extracted forest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Schedule {
    /// Block-level logarithmic schedule.
    Logarithmic,
    /// Every forest is deleted from every later layer right away.
    Naive,
}

#[derive(Debug, Clone, Copy)]
pub struct KConnConfig {
    /// Forests per deletion block; `None` uses [`default_block_size`].
    pub block_size: Option<usize>,
    pub schedule: Schedule,
    pub cc: CcConfig,
}

impl Default for KConnConfig {
    fn default() -> Self {
        Self {
            block_size: None,
            schedule: Schedule::Logarithmic,
            cc: CcConfig::default(),
        }
    }
}

/// `ceil(log2(V)^2)`, at least one.
pub fn default_block_size(num_vertices: u32) -> usize {
    let l = (num_vertices.max(2) as f64).log2();
    ((l * l).ceil() as usize).max(1)
}

/// The stacked sketch for a `k`-connectivity query: `k` independent layers,
/// every update reaching all of them.
pub fn kconn_scheme(num_vertices: u32, k: usize, seed: u64) -> Result<GraphScheme> {
    GraphScheme::stacked(num_vertices, seed, k, LayerRoute::All)
}

/// One step of the deletion schedule, in execution order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ScheduleEvent {
    /// Forests `forests` were deleted from layers `layers`.
    Delete { forests: Range<usize>, layers: Range<usize> },
    /// Forest `layer` was extracted from layer `layer`.
    Query { layer: usize },
}

/// Union of `k` edge-disjoint forests.
#[derive(Debug)]
pub struct Certificate {
    pub num_vertices: u32,
    pub k: usize,
    /// `(u, v, forest)` records, forest by forest.
    pub edges: ExtArray,
    pub forest_sizes: Vec<usize>,
    pub layer_stats: Vec<CcStats>,
    pub log: Vec<ScheduleEvent>,
    pub deletion_io: u64,
    pub extraction_io: u64,
}

impl Certificate {
    /// Every layer's extraction finished without hitting a cap.
    pub fn complete(&self) -> bool {
        self.layer_stats.iter().all(|s| !s.capped && !s.stalled)
    }

    /// `(u, v, forest)` triples.
    pub fn edges_vec(&self, dev: &mut BlockDevice) -> Result<Vec<(u32, u32, usize)>> {
        Ok(dev
            .read_all::<(u64, u64, u64)>(&self.edges)?
            .into_iter()
            .map(|(u, v, f)| (u as u32, v as u32, f as usize))
            .collect())
    }

    /// One `u v forest` line per edge.
    pub fn write(&self, dev: &mut BlockDevice, out: &mut impl Write) -> Result<()> {
        let mut r = Reader::new(dev, &self.edges);
        let mut e = [0u64; 3];
        while r.next_into(dev, &mut e)? {
            writeln!(out, "{} {} {}", e[0], e[1], e[2])?;
        }
        Ok(())
    }

    pub fn free(self, dev: &mut BlockDevice) {
        dev.free(self.edges);
    }
}

/// Extract `k` edge-disjoint forests from a sketch array ingested with
/// [`kconn_scheme`]. The array is consumed: deletions modify it in place.
pub fn extract_certificate(
    dev: &mut BlockDevice,
    sketches: SketchArray,
    scheme: &GraphScheme,
    cfg: &KConnConfig,
) -> Result<Certificate> {
    let k = scheme.layers().len();
    let lw = scheme.layer_words();
    let n = scheme.num_vertices();
    if sketches.words != k * lw || sketches.slots != n as usize {
        return Err(Error::ParamMismatch(format!(
            "sketch array of {} x {} words does not match {n} vertices x {k} layers",
            sketches.slots, sketches.words
        )));
    }
    let bs = cfg.block_size.unwrap_or_else(|| default_block_size(n)).max(1);
    let blocks = k.div_ceil(bs);
    let mut forests: Vec<ExtArray> = Vec::with_capacity(k);
    let mut layer_stats = Vec::with_capacity(k);
    let mut log = Vec::new();
    let (mut deletion_io, mut extraction_io) = (0u64, 0u64);

    for i in 0..blocks {
        let block_end = ((i + 1) * bs).min(k);
        if cfg.schedule == Schedule::Logarithmic && i > 0 {
            let span = 1usize << i.trailing_zeros();
            let fs = (i - span) * bs..i * bs;
            let ls = i * bs..((i + span) * bs).min(k);
            let before = dev.io_snapshot();
            delete_forests(dev, &sketches, scheme, &forests[fs.clone()], ls.clone())?;
            deletion_io += dev.io_snapshot().since(&before).total();
            log.push(ScheduleEvent::Delete { forests: fs, layers: ls });
        }
        for l in i * bs..block_end {
            log.push(ScheduleEvent::Query { layer: l });
            let before = dev.io_snapshot();
            let comps = boruvka_extract(dev, &sketches, l * lw, scheme.layer(l), &cfg.cc)?;
            extraction_io += dev.io_snapshot().since(&before).total();
            layer_stats.push(comps.stats);
            dev.free(comps.labels);
            forests.push(comps.forest);
            let rest = match cfg.schedule {
                Schedule::Logarithmic => l + 1..block_end,
                Schedule::Naive => l + 1..k,
            };
            if !rest.is_empty() {
                let before = dev.io_snapshot();
                delete_forests(dev, &sketches, scheme, &forests[l..l + 1], rest.clone())?;
                deletion_io += dev.io_snapshot().since(&before).total();
                log.push(ScheduleEvent::Delete {
                    forests: l..l + 1,
                    layers: rest,
                });
            }
        }
    }
    dev.free(sketches.arr);

    let total: usize = forests.iter().map(|f| f.len()).sum();
    let edges = dev.alloc_array(total, 3);
    let mut w = Writer::new(dev, edges);
    let mut forest_sizes = Vec::with_capacity(k);
    for (i, f) in forests.into_iter().enumerate() {
        forest_sizes.push(f.len());
        let mut r = Reader::new(dev, &f);
        let mut e = [0u64; 2];
        while r.next_into(dev, &mut e)? {
            w.push_words(dev, &[e[0], e[1], i as u64])?;
        }
        drop(r);
        dev.free(f);
    }
    Ok(Certificate {
        num_vertices: n,
        k,
        edges: w.finish(dev)?,
        forest_sizes,
        layer_stats,
        log,
        deletion_io,
        extraction_io,
    })
}

/// Subtract every edge of `forests` from layers `layers` of both endpoints'
/// sketches. Endpoint copies are sorted by vertex; each touched vertex has
/// its layer window read and written once (in RAM-sized chunks of layers).
fn delete_forests(
    dev: &mut BlockDevice,
    sketches: &SketchArray,
    scheme: &GraphScheme,
    forests: &[ExtArray],
    layers: Range<usize>,
) -> Result<()> {
    let n = scheme.num_vertices();
    let lw = scheme.layer_words();
    let total: usize = forests.iter().map(|f| f.len()).sum();
    if total == 0 || layers.is_empty() {
        return Ok(());
    }
    // (vertex, edge index, coefficient is negative)
    let copies = dev.alloc_array(2 * total, 3);
    let mut w = Writer::new(dev, copies);
    for f in forests {
        let mut r = Reader::new(dev, f);
        let mut e = [0u64; 2];
        while r.next_into(dev, &mut e)? {
            let edge = EdgeKey::new(e[0] as u32, e[1] as u32)?;
            let idx = edge.index(n);
            for (x, side) in [(edge.u, Side::Left), (edge.v, Side::Right)] {
                // deletion: coefficient -sign
                let negative = side.sign() > 0;
                w.push_words(dev, &[x as u64, idx, negative as u64])?;
            }
        }
    }
    let copies = w.finish(dev)?;
    let sorted = ext_sort_by(dev, &copies, |w| w[0])?;
    dev.free(copies);

    let per_chunk = (dev.ram_words() / 4 / lw).max(1);
    if per_chunk * lw > dev.ram_words() / 2 {
        return Err(Error::RecordTooLarge {
            record_words: lw,
            ram_words: dev.ram_words(),
        });
    }
    let cap = dev.ram_words() / 8 / 2;
    let _lease = dev.lease(per_chunk * lw + 2 * cap);
    let mut win = vec![0u64; per_chunk * lw];
    let mut group: Vec<(u64, bool)> = Vec::with_capacity(cap);
    let mut r = Reader::new(dev, &sorted);
    let mut rec = [0u64; 3];
    let mut start = 0usize;
    let mut idx = 0usize;
    let mut cur = u64::MAX;
    loop {
        let more = r.next_into(dev, &mut rec)?;
        if !more || rec[0] != cur {
            if cur != u64::MAX {
                let count = idx - start;
                let g = GroupRef {
                    vertex: cur as usize,
                    in_ram: (group.len() == count).then_some(&group[..]),
                    sorted: &sorted,
                    range: start..idx,
                };
                apply_group(dev, sketches, scheme, &g, layers.clone(), per_chunk, &mut win)?;
            }
            if !more {
                break;
            }
            cur = rec[0];
            start = idx;
            group.clear();
        }
        if group.len() < cap {
            group.push((rec[1], rec[2] != 0));
        }
        idx += 1;
    }
    drop(r);
    dev.free(sorted);
    Ok(())
}

struct GroupRef<'a> {
    vertex: usize,
    in_ram: Option<&'a [(u64, bool)]>,
    sorted: &'a ExtArray,
    range: Range<usize>,
}

fn apply_group(
    dev: &mut BlockDevice,
    sketches: &SketchArray,
    scheme: &GraphScheme,
    g: &GroupRef,
    layers: Range<usize>,
    per_chunk: usize,
    win: &mut [u64],
) -> Result<()> {
    let lw = scheme.layer_words();
    let mut lo = layers.start;
    while lo < layers.end {
        let hi = (lo + per_chunk).min(layers.end);
        let len = (hi - lo) * lw;
        let base = (g.vertex * sketches.words + lo * lw) as u64;
        let win = &mut win[..len];
        dev.read_words(&sketches.arr, base, win)?;
        let mut apply = |key: u64, negative: bool| {
            let coef = if negative { -1 } else { 1 };
            for l in lo..hi {
                let s = (l - lo) * lw;
                scheme.layer(l).update(&mut win[s..s + lw], key, coef);
            }
        };
        match g.in_ram {
            Some(list) => list.iter().for_each(|&(key, neg)| apply(key, neg)),
            None => {
                let mut r = Reader::range(dev, g.sorted, g.range.start, g.range.end);
                let mut rec = [0u64; 3];
                while r.next_into(dev, &mut rec)? {
                    apply(rec[1], rec[2] != 0);
                }
            }
        }
        dev.write_words(&sketches.arr, base, win)?;
        lo = hi;
    }
    Ok(())
}

/// Edge connectivity of a certificate, exact below `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CutValue {
    Exact(usize),
    AtLeast(usize),
}

/// Exact edge connectivity of the certificate if it is below `k`. Loads the
/// certificate into RAM (one scan) and runs Stoer–Wagner.
pub fn min_cut_upto_k(dev: &mut BlockDevice, cert: &Certificate, k: usize) -> Result<CutValue> {
    let n = cert.num_vertices as usize;
    let edges: Vec<(u32, u32, f64)> = cert
        .edges_vec(dev)?
        .into_iter()
        .map(|(u, v, _)| (u, v, 1.0))
        .collect();
    Ok(match stoer_wagner(n, &edges) {
        Some(c) if (c.value as usize) < k => CutValue::Exact(c.value as usize),
        _ => CutValue::AtLeast(k),
    })
}
