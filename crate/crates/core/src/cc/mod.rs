//! Connected components and spanning forests from a sketch array.
//!
//! Extraction runs Borůvka rounds. Every live component samples one pair of
//! vertices that crosses its boundary. The pairs are resolved to current
//! components through a [`BatchedUnionFind`], the merge graph on component
//! ids is reduced to a forest by [`merge_graph_cc`], the forest merges are
//! applied to the union-find, and the merged components' sketches are
//! summed. A component whose sketch is zero has no outgoing edges and
//! leaves the live set.
//!
//! Sketches of at least a block are summed in place, slot by slot. Smaller
//! sketches are kept packed as `(id, sketch)` records: the ids of merged
//! records are overwritten with their destination, the records are sorted
//! by id, and equal ids are summed in one scan.

mod merge_graph;
mod union_find;

pub use merge_graph::{merge_graph_cc, merge_graph_cc_with, MergeGraphMethod, MergeResolution};
pub use union_find::BatchedUnionFind;

use std::io::Write;

use serde::Serialize;

use crate::em::{ext_sort_by, BlockDevice, ExtArray, Reader, Writer};
use crate::error::{Error, Result};
use crate::ingest::{HyperScheme, SketchArray};
use crate::sketch::{ceil_log2, merge_window, EdgeKey, Sample, Sketcher};

/// A sampled pair of vertices crossing a component boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairSample {
    Empty,
    Pair(u32, u32),
    Fail,
}

/// Interprets a component sketch.
pub trait PairSampler {
    fn sketch_words(&self) -> usize;
    fn sample_pair(&self, sketch: &[u64]) -> PairSample;
}

impl PairSampler for Sketcher {
    fn sketch_words(&self) -> usize {
        self.words()
    }

    fn sample_pair(&self, sketch: &[u64]) -> PairSample {
        let n = self.params().num_vertices;
        match self.sample_where(sketch, |i| EdgeKey::from_index(i, n).is_some()) {
            Sample::Empty => PairSample::Empty,
            Sample::Fail => PairSample::Fail,
            Sample::Index(i) => {
                let e = EdgeKey::from_index(i, n).unwrap();
                PairSample::Pair(e.u, e.v)
            }
        }
    }
}

/// A hyperedge coordinate names two of its vertices, one on each side of
/// the cut; those two are the sampled pair.
impl PairSampler for HyperScheme {
    fn sketch_words(&self) -> usize {
        self.sketcher().words()
    }

    fn sample_pair(&self, sketch: &[u64]) -> PairSample {
        let codec = self.codec();
        match self.sketcher().sample_where(sketch, |i| codec.decode(i).is_some()) {
            Sample::Empty => PairSample::Empty,
            Sample::Fail => PairSample::Fail,
            Sample::Index(i) => {
                let (tuple, a, b) = codec.decode(i).unwrap();
                PairSample::Pair(tuple[a], tuple[b])
            }
        }
    }
}

/// How merged sketches are summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relocation {
    /// Sorted when sketches are smaller than a block, in place otherwise.
    Auto,
    /// Read the source and add it into the destination slot.
    InPlace,
    /// Relabel, sort by destination and sum runs.
    Sorted,
}

#[derive(Debug, Clone, Copy)]
pub struct CcConfig {
    pub relocation: Relocation,
    pub merge_graph: MergeGraphMethod,
    /// Round cap; `None` uses [`default_round_cap`].
    pub max_rounds: Option<usize>,
}

impl Default for CcConfig {
    fn default() -> Self {
        Self {
            relocation: Relocation::Auto,
            merge_graph: MergeGraphMethod::Auto,
            max_rounds: None,
        }
    }
}

/// `2 ceil(log2 V) + 8`.
pub fn default_round_cap(num_vertices: usize) -> usize {
    2 * ceil_log2(num_vertices as u64) as usize + 8
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CcStats {
    pub rounds: usize,
    /// Component merges applied.
    pub merges: usize,
    /// Samples that found a nonzero sketch but no edge.
    pub failed_samples: usize,
    /// Stopped at the round cap with components still live.
    pub capped: bool,
    /// Stopped because only failing components remained.
    pub stalled: bool,
    pub sorted_relocation: bool,
}

/// Output of [`boruvka_extract`].
#[derive(Debug)]
pub struct Components {
    /// Component label per vertex: the smallest vertex id in its component.
    pub labels: ExtArray,
    /// Spanning forest edges `(u, v)` with `u < v`.
    pub forest: ExtArray,
    pub num_components: usize,
    pub stats: CcStats,
}

impl Components {
    /// No live component was left unresolved.
    pub fn complete(&self) -> bool {
        !self.stats.capped && !self.stats.stalled
    }

    pub fn labels_vec(&self, dev: &mut BlockDevice) -> Result<Vec<u32>> {
        Ok(dev.read_all::<u64>(&self.labels)?.into_iter().map(|x| x as u32).collect())
    }

    pub fn forest_vec(&self, dev: &mut BlockDevice) -> Result<Vec<(u32, u32)>> {
        Ok(dev
            .read_all::<(u64, u64)>(&self.forest)?
            .into_iter()
            .map(|(u, v)| (u as u32, v as u32))
            .collect())
    }

    /// One `vertex_id component_id` line per vertex.
    pub fn write_labels(&self, dev: &mut BlockDevice, out: &mut impl Write) -> Result<()> {
        let mut r = Reader::new(dev, &self.labels);
        let mut x = [0u64; 1];
        let mut v = 0u64;
        while r.next_into(dev, &mut x)? {
            writeln!(out, "{v} {}", x[0])?;
            v += 1;
        }
        Ok(())
    }

    /// One `u v` line per forest edge.
    pub fn write_forest(&self, dev: &mut BlockDevice, out: &mut impl Write) -> Result<()> {
        let mut r = Reader::new(dev, &self.forest);
        let mut e = [0u64; 2];
        while r.next_into(dev, &mut e)? {
            writeln!(out, "{} {}", e[0], e[1])?;
        }
        Ok(())
    }

    pub fn free(self, dev: &mut BlockDevice) {
        dev.free(self.labels);
        dev.free(self.forest);
    }
}

/// Component sketches between rounds.
enum Store {
    /// Slot `v` holds the sketch of component `v`; `live` lists the live
    /// component ids in order.
    Slots { arr: ExtArray, live: ExtArray },
    /// `(id, sketch)` records of the live components, sorted by id.
    Packed { arr: ExtArray },
}

impl Store {
    fn live_count(&self) -> usize {
        match self {
            Store::Slots { live, .. } => live.len(),
            Store::Packed { arr } => arr.len(),
        }
    }

    fn free(self, dev: &mut BlockDevice) {
        match self {
            Store::Slots { arr, live } => {
                dev.free(arr);
                dev.free(live);
            }
            Store::Packed { arr } => dev.free(arr),
        }
    }
}

/// Components of the graph summarized by `sketches`, reading each slot's
/// sketch at word `offset` with `sampler`. The input array is not modified.
pub fn boruvka_extract<S: PairSampler>(
    dev: &mut BlockDevice,
    sketches: &SketchArray,
    offset: usize,
    sampler: &S,
    cfg: &CcConfig,
) -> Result<Components> {
    let phi = sampler.sketch_words();
    let n = sketches.slots;
    if offset + phi > sketches.words {
        return Err(Error::Corrupt(format!(
            "sketch window {offset}..{} exceeds slot size {}",
            offset + phi,
            sketches.words
        )));
    }
    let p = dev.params();
    if 2 * (phi + 1) + 6 * p.block_words > p.ram_words {
        return Err(Error::RecordTooLarge {
            record_words: phi,
            ram_words: p.ram_words,
        });
    }
    let sorted = match cfg.relocation {
        Relocation::Auto => phi < p.block_words,
        Relocation::InPlace => false,
        Relocation::Sorted => true,
    };
    let mut stats = CcStats {
        sorted_relocation: sorted,
        ..CcStats::default()
    };
    let mut store = load(dev, sketches, offset, phi, sorted)?;
    let mut uf = BatchedUnionFind::new(dev, n)?;
    let forest = dev.alloc_array(n.saturating_sub(1), 2);
    let mut fw = Writer::new(dev, forest);
    let cap = cfg.max_rounds.unwrap_or_else(|| default_round_cap(n));

    while store.live_count() > 0 {
        if stats.rounds == cap {
            stats.capped = true;
            break;
        }
        stats.rounds += 1;
        let round = sample_phase(dev, &mut store, sampler, phi)?;
        stats.failed_samples += round.fails;

        let h = resolve(dev, &uf, &round.cands)?;
        dev.free(round.cands);
        let res = merge_graph_cc_with(dev, &h, cfg.merge_graph)?;
        dev.free(h);
        append_forest(dev, &mut fw, &res.forest)?;
        dev.free(res.forest);
        let links = nontrivial_links(dev, &res.reps)?;
        dev.free(res.reps);
        stats.merges += links.len();
        uf.link_batch(dev, &links)?;
        uf.compress(dev)?;

        let progressed = !links.is_empty();
        relocate(dev, &mut store, &links, &round.empties, phi)?;
        dev.free(links);
        dev.free(round.empties);
        if !progressed {
            if store.live_count() > 0 {
                // nothing merged, so every remaining sample repeats
                stats.stalled = true;
            }
            break;
        }
    }
    store.free(dev);
    let forest = fw.finish(dev)?;
    let labels = uf.into_parents();
    let num_components = count_roots(dev, &labels)?;
    Ok(Components {
        labels,
        forest,
        num_components,
        stats,
    })
}

fn load(
    dev: &mut BlockDevice,
    sketches: &SketchArray,
    offset: usize,
    phi: usize,
    packed: bool,
) -> Result<Store> {
    let n = sketches.slots;
    let rw = if packed { phi + 1 } else { phi };
    let arr = dev.alloc_array(n, rw);
    let mut w = Writer::new(dev, arr);
    let mut r = Reader::new(dev, &sketches.arr);
    let _lease = dev.lease(phi);
    let mut buf = vec![0u64; phi];
    for v in 0..n as u64 {
        r.skip_words(offset as u64);
        r.next_into(dev, &mut buf)?;
        r.skip_words((sketches.words - offset - phi) as u64);
        if packed {
            w.push_words(dev, &[v])?;
        }
        w.push_words(dev, &buf)?;
    }
    drop(r);
    let arr = w.finish(dev)?;
    Ok(if packed {
        Store::Packed { arr }
    } else {
        let live = dev.alloc_array(n, 1);
        let mut w = Writer::new(dev, live);
        for v in 0..n as u64 {
            w.push_words(dev, &[v])?;
        }
        Store::Slots {
            arr,
            live: w.finish(dev)?,
        }
    })
}

struct RoundSamples {
    /// `(component, x, y, x, y)`: the last two words are resolved to roots.
    cands: ExtArray,
    /// Components whose sketch was zero, in id order.
    empties: ExtArray,
    fails: usize,
}

const CAND_WORDS: usize = 5;

fn sample_phase<S: PairSampler>(
    dev: &mut BlockDevice,
    store: &mut Store,
    sampler: &S,
    phi: usize,
) -> Result<RoundSamples> {
    let live = store.live_count();
    let cands = dev.alloc_array(live, CAND_WORDS);
    let mut cw = Writer::new(dev, cands);
    let empties = dev.alloc_array(live, 1);
    let mut ew = Writer::new(dev, empties);
    let mut fails = 0;
    let _lease = dev.lease(phi + 1);
    let mut buf = vec![0u64; phi + 1];
    let mut visit = |dev: &mut BlockDevice, id: u64, sketch: &[u64]| -> Result<()> {
        match sampler.sample_pair(sketch) {
            PairSample::Empty => ew.push_words(dev, &[id]),
            PairSample::Fail => {
                fails += 1;
                Ok(())
            }
            PairSample::Pair(x, y) => {
                let (x, y) = (x as u64, y as u64);
                cw.push_words(dev, &[id, x, y, x, y])
            }
        }
    };
    match store {
        Store::Slots { arr, live } => {
            let mut ir = Reader::new(dev, live);
            let mut sr = Reader::new(dev, arr);
            let mut pos = 0u64;
            let mut id = [0u64; 1];
            while ir.next_into(dev, &mut id)? {
                let at = id[0] * phi as u64;
                sr.skip_words(at - pos);
                sr.next_into(dev, &mut buf[..phi])?;
                pos = at + phi as u64;
                visit(dev, id[0], &buf[..phi])?;
            }
        }
        Store::Packed { arr } => {
            let mut r = Reader::new(dev, arr);
            while r.next_into(dev, &mut buf)? {
                visit(dev, buf[0], &buf[1..])?;
            }
        }
    }
    Ok(RoundSamples {
        cands: cw.finish(dev)?,
        empties: ew.finish(dev)?,
        fails,
    })
}

/// Merge-graph edges `(rx, ry, x, y)` for the candidates whose endpoints lie
/// in different components, one of them the sampling component.
fn resolve(dev: &mut BlockDevice, uf: &BatchedUnionFind, cands: &ExtArray) -> Result<ExtArray> {
    let a = uf.find_batch(dev, cands, 3)?;
    let b = uf.find_batch(dev, &a, 4)?;
    dev.free(a);
    let out = dev.alloc_array(b.len(), merge_graph::EDGE_WORDS);
    let mut w = Writer::new(dev, out);
    let mut r = Reader::new(dev, &b);
    let mut c = [0u64; CAND_WORDS];
    while r.next_into(dev, &mut c)? {
        let [comp, x, y, rx, ry] = c;
        if rx != ry && (comp == rx || comp == ry) {
            w.push_words(dev, &[rx, ry, x.min(y), x.max(y)])?;
        }
    }
    drop(r);
    dev.free(b);
    w.finish(dev)
}

fn append_forest(dev: &mut BlockDevice, fw: &mut Writer, forest: &ExtArray) -> Result<()> {
    let mut r = Reader::new(dev, forest);
    let mut e = [0u64; 2];
    while r.next_into(dev, &mut e)? {
        fw.push_words(dev, &e)?;
    }
    Ok(())
}

/// `(id, rep)` records with `id != rep`, in id order.
fn nontrivial_links(dev: &mut BlockDevice, reps: &ExtArray) -> Result<ExtArray> {
    let out = dev.alloc_array(reps.len(), 2);
    let mut w = Writer::new(dev, out);
    let mut r = Reader::new(dev, reps);
    let mut l = [0u64; 2];
    while r.next_into(dev, &mut l)? {
        if l[0] != l[1] {
            w.push_words(dev, &l)?;
        }
    }
    drop(r);
    w.finish(dev)
}

/// Sum each linked component's sketch into its destination and drop linked
/// and empty components from the live set.
fn relocate(
    dev: &mut BlockDevice,
    store: &mut Store,
    links: &ExtArray,
    empties: &ExtArray,
    phi: usize,
) -> Result<()> {
    match store {
        Store::Slots { arr, live } => {
            add_in_place(dev, arr, links, phi)?;
            let fresh = filter_live(dev, live, links, empties)?;
            let old = std::mem::replace(live, fresh);
            dev.free(old);
        }
        Store::Packed { arr } => {
            let fresh = relocate_sorted(dev, arr, links, empties, phi)?;
            let old = std::mem::replace(arr, fresh);
            dev.free(old);
        }
    }
    Ok(())
}

fn add_in_place(dev: &mut BlockDevice, arr: &ExtArray, links: &ExtArray, phi: usize) -> Result<()> {
    let window = phi.min(dev.ram_words() / 4).max(1);
    let _lease = dev.lease(window);
    let mut src = vec![0u64; window];
    let mut r = Reader::new(dev, links);
    let mut l = [0u64; 2];
    while r.next_into(dev, &mut l)? {
        let (from, to) = (l[0] * phi as u64, l[1] * phi as u64);
        let mut off = 0;
        while off < phi {
            let len = window.min(phi - off);
            dev.read_words(arr, from + off as u64, &mut src[..len])?;
            let s = &src[..len];
            dev.update_words(arr, to + off as u64, len, |d| merge_window(d, s, off))?;
            off += len;
        }
    }
    Ok(())
}

/// Advance a sorted id reader to the first id `>= id`; true if equal.
fn seek(dev: &mut BlockDevice, r: &mut Reader, head: &mut Option<[u64; 2]>, id: u64, rw: usize) -> Result<bool> {
    loop {
        match head {
            Some(h) if h[0] < id => {
                let mut next = [0u64; 2];
                *head = if r.next_into(dev, &mut next[..rw])? { Some(next) } else { None };
            }
            Some(h) => return Ok(h[0] == id),
            None => return Ok(false),
        }
    }
}

fn first(dev: &mut BlockDevice, r: &mut Reader, rw: usize) -> Result<Option<[u64; 2]>> {
    let mut h = [0u64; 2];
    Ok(if r.next_into(dev, &mut h[..rw])? { Some(h) } else { None })
}

fn filter_live(dev: &mut BlockDevice, live: &ExtArray, links: &ExtArray, empties: &ExtArray) -> Result<ExtArray> {
    let out = dev.alloc_array(live.len(), 1);
    let mut w = Writer::new(dev, out);
    let mut r = Reader::new(dev, live);
    let mut lr = Reader::new(dev, links);
    let mut er = Reader::new(dev, empties);
    let mut lh = first(dev, &mut lr, 2)?;
    let mut eh = first(dev, &mut er, 1)?;
    let mut id = [0u64; 1];
    while r.next_into(dev, &mut id)? {
        let linked = seek(dev, &mut lr, &mut lh, id[0], 2)?;
        let empty = seek(dev, &mut er, &mut eh, id[0], 1)?;
        if !linked && !empty {
            w.push_words(dev, &id)?;
        }
    }
    drop((r, lr, er));
    w.finish(dev)
}

fn relocate_sorted(
    dev: &mut BlockDevice,
    arr: &ExtArray,
    links: &ExtArray,
    empties: &ExtArray,
    phi: usize,
) -> Result<ExtArray> {
    let rw = phi + 1;
    let lease = dev.lease(rw);
    let marked = dev.alloc_array(arr.len(), rw);
    let mut w = Writer::new(dev, marked);
    let mut r = Reader::new(dev, arr);
    let mut lr = Reader::new(dev, links);
    let mut er = Reader::new(dev, empties);
    let mut lh = first(dev, &mut lr, 2)?;
    let mut eh = first(dev, &mut er, 1)?;
    let mut rec = vec![0u64; rw];
    while r.next_into(dev, &mut rec)? {
        if seek(dev, &mut er, &mut eh, rec[0], 1)? {
            continue;
        }
        if seek(dev, &mut lr, &mut lh, rec[0], 2)? {
            rec[0] = lh.unwrap()[1];
        }
        w.push_words(dev, &rec)?;
    }
    drop((r, lr, er));
    let marked = w.finish(dev)?;
    drop(lease);
    if links.is_empty() {
        return Ok(marked);
    }
    let grouped = ext_sort_by(dev, &marked, |w| w[0])?;
    dev.free(marked);
    let _lease = dev.lease(2 * rw);
    let out = dev.alloc_array(grouped.len(), rw);
    let mut w = Writer::new(dev, out);
    let mut r = Reader::new(dev, &grouped);
    let mut acc = vec![0u64; rw];
    let mut have = false;
    while r.next_into(dev, &mut rec)? {
        if have && rec[0] == acc[0] {
            merge_window(&mut acc[1..], &rec[1..], 0);
        } else {
            if have {
                w.push_words(dev, &acc)?;
            }
            acc.copy_from_slice(&rec);
            have = true;
        }
    }
    if have {
        w.push_words(dev, &acc)?;
    }
    drop(r);
    dev.free(grouped);
    w.finish(dev)
}

fn count_roots(dev: &mut BlockDevice, parents: &ExtArray) -> Result<usize> {
    let mut r = Reader::new(dev, parents);
    let mut x = [0u64; 1];
    let mut i = 0u64;
    let mut roots = 0;
    while r.next_into(dev, &mut x)? {
        if x[0] == i {
            roots += 1;
        }
        i += 1;
    }
    Ok(roots)
}
