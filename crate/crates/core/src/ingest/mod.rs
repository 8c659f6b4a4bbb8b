//! Batched ingestion of a dynamic stream into vertex-based sketches.
//!
//! Stream updates are expanded into tagged copies, one per sketch slot they
//! touch, and staged on the device. A full batch (capacity `2 V φ` words) is
//! routed into per-group update buffers of `φ` words, where a group is
//! `g = max(1, floor(B/φ))` consecutive slots whose sketches are contiguous.
//! A buffer that fills up during routing is applied to its group at once;
//! after routing, one pass over sketches and buffers applies the rest.
//! Sketches larger than `M/4` words are processed in `M/4`-word windows.

mod schemes;

pub use schemes::{GraphScheme, HyperScheme, LayerRoute};

use std::path::Path;

use crate::em::{
    cost, ext_sort_by, BlockDevice, EmParams, ExtArray, IoStats, Reader, Writer,
};
use crate::error::{Error, Result};

/// A sketch whose every measurement is local to one slot (vertex, bucket).
pub trait VertexScheme {
    type Input;

    /// Number of sketch slots.
    fn num_slots(&self) -> usize;
    /// Words per slot sketch, `φ`.
    fn sketch_words(&self) -> usize;
    /// Most tagged copies a single input expands to.
    fn max_copies(&self) -> usize;
    /// Tagged copies of `input`, appended to `out`.
    fn expand(&self, input: &Self::Input, out: &mut Vec<TaggedUpdate>) -> Result<()>;
    /// Apply `up` to the words `[offset, offset + window.len())` of its
    /// target's sketch.
    fn apply(&self, window: &mut [u64], offset: usize, up: &TaggedUpdate);
    /// Header words identifying the sketch family in a sketch file.
    fn header_words(&self) -> Vec<u64>;
}

/// One copy of a stream update addressed to one sketch slot. Stored as two
/// words: the key, then `target | negative << 32 | tag << 33 | aux << 40`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TaggedUpdate {
    pub key: u64,
    pub target: u32,
    /// Coefficient is `-1` rather than `+1`.
    pub negative: bool,
    /// 7-bit scheme-specific tag (endpoint position).
    pub tag: u8,
    /// 24-bit scheme-specific payload (layer range).
    pub aux: u32,
}

impl TaggedUpdate {
    pub const WORDS: usize = 2;

    pub fn coef(&self) -> i64 {
        if self.negative {
            -1
        } else {
            1
        }
    }

    pub fn encode(&self) -> [u64; 2] {
        debug_assert!(self.tag < 128 && self.aux < 1 << 24);
        [
            self.key,
            self.target as u64
                | (self.negative as u64) << 32
                | (self.tag as u64) << 33
                | (self.aux as u64) << 40,
        ]
    }

    pub fn decode(w: &[u64]) -> Self {
        Self {
            key: w[0],
            target: w[1] as u32,
            negative: (w[1] >> 32) & 1 == 1,
            tag: ((w[1] >> 33) & 0x7f) as u8,
            aux: (w[1] >> 40) as u32,
        }
    }
}

/// Counters describing how a stream was ingested.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub updates: u64,
    pub tagged: u64,
    pub batches: u64,
    pub sorted_batches: u64,
    pub direct_batches: u64,
    pub overflows: u64,
    pub windowed_applications: u64,
}

/// Routing of a batch into the update buffers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Routing {
    /// Choose per batch by the cost model.
    Auto,
    /// Random access append to the target buffer.
    Direct,
    /// Stable sort by group, then one sequential fill.
    Sort,
}

/// On-device array of slot sketches, `φ` words each, in slot order.
#[derive(Debug)]
pub struct SketchArray {
    pub arr: ExtArray,
    pub slots: usize,
    pub words: usize,
}

impl SketchArray {
    pub fn read_slot(&self, dev: &mut BlockDevice, slot: usize) -> Result<Vec<u64>> {
        let mut out = vec![0; self.words];
        dev.read_words(&self.arr, (slot * self.words) as u64, &mut out)?;
        Ok(out)
    }

    /// Copy words `offset..offset + len` of every slot into a new array.
    pub fn window(&self, dev: &mut BlockDevice, offset: usize, len: usize) -> Result<SketchArray> {
        if len == 0 || offset + len > self.words {
            return Err(Error::InvalidArgument(format!(
                "window {offset}+{len} outside {} slot words",
                self.words
            )));
        }
        let b = dev.block_words();
        let out = dev.alloc_array(self.slots, len);
        let mut w = Writer::new(dev, out);
        let mut r = Reader::new(dev, &self.arr);
        let _lease = dev.lease(b);
        let mut buf = vec![0u64; b];
        for _ in 0..self.slots {
            r.skip_words(offset as u64);
            let mut left = len;
            while left > 0 {
                let c = left.min(b);
                r.next_into(dev, &mut buf[..c])?;
                w.push_words(dev, &buf[..c])?;
                left -= c;
            }
            r.skip_words((self.words - offset - len) as u64);
        }
        drop(r);
        Ok(SketchArray {
            arr: w.finish(dev)?,
            slots: self.slots,
            words: len,
        })
    }

    /// All sketches, one vector per slot (test and oracle use).
    pub fn read_all(&self, dev: &mut BlockDevice) -> Result<Vec<Vec<u64>>> {
        let mut r = Reader::new(dev, &self.arr);
        let mut out = Vec::with_capacity(self.slots);
        for _ in 0..self.slots {
            let mut s = vec![0; self.words];
            r.next_into(dev, &mut s)?;
            out.push(s);
        }
        Ok(out)
    }

    /// Write the array to `path` as little-endian words: the header words,
    /// then the slot sketches in order.
    pub fn write_file(&self, dev: &mut BlockDevice, header: &[u64], path: &Path) -> Result<()> {
        use std::io::Write;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for w in header {
            f.write_all(&w.to_le_bytes())?;
        }
        let mut r = Reader::new(dev, &self.arr);
        let mut word = [0u64; 1];
        while r.next_into(dev, &mut word)? {
            f.write_all(&word[0].to_le_bytes())?;
        }
        f.flush()?;
        Ok(())
    }

    /// Load a file written by [`write_file`](Self::write_file). The header
    /// must equal `header` exactly.
    pub fn read_file(
        dev: &mut BlockDevice,
        header: &[u64],
        slots: usize,
        words: usize,
        path: &Path,
    ) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let expect = (header.len() + slots * words) * 8;
        if bytes.len() != expect {
            return Err(Error::Corrupt(format!(
                "sketch file has {} bytes, expected {expect}",
                bytes.len()
            )));
        }
        let mut it = bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()));
        for (i, &h) in header.iter().enumerate() {
            if it.next() != Some(h) {
                return Err(Error::Corrupt(format!("sketch header word {i} differs")));
            }
        }
        let arr = dev.alloc_array(slots, words);
        let mut w = Writer::new(dev, arr);
        for x in it {
            w.push_words(dev, &[x])?;
        }
        Ok(Self {
            arr: w.finish(dev)?,
            slots,
            words,
        })
    }
}

/// Where a run of tagged updates lives.
enum Entries<'a> {
    Ram(&'a [TaggedUpdate]),
    Disk {
        arr: &'a ExtArray,
        word_from: u64,
        count: usize,
    },
}

/// Streaming ingestion state for one scheme on one device.
pub struct IngestState<'d, S: VertexScheme> {
    dev: &'d mut BlockDevice,
    scheme: S,
    routing: Routing,
    phi: usize,
    group: usize,
    groups: usize,
    buffer_cap: usize,
    /// A buffer's entries fit in a quarter of RAM.
    buffers_in_ram: bool,
    sketches: SketchArray,
    buffers: ExtArray,
    /// Buffer counts may be stale (direct routing needs them zero).
    counts_dirty: bool,
    staging: Option<Writer>,
    staged_words: usize,
    batch_words: usize,
    scratch: Vec<TaggedUpdate>,
    stats: IngestStats,
}

impl<'d, S: VertexScheme> IngestState<'d, S> {
    /// Allocate zeroed sketches and empty buffers.
    pub fn new(dev: &'d mut BlockDevice, scheme: S) -> Result<Self> {
        Self::with_routing(dev, scheme, Routing::Auto)
    }

    pub fn with_routing(dev: &'d mut BlockDevice, scheme: S, routing: Routing) -> Result<Self> {
        let p = dev.params();
        let phi = scheme.sketch_words();
        let v = scheme.num_slots();
        if phi < 2 {
            return Err(Error::InvalidParams(format!("sketch of {phi} words")));
        }
        let min_batch = TaggedUpdate::WORDS * scheme.max_copies();
        let batch_words = (2 * v * phi).max(2 * min_batch);
        let group = (p.block_words / phi).max(1);
        let groups = v.div_ceil(group);
        let buffer_cap = phi / TaggedUpdate::WORDS;
        let arr = dev.alloc_zeroed(v, phi)?;
        let buffers = dev.alloc_zeroed(groups, 1 + phi)?;
        let staging = dev.alloc_array(batch_words / TaggedUpdate::WORDS, TaggedUpdate::WORDS);
        let staging = Some(Writer::new(dev, staging));
        Ok(Self {
            dev,
            scheme,
            routing,
            phi,
            group,
            groups,
            buffer_cap,
            buffers_in_ram: phi <= p.ram_words / 4,
            sketches: SketchArray {
                arr,
                slots: v,
                words: phi,
            },
            buffers,
            counts_dirty: false,
            staging,
            staged_words: 0,
            batch_words,
            scratch: Vec::new(),
            stats: IngestStats::default(),
        })
    }

    pub fn scheme(&self) -> &S {
        &self.scheme
    }

    pub fn stats(&self) -> IngestStats {
        self.stats
    }

    pub fn device(&mut self) -> &mut BlockDevice {
        self.dev
    }

    /// Current sketch contents (test and oracle use).
    pub fn read_sketches(&mut self) -> Result<Vec<Vec<u64>>> {
        self.sketches.read_all(self.dev)
    }

    /// Staged tagged copies not yet routed.
    pub fn staged(&self) -> usize {
        self.staged_words / TaggedUpdate::WORDS
    }

    /// Capacity of one batch in words.
    pub fn batch_words(&self) -> usize {
        self.batch_words
    }

    /// Vertices per group.
    pub fn group_size(&self) -> usize {
        self.group
    }

    pub fn feed(&mut self, input: &S::Input) -> Result<()> {
        self.scratch.clear();
        self.scheme.expand(input, &mut self.scratch)?;
        self.stats.updates += 1;
        let w = self.staging.as_mut().expect("staging writer");
        for t in &self.scratch {
            w.push_words(self.dev, &t.encode())?;
        }
        self.staged_words += self.scratch.len() * TaggedUpdate::WORDS;
        self.stats.tagged += self.scratch.len() as u64;
        if self.staged_words + TaggedUpdate::WORDS * self.scheme.max_copies() > self.batch_words {
            self.flush_batch()?;
        }
        Ok(())
    }

    /// Route and apply everything staged so far.
    pub fn flush_batch(&mut self) -> Result<()> {
        if self.staged_words == 0 {
            return Ok(());
        }
        let staged = self.staging.take().unwrap().finish(self.dev)?;
        let routing = match self.routing {
            Routing::Auto => self.choose_routing(staged.len()),
            r => r,
        };
        match routing {
            Routing::Direct => {
                self.stats.direct_batches += 1;
                self.route_direct(&staged)?;
            }
            _ => {
                self.stats.sorted_batches += 1;
                self.route_sorted(&staged)?;
            }
        }
        self.apply_all_buffers()?;
        self.stats.batches += 1;
        self.staged_words = 0;
        let mut staged = staged;
        staged.truncate(0);
        self.staging = Some(Writer::new(self.dev, staged));
        Ok(())
    }

    /// Flush the residual batch and hand back the sketch array.
    pub fn finalize(mut self) -> Result<(SketchArray, IngestStats)> {
        self.flush_batch()?;
        let staging = self.staging.take().unwrap().finish(self.dev)?;
        self.dev.free(staging);
        let buffers = std::mem::replace(&mut self.buffers, self.dev.alloc_array(0, 1));
        self.dev.free(buffers);
        let sketches = std::mem::replace(
            &mut self.sketches,
            SketchArray {
                arr: self.dev.alloc_array(0, 1),
                slots: 0,
                words: 0,
            },
        );
        Ok((sketches, self.stats))
    }

    fn choose_routing(&self, n: usize) -> Routing {
        let p = self.dev.params();
        let tw = TaggedUpdate::WORDS;
        let buffer_scan = cost::scan((self.groups * (1 + self.phi)) as f64, &p);
        let mut direct = 4.0 * n as f64;
        if self.counts_dirty {
            direct += 2.0 * buffer_scan;
        }
        let sorted = cost::sort_implementation_cost(n, tw, &p)
            + cost::scan((n * tw) as f64, &p)
            + buffer_scan;
        if direct < sorted {
            Routing::Direct
        } else {
            Routing::Sort
        }
    }

    fn buffer_offset(&self, group: usize) -> u64 {
        (group * (1 + self.phi)) as u64
    }

    fn apply(&mut self, g: usize, entries: Entries) -> Result<()> {
        apply_group(self.dev, &self.scheme, &self.sketches, self.group, g, entries, &mut self.stats)
    }

    /// Rewrite the buffers array with every count zeroed.
    fn reset_counts(&mut self) -> Result<()> {
        let fresh = self.dev.alloc_array(self.groups, 1 + self.phi);
        let mut w = Writer::new(self.dev, fresh);
        let mut r = Reader::new(self.dev, &self.buffers);
        let mut rec = vec![0u64; 1 + self.phi];
        while r.next_into(self.dev, &mut rec)? {
            rec[0] = 0;
            w.push_words(self.dev, &rec)?;
        }
        drop(r);
        let old = std::mem::replace(&mut self.buffers, w.finish(self.dev)?);
        self.dev.free(old);
        self.counts_dirty = false;
        Ok(())
    }

    /// Append each staged copy to its group's buffer by random access.
    fn route_direct(&mut self, staged: &ExtArray) -> Result<()> {
        if self.counts_dirty {
            self.reset_counts()?;
        }
        let mut r = Reader::new(self.dev, staged);
        let mut w = [0u64; 2];
        while r.next_into(self.dev, &mut w)? {
            let t = TaggedUpdate::decode(&w);
            let g = t.target as usize / self.group;
            let off = self.buffer_offset(g);
            let cap = self.buffer_cap as u64;
            let mut count = 0u64;
            self.dev.update_words(&self.buffers, off, 1, |c| {
                count = c[0];
                c[0] = if c[0] == cap { 1 } else { c[0] + 1 };
            })?;
            if count == cap {
                self.stats.overflows += 1;
                let entries = Entries::Disk {
                    arr: &self.buffers,
                    word_from: off + 1,
                    count: self.buffer_cap,
                };
                apply_group(self.dev, &self.scheme, &self.sketches, self.group, g, entries, &mut self.stats)?;
                count = 0;
            }
            self.dev.write_words(&self.buffers, off + 1 + 2 * count, &w)?;
        }
        Ok(())
    }

    /// Sort staged copies by group and rewrite the buffers array in one
    /// pass; a group whose run exceeds its buffer is applied chunk by chunk.
    fn route_sorted(&mut self, staged: &ExtArray) -> Result<()> {
        let gsize = self.group as u64;
        let group_of = move |w: &[u64]| (w[1] & 0xffff_ffff) / gsize;
        let sorted = ext_sort_by(self.dev, staged, group_of)?;
        let buffers = std::mem::replace(&mut self.buffers, self.dev.alloc_array(0, 1));
        let mut out = Writer::new(self.dev, buffers);
        if self.buffers_in_ram {
            let _lease = self.dev.lease(self.phi);
            let mut pending: Vec<TaggedUpdate> = Vec::with_capacity(self.buffer_cap);
            let mut r = Reader::new(self.dev, &sorted);
            let mut w = [0u64; 2];
            let mut g = 0usize;
            loop {
                let more = r.next_into(self.dev, &mut w)?;
                let next = if more { group_of(&w) as usize } else { self.groups };
                while g < next {
                    self.emit_buffer(&mut out, &pending)?;
                    pending.clear();
                    g += 1;
                }
                if !more {
                    break;
                }
                if pending.len() == self.buffer_cap {
                    self.stats.overflows += 1;
                    self.apply(g, Entries::Ram(&pending))?;
                    pending.clear();
                }
                pending.push(TaggedUpdate::decode(&w));
            }
        } else {
            let mut look = Reader::new(self.dev, &sorted);
            let mut peek = [0u64; 2];
            let mut has_peek = look.next_into(self.dev, &mut peek)?;
            let mut pos = 0usize;
            for g in 0..self.groups {
                let mut run = 0usize;
                while has_peek && group_of(&peek) == g as u64 {
                    run += 1;
                    has_peek = look.next_into(self.dev, &mut peek)?;
                }
                let full = if run == 0 { 0 } else { (run - 1) / self.buffer_cap };
                for c in 0..full {
                    self.stats.overflows += 1;
                    let entries = Entries::Disk {
                        arr: &sorted,
                        word_from: (2 * (pos + c * self.buffer_cap)) as u64,
                        count: self.buffer_cap,
                    };
                    self.apply(g, entries)?;
                }
                let rest = run - full * self.buffer_cap;
                out.push_words(self.dev, &[rest as u64])?;
                let from = pos + full * self.buffer_cap;
                let mut r = Reader::range(self.dev, &sorted, from, from + rest);
                let mut w = [0u64; 2];
                while r.next_into(self.dev, &mut w)? {
                    out.push_words(self.dev, &w)?;
                }
                out.skip_words(self.dev, (self.phi - 2 * rest) as u64)?;
                pos += run;
            }
        }
        self.buffers = out.finish(self.dev)?;
        self.counts_dirty = false;
        self.dev.free(sorted);
        Ok(())
    }

    fn emit_buffer(&mut self, out: &mut Writer, pending: &[TaggedUpdate]) -> Result<()> {
        out.push_words(self.dev, &[pending.len() as u64])?;
        for t in pending {
            out.push_words(self.dev, &t.encode())?;
        }
        out.skip_words(self.dev, (self.phi - 2 * pending.len()) as u64)
    }

    /// One pass over all buffers, in the same order as the sketches. Counts
    /// are left in place and marked stale.
    fn apply_all_buffers(&mut self) -> Result<()> {
        let buffers = std::mem::replace(&mut self.buffers, self.dev.alloc_array(0, 1));
        let mut r = Reader::new(self.dev, &buffers);
        let _lease = self.buffers_in_ram.then(|| self.dev.lease(self.phi));
        let mut pending: Vec<TaggedUpdate> = Vec::new();
        let mut count = [0u64; 1];
        let mut w = [0u64; 2];
        for g in 0..self.groups {
            r.next_into(self.dev, &mut count)?;
            let n = count[0] as usize;
            if n == 0 {
                r.skip_words(self.phi as u64);
                continue;
            }
            if self.buffers_in_ram {
                pending.clear();
                for _ in 0..n {
                    r.next_into(self.dev, &mut w)?;
                    pending.push(TaggedUpdate::decode(&w));
                }
                r.skip_words((self.phi - 2 * n) as u64);
                self.apply(g, Entries::Ram(&pending))?;
            } else {
                let entries = Entries::Disk {
                    arr: &buffers,
                    word_from: self.buffer_offset(g) + 1,
                    count: n,
                };
                self.apply(g, entries)?;
                r.skip_words(self.phi as u64);
            }
        }
        drop(r);
        self.buffers = buffers;
        self.counts_dirty = true;
        Ok(())
    }
}

/// Apply `entries` to the sketches of group `g`.
fn apply_group<S: VertexScheme>(
    dev: &mut BlockDevice,
    scheme: &S,
    sketches: &SketchArray,
    group: usize,
    g: usize,
    entries: Entries,
    stats: &mut IngestStats,
) -> Result<()> {
    let phi = sketches.words;
    let first = g * group;
    let last = ((g + 1) * group).min(sketches.slots);
    let span = (last - first) * phi;
    let limit = (dev.ram_words() / 4).max(1);
    let mut t_words = [0u64; 2];
    let mut for_each = |dev: &mut BlockDevice, f: &mut dyn FnMut(&TaggedUpdate)| -> Result<()> {
        match &entries {
            Entries::Ram(list) => list.iter().for_each(|t| f(t)),
            Entries::Disk {
                arr,
                word_from,
                count,
            } => {
                let mut r = Reader::words(dev, arr, *word_from, word_from + 2 * *count as u64);
                while r.next_into(dev, &mut t_words)? {
                    f(&TaggedUpdate::decode(&t_words));
                }
            }
        }
        Ok(())
    };
    if span <= limit {
        let _lease = dev.lease(span);
        let mut win = vec![0u64; span];
        let base = (first * phi) as u64;
        dev.read_words(&sketches.arr, base, &mut win)?;
        for_each(dev, &mut |t| {
            let local = (t.target as usize - first) * phi;
            scheme.apply(&mut win[local..local + phi], 0, t);
        })?;
        dev.write_words(&sketches.arr, base, &win)?;
        return Ok(());
    }
    // A single slot whose sketch exceeds the window: one pass over the
    // entries per window.
    debug_assert_eq!(last - first, 1);
    stats.windowed_applications += 1;
    let _lease = dev.lease(limit);
    let mut win = vec![0u64; limit];
    let mut off = 0;
    while off < phi {
        let len = limit.min(phi - off);
        let base = (first * phi + off) as u64;
        dev.read_words(&sketches.arr, base, &mut win[..len])?;
        for_each(dev, &mut |t| scheme.apply(&mut win[..len], off, t))?;
        dev.write_words(&sketches.arr, base, &win[..len])?;
        off += len;
    }
    Ok(())
}

/// Ingest a whole stream on `dev`, returning the sketch array.
pub fn ingest<S, I>(dev: &mut BlockDevice, scheme: S, inputs: I) -> Result<(SketchArray, IngestStats)>
where
    S: VertexScheme,
    I: IntoIterator,
    I::Item: std::borrow::Borrow<S::Input>,
{
    use std::borrow::Borrow;
    let mut st = IngestState::new(dev, scheme)?;
    for x in inputs {
        st.feed(x.borrow())?;
    }
    st.finalize()
}

/// Measured ingestion I/O stays below this multiple of [`predicted_io`].
/// Each update costs two tagged copies of two words, and every batch is
/// staged, sorted and spread over the buffers, so the constant absorbs
/// roughly eight passes over four words per update.
pub const INGEST_IO_CONSTANT: f64 = 64.0;

/// Predicted ingestion I/O bound `vsketch(N, V, φ)` for a stream of `n`
/// updates.
pub fn predicted_io(p: &EmParams, n: usize, slots: usize, phi: usize) -> f64 {
    cost::vsketch(n as f64, slots as f64, phi as f64, p)
}

/// I/O spent between two snapshots.
pub fn io_between(before: &IoStats, after: &IoStats) -> u64 {
    after.since(before).total()
}
