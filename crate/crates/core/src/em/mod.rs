//! Simulated external-memory machine.
//!
//! A [`BlockDevice`] holds `M` words of (logical) RAM and an unbounded disk
//! addressed in blocks of `B` words. Every block moved between the two is
//! charged to [`IoStats`]. All external data in this crate lives in
//! [`ExtArray`]s and is touched only through the block primitives here, so
//! the counters are the I/O cost of an algorithm in the external-memory model.
//!
//! The machine word is 64 bits; all sizes are in words.
//!
//! RAM is enforced logically: buffers that model RAM take a [`RamLease`] and
//! debug builds assert that the live total never exceeds `M`.

mod array;
pub mod cost;
mod permute;
mod sort;
mod store;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

pub use array::{ExtArray, Reader, Record, Writer};
pub use permute::{
    choose_permute_strategy, direct_permute_cost, ext_permute, ext_scan, sort_permute_cost,
    PermuteStrategy,
};
pub use sort::{ext_sort, ext_sort_by, SORT_IO_CONSTANT};
pub use store::{BlockStore, FileStore, MemStore};

/// RAM and block size of the simulated machine, in words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EmParams {
    pub ram_words: usize,
    pub block_words: usize,
}

impl EmParams {
    pub fn new(ram_words: usize, block_words: usize) -> Result<Self> {
        let p = Self {
            ram_words,
            block_words,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ram_words == 0 || self.block_words == 0 {
            return Err(Error::InvalidParams("M and B must be positive".into()));
        }
        if self.block_words < 2 {
            return Err(Error::InvalidParams(format!(
                "B = {} must be at least 2",
                self.block_words
            )));
        }
        if self.block_words * 4 > self.ram_words {
            return Err(Error::InvalidParams(format!(
                "B = {} exceeds M/4 = {}",
                self.block_words,
                self.ram_words / 4
            )));
        }
        Ok(())
    }

    /// Number of whole blocks that fit in RAM.
    pub fn ram_blocks(&self) -> usize {
        self.ram_words / self.block_words
    }

    /// Merge fan-in `floor(M / 2B)`; half of RAM stays free for output.
    pub fn merge_fan_in(&self) -> usize {
        (self.ram_words / (2 * self.block_words)).max(2)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IoStats {
    pub blocks_read: u64,
    pub blocks_written: u64,
}

impl IoStats {
    pub fn total(&self) -> u64 {
        self.blocks_read + self.blocks_written
    }

    /// Counters accumulated since `earlier`.
    pub fn since(&self, earlier: &IoStats) -> IoStats {
        IoStats {
            blocks_read: self.blocks_read - earlier.blocks_read,
            blocks_written: self.blocks_written - earlier.blocks_written,
        }
    }
}

#[derive(Debug, Default)]
struct RamMeter {
    live: AtomicUsize,
    peak: AtomicUsize,
}

/// A claim on simulated RAM; released on drop.
#[derive(Debug)]
pub struct RamLease {
    meter: Arc<RamMeter>,
    words: usize,
}

impl RamLease {
    pub fn words(&self) -> usize {
        self.words
    }
}

impl Drop for RamLease {
    fn drop(&mut self) {
        self.meter.live.fetch_sub(self.words, Ordering::Relaxed);
    }
}

/// First-fit extent allocator over block addresses.
#[derive(Debug, Default)]
struct ExtentAllocator {
    free: BTreeMap<u64, u64>,
    end: u64,
}

impl ExtentAllocator {
    fn alloc(&mut self, blocks: u64) -> u64 {
        if blocks == 0 {
            return self.end;
        }
        let hit = self
            .free
            .iter()
            .find(|(_, &len)| len >= blocks)
            .map(|(&s, &l)| (s, l));
        if let Some((start, len)) = hit {
            self.free.remove(&start);
            if len > blocks {
                self.free.insert(start + blocks, len - blocks);
            }
            return start;
        }
        let start = self.end;
        self.end += blocks;
        start
    }

    fn release(&mut self, start: u64, blocks: u64) {
        if blocks == 0 {
            return;
        }
        let mut start = start;
        let mut len = blocks;
        if let Some((&ps, &pl)) = self.free.range(..start).next_back() {
            if ps + pl == start {
                self.free.remove(&ps);
                start = ps;
                len += pl;
            }
        }
        if let Some(&nl) = self.free.get(&(start + len)) {
            self.free.remove(&(start + len));
            len += nl;
        }
        if start + len == self.end {
            self.end = start;
        } else {
            self.free.insert(start, len);
        }
    }
}

/// Block device with I/O counting. Single-threaded; may be moved between
/// threads but never shared.
pub struct BlockDevice {
    params: EmParams,
    stats: IoStats,
    store: Box<dyn BlockStore>,
    alloc: ExtentAllocator,
    ram: Arc<RamMeter>,
}

impl std::fmt::Debug for BlockDevice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlockDevice")
            .field("params", &self.params)
            .field("stats", &self.stats)
            .finish()
    }
}

impl BlockDevice {
    /// Memory-backed device.
    pub fn new(params: EmParams) -> Result<Self> {
        Self::with_store(params, Box::new(MemStore::new()))
    }

    /// Device backed by one flat file at `path`. Counts are identical to the
    /// memory-backed device.
    pub fn with_file(params: EmParams, path: &Path) -> Result<Self> {
        params.validate()?;
        let store = FileStore::create(path, params.block_words)?;
        Self::with_store(params, Box::new(store))
    }

    pub fn with_store(params: EmParams, store: Box<dyn BlockStore>) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            stats: IoStats::default(),
            store,
            alloc: ExtentAllocator::default(),
            ram: Arc::new(RamMeter::default()),
        })
    }

    pub fn params(&self) -> EmParams {
        self.params
    }

    pub fn block_words(&self) -> usize {
        self.params.block_words
    }

    pub fn ram_words(&self) -> usize {
        self.params.ram_words
    }

    pub fn io_snapshot(&self) -> IoStats {
        self.stats
    }

    pub fn io_reset(&mut self) {
        self.stats = IoStats::default();
    }

    /// Claim `words` of simulated RAM.
    pub fn lease(&self, words: usize) -> RamLease {
        let live = self.ram.live.fetch_add(words, Ordering::Relaxed) + words;
        self.ram.peak.fetch_max(live, Ordering::Relaxed);
        debug_assert!(
            live <= self.params.ram_words,
            "simulated RAM overcommitted: {live} > {} words",
            self.params.ram_words
        );
        RamLease {
            meter: Arc::clone(&self.ram),
            words,
        }
    }

    pub fn ram_in_use(&self) -> usize {
        self.ram.live.load(Ordering::Relaxed)
    }

    /// Highest simultaneous RAM use observed so far.
    pub fn ram_peak(&self) -> usize {
        self.ram.peak.load(Ordering::Relaxed)
    }

    /// Charged single-block read.
    pub fn read_block(&mut self, block: u64, out: &mut [u64]) -> Result<()> {
        debug_assert_eq!(out.len(), self.params.block_words);
        self.stats.blocks_read += 1;
        self.store.read(block, out)?;
        Ok(())
    }

    /// Charged single-block write.
    pub fn write_block(&mut self, block: u64, data: &[u64]) -> Result<()> {
        debug_assert_eq!(data.len(), self.params.block_words);
        self.stats.blocks_written += 1;
        self.store.write(block, data)?;
        Ok(())
    }

    /// Allocate an array of `len` records of `record_words` words. Contents
    /// are unspecified until written.
    pub fn alloc_array(&mut self, len: usize, record_words: usize) -> ExtArray {
        assert!(record_words > 0, "records must be at least one word");
        let words = len as u64 * record_words as u64;
        let blocks = words.div_ceil(self.params.block_words as u64);
        let start = self.alloc.alloc(blocks);
        ExtArray::new(start, blocks, len, record_words)
    }

    /// Allocate an array and fill it with zeros, charging one write per block.
    pub fn alloc_zeroed(&mut self, len: usize, record_words: usize) -> Result<ExtArray> {
        let arr = self.alloc_array(len, record_words);
        let _lease = self.lease(self.params.block_words);
        let zeros = vec![0u64; self.params.block_words];
        for b in 0..arr.blocks_used(self.params.block_words) {
            self.write_block(arr.start_block() + b, &zeros)?;
        }
        Ok(arr)
    }

    /// Return an array's blocks to the allocator.
    pub fn free(&mut self, arr: ExtArray) {
        self.store.discard(arr.start_block(), arr.allocated_blocks());
        self.alloc.release(arr.start_block(), arr.allocated_blocks());
    }

    /// Words currently allocated on disk (live arrays only).
    pub fn allocated_blocks(&self) -> u64 {
        self.alloc.end - self.alloc.free.values().sum::<u64>()
    }

    /// Read `out.len()` words starting at word `word_off` of `arr`, one
    /// charged read per block touched.
    pub fn read_words(&mut self, arr: &ExtArray, word_off: u64, out: &mut [u64]) -> Result<()> {
        if out.is_empty() {
            return Ok(());
        }
        let b = self.params.block_words as u64;
        assert!(word_off + out.len() as u64 <= arr.words(), "read past end of array");
        let _lease = self.lease(b as usize);
        let mut buf = vec![0u64; b as usize];
        let mut done = 0usize;
        while done < out.len() {
            let w = word_off + done as u64;
            let blk = w / b;
            let inner = (w % b) as usize;
            let take = (b as usize - inner).min(out.len() - done);
            self.read_block(arr.start_block() + blk, &mut buf)?;
            out[done..done + take].copy_from_slice(&buf[inner..inner + take]);
            done += take;
        }
        Ok(())
    }

    /// Write `data` at word `word_off` of `arr`. Blocks that are only
    /// partially covered are read first (read-modify-write).
    pub fn write_words(&mut self, arr: &ExtArray, word_off: u64, data: &[u64]) -> Result<()> {
        if data.is_empty() {
            return Ok(());
        }
        let b = self.params.block_words as u64;
        assert!(
            word_off + data.len() as u64 <= arr.allocated_blocks() * b,
            "write past end of array"
        );
        let _lease = self.lease(b as usize);
        let mut buf = vec![0u64; b as usize];
        let mut done = 0usize;
        while done < data.len() {
            let w = word_off + done as u64;
            let blk = w / b;
            let inner = (w % b) as usize;
            let take = (b as usize - inner).min(data.len() - done);
            if take < b as usize {
                self.read_block(arr.start_block() + blk, &mut buf)?;
            }
            buf[inner..inner + take].copy_from_slice(&data[done..done + take]);
            self.write_block(arr.start_block() + blk, &buf)?;
            done += take;
        }
        Ok(())
    }

    /// Read-modify-write `len` words at `word_off`: every touched block is
    /// read once and written once.
    pub fn update_words<F>(&mut self, arr: &ExtArray, word_off: u64, len: usize, f: F) -> Result<()>
    where
        F: FnOnce(&mut [u64]),
    {
        if len == 0 {
            return Ok(());
        }
        let b = self.params.block_words as u64;
        assert!(
            word_off + len as u64 <= arr.allocated_blocks() * b,
            "update past end of array"
        );
        let first = word_off / b;
        let last = (word_off + len as u64 - 1) / b;
        let nblocks = (last - first + 1) as usize;
        let _lease = self.lease(nblocks * b as usize);
        let mut buf = vec![0u64; nblocks * b as usize];
        for i in 0..nblocks {
            let chunk = &mut buf[i * b as usize..(i + 1) * b as usize];
            self.read_block(arr.start_block() + first + i as u64, chunk)?;
        }
        let inner = (word_off - first * b) as usize;
        f(&mut buf[inner..inner + len]);
        for i in 0..nblocks {
            let chunk = &buf[i * b as usize..(i + 1) * b as usize];
            self.write_block(arr.start_block() + first + i as u64, chunk)?;
        }
        Ok(())
    }

    pub fn read_record_words(&mut self, arr: &ExtArray, idx: usize, out: &mut [u64]) -> Result<()> {
        assert!(idx < arr.len(), "record index out of range");
        let rw = arr.record_words();
        self.read_words(arr, (idx * rw) as u64, &mut out[..rw])
    }

    pub fn write_record_words(&mut self, arr: &ExtArray, idx: usize, data: &[u64]) -> Result<()> {
        let rw = arr.record_words();
        assert_eq!(data.len(), rw);
        self.write_words(arr, (idx * rw) as u64, data)
    }

    pub fn read_record<R: Record>(&mut self, arr: &ExtArray, idx: usize) -> Result<R> {
        let mut w = vec![0u64; R::WORDS];
        self.read_record_words(arr, idx, &mut w)?;
        Ok(R::decode(&w))
    }

    pub fn write_record<R: Record>(&mut self, arr: &ExtArray, idx: usize, rec: &R) -> Result<()> {
        let mut w = vec![0u64; R::WORDS];
        rec.encode(&mut w);
        self.write_record_words(arr, idx, &w)
    }

    /// Materialize a slice of records as a new array (one write pass).
    pub fn array_from_records<R: Record>(&mut self, recs: &[R]) -> Result<ExtArray> {
        let arr = self.alloc_array(recs.len(), R::WORDS);
        let mut w = Writer::new(self, arr);
        for r in recs {
            w.push(self, r)?;
        }
        w.finish(self)
    }

    /// Read a whole array back into host memory (one read pass). Intended for
    /// results and tests, not for simulated-RAM computation.
    pub fn read_all<R: Record>(&mut self, arr: &ExtArray) -> Result<Vec<R>> {
        let mut out = Vec::with_capacity(arr.len());
        let mut r = Reader::new(self, arr);
        while let Some(rec) = r.next::<R>(self)? {
            out.push(rec);
        }
        Ok(out)
    }
}
