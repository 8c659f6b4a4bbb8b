use super::{BlockDevice, RamLease};
use crate::error::Result;

/// Fixed-width record stored as 64-bit words.
pub trait Record: Sized + Clone {
    const WORDS: usize;
    fn encode(&self, out: &mut [u64]);
    fn decode(words: &[u64]) -> Self;
}

impl Record for u64 {
    const WORDS: usize = 1;
    fn encode(&self, out: &mut [u64]) {
        out[0] = *self;
    }
    fn decode(words: &[u64]) -> Self {
        words[0]
    }
}

impl<const N: usize> Record for [u64; N] {
    const WORDS: usize = N;
    fn encode(&self, out: &mut [u64]) {
        out[..N].copy_from_slice(self);
    }
    fn decode(words: &[u64]) -> Self {
        let mut a = [0u64; N];
        a.copy_from_slice(&words[..N]);
        a
    }
}

impl Record for (u64, u64) {
    const WORDS: usize = 2;
    fn encode(&self, out: &mut [u64]) {
        out[0] = self.0;
        out[1] = self.1;
    }
    fn decode(w: &[u64]) -> Self {
        (w[0], w[1])
    }
}

impl Record for (u64, u64, u64) {
    const WORDS: usize = 3;
    fn encode(&self, out: &mut [u64]) {
        out[0] = self.0;
        out[1] = self.1;
        out[2] = self.2;
    }
    fn decode(w: &[u64]) -> Self {
        (w[0], w[1], w[2])
    }
}

/// Handle to a sequence of fixed-width records resident on a block device.
/// The array starts on a block boundary.
#[derive(Debug, PartialEq, Eq)]
pub struct ExtArray {
    start: u64,
    blocks: u64,
    len: usize,
    record_words: usize,
}

impl ExtArray {
    pub(super) fn new(start: u64, blocks: u64, len: usize, record_words: usize) -> Self {
        Self {
            start,
            blocks,
            len,
            record_words,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn record_words(&self) -> usize {
        self.record_words
    }

    pub fn words(&self) -> u64 {
        self.len as u64 * self.record_words as u64
    }

    pub fn start_block(&self) -> u64 {
        self.start
    }

    pub fn allocated_blocks(&self) -> u64 {
        self.blocks
    }

    /// Records that fit in the allocation.
    pub fn capacity(&self, block_words: usize) -> usize {
        (self.blocks * block_words as u64 / self.record_words as u64) as usize
    }

    /// Blocks spanned by the live records.
    pub fn blocks_used(&self, block_words: usize) -> u64 {
        self.words().div_ceil(block_words as u64)
    }

    /// Shrink the logical length; storage is kept.
    pub fn truncate(&mut self, len: usize) {
        self.len = self.len.min(len);
    }

    /// Change the logical length within the allocation.
    pub fn set_len(&mut self, len: usize, block_words: usize) {
        assert!(len <= self.capacity(block_words));
        self.len = len;
    }
}

/// Sequential reader holding one block of RAM.
pub struct Reader {
    start: u64,
    end_word: u64,
    pos: u64,
    buf: Vec<u64>,
    buf_block: Option<u64>,
    _lease: RamLease,
}

impl Reader {
    pub fn new(dev: &BlockDevice, arr: &ExtArray) -> Self {
        Self::range(dev, arr, 0, arr.len())
    }

    /// Reader over records `[from, to)`.
    pub fn range(dev: &BlockDevice, arr: &ExtArray, from: usize, to: usize) -> Self {
        assert!(from <= to && to <= arr.len());
        let rw = arr.record_words() as u64;
        let b = dev.block_words();
        Self {
            start: arr.start_block(),
            end_word: to as u64 * rw,
            pos: from as u64 * rw,
            buf: vec![0; b],
            buf_block: None,
            _lease: dev.lease(b),
        }
    }

    /// Reader over the raw words `[from, to)` of `arr`.
    pub fn words(dev: &BlockDevice, arr: &ExtArray, from: u64, to: u64) -> Self {
        let b = dev.block_words() as u64;
        assert!(from <= to && to <= arr.allocated_blocks() * b);
        Self {
            start: arr.start_block(),
            end_word: to,
            pos: from,
            buf: vec![0; b as usize],
            buf_block: None,
            _lease: dev.lease(b as usize),
        }
    }

    pub fn remaining_words(&self) -> u64 {
        self.end_word - self.pos
    }

    /// Copy the next `out.len()` words; false at end of range.
    pub fn next_into(&mut self, dev: &mut BlockDevice, out: &mut [u64]) -> Result<bool> {
        if self.pos + out.len() as u64 > self.end_word {
            return Ok(false);
        }
        let b = self.buf.len() as u64;
        let mut done = 0;
        while done < out.len() {
            let blk = self.pos / b;
            if self.buf_block != Some(blk) {
                dev.read_block(self.start + blk, &mut self.buf)?;
                self.buf_block = Some(blk);
            }
            let inner = (self.pos % b) as usize;
            let take = (b as usize - inner).min(out.len() - done);
            out[done..done + take].copy_from_slice(&self.buf[inner..inner + take]);
            done += take;
            self.pos += take as u64;
        }
        Ok(true)
    }

    pub fn next<R: Record>(&mut self, dev: &mut BlockDevice) -> Result<Option<R>> {
        let mut w = [0u64; 8];
        if R::WORDS <= 8 {
            return Ok(if self.next_into(dev, &mut w[..R::WORDS])? {
                Some(R::decode(&w[..R::WORDS]))
            } else {
                None
            });
        }
        let mut v = vec![0u64; R::WORDS];
        Ok(if self.next_into(dev, &mut v)? {
            Some(R::decode(&v))
        } else {
            None
        })
    }

    /// Skip `words` words without reading them.
    pub fn skip_words(&mut self, words: u64) {
        self.pos = (self.pos + words).min(self.end_word);
    }
}

/// Sequential writer holding one block of RAM. Writes into a pre-allocated
/// array; `finish` flushes the partial tail block and sets the length.
pub struct Writer {
    arr: ExtArray,
    pos: u64,
    buf: Vec<u64>,
    _lease: RamLease,
}

impl Writer {
    pub fn new(dev: &BlockDevice, arr: ExtArray) -> Self {
        let b = dev.block_words();
        Self {
            arr,
            pos: 0,
            buf: vec![0; b],
            _lease: dev.lease(b),
        }
    }

    pub fn records_written(&self) -> usize {
        (self.pos / self.arr.record_words() as u64) as usize
    }

    pub fn push_words(&mut self, dev: &mut BlockDevice, words: &[u64]) -> Result<()> {
        let b = self.buf.len() as u64;
        assert!(
            self.pos + words.len() as u64 <= self.arr.allocated_blocks() * b,
            "writer overflow"
        );
        let mut done = 0;
        while done < words.len() {
            let inner = (self.pos % b) as usize;
            let take = (b as usize - inner).min(words.len() - done);
            self.buf[inner..inner + take].copy_from_slice(&words[done..done + take]);
            done += take;
            self.pos += take as u64;
            if self.pos % b == 0 {
                dev.write_block(self.arr.start_block() + self.pos / b - 1, &self.buf)?;
            }
        }
        Ok(())
    }

    /// Advance past `words` words whose content does not matter. Blocks
    /// covered only by skipped words are not written.
    pub fn skip_words(&mut self, dev: &mut BlockDevice, words: u64) -> Result<()> {
        let b = self.buf.len() as u64;
        assert!(
            self.pos + words <= self.arr.allocated_blocks() * b,
            "writer overflow"
        );
        let end = self.pos + words;
        let inner = (self.pos % b) as usize;
        if end / b > self.pos / b {
            if inner != 0 {
                self.buf[inner..].fill(0);
                dev.write_block(self.arr.start_block() + self.pos / b, &self.buf)?;
            }
            self.buf.fill(0);
        } else {
            self.buf[inner..(end % b) as usize].fill(0);
        }
        self.pos = end;
        Ok(())
    }

    pub fn push<R: Record>(&mut self, dev: &mut BlockDevice, rec: &R) -> Result<()> {
        let mut w = [0u64; 8];
        if R::WORDS <= 8 {
            rec.encode(&mut w[..R::WORDS]);
            return self.push_words(dev, &w[..R::WORDS]);
        }
        let mut v = vec![0u64; R::WORDS];
        rec.encode(&mut v);
        self.push_words(dev, &v)
    }

    pub fn finish(mut self, dev: &mut BlockDevice) -> Result<ExtArray> {
        let b = self.buf.len() as u64;
        if self.pos % b != 0 {
            self.buf[(self.pos % b) as usize..].fill(0);
            dev.write_block(self.arr.start_block() + self.pos / b, &self.buf)?;
        }
        let rw = self.arr.record_words() as u64;
        debug_assert_eq!(self.pos % rw, 0, "partial record at finish");
        let mut arr = self.arr;
        arr.len = (self.pos / rw) as usize;
        Ok(arr)
    }
}
