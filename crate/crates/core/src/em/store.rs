//! Backing stores for the block device.
//!
//! A store only moves whole blocks; it does no accounting. Blocks that were
//! never written read back as zeros.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::Path;

pub trait BlockStore: Send {
    fn read(&mut self, block: u64, out: &mut [u64]) -> std::io::Result<()>;
    fn write(&mut self, block: u64, data: &[u64]) -> std::io::Result<()>;
    /// Hint that a block range is no longer live.
    fn discard(&mut self, _start: u64, _blocks: u64) {}
}

/// Sparse in-memory store: only blocks that have been written hold memory.
#[derive(Default)]
pub struct MemStore {
    blocks: Vec<Option<Box<[u64]>>>,
}

impl MemStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl BlockStore for MemStore {
    fn read(&mut self, block: u64, out: &mut [u64]) -> std::io::Result<()> {
        match self.blocks.get(block as usize) {
            Some(Some(data)) => out.copy_from_slice(data),
            _ => out.fill(0),
        }
        Ok(())
    }

    fn write(&mut self, block: u64, data: &[u64]) -> std::io::Result<()> {
        let idx = block as usize;
        if idx >= self.blocks.len() {
            self.blocks.resize_with(idx + 1, || None);
        }
        match &mut self.blocks[idx] {
            Some(slot) => slot.copy_from_slice(data),
            slot @ None => *slot = Some(data.to_vec().into_boxed_slice()),
        }
        Ok(())
    }

    fn discard(&mut self, start: u64, blocks: u64) {
        let end = ((start + blocks) as usize).min(self.blocks.len());
        for slot in &mut self.blocks[(start as usize).min(end)..end] {
            *slot = None;
        }
    }
}

/// One flat, block-aligned file per device. Words are little-endian.
pub struct FileStore {
    file: File,
    block_words: usize,
    len_blocks: u64,
    scratch: Vec<u8>,
}

impl FileStore {
    pub fn create(path: &Path, block_words: usize) -> std::io::Result<Self> {
        let file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(true)
            .open(path)?;
        Ok(Self {
            file,
            block_words,
            len_blocks: 0,
            scratch: vec![0; block_words * 8],
        })
    }
}

impl BlockStore for FileStore {
    fn read(&mut self, block: u64, out: &mut [u64]) -> std::io::Result<()> {
        if block >= self.len_blocks {
            out.fill(0);
            return Ok(());
        }
        self.file
            .seek(SeekFrom::Start(block * (self.block_words as u64) * 8))?;
        self.file.read_exact(&mut self.scratch)?;
        for (w, chunk) in out.iter_mut().zip(self.scratch.chunks_exact(8)) {
            *w = u64::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(())
    }

    fn write(&mut self, block: u64, data: &[u64]) -> std::io::Result<()> {
        for (w, chunk) in data.iter().zip(self.scratch.chunks_exact_mut(8)) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        self.file
            .seek(SeekFrom::Start(block * (self.block_words as u64) * 8))?;
        self.file.write_all(&self.scratch)?;
        self.len_blocks = self.len_blocks.max(block + 1);
        Ok(())
    }
}
