//! Multiway external merge sort.
//!
//! Run formation fills `M - 2B` words of RAM, sorts in memory and writes a
//! run; merge passes combine up to `floor(M/2B)` runs at a time. When the
//! whole input fits in RAM it is read once, sorted and written once. RAM
//! already leased by the caller is left alone.
//!
//! Measured I/O stays below [`SORT_IO_CONSTANT`] times
//! [`cost::sort_envelope`](super::cost::sort_envelope) of the input words.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{BlockDevice, EmParams, ExtArray, Reader, Record, Writer};
use crate::error::{Error, Result};

/// Documented constant `c` of the sort I/O bound
/// `c * (n/B) * (1 + ceil(log_{M/B}(n/B)))`.
pub const SORT_IO_CONSTANT: f64 = 6.0;

/// Fan-in used for `record_words`-word records: `floor(M/2B)`, reduced when
/// the decoded run heads would not fit next to their input blocks.
pub(super) fn fan_in(p: &EmParams, record_words: usize) -> usize {
    let fit = (p.ram_words - p.block_words) / (p.block_words + record_words);
    p.merge_fan_in().min(fit).max(2)
}

/// Stable sort of `arr` by `key`. Returns a new array; the input is kept.
pub fn ext_sort<R, K, F>(dev: &mut BlockDevice, arr: &ExtArray, key: F) -> Result<ExtArray>
where
    R: Record,
    K: Ord,
    F: Fn(&R) -> K,
{
    assert_eq!(arr.record_words(), R::WORDS, "record width mismatch");
    ext_sort_by(dev, arr, |w| key(&R::decode(w)))
}

/// Stable sort of records of `arr.record_words()` words by a key computed
/// from the raw words.
pub fn ext_sort_by<K, F>(dev: &mut BlockDevice, arr: &ExtArray, key: F) -> Result<ExtArray>
where
    K: Ord,
    F: Fn(&[u64]) -> K,
{
    // budget only the RAM not leased by the caller
    let full = dev.params();
    let p = EmParams {
        ram_words: full.ram_words.saturating_sub(dev.ram_in_use()),
        ..full
    };
    let b = p.block_words;
    let rw = arr.record_words();
    if 3 * b + 2 * rw > p.ram_words {
        return Err(Error::RecordTooLarge {
            record_words: rw,
            ram_words: p.ram_words,
        });
    }
    if arr.is_empty() {
        return Ok(dev.alloc_array(0, rw));
    }

    let blocks = arr.blocks_used(b) as usize;
    if blocks * b <= p.ram_words {
        return sort_in_ram(dev, arr, &key);
    }

    let mut runs = form_runs(dev, &p, arr, &key)?;
    let f = fan_in(&p, rw);
    while runs.len() > 1 {
        let mut next = Vec::with_capacity(runs.len().div_ceil(f));
        let mut it = runs.into_iter().peekable();
        while it.peek().is_some() {
            let group: Vec<ExtArray> = it.by_ref().take(f).collect();
            if group.len() == 1 {
                next.extend(group);
            } else {
                next.push(merge_runs(dev, group, &key)?);
            }
        }
        runs = next;
    }
    Ok(runs.pop().unwrap())
}

/// Stable permutation of the records in `words` by key.
fn sorted_order<K: Ord>(words: &[u64], rw: usize, key: &impl Fn(&[u64]) -> K) -> Vec<u64> {
    let mut idx: Vec<usize> = (0..words.len() / rw).collect();
    idx.sort_by_cached_key(|&i| key(&words[i * rw..(i + 1) * rw]));
    let mut out = Vec::with_capacity(words.len());
    for i in idx {
        out.extend_from_slice(&words[i * rw..(i + 1) * rw]);
    }
    out
}

fn sort_in_ram<K: Ord>(
    dev: &mut BlockDevice,
    arr: &ExtArray,
    key: &impl Fn(&[u64]) -> K,
) -> Result<ExtArray> {
    let b = dev.block_words();
    let rw = arr.record_words();
    let blocks = arr.blocks_used(b) as usize;
    let _lease = dev.lease(blocks * b);
    let mut words = vec![0u64; blocks * b];
    for i in 0..blocks {
        dev.read_block(arr.start_block() + i as u64, &mut words[i * b..(i + 1) * b])?;
    }
    let live = arr.words() as usize;
    let sorted = sorted_order(&words[..live], rw, key);
    words[..live].copy_from_slice(&sorted);
    let mut out = dev.alloc_array(arr.len(), rw);
    for i in 0..blocks {
        dev.write_block(out.start_block() + i as u64, &words[i * b..(i + 1) * b])?;
    }
    out.set_len(arr.len(), b);
    Ok(out)
}

fn form_runs<K: Ord>(
    dev: &mut BlockDevice,
    p: &EmParams,
    arr: &ExtArray,
    key: &impl Fn(&[u64]) -> K,
) -> Result<Vec<ExtArray>> {
    let rw = arr.record_words();
    let chunk_records = ((p.ram_words - 2 * p.block_words) / rw).max(1);
    let mut runs = Vec::new();
    let mut reader = Reader::new(dev, arr);
    let _lease = dev.lease(chunk_records * rw);
    let mut chunk = vec![0u64; chunk_records * rw];
    loop {
        let mut filled = 0;
        while filled < chunk_records
            && reader.next_into(dev, &mut chunk[filled * rw..(filled + 1) * rw])?
        {
            filled += 1;
        }
        if filled == 0 {
            break;
        }
        let sorted = sorted_order(&chunk[..filled * rw], rw, key);
        let out = dev.alloc_array(filled, rw);
        let mut w = Writer::new(dev, out);
        w.push_words(dev, &sorted)?;
        runs.push(w.finish(dev)?);
    }
    Ok(runs)
}

fn merge_runs<K: Ord>(
    dev: &mut BlockDevice,
    group: Vec<ExtArray>,
    key: &impl Fn(&[u64]) -> K,
) -> Result<ExtArray> {
    let rw = group[0].record_words();
    let total: usize = group.iter().map(|a| a.len()).sum();
    let mut readers: Vec<Reader> = group.iter().map(|a| Reader::new(dev, a)).collect();
    let _heads_lease = dev.lease(group.len() * rw);
    let mut heads = vec![0u64; group.len() * rw];
    let mut heap = BinaryHeap::with_capacity(group.len());
    for (i, r) in readers.iter_mut().enumerate() {
        let h = &mut heads[i * rw..(i + 1) * rw];
        if r.next_into(dev, h)? {
            heap.push(Reverse((key(h), i)));
        }
    }
    let out = dev.alloc_array(total, rw);
    let mut w = Writer::new(dev, out);
    while let Some(Reverse((_, i))) = heap.pop() {
        let h = &mut heads[i * rw..(i + 1) * rw];
        w.push_words(dev, h)?;
        if readers[i].next_into(dev, h)? {
            heap.push(Reverse((key(h), i)));
        }
    }
    drop(readers);
    let out = w.finish(dev)?;
    for a in group {
        dev.free(a);
    }
    Ok(out)
}
