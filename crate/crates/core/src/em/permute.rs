use super::{cost, BlockDevice, EmParams, ExtArray, Reader, Record, Writer};
use crate::error::{Error, Result};

/// Elementwise transform into a new array of the same length.
pub fn ext_scan<R, S, F>(dev: &mut BlockDevice, arr: &ExtArray, mut f: F) -> Result<ExtArray>
where
    R: Record,
    S: Record,
    F: FnMut(&R) -> S,
{
    let out = dev.alloc_array(arr.len(), S::WORDS);
    let mut w = Writer::new(dev, out);
    let mut r = Reader::new(dev, arr);
    while let Some(rec) = r.next::<R>(dev)? {
        w.push(dev, &f(&rec))?;
    }
    drop(r);
    w.finish(dev)
}

/// How records are routed to their target positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermuteStrategy {
    /// One random block access per record.
    Direct,
    /// Tag with the target and sort.
    Sort,
}

/// Predicted I/O of direct placement: a read and a write of every block a
/// slot touches, plus zeroing, the input scan and the compaction scan.
pub fn direct_permute_cost(p: &EmParams, records: usize, record_words: usize) -> f64 {
    let n = records as f64;
    let slot = (record_words + 1) as f64;
    let touched = 1.0 + (slot - 1.0) / p.block_words as f64;
    let tagged = n * slot;
    let plain = n * record_words as f64;
    2.0 * n * touched + 2.0 * cost::scan(tagged, p) + 2.0 * cost::scan(plain, p)
}

/// Predicted I/O of tag-and-sort routing.
pub fn sort_permute_cost(p: &EmParams, records: usize, record_words: usize) -> f64 {
    let tagged = (records * (record_words + 1)) as f64;
    let plain = (records * record_words) as f64;
    2.0 * cost::scan(plain, p)
        + 2.0 * cost::scan(tagged, p)
        + cost::sort_implementation_cost(records, record_words + 1, p)
}

/// Pick the cheaper routing for `records` records of `record_words` words
/// under the device's cost model.
pub fn choose_permute_strategy(p: &EmParams, records: usize, record_words: usize) -> PermuteStrategy {
    if direct_permute_cost(p, records, record_words) < sort_permute_cost(p, records, record_words) {
        PermuteStrategy::Direct
    } else {
        PermuteStrategy::Sort
    }
}

/// Move record `i` to position `target(i, &rec)`. `target` must be a
/// bijection on `[len)`.
pub fn ext_permute<R, F>(dev: &mut BlockDevice, arr: &ExtArray, target: F) -> Result<ExtArray>
where
    R: Record,
    F: FnMut(usize, &R) -> usize,
{
    let strategy = choose_permute_strategy(&dev.params(), arr.len(), R::WORDS);
    ext_permute_with(dev, arr, target, strategy)
}

pub(crate) fn ext_permute_with<R, F>(
    dev: &mut BlockDevice,
    arr: &ExtArray,
    mut target: F,
    strategy: PermuteStrategy,
) -> Result<ExtArray>
where
    R: Record,
    F: FnMut(usize, &R) -> usize,
{
    let n = arr.len();
    let rw = R::WORDS;
    match strategy {
        PermuteStrategy::Direct => {
            // slot layout: [filled marker, record words]
            let slots = dev.alloc_zeroed(n, rw + 1)?;
            let mut r = Reader::new(dev, arr);
            let mut words = vec![0u64; rw];
            let mut i = 0usize;
            let mut clash = None;
            while r.next_into(dev, &mut words)? {
                let t = target(i, &R::decode(&words));
                if t >= n {
                    clash = Some(format!("target {t} out of range for {n} records"));
                    break;
                }
                let mut dup = false;
                dev.update_words(&slots, (t * (rw + 1)) as u64, rw + 1, |slot| {
                    if slot[0] != 0 {
                        dup = true;
                    } else {
                        slot[0] = 1;
                        slot[1..].copy_from_slice(&words);
                    }
                })?;
                if dup {
                    clash = Some(format!("target {t} hit twice"));
                    break;
                }
                i += 1;
            }
            drop(r);
            if let Some(msg) = clash {
                dev.free(slots);
                return Err(Error::NotBijective(msg));
            }
            let out = dev.alloc_array(n, rw);
            let mut w = Writer::new(dev, out);
            let mut r = Reader::new(dev, &slots);
            let mut slot = vec![0u64; rw + 1];
            while r.next_into(dev, &mut slot)? {
                w.push_words(dev, &slot[1..])?;
            }
            drop(r);
            let out = w.finish(dev)?;
            dev.free(slots);
            Ok(out)
        }
        PermuteStrategy::Sort => {
            let tagged = dev.alloc_array(n, rw + 1);
            let mut w = Writer::new(dev, tagged);
            let mut r = Reader::new(dev, arr);
            let mut words = vec![0u64; rw + 1];
            let mut i = 0usize;
            while r.next_into(dev, &mut words[1..])? {
                let t = target(i, &R::decode(&words[1..]));
                if t >= n {
                    drop(r);
                    let tagged = w.finish(dev)?;
                    dev.free(tagged);
                    return Err(Error::NotBijective(format!(
                        "target {t} out of range for {n} records"
                    )));
                }
                words[0] = t as u64;
                w.push_words(dev, &words)?;
                i += 1;
            }
            drop(r);
            let tagged = w.finish(dev)?;
            let sorted = sort_wide(dev, &tagged)?;
            dev.free(tagged);
            // strip tags, checking that targets are exactly 0..n
            let out = dev.alloc_array(n, rw);
            let mut w = Writer::new(dev, out);
            let mut r = Reader::new(dev, &sorted);
            let mut expect = 0u64;
            let mut bad = None;
            while r.next_into(dev, &mut words)? {
                if words[0] != expect {
                    bad = Some(format!("target {} hit twice", words[0].min(expect)));
                    break;
                }
                expect += 1;
                w.push_words(dev, &words[1..])?;
            }
            drop(r);
            let out = w.finish(dev)?;
            dev.free(sorted);
            if let Some(msg) = bad {
                dev.free(out);
                return Err(Error::NotBijective(msg));
            }
            Ok(out)
        }
    }
}

/// Sort runtime-width records whose first word is the key.
pub(crate) fn sort_wide(dev: &mut BlockDevice, arr: &ExtArray) -> Result<ExtArray> {
    super::sort::ext_sort_by(dev, arr, |w| w[0])
}
