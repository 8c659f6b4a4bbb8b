//! Connected components of the per-round merge graph.
//!
//! Input edges are records `(a, b, wu, wv)`: an edge between component ids
//! `a` and `b` witnessed by the graph edge `(wu, wv)`. The output maps every
//! id that appears to the smallest id of its component, and selects a
//! spanning forest of witnesses, so that applying only the forest merges is
//! free of redundancy.

use crate::em::{ext_sort_by, BlockDevice, ExtArray, Reader, Writer};
use crate::error::Result;

/// Words per merge-graph edge record.
pub const EDGE_WORDS: usize = 4;

/// Result of [`merge_graph_cc`].
#[derive(Debug)]
pub struct MergeResolution {
    /// `(id, rep)` for every id in the merge graph, sorted by id.
    pub reps: ExtArray,
    /// Witness edges `(wu, wv)` of a spanning forest of the merge graph.
    pub forest: ExtArray,
}

/// Which algorithm [`merge_graph_cc`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeGraphMethod {
    /// In-RAM union-find when the ids fit in a quarter of RAM.
    Auto,
    InMemory,
    /// Deterministic hooking to the smallest neighbour with pointer jumping.
    Hooking,
}

pub fn merge_graph_cc(dev: &mut BlockDevice, edges: &ExtArray) -> Result<MergeResolution> {
    merge_graph_cc_with(dev, edges, MergeGraphMethod::Auto)
}

pub fn merge_graph_cc_with(
    dev: &mut BlockDevice,
    edges: &ExtArray,
    method: MergeGraphMethod,
) -> Result<MergeResolution> {
    assert_eq!(edges.record_words(), EDGE_WORDS);
    let in_memory = match method {
        MergeGraphMethod::Auto => 2 * edges.len() <= dev.ram_words() / 4,
        MergeGraphMethod::InMemory => true,
        MergeGraphMethod::Hooking => false,
    };
    if in_memory {
        in_memory_cc(dev, edges)
    } else {
        hooking_cc(dev, edges)
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

fn in_memory_cc(dev: &mut BlockDevice, edges: &ExtArray) -> Result<MergeResolution> {
    let _lease = dev.lease(3 * edges.len());
    let mut ids = Vec::with_capacity(2 * edges.len());
    let mut e = [0u64; EDGE_WORDS];
    let mut r = Reader::new(dev, edges);
    while r.next_into(dev, &mut e)? {
        ids.push(e[0]);
        ids.push(e[1]);
    }
    drop(r);
    ids.sort_unstable();
    ids.dedup();
    let index = |x: u64| ids.binary_search(&x).unwrap() as u32;
    // ids are sorted, so uniting towards the smaller index keeps the root
    // the smallest id of its set
    let mut parent: Vec<u32> = (0..ids.len() as u32).collect();
    let forest = dev.alloc_array(edges.len(), 2);
    let mut fw = Writer::new(dev, forest);
    let mut r = Reader::new(dev, edges);
    while r.next_into(dev, &mut e)? {
        let a = find(&mut parent, index(e[0]));
        let b = find(&mut parent, index(e[1]));
        if a != b {
            parent[a.max(b) as usize] = a.min(b);
            fw.push_words(dev, &e[2..])?;
        }
    }
    drop(r);
    let forest = fw.finish(dev)?;
    let reps = dev.alloc_array(ids.len(), 2);
    let mut w = Writer::new(dev, reps);
    for i in 0..ids.len() as u32 {
        let root = find(&mut parent, i);
        w.push_words(dev, &[ids[i as usize], ids[root as usize]])?;
    }
    Ok(MergeResolution {
        reps: w.finish(dev)?,
        forest,
    })
}

/// Sorted, deduplicated endpoint ids of `edges`.
fn distinct_ids(dev: &mut BlockDevice, edges: &ExtArray) -> Result<ExtArray> {
    let ends = dev.alloc_array(2 * edges.len(), 1);
    let mut w = Writer::new(dev, ends);
    let mut r = Reader::new(dev, edges);
    let mut e = [0u64; EDGE_WORDS];
    while r.next_into(dev, &mut e)? {
        w.push_words(dev, &e[..2])?;
    }
    drop(r);
    let ends = w.finish(dev)?;
    let sorted = ext_sort_by(dev, &ends, |w| w[0])?;
    dev.free(ends);
    let out = dev.alloc_array(sorted.len(), 1);
    let mut w = Writer::new(dev, out);
    let mut r = Reader::new(dev, &sorted);
    let mut x = [0u64; 1];
    let mut last = None;
    while r.next_into(dev, &mut x)? {
        if last != Some(x[0]) {
            w.push_words(dev, &x)?;
            last = Some(x[0]);
        }
    }
    drop(r);
    dev.free(sorted);
    w.finish(dev)
}

/// Replace word `at` of each record of `arr` (sorted by that word) using
/// the sorted `(x, y)` map; ids absent from the map are kept.
fn relabel(dev: &mut BlockDevice, arr: &ExtArray, at: usize, map: &ExtArray) -> Result<ExtArray> {
    let rw = arr.record_words();
    let out = dev.alloc_array(arr.len(), rw);
    let mut w = Writer::new(dev, out);
    let mut r = Reader::new(dev, arr);
    let mut mr = Reader::new(dev, map);
    let mut m = [0u64; 2];
    let mut has = mr.next_into(dev, &mut m)?;
    let mut rec = vec![0u64; rw];
    while r.next_into(dev, &mut rec)? {
        while has && m[0] < rec[at] {
            has = mr.next_into(dev, &mut m)?;
        }
        if has && m[0] == rec[at] {
            rec[at] = m[1];
        }
        w.push_words(dev, &rec)?;
    }
    drop(r);
    drop(mr);
    w.finish(dev)
}

/// Sort by word `at`, relabel it, free the input.
fn relabel_by(dev: &mut BlockDevice, arr: ExtArray, at: usize, map: &ExtArray) -> Result<ExtArray> {
    let sorted = ext_sort_by(dev, &arr, |w| w[at])?;
    dev.free(arr);
    let out = relabel(dev, &sorted, at, map)?;
    dev.free(sorted);
    Ok(out)
}

/// Hook every id with a smaller neighbour to its smallest neighbour, jump
/// pointers to the tree roots, contract, and repeat until no edge is left.
/// Each round at least halves the number of ids that still have edges.
fn hooking_cc(dev: &mut BlockDevice, edges: &ExtArray) -> Result<MergeResolution> {
    let ids = distinct_ids(dev, edges)?;
    // (id, current super id) for every id, kept sorted by id at round end
    let mut labels = {
        let out = dev.alloc_array(ids.len(), 2);
        let mut w = Writer::new(dev, out);
        let mut r = Reader::new(dev, &ids);
        let mut x = [0u64; 1];
        while r.next_into(dev, &mut x)? {
            w.push_words(dev, &[x[0], x[0]])?;
        }
        drop(r);
        w.finish(dev)?
    };
    dev.free(ids);
    let forest = dev.alloc_array(edges.len(), 2);
    let mut fw = Writer::new(dev, forest);

    let mut cur = copy_without_loops(dev, edges)?;
    while !cur.is_empty() {
        // both orientations, smallest (neighbour, witness) first per id
        let both = dev.alloc_array(2 * cur.len(), EDGE_WORDS);
        let mut w = Writer::new(dev, both);
        let mut r = Reader::new(dev, &cur);
        let mut e = [0u64; EDGE_WORDS];
        while r.next_into(dev, &mut e)? {
            w.push_words(dev, &e)?;
            w.push_words(dev, &[e[1], e[0], e[2], e[3]])?;
        }
        drop(r);
        let both = w.finish(dev)?;
        let sorted = ext_sort_by(dev, &both, |w| (w[0], w[1], w[2], w[3]))?;
        dev.free(both);
        let hooks = dev.alloc_array(sorted.len(), 2);
        let mut hw = Writer::new(dev, hooks);
        let mut r = Reader::new(dev, &sorted);
        let mut last = u64::MAX;
        while r.next_into(dev, &mut e)? {
            if e[0] == last {
                continue;
            }
            last = e[0];
            if e[1] < e[0] {
                hw.push_words(dev, &e[..2])?;
                fw.push_words(dev, &e[2..])?;
            }
        }
        drop(r);
        dev.free(sorted);
        let hooks = hw.finish(dev)?;
        let stars = jump_to_roots(dev, hooks)?;

        let a = relabel_by(dev, cur, 0, &stars)?;
        let b = relabel_by(dev, a, 1, &stars)?;
        cur = copy_without_loops(dev, &b)?;
        dev.free(b);
        labels = relabel_by(dev, labels, 1, &stars)?;
        dev.free(stars);
    }
    dev.free(cur);
    let reps = ext_sort_by(dev, &labels, |w| w[0])?;
    dev.free(labels);
    Ok(MergeResolution {
        reps,
        forest: fw.finish(dev)?,
    })
}

fn copy_without_loops(dev: &mut BlockDevice, edges: &ExtArray) -> Result<ExtArray> {
    let out = dev.alloc_array(edges.len(), EDGE_WORDS);
    let mut w = Writer::new(dev, out);
    let mut r = Reader::new(dev, edges);
    let mut e = [0u64; EDGE_WORDS];
    while r.next_into(dev, &mut e)? {
        if e[0] != e[1] {
            w.push_words(dev, &e)?;
        }
    }
    drop(r);
    w.finish(dev)
}

/// Pointer doubling on a forest of `(x, parent)` records with decreasing
/// ids. Returns `(x, root)` sorted by `x`.
fn jump_to_roots(dev: &mut BlockDevice, hooks: ExtArray) -> Result<ExtArray> {
    let mut by_x = hooks;
    loop {
        // look up each parent's parent in the (sorted by x) pointer list
        let by_p = ext_sort_by(dev, &by_x, |w| w[1])?;
        let mut changed = false;
        let out = dev.alloc_array(by_p.len(), 2);
        let mut w = Writer::new(dev, out);
        let mut r = Reader::new(dev, &by_p);
        let mut mr = Reader::new(dev, &by_x);
        let mut m = [0u64; 2];
        let mut has = mr.next_into(dev, &mut m)?;
        let mut rec = [0u64; 2];
        while r.next_into(dev, &mut rec)? {
            while has && m[0] < rec[1] {
                has = mr.next_into(dev, &mut m)?;
            }
            if has && m[0] == rec[1] {
                rec[1] = m[1];
                changed = true;
            }
            w.push_words(dev, &rec)?;
        }
        drop(r);
        drop(mr);
        let next = w.finish(dev)?;
        dev.free(by_p);
        dev.free(by_x);
        by_x = ext_sort_by(dev, &next, |w| w[0])?;
        dev.free(next);
        if !changed {
            return Ok(by_x);
        }
    }
}
