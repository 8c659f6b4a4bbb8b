use crate::em::{cost, ext_permute, ext_sort_by, BlockDevice, ExtArray, Reader, Writer};
use crate::error::Result;

/// Disjoint sets over `0..n` whose parent array lives on the device. Finds
/// and links are processed a batch at a time with sort and scan passes.
///
/// The structure tracks an upper bound on the pointer depth, so a batched
/// find performs exactly that many lookup passes. [`compress`](Self::compress)
/// brings every node to depth one.
#[derive(Debug)]
pub struct BatchedUnionFind {
    parent: ExtArray,
    n: usize,
    depth: usize,
}

impl BatchedUnionFind {
    /// Every node its own root.
    pub fn new(dev: &mut BlockDevice, n: usize) -> Result<Self> {
        let arr = dev.alloc_array(n, 1);
        let mut w = Writer::new(dev, arr);
        for i in 0..n as u64 {
            w.push_words(dev, &[i])?;
        }
        Ok(Self {
            parent: w.finish(dev)?,
            n,
            depth: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Current bound on the number of parent hops to a root.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// The parent array (after [`compress`](Self::compress), the root of
    /// every node).
    pub fn parents(&self) -> &ExtArray {
        &self.parent
    }

    /// One lookup pass: replace word `at` of every record by its parent.
    /// `arr` must be sorted by word `at`.
    fn lookup_pass(&self, dev: &mut BlockDevice, arr: &ExtArray, at: usize) -> Result<ExtArray> {
        let rw = arr.record_words();
        let out = dev.alloc_array(arr.len(), rw);
        let mut w = Writer::new(dev, out);
        let mut r = Reader::new(dev, arr);
        let mut pr = Reader::new(dev, &self.parent);
        let mut pos = 0u64;
        let mut cur = [0u64; 1];
        let mut cur_node = u64::MAX;
        let mut rec = vec![0u64; rw];
        while r.next_into(dev, &mut rec)? {
            let node = rec[at];
            if node != cur_node {
                debug_assert!(cur_node == u64::MAX || node > cur_node, "records not sorted");
                pr.skip_words(node - pos);
                pr.next_into(dev, &mut cur)?;
                pos = node + 1;
                cur_node = node;
            }
            rec[at] = cur[0];
            w.push_words(dev, &rec)?;
        }
        drop(r);
        drop(pr);
        w.finish(dev)
    }

    /// Replace word `at` of every record in `arr` by the root of the node
    /// stored there. The result is sorted by the root.
    pub fn find_batch(&self, dev: &mut BlockDevice, arr: &ExtArray, at: usize) -> Result<ExtArray> {
        let mut cur = ext_sort_by(dev, arr, |w| w[at])?;
        for _ in 0..self.depth {
            let next = self.lookup_pass(dev, &cur, at)?;
            dev.free(cur);
            cur = ext_sort_by(dev, &next, |w| w[at])?;
            dev.free(next);
        }
        Ok(cur)
    }

    /// Point each root `x` at `rep` for every record `(x, rep)` of `links`.
    /// Every `x` and `rep` must be a root and no `rep` may itself be linked.
    pub fn link_batch(&mut self, dev: &mut BlockDevice, links: &ExtArray) -> Result<()> {
        if links.is_empty() {
            return Ok(());
        }
        let sorted = ext_sort_by(dev, links, |w| w[0])?;
        let p = dev.params();
        if (sorted.len() as f64) < cost::scan(self.n as f64, &p) {
            let mut r = Reader::new(dev, &sorted);
            let mut l = [0u64; 2];
            while r.next_into(dev, &mut l)? {
                dev.write_words(&self.parent, l[0], &l[1..])?;
            }
        } else {
            let out = dev.alloc_array(self.n, 1);
            let mut w = Writer::new(dev, out);
            let mut pr = Reader::new(dev, &self.parent);
            let mut lr = Reader::new(dev, &sorted);
            let mut l = [0u64; 2];
            let mut has = lr.next_into(dev, &mut l)?;
            let mut cur = [0u64; 1];
            let mut i = 0u64;
            while pr.next_into(dev, &mut cur)? {
                if has && l[0] == i {
                    cur[0] = l[1];
                    has = lr.next_into(dev, &mut l)?;
                }
                w.push_words(dev, &cur)?;
                i += 1;
            }
            drop(pr);
            drop(lr);
            let fresh = w.finish(dev)?;
            let old = std::mem::replace(&mut self.parent, fresh);
            dev.free(old);
        }
        dev.free(sorted);
        self.depth += 1;
        Ok(())
    }

    /// Point every node directly at its root.
    pub fn compress(&mut self, dev: &mut BlockDevice) -> Result<()> {
        if self.depth <= 1 {
            return Ok(());
        }
        let pairs = dev.alloc_array(self.n, 2);
        let mut w = Writer::new(dev, pairs);
        let mut pr = Reader::new(dev, &self.parent);
        let mut cur = [0u64; 1];
        let mut i = 0u64;
        while pr.next_into(dev, &mut cur)? {
            w.push_words(dev, &[i, cur[0]])?;
            i += 1;
        }
        drop(pr);
        let pairs = w.finish(dev)?;
        // the pairs already hold one hop
        let mut cur = ext_sort_by(dev, &pairs, |w| w[1])?;
        dev.free(pairs);
        for _ in 1..self.depth {
            let next = self.lookup_pass(dev, &cur, 1)?;
            dev.free(cur);
            cur = ext_sort_by(dev, &next, |w| w[1])?;
            dev.free(next);
        }
        let by_node = ext_permute::<(u64, u64), _>(dev, &cur, |_, r| r.0 as usize)?;
        dev.free(cur);
        let out = dev.alloc_array(self.n, 1);
        let mut w = Writer::new(dev, out);
        let mut r = Reader::new(dev, &by_node);
        let mut pair = [0u64; 2];
        while r.next_into(dev, &mut pair)? {
            w.push_words(dev, &pair[1..])?;
        }
        drop(r);
        let fresh = w.finish(dev)?;
        dev.free(by_node);
        let old = std::mem::replace(&mut self.parent, fresh);
        dev.free(old);
        self.depth = 1;
        Ok(())
    }

    /// Release the device storage, returning the parent array.
    pub fn into_parents(self) -> ExtArray {
        self.parent
    }
}
