//! Stream legality: every edge alternates insert, delete, insert, ...
//! starting with an insert. Checked with one external sort of
//! `(edge key, position)` records.

use std::fmt;

use serde::Serialize;

use crate::em::{ext_sort_by, BlockDevice, Reader, Writer};
use crate::error::Result;
use crate::sketch::{EdgeKey, HyperCodec};
use crate::stream::{EdgeUpdate, HyperUpdate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    /// Insert of an edge that is already present.
    DoubleInsert,
    /// Delete of an edge that is not present.
    MissingDelete,
}

/// The earliest illegal update of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Zero-based position in the update sequence.
    pub position: usize,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ViolationKind::DoubleInsert => "insert of an edge already present",
            ViolationKind::MissingDelete => "delete of an edge not present",
        };
        write!(f, "update {}: {what}", self.position)
    }
}

fn check_keys(dev: &mut BlockDevice, keys: &[(u64, bool)]) -> Result<Option<Violation>> {
    let arr = dev.alloc_array(keys.len(), 2);
    let mut w = Writer::new(dev, arr);
    for (pos, &(key, delete)) in keys.iter().enumerate() {
        w.push_words(dev, &[key, (pos as u64) << 1 | delete as u64])?;
    }
    let arr = w.finish(dev)?;
    let sorted = ext_sort_by(dev, &arr, |r| (r[0], r[1]))?;
    dev.free(arr);
    let mut first: Option<Violation> = None;
    let mut r = Reader::new(dev, &sorted);
    let mut rec = [0u64; 2];
    let mut prev: Option<(u64, bool)> = None;
    while r.next_into(dev, &mut rec)? {
        let (key, delete) = (rec[0], rec[1] & 1 == 1);
        let present = matches!(prev, Some((k, false)) if k == key);
        let kind = match (present, delete) {
            (true, false) => Some(ViolationKind::DoubleInsert),
            (false, true) => Some(ViolationKind::MissingDelete),
            _ => None,
        };
        if let Some(kind) = kind {
            let position = (rec[1] >> 1) as usize;
            if first.is_none_or(|f| position < f.position) {
                first = Some(Violation { position, kind });
            }
            // an illegal update leaves the presence state unchanged
            if !present {
                prev = Some((key, true));
            }
            continue;
        }
        prev = Some((key, delete));
    }
    drop(r);
    dev.free(sorted);
    Ok(first)
}

/// First illegal update of a graph stream. Endpoints must already be in range.
pub fn validate_graph_stream(
    dev: &mut BlockDevice,
    num_vertices: u32,
    updates: &[EdgeUpdate],
) -> Result<Option<Violation>> {
    let keys: Vec<(u64, bool)> = updates
        .iter()
        .map(|u| EdgeKey::checked(u.u, u.v, num_vertices).map(|e| (e.index(num_vertices), u.delete)))
        .collect::<Result<_>>()?;
    check_keys(dev, &keys)
}

/// First illegal update of a hypergraph stream.
pub fn validate_hyper_stream(
    dev: &mut BlockDevice,
    num_vertices: u32,
    rank: usize,
    updates: &[HyperUpdate],
) -> Result<Option<Violation>> {
    let codec = HyperCodec::new(num_vertices, rank)?;
    let mut keys = Vec::with_capacity(updates.len());
    for u in updates {
        codec.validate(&u.vertices)?;
        keys.push((codec.code(&u.vertices), u.delete));
    }
    check_keys(dev, &keys)
}
