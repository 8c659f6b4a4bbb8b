use crate::error::{Error, Result};

/// Coordinate encoding for hyperedges of cardinality at most `r`.
///
/// A sorted vertex tuple is padded to length `r` with the sentinel `V` and
/// read as a base-`(V+1)` number `code`. Each unordered pair of positions
/// `i < j` gets its own coordinate `code r² + i r + j`; the sketch of the
/// vertex at position `i` adds `+1` to the slots it shares with later
/// positions and `-1` to those shared with earlier ones, so the slots of a
/// hyperedge cancel inside any vertex set containing all its members.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HyperCodec {
    num_vertices: u32,
    rank: usize,
    domain: u64,
}

impl HyperCodec {
    pub fn new(num_vertices: u32, rank: usize) -> Result<Self> {
        if rank < 2 {
            return Err(Error::InvalidParams(format!("hyperedge rank {rank} below 2")));
        }
        let base = num_vertices as u128 + 1;
        let mut domain: u128 = (rank * rank) as u128;
        for _ in 0..rank {
            domain = domain.saturating_mul(base);
        }
        if domain > 1u128 << 62 {
            return Err(Error::InvalidParams(format!(
                "(V+1)^r r^2 = {domain} exceeds 2^62 for V={num_vertices}, r={rank}"
            )));
        }
        Ok(Self {
            num_vertices,
            rank,
            domain: domain as u64,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn num_vertices(&self) -> u32 {
        self.num_vertices
    }

    pub fn domain(&self) -> u64 {
        self.domain
    }

    /// Check a tuple: 2..=r distinct in-range vertices in increasing order.
    pub fn validate(&self, tuple: &[u32]) -> Result<()> {
        if tuple.len() < 2 || tuple.len() > self.rank {
            return Err(Error::InvalidHyperedge(format!(
                "cardinality {} outside [2, {}]",
                tuple.len(),
                self.rank
            )));
        }
        if let Some(&x) = tuple.iter().find(|&&x| x >= self.num_vertices) {
            return Err(Error::VertexOutOfRange {
                vertex: x as u64,
                num_vertices: self.num_vertices as u64,
            });
        }
        if tuple.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidHyperedge(format!(
                "tuple {tuple:?} not strictly increasing"
            )));
        }
        Ok(())
    }

    /// Base-`(V+1)` code of a validated tuple.
    pub fn code(&self, tuple: &[u32]) -> u64 {
        let base = self.num_vertices as u64 + 1;
        let mut code = 0u64;
        for i in (0..self.rank).rev() {
            let digit = tuple.get(i).copied().unwrap_or(self.num_vertices) as u64;
            code = code * base + digit;
        }
        code
    }

    pub fn coordinate(&self, code: u64, i: usize, j: usize) -> u64 {
        let (a, b) = (i.min(j) as u64, i.max(j) as u64);
        let r = self.rank as u64;
        code * r * r + a * r + b
    }

    /// Call `f(coordinate, sign)` for every pair slot of the vertex at
    /// `position` in `tuple`.
    pub fn for_each_slot(
        &self,
        tuple: &[u32],
        position: usize,
        mut f: impl FnMut(u64, i64),
    ) -> Result<()> {
        self.validate(tuple)?;
        if position >= tuple.len() {
            return Err(Error::InvalidHyperedge(format!(
                "position {position} outside tuple of {}",
                tuple.len()
            )));
        }
        let code = self.code(tuple);
        for j in 0..tuple.len() {
            if j != position {
                f(self.coordinate(code, position, j), if position < j { 1 } else { -1 });
            }
        }
        Ok(())
    }

    /// Decode a coordinate into its tuple and pair slot.
    pub fn decode(&self, coord: u64) -> Option<(Vec<u32>, usize, usize)> {
        if coord >= self.domain {
            return None;
        }
        let r = self.rank as u64;
        let slot = coord % (r * r);
        let (a, b) = ((slot / r) as usize, (slot % r) as usize);
        let mut code = coord / (r * r);
        let base = self.num_vertices as u64 + 1;
        let mut tuple = Vec::with_capacity(self.rank);
        let mut padded = false;
        for _ in 0..self.rank {
            let d = (code % base) as u32;
            code /= base;
            if d == self.num_vertices {
                padded = true;
            } else if padded || tuple.last().is_some_and(|&l| l >= d) {
                return None;
            } else {
                tuple.push(d);
            }
        }
        (tuple.len() >= 2 && a < b && b < tuple.len()).then_some((tuple, a, b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::{SketchParams, Sketcher, VertexSketch, DEFAULT_C0, Sample};

    #[test]
    fn slot_round_trip() {
        let c = HyperCodec::new(10, 3).unwrap();
        assert_eq!(c.domain(), 11u64.pow(3) * 9);
        let t = [2, 5, 9];
        let mut seen = Vec::new();
        c.for_each_slot(&t, 1, |coord, sign| seen.push((c.decode(coord).unwrap(), sign)))
            .unwrap();
        assert_eq!(seen, vec![((t.to_vec(), 0, 1), -1), ((t.to_vec(), 1, 2), 1)]);
        let pair = [3, 4];
        c.for_each_slot(&pair, 0, |coord, _| assert_eq!(c.decode(coord).unwrap().0, pair))
            .unwrap();
        assert!(c.decode(c.coordinate(c.code(&[3, 4]), 0, 2)).is_none());
    }

    #[test]
    fn rejects_bad_tuples() {
        let c = HyperCodec::new(10, 3).unwrap();
        assert!(c.validate(&[1]).is_err());
        assert!(c.validate(&[1, 2, 3, 4]).is_err());
        assert!(c.validate(&[2, 2]).is_err());
        assert!(c.validate(&[3, 1]).is_err());
        assert!(c.validate(&[1, 10]).is_err());
        assert!(HyperCodec::new(1 << 20, 4).is_err());
        assert!(HyperCodec::new(10, 1).is_err());
    }

    #[test]
    fn all_members_cancel_and_single_member_decodes() {
        let c = HyperCodec::new(3, 3).unwrap();
        let sk = Sketcher::new(SketchParams::for_domain(3, c.domain(), DEFAULT_C0, 4));
        let t = [0, 1, 2];
        let mut s: Vec<VertexSketch> = (0..3).map(|_| VertexSketch::new(&sk)).collect();
        for (pos, sv) in s.iter_mut().enumerate() {
            sv.update_hyperedge(&sk, &c, &t, pos, 1).unwrap();
        }
        let mut m = s[0].clone();
        let mut nonzero_slots = Vec::new();
        c.for_each_slot(&t, 0, |coord, _| nonzero_slots.push(c.decode(coord).unwrap()))
            .unwrap();
        assert_eq!(nonzero_slots, vec![(t.to_vec(), 0, 1), (t.to_vec(), 0, 2)]);
        match sk.sample(&m.words) {
            Sample::Index(i) => assert_eq!(c.decode(i).unwrap().0, t),
            other => panic!("{other:?}"),
        }
        m.merge(&s[1]);
        m.merge(&s[2]);
        assert!(m.is_zero());
    }
}
