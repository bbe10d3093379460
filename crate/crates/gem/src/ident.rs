//! Request identifiers and the two orders defined on them.
//!
//! An identifier is a sequence of opaque segments. Every engine extends the
//! identifier of a table's root when it creates nodes for that table, so a
//! request carries its full derivation path: `id1` is *lower* than `id2`
//! when `id2` is a strict prefix of `id1`. Two incomparable identifiers are
//! *side* requests; their relative order is given by the emission order of
//! the segments at the first position where they diverge, which each
//! generator records per parent instead of encoding it in the bytes.

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A request identifier: a non-empty sequence of segments.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RequestId {
    segments: Vec<String>,
}

impl RequestId {
    pub fn from_segments(segments: Vec<String>) -> Self {
        assert!(!segments.is_empty(), "identifiers have at least one segment");
        RequestId { segments }
    }

    pub fn segments(&self) -> &[String] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The parent prefix (all but the last segment), if any.
    pub fn parent(&self) -> Option<RequestId> {
        if self.segments.len() > 1 {
            Some(RequestId { segments: self.segments[..self.segments.len() - 1].to_vec() })
        } else {
            None
        }
    }

    /// Is `self` lower than `other`, i.e. is `other` a strict prefix?
    pub fn is_lower_than(&self, other: &RequestId) -> bool {
        self.segments.len() > other.segments.len()
            && self.segments[..other.segments.len()] == other.segments[..]
    }

    /// Lower than or equal.
    pub fn is_lower_or_equal(&self, other: &RequestId) -> bool {
        self == other || self.is_lower_than(other)
    }

    /// Are the two identifiers ⊑-incomparable (neither a prefix of the other)?
    pub fn is_side_of(&self, other: &RequestId) -> bool {
        self != other && !self.is_lower_than(other) && !other.is_lower_than(self)
    }
}

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.segments.join("·"))
    }
}

/// Whether generated segments reveal the emitting principal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Traceability {
    /// Segments are `<principal>_<n>`; derivation paths are readable.
    Traceable,
    /// Segments are opaque and contain no occurrence of the principal name.
    Untraceable,
}

/// Whether generated segments all share one length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentLength {
    Fixed(usize),
    Variable,
}

/// Identifier generation mode: traceability × segment length discipline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdGenMode {
    pub traceability: Traceability,
    pub length: SegmentLength,
}

impl Default for IdGenMode {
    fn default() -> Self {
        IdGenMode { traceability: Traceability::Untraceable, length: SegmentLength::Variable }
    }
}

/// Error from a sibling-order query on ⊑-comparable identifiers.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("identifiers {a} and {b} are comparable under the prefix order; sibling order is undefined")]
pub struct NotSideError {
    pub a: RequestId,
    pub b: RequestId,
}

/// Per-parent emission order of segments, merged across generators when the
/// sibling order of identifiers from several engines must be compared.
#[derive(Clone, Debug, Default)]
pub struct SiblingOrders {
    by_parent: HashMap<Vec<String>, Vec<String>>,
}

impl SiblingOrders {
    fn record(&mut self, parent: &[String], segment: &str) {
        self.by_parent
            .entry(parent.to_vec())
            .or_default()
            .push(segment.to_string());
    }

    pub fn merge_from(&mut self, other: &SiblingOrders) {
        for (parent, segs) in &other.by_parent {
            self.by_parent
                .entry(parent.clone())
                .or_default()
                .extend(segs.iter().cloned());
        }
    }

    /// Does `a` precede `b` in the sibling (emission) order? Errors when the
    /// identifiers are ⊑-comparable.
    pub fn precedes(&self, a: &RequestId, b: &RequestId) -> Result<bool, NotSideError> {
        if !a.is_side_of(b) {
            return Err(NotSideError { a: a.clone(), b: b.clone() });
        }
        let mut i = 0;
        while a.segments[i] == b.segments[i] {
            i += 1;
        }
        let parent = &a.segments[..i];
        let order = match self.by_parent.get(parent) {
            Some(o) => o,
            None => return Ok(false), // unknown parent: no recorded order
        };
        let pa = order.iter().position(|s| *s == a.segments[i]);
        let pb = order.iter().position(|s| *s == b.segments[i]);
        match (pa, pb) {
            (Some(x), Some(y)) => Ok(x < y),
            _ => Ok(false),
        }
    }
}

/// Segment generator for one engine.
///
/// `engine_tag` is an upper-case-hex token unique per engine within a run;
/// together with a monotone counter it makes every emitted segment globally
/// unique. Upper-case hex shares no character with principal names (which
/// are lower-case symbols), so untraceable segments never contain the
/// principal identifier.
#[derive(Debug)]
pub struct IdGen {
    principal: String,
    engine_tag: String,
    mode: IdGenMode,
    counter: u64,
    rng: ChaCha8Rng,
    orders: SiblingOrders,
}

impl IdGen {
    pub fn new(principal: &str, engine_index: u64, mode: IdGenMode, seed: u64) -> Self {
        IdGen {
            principal: principal.to_string(),
            engine_tag: format!("{engine_index:X}"),
            mode,
            counter: 0,
            rng: ChaCha8Rng::seed_from_u64(seed ^ (engine_index.wrapping_mul(0x9E37_79B9))),
            orders: SiblingOrders::default(),
        }
    }

    pub fn mode(&self) -> IdGenMode {
        self.mode
    }

    pub fn orders(&self) -> &SiblingOrders {
        &self.orders
    }

    fn next_segment(&mut self) -> String {
        self.counter += 1;
        match self.mode.traceability {
            Traceability::Traceable => {
                match self.mode.length {
                    SegmentLength::Variable => format!("{}_{}", self.principal, self.counter),
                    // Zero-pad the counter so the segment hits the width.
                    SegmentLength::Fixed(n) => {
                        let width = n.checked_sub(self.principal.len() + 1).unwrap_or_else(|| {
                            panic!("fixed segment length {n} too short for `{}`", self.principal)
                        });
                        let seg = format!("{}_{:0>width$}", self.principal, self.counter);
                        assert!(seg.len() == n, "counter overflows fixed segment length {n}");
                        seg
                    }
                }
            }
            Traceability::Untraceable => {
                // Unique core: engine tag + counter, in upper-case hex.
                let core = format!("{}Z{:X}", self.engine_tag, self.counter);
                let target = match self.mode.length {
                    SegmentLength::Fixed(n) => {
                        assert!(core.len() <= n, "fixed segment length {n} too short");
                        n
                    }
                    // Vary the length deterministically so at least two
                    // lengths appear among any 16 consecutive emissions.
                    SegmentLength::Variable => {
                        core.len() + (self.counter % 4) as usize + self.rng.gen_range(0..2)
                    }
                };
                let mut seg = core;
                while seg.len() < target {
                    seg.push(char::from_digit(self.rng.gen_range(0..16), 16).unwrap().to_ascii_uppercase());
                }
                seg
            }
        }
    }

    /// A fresh single-segment identifier for an initial request.
    pub fn root(&mut self) -> RequestId {
        let seg = self.next_segment();
        self.orders.record(&[], &seg);
        RequestId::from_segments(vec![seg])
    }

    /// Extend `parent` by one fresh segment, recording the sibling order.
    pub fn extend(&mut self, parent: &RequestId) -> RequestId {
        let seg = self.next_segment();
        self.orders.record(parent.segments(), &seg);
        let mut segments = parent.segments.clone();
        segments.push(seg);
        RequestId::from_segments(segments)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(segs: &[&str]) -> RequestId {
        RequestId::from_segments(segs.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn prefix_order() {
        let h1 = id(&["h_1"]);
        let a = id(&["h_1", "c1_1"]);
        let b = id(&["h_1", "c1_1", "c2_1"]);
        let c = id(&["h_1", "c1_2"]);
        assert!(a.is_lower_than(&h1));
        assert!(b.is_lower_than(&h1));
        assert!(b.is_lower_than(&a));
        assert!(!h1.is_lower_than(&a));
        assert!(!a.is_lower_than(&a));
        assert!(a.is_side_of(&c));
        assert!(b.is_side_of(&c));
        assert!(!a.is_side_of(&b));
    }

    #[test]
    fn sibling_order_follows_emission() {
        let mode = IdGenMode { traceability: Traceability::Traceable, length: SegmentLength::Variable };
        let mut g = IdGen::new("c1", 0, mode, 7);
        let root = id(&["h_1"]);
        let a = g.extend(&root);
        let b = g.extend(&root);
        let deep_a = id(&[&a.segments()[0], &a.segments()[1], "x"]);
        let orders = g.orders().clone();
        assert!(orders.precedes(&a, &b).unwrap());
        assert!(!orders.precedes(&b, &a).unwrap());
        assert!(orders.precedes(&deep_a, &b).unwrap());
        assert!(orders.precedes(&a, &a.clone()).is_err());
        assert!(orders.precedes(&deep_a, &a).is_err());
    }

    #[test]
    fn traceable_segments_render_principal_and_counter() {
        let mode = IdGenMode { traceability: Traceability::Traceable, length: SegmentLength::Variable };
        let mut g = IdGen::new("c1", 0, mode, 0);
        let root = id(&["h_1"]);
        assert_eq!(g.extend(&root).to_string(), "h_1·c1_1");
        assert_eq!(g.extend(&root).to_string(), "h_1·c1_2");
    }

    #[test]
    fn untraceable_segments_hide_the_principal() {
        let mode = IdGenMode { traceability: Traceability::Untraceable, length: SegmentLength::Variable };
        let mut g = IdGen::new("c1", 3, mode, 42);
        let root = g.root();
        for _ in 0..32 {
            let ext = g.extend(&root);
            let seg = ext.segments().last().unwrap();
            assert!(!seg.contains("c1"), "segment {seg} leaks the principal");
        }
    }

    #[test]
    fn variable_length_mode_varies_lengths() {
        let mode = IdGenMode { traceability: Traceability::Untraceable, length: SegmentLength::Variable };
        let mut g = IdGen::new("c1", 1, mode, 9);
        let root = g.root();
        let lengths: std::collections::BTreeSet<usize> = (0..16)
            .map(|_| g.extend(&root).segments().last().unwrap().len())
            .collect();
        assert!(lengths.len() >= 2, "expected varying lengths, got {lengths:?}");
    }

    #[test]
    fn fixed_length_mode_is_fixed() {
        let mode = IdGenMode { traceability: Traceability::Untraceable, length: SegmentLength::Fixed(12) };
        let mut g = IdGen::new("c1", 1, mode, 9);
        let root = g.root();
        for _ in 0..16 {
            assert_eq!(g.extend(&root).segments().last().unwrap().len(), 12);
        }
    }

    #[test]
    fn all_emitted_ids_are_unique() {
        for mode in [
            IdGenMode { traceability: Traceability::Untraceable, length: SegmentLength::Variable },
            IdGenMode { traceability: Traceability::Untraceable, length: SegmentLength::Fixed(10) },
            IdGenMode { traceability: Traceability::Traceable, length: SegmentLength::Variable },
        ] {
            let mut seen = std::collections::BTreeSet::new();
            for ix in 0..4u64 {
                let mut g = IdGen::new(&format!("p{ix}"), ix, mode, 5);
                let root = g.root();
                assert!(seen.insert(root.clone()));
                for _ in 0..50 {
                    assert!(seen.insert(g.extend(&root)));
                }
            }
        }
    }
}
