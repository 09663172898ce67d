use std::collections::BTreeMap;

use crate::codec::{put_bytes, put_u16, Reader};
use crate::group::{GroupScalar, PrimeGroup};

use super::{DlrepError, GeneratorSet};

/// Position of an attribute: which commitment, which exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AttrRef {
    pub commitment: usize,
    pub attribute: usize,
}

impl AttrRef {
    pub fn new(commitment: usize, attribute: usize) -> Self {
        AttrRef { commitment, attribute }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Revelation<S> {
    pub at: AttrRef,
    pub value: S,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EqualityLink {
    pub left: AttrRef,
    pub right: AttrRef,
}

/// What a proof discloses: revealed attribute values, equalities between
/// hidden attributes, and the context the proof is bound to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DisclosureStatement<G: PrimeGroup> {
    revealed: Vec<Revelation<G::Scalar>>,
    links: Vec<EqualityLink>,
    context: Vec<u8>,
}

impl<G: PrimeGroup> Default for DisclosureStatement<G> {
    fn default() -> Self {
        DisclosureStatement { revealed: Vec::new(), links: Vec::new(), context: Vec::new() }
    }
}

/// How each attribute slot is treated by a proof.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Slot<S> {
    Revealed(S),
    /// Index of the shared response for this slot's equality class.
    Hidden(usize),
}

pub(crate) struct Layout<S> {
    /// `slots[k][j]` for commitment k, attribute j.
    pub slots: Vec<Vec<Slot<S>>>,
    pub classes: usize,
}

impl<G: PrimeGroup> DisclosureStatement<G> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reveal(mut self, at: AttrRef, value: G::Scalar) -> Self {
        self.revealed.push(Revelation { at, value });
        self
    }

    pub fn link(mut self, left: AttrRef, right: AttrRef) -> Self {
        self.links.push(EqualityLink { left, right });
        self
    }

    pub fn with_context(mut self, context: impl Into<Vec<u8>>) -> Self {
        self.context = context.into();
        self
    }

    pub fn revealed(&self) -> &[Revelation<G::Scalar>] {
        &self.revealed
    }

    pub fn links(&self) -> &[EqualityLink] {
        &self.links
    }

    pub fn context(&self) -> &[u8] {
        &self.context
    }

    pub fn revealed_value(&self, at: AttrRef) -> Option<&G::Scalar> {
        self.revealed.iter().find(|r| r.at == at).map(|r| &r.value)
    }

    /// Checks the statement against the commitment shapes and assigns every
    /// hidden slot to an equality class. Classes are numbered in order of
    /// their smallest member, which fixes the response order.
    pub(crate) fn layout(&self, sets: &[&GeneratorSet<G>]) -> Result<Layout<G::Scalar>, DlrepError> {
        let check = |at: AttrRef| -> Result<(), DlrepError> {
            let set = sets.get(at.commitment).ok_or(DlrepError::IndexOutOfRange(at))?;
            if at.attribute >= set.len() {
                return Err(DlrepError::IndexOutOfRange(at));
            }
            if set.is_blinding(at.attribute) {
                return Err(DlrepError::BlindingDisclosed(at));
            }
            Ok(())
        };

        let mut revealed: BTreeMap<AttrRef, G::Scalar> = BTreeMap::new();
        for r in &self.revealed {
            check(r.at)?;
            if revealed.insert(r.at, r.value).is_some() {
                return Err(DlrepError::DuplicateReference(r.at));
            }
        }

        // Union-find over flattened slot positions.
        let offsets: Vec<usize> = sets
            .iter()
            .scan(0usize, |acc, s| {
                let o = *acc;
                *acc += s.len();
                Some(o)
            })
            .collect();
        let total: usize = sets.iter().map(|s| s.len()).sum();
        let flat = |at: AttrRef| offsets[at.commitment] + at.attribute;
        let mut parent: Vec<usize> = (0..total).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for link in &self.links {
            for at in [link.left, link.right] {
                check(at)?;
                if revealed.contains_key(&at) {
                    return Err(DlrepError::LinkTouchesRevealed(at));
                }
            }
            if link.left == link.right {
                return Err(DlrepError::DuplicateReference(link.left));
            }
            let (a, b) = (find(&mut parent, flat(link.left)), find(&mut parent, flat(link.right)));
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            parent[hi] = lo;
        }

        let mut class_of_root: BTreeMap<usize, usize> = BTreeMap::new();
        let mut slots = Vec::with_capacity(sets.len());
        for (k, set) in sets.iter().enumerate() {
            let mut row = Vec::with_capacity(set.len());
            for j in 0..set.len() {
                let at = AttrRef::new(k, j);
                if let Some(v) = revealed.get(&at) {
                    row.push(Slot::Revealed(*v));
                } else {
                    let root = find(&mut parent, flat(at));
                    let next = class_of_root.len();
                    let class = *class_of_root.entry(root).or_insert(next);
                    row.push(Slot::Hidden(class));
                }
            }
            slots.push(row);
        }
        Ok(Layout { slots, classes: class_of_root.len() })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_u16(&mut out, self.revealed.len() as u16);
        for r in &self.revealed {
            put_u16(&mut out, r.at.commitment as u16);
            put_u16(&mut out, r.at.attribute as u16);
            out.extend_from_slice(&r.value.to_bytes());
        }
        put_u16(&mut out, self.links.len() as u16);
        for l in &self.links {
            for at in [l.left, l.right] {
                put_u16(&mut out, at.commitment as u16);
                put_u16(&mut out, at.attribute as u16);
            }
        }
        put_bytes(&mut out, &self.context);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DlrepError> {
        let mut r = Reader::new(bytes);
        let stmt = Self::read(&mut r)?;
        r.finish("trailing bytes after statement")?;
        Ok(stmt)
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self, DlrepError> {
        let read_ref = |r: &mut Reader<'_>| -> Result<AttrRef, DlrepError> {
            let k = r.u16("commitment index")? as usize;
            let j = r.u16("attribute index")? as usize;
            Ok(AttrRef::new(k, j))
        };
        let n = r.u16("revelation count")?;
        let mut revealed = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let at = read_ref(r)?;
            let value = G::Scalar::from_bytes(r.take(G::Scalar::BYTES, "revealed value")?)
                .ok_or_else(|| DlrepError::Malformed("non-canonical scalar".into()))?;
            revealed.push(Revelation { at, value });
        }
        let m = r.u16("link count")?;
        let mut links = Vec::with_capacity(m as usize);
        for _ in 0..m {
            let left = read_ref(r)?;
            let right = read_ref(r)?;
            links.push(EqualityLink { left, right });
        }
        let context = r.bytes("context")?.to_vec();
        Ok(DisclosureStatement { revealed, links, context })
    }
}
