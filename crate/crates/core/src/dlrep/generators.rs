use crate::codec::{put_u8, Reader};
use crate::group::PrimeGroup;

use super::DlrepError;

/// Label reserved for the blinding slot at index 0.
pub const BLINDING_LABEL: &str = "_blinding";

const GENERATOR_DOMAIN: &[u8] = b"chainid/generator/v1";
const ATTRIBUTE_DOMAIN: &[u8] = b"chainid/attribute/v1";

/// Maps a textual attribute value to a scalar.
pub fn attribute_scalar<G: PrimeGroup>(value: &str) -> G::Scalar {
    G::hash_to_scalar(&[ATTRIBUTE_DOMAIN, value.as_bytes()])
}

/// Ordered bases `g0..gn` of an issuer, with a label per field.
///
/// Blinding slots are flagged explicitly: a freshly built set has exactly one
/// at index 0, a concatenation of two sets has one at the start of each part.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorSet<G: PrimeGroup> {
    issuer: String,
    generators: Vec<G::Element>,
    labels: Vec<String>,
    blinding: Vec<bool>,
}

impl<G: PrimeGroup> GeneratorSet<G> {
    /// Derives generators for `issuer` by hashing to the group, one per field
    /// plus the blinding generator.
    pub fn derive<S: AsRef<str>>(issuer: &str, field_labels: &[S]) -> Result<Self, DlrepError> {
        let mut generators: Vec<G::Element> = Vec::with_capacity(field_labels.len() + 1);
        for index in 0..=field_labels.len() {
            let mut counter = 0u32;
            let g = loop {
                let mut msg = issuer.as_bytes().to_vec();
                msg.push(0);
                msg.extend_from_slice(&(index as u32).to_be_bytes());
                msg.extend_from_slice(&counter.to_be_bytes());
                let candidate = G::hash_to_element(GENERATOR_DOMAIN, &msg);
                if !generators.contains(&candidate) {
                    break candidate;
                }
                counter += 1;
                if counter > 1024 {
                    return Err(DlrepError::InvalidGenerators("group too small for requested generator count"));
                }
            };
            generators.push(g);
        }
        let labels = field_labels.iter().map(|l| l.as_ref().to_string());
        Self::from_parts(issuer, generators, std::iter::once(BLINDING_LABEL.to_string()).chain(labels).collect())
    }

    /// Builds a set from explicit generators. `labels[0]` names the blinding
    /// slot and is normalized to [`BLINDING_LABEL`].
    pub fn from_parts(issuer: &str, generators: Vec<G::Element>, mut labels: Vec<String>) -> Result<Self, DlrepError> {
        if generators.is_empty() {
            return Err(DlrepError::InvalidGenerators("empty generator set"));
        }
        if labels.len() != generators.len() {
            return Err(DlrepError::LengthMismatch { expected: generators.len(), got: labels.len() });
        }
        validate_distinct::<G>(&generators)?;
        labels[0] = BLINDING_LABEL.to_string();
        let mut blinding = vec![false; generators.len()];
        blinding[0] = true;
        Ok(GeneratorSet { issuer: issuer.to_string(), generators, labels, blinding })
    }

    /// Unlabeled set, convenient for tests over explicit toy-group bases.
    pub fn unlabeled(issuer: &str, generators: Vec<G::Element>) -> Result<Self, DlrepError> {
        let labels = (0..generators.len()).map(|i| format!("x{i}")).collect();
        Self::from_parts(issuer, generators, labels)
    }

    pub fn issuer(&self) -> &str {
        &self.issuer
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn generators(&self) -> &[G::Element] {
        &self.generators
    }

    pub fn generator(&self, index: usize) -> Option<&G::Element> {
        self.generators.get(index)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn is_blinding(&self, index: usize) -> bool {
        self.blinding.get(index).copied().unwrap_or(false)
    }

    /// Index of the first non-blinding field with this label.
    pub fn index_of(&self, label: &str) -> Option<usize> {
        (0..self.len()).find(|&i| !self.blinding[i] && self.labels[i] == label)
    }

    /// Concatenation `self || other`. Refuses sets that share a generator.
    pub fn concat(&self, other: &Self) -> Result<Self, DlrepError> {
        if self.generators.iter().any(|g| other.generators.contains(g)) {
            return Err(DlrepError::OverlappingGenerators);
        }
        let mut out = self.clone();
        out.issuer = format!("{}+{}", self.issuer, other.issuer);
        out.generators.extend(other.generators.iter().cloned());
        out.labels.extend(other.labels.iter().cloned());
        out.blinding.extend(other.blinding.iter().copied());
        Ok(out)
    }

    /// Encoding used inside hash preimages: count, elements, blinding flags.
    pub(crate) fn hash_encoding(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.len() as u32).to_be_bytes());
        for g in &self.generators {
            out.extend_from_slice(&G::encode(g));
        }
        out.extend(self.blinding.iter().map(|&b| b as u8));
        out
    }

    /// Compact publication format: issuer, generators, then a label block.
    /// Only sets with a single blinding slot are publishable.
    pub fn to_publication(&self) -> Result<Vec<u8>, DlrepError> {
        if self.blinding.iter().filter(|&&b| b).count() != 1 {
            return Err(DlrepError::InvalidGenerators("combined sets are not publishable"));
        }
        if self.issuer.len() > 255 || self.len() > 255 || self.labels.iter().any(|l| l.len() > 255) {
            return Err(DlrepError::InvalidGenerators("field too long for publication"));
        }
        let mut out = Vec::new();
        put_u8(&mut out, self.issuer.len() as u8);
        out.extend_from_slice(self.issuer.as_bytes());
        put_u8(&mut out, self.len() as u8);
        for g in &self.generators {
            out.extend_from_slice(&G::encode(g));
        }
        for label in &self.labels[1..] {
            put_u8(&mut out, label.len() as u8);
            out.extend_from_slice(label.as_bytes());
        }
        Ok(out)
    }

    pub fn from_publication(bytes: &[u8]) -> Result<Self, DlrepError> {
        let mut r = Reader::new(bytes);
        let issuer_len = r.u8("issuer length")? as usize;
        let issuer = std::str::from_utf8(r.take(issuer_len, "issuer")?)
            .map_err(|_| DlrepError::Malformed("issuer is not utf-8".into()))?
            .to_string();
        let count = r.u8("generator count")? as usize;
        let mut generators = Vec::with_capacity(count);
        for _ in 0..count {
            let enc = r.take(G::ELEMENT_BYTES, "generator")?;
            generators.push(G::decode(enc).ok_or(DlrepError::InvalidElement)?);
        }
        let mut labels = vec![BLINDING_LABEL.to_string()];
        for _ in 1..count {
            let n = r.u8("label length")? as usize;
            let label = std::str::from_utf8(r.take(n, "label")?)
                .map_err(|_| DlrepError::Malformed("label is not utf-8".into()))?;
            labels.push(label.to_string());
        }
        r.finish("trailing bytes after generator set")?;
        Self::from_parts(&issuer, generators, labels)
    }
}

fn validate_distinct<G: PrimeGroup>(generators: &[G::Element]) -> Result<(), DlrepError> {
    for (i, g) in generators.iter().enumerate() {
        if G::is_identity(g) {
            return Err(DlrepError::InvalidGenerators("identity element used as generator"));
        }
        if generators[..i].contains(g) {
            return Err(DlrepError::InvalidGenerators("duplicate generator"));
        }
    }
    Ok(())
}
