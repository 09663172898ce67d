use crate::group::PrimeGroup;

use super::{DlrepError, GeneratorSet};

/// The exponents `(X0, ..., Xn)` of an identity. Index 0 is the holder's
/// blinding exponent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttributeVector<G: PrimeGroup> {
    values: Vec<G::Scalar>,
}

impl<G: PrimeGroup> AttributeVector<G> {
    pub fn new(blinding: G::Scalar, attributes: &[G::Scalar]) -> Self {
        let mut values = Vec::with_capacity(attributes.len() + 1);
        values.push(blinding);
        values.extend_from_slice(attributes);
        AttributeVector { values }
    }

    pub fn from_values(values: Vec<G::Scalar>) -> Self {
        AttributeVector { values }
    }

    pub fn values(&self) -> &[G::Scalar] {
        &self.values
    }

    pub fn get(&self, index: usize) -> Option<&G::Scalar> {
        self.values.get(index)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn blinding(&self) -> &G::Scalar {
        &self.values[0]
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        AttributeVector { values }
    }
}

/// `h = prod g_j^{X_j}` together with the bases it was formed over.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DlrepCommitment<G: PrimeGroup> {
    h: G::Element,
    generators: GeneratorSet<G>,
}

impl<G: PrimeGroup> DlrepCommitment<G> {
    /// Wraps a commitment value read from elsewhere (e.g. the ledger).
    pub fn from_parts(h: G::Element, generators: GeneratorSet<G>) -> Self {
        DlrepCommitment { h, generators }
    }

    pub fn value(&self) -> &G::Element {
        &self.h
    }

    pub fn generators(&self) -> &GeneratorSet<G> {
        &self.generators
    }

    pub fn encoded(&self) -> Vec<u8> {
        G::encode(&self.h)
    }
}

fn multi_exp<G: PrimeGroup>(bases: &[G::Element], exponents: &[G::Scalar]) -> G::Element {
    bases
        .iter()
        .zip(exponents)
        .fold(G::identity(), |acc, (g, x)| G::op(&acc, &G::pow(g, x)))
}

pub fn commit<G: PrimeGroup>(attrs: &AttributeVector<G>, gens: &GeneratorSet<G>) -> Result<DlrepCommitment<G>, DlrepError> {
    if attrs.len() != gens.len() {
        return Err(DlrepError::LengthMismatch { expected: gens.len(), got: attrs.len() });
    }
    Ok(DlrepCommitment { h: multi_exp::<G>(gens.generators(), attrs.values()), generators: gens.clone() })
}

/// The holder's share `g0^{x0}`, handed to the issuer in place of `x0`.
pub fn blind_contribution<G: PrimeGroup>(x0: &G::Scalar, gens: &GeneratorSet<G>) -> G::Element {
    G::pow(&gens.generators()[0], x0)
}

/// Issuer side of enrollment: `blinded * prod_{j>=1} g_j^{X_j}`.
pub fn issue_commitment<G: PrimeGroup>(
    blinded: &G::Element,
    issuer_attrs: &[G::Scalar],
    gens: &GeneratorSet<G>,
) -> Result<DlrepCommitment<G>, DlrepError> {
    if issuer_attrs.len() + 1 != gens.len() {
        return Err(DlrepError::LengthMismatch { expected: gens.len() - 1, got: issuer_attrs.len() });
    }
    let rest = multi_exp::<G>(&gens.generators()[1..], issuer_attrs);
    Ok(DlrepCommitment { h: G::op(blinded, &rest), generators: gens.clone() })
}

/// Product of two commitments over disjoint bases: a commitment to the
/// concatenated attribute vectors over the concatenated bases.
pub fn combine<G: PrimeGroup>(a: &DlrepCommitment<G>, b: &DlrepCommitment<G>) -> Result<DlrepCommitment<G>, DlrepError> {
    let generators = a.generators.concat(&b.generators)?;
    Ok(DlrepCommitment { h: G::op(&a.h, &b.h), generators })
}
