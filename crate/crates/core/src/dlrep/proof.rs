use rand::{CryptoRng, RngCore};

use crate::codec::{put_bytes, put_u16, put_u8, Reader};
use crate::group::{GroupScalar, PrimeGroup};

use super::statement::{Layout, Slot};
use super::{commit, AttrRef, AttributeVector, DisclosureStatement, DlrepCommitment, DlrepError};

const CHALLENGE_DOMAIN: &[u8] = b"chainid/dlrep/challenge/v1";
const NONCE_DOMAIN: &[u8] = b"chainid/dlrep/nonce/v1";
const PROOF_TAG: u8 = 0x01;

/// Non-interactive proof of knowledge of representations of one or more
/// commitments, with selective disclosure.
///
/// One response is carried per equality class of hidden attributes; the
/// commitment `A` of the first move is recomputed by the verifier.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DlrepProof<G: PrimeGroup> {
    statement: DisclosureStatement<G>,
    challenge: G::Scalar,
    responses: Vec<G::Scalar>,
}

impl<G: PrimeGroup> DlrepProof<G> {
    pub fn statement(&self) -> &DisclosureStatement<G> {
        &self.statement
    }

    pub fn challenge(&self) -> &G::Scalar {
        &self.challenge
    }

    pub fn responses(&self) -> &[G::Scalar] {
        &self.responses
    }

    /// Raw parts, for mutation tests and for callers that carry proofs in
    /// their own framing.
    pub fn from_parts(statement: DisclosureStatement<G>, challenge: G::Scalar, responses: Vec<G::Scalar>) -> Self {
        DlrepProof { statement, challenge, responses }
    }

    pub fn into_parts(self) -> (DisclosureStatement<G>, G::Scalar, Vec<G::Scalar>) {
        (self.statement, self.challenge, self.responses)
    }

    /// `tag || len(statement) || statement || c || count || responses`
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_u8(&mut out, PROOF_TAG);
        put_bytes(&mut out, &self.statement.encode());
        out.extend_from_slice(&self.challenge.to_bytes());
        put_u16(&mut out, self.responses.len() as u16);
        for b in &self.responses {
            out.extend_from_slice(&b.to_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DlrepError> {
        let mut r = Reader::new(bytes);
        if r.u8("tag")? != PROOF_TAG {
            return Err(DlrepError::Malformed("unknown proof tag".into()));
        }
        let statement = DisclosureStatement::decode(r.bytes("statement")?)?;
        let scalar = |r: &mut Reader<'_>| -> Result<G::Scalar, DlrepError> {
            G::Scalar::from_bytes(r.take(G::Scalar::BYTES, "scalar")?)
                .ok_or_else(|| DlrepError::Malformed("non-canonical scalar".into()))
        };
        let challenge = scalar(&mut r)?;
        let count = r.u16("response count")?;
        let responses = (0..count).map(|_| scalar(&mut r)).collect::<Result<Vec<_>, _>>()?;
        r.finish("trailing bytes after proof")?;
        Ok(DlrepProof { statement, challenge, responses })
    }
}

fn layout_for<G: PrimeGroup>(
    commitments: &[DlrepCommitment<G>],
    statement: &DisclosureStatement<G>,
) -> Result<Layout<G::Scalar>, DlrepError> {
    let sets: Vec<_> = commitments.iter().map(|c| c.generators()).collect();
    statement.layout(&sets)
}

fn challenge<G: PrimeGroup>(
    commitments: &[DlrepCommitment<G>],
    statement: &DisclosureStatement<G>,
    first_moves: &[G::Element],
) -> G::Scalar {
    let mut parts: Vec<Vec<u8>> = vec![
        CHALLENGE_DOMAIN.to_vec(),
        G::NAME.as_bytes().to_vec(),
        statement.context().to_vec(),
    ];
    for c in commitments {
        parts.push(G::encode(c.value()));
        parts.push(c.generators().hash_encoding());
    }
    parts.push(statement.encode());
    parts.extend(first_moves.iter().map(G::encode));
    let refs: Vec<&[u8]> = parts.iter().map(Vec::as_slice).collect();
    G::hash_to_scalar(&refs)
}

/// Slot layout plus the secret value of each hidden class.
type Witnessed<S> = (Layout<S>, Vec<S>);

/// Validates the witness against commitments and statement.
fn check_witness<G: PrimeGroup>(
    commitments: &[DlrepCommitment<G>],
    witnesses: &[AttributeVector<G>],
    statement: &DisclosureStatement<G>,
) -> Result<Witnessed<G::Scalar>, DlrepError> {
    if commitments.len() != witnesses.len() {
        return Err(DlrepError::LengthMismatch { expected: commitments.len(), got: witnesses.len() });
    }
    let layout = layout_for(commitments, statement)?;
    for (k, (c, w)) in commitments.iter().zip(witnesses).enumerate() {
        if commit(w, c.generators())?.value() != c.value() {
            return Err(DlrepError::WitnessMismatch(k));
        }
    }
    let value_at = |at: AttrRef| witnesses[at.commitment].values()[at.attribute];
    for r in statement.revealed() {
        if value_at(r.at) != r.value {
            return Err(DlrepError::RevealedValueMismatch(r.at));
        }
    }
    for l in statement.links() {
        if value_at(l.left) != value_at(l.right) {
            return Err(DlrepError::LinkMismatch(*l));
        }
    }
    let mut secrets: Vec<Option<G::Scalar>> = vec![None; layout.classes];
    for (k, row) in layout.slots.iter().enumerate() {
        for (j, slot) in row.iter().enumerate() {
            if let Slot::Hidden(class) = slot {
                secrets[*class].get_or_insert(witnesses[k].values()[j]);
            }
        }
    }
    Ok((layout, secrets.into_iter().map(|s| s.expect("every class has a member")).collect()))
}

/// Proves with caller-chosen nonces, one per hidden equality class.
/// Reusing nonces across proofs leaks the witness; this exists for
/// reproducible transcripts.
pub fn prove_with_nonces<G: PrimeGroup>(
    commitments: &[DlrepCommitment<G>],
    witnesses: &[AttributeVector<G>],
    statement: &DisclosureStatement<G>,
    nonces: &[G::Scalar],
) -> Result<DlrepProof<G>, DlrepError> {
    let (layout, secrets) = check_witness(commitments, witnesses, statement)?;
    if nonces.len() != layout.classes {
        return Err(DlrepError::NonceCount { expected: layout.classes, got: nonces.len() });
    }
    let first_moves: Vec<G::Element> = commitments
        .iter()
        .zip(&layout.slots)
        .map(|(c, row)| {
            row.iter().zip(c.generators().generators()).fold(G::identity(), |acc, (slot, g)| match slot {
                Slot::Hidden(class) => G::op(&acc, &G::pow(g, &nonces[*class])),
                Slot::Revealed(_) => acc,
            })
        })
        .collect();
    let c = challenge(commitments, statement, &first_moves);
    let responses = nonces.iter().zip(&secrets).map(|(a, x)| *a + c * *x).collect();
    Ok(DlrepProof { statement: statement.clone(), challenge: c, responses })
}

pub fn prove<G: PrimeGroup, R: RngCore + CryptoRng + ?Sized>(
    commitments: &[DlrepCommitment<G>],
    witnesses: &[AttributeVector<G>],
    statement: &DisclosureStatement<G>,
    rng: &mut R,
) -> Result<DlrepProof<G>, DlrepError> {
    let classes = layout_for(commitments, statement)?.classes;
    let nonces: Vec<G::Scalar> = (0..classes).map(|_| G::Scalar::random(rng)).collect();
    prove_with_nonces(commitments, witnesses, statement, &nonces)
}

/// Nonces derived from `H(witness || statement || counter)`, for golden
/// transcripts.
pub fn prove_deterministic<G: PrimeGroup>(
    commitments: &[DlrepCommitment<G>],
    witnesses: &[AttributeVector<G>],
    statement: &DisclosureStatement<G>,
) -> Result<DlrepProof<G>, DlrepError> {
    let classes = layout_for(commitments, statement)?.classes;
    let secret: Vec<u8> = witnesses.iter().flat_map(|w| w.values().iter().flat_map(|x| x.to_bytes())).collect();
    let stmt = statement.encode();
    let nonces: Vec<G::Scalar> = (0..classes as u32)
        .map(|i| G::hash_to_scalar(&[NONCE_DOMAIN, &secret, &stmt, &i.to_be_bytes()]))
        .collect();
    prove_with_nonces(commitments, witnesses, statement, &nonces)
}

/// Accepts iff `proof` proves `statement` about `commitments`.
pub fn verify<G: PrimeGroup>(
    commitments: &[DlrepCommitment<G>],
    statement: &DisclosureStatement<G>,
    proof: &DlrepProof<G>,
) -> Result<(), DlrepError> {
    if proof.statement != *statement {
        return Err(DlrepError::StatementMismatch);
    }
    let layout = layout_for(commitments, statement)?;
    if proof.responses.len() != layout.classes {
        return Err(DlrepError::Malformed(format!(
            "expected {} responses, got {}",
            layout.classes,
            proof.responses.len()
        )));
    }
    let c = proof.challenge;
    let first_moves: Vec<G::Element> = commitments
        .iter()
        .zip(&layout.slots)
        .map(|(commitment, row)| {
            let mut hidden_part = G::identity();
            let mut residual = commitment.value().clone();
            for (slot, g) in row.iter().zip(commitment.generators().generators()) {
                match slot {
                    Slot::Hidden(class) => hidden_part = G::op(&hidden_part, &G::pow(g, &proof.responses[*class])),
                    Slot::Revealed(v) => residual = G::op(&residual, &G::pow_neg(g, v)),
                }
            }
            G::op(&hidden_part, &G::pow_neg(&residual, &c))
        })
        .collect();
    if challenge(commitments, statement, &first_moves) == c {
        Ok(())
    } else {
        Err(DlrepError::ChallengeMismatch)
    }
}
