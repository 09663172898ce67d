//! Structural recognition of identity transactions.

use serde::Serialize;

use crate::group::{PrimeGroup, Secp256k1};
use crate::ledger::{Address, Script, Transaction};

use super::payload::{ProofRef, PublishPayload, REQUEST_DOUBLE_TAG, REQUEST_TAG};

/// How a token spend is interpreted. Anything that is not exactly one of
/// the two request shapes ends the identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpendKind {
    Request,
    RequestDouble,
    Revoke,
}

/// Classifies `tx`, where `spent[i]` is the script of the output spent by
/// input `i`.
///
/// A request has one token input signed by the user slot and outputs
/// `[payment, same token script, proof-ref carrier]`. A double request has
/// two distinct token inputs, both signed by user slots, and outputs
/// `[payment, token 1, token 2, proof-ref carrier]`.
pub fn classify_spend(tx: &Transaction, spent: &[Script]) -> SpendKind {
    if spent.len() != tx.inputs.len() {
        return SpendKind::Revoke;
    }
    let tokens_ok = tx.inputs.iter().zip(spent).all(|(i, s)| i.signer == 0 && matches!(s, Script::Multisig1of2 { .. }));
    let payment_ok = tx.outputs.first().is_some_and(|o| o.script.address().is_some());
    if !tokens_ok || !payment_ok {
        return SpendKind::Revoke;
    }
    let carrier = |tag| tx.outputs.last().and_then(|o| o.script.payload()).and_then(|p| ProofRef::decode(p, tag));
    match (tx.inputs.len(), tx.outputs.len()) {
        (1, 3) if tx.outputs[1].script == spent[0] && carrier(REQUEST_TAG).is_some() => SpendKind::Request,
        (2, 4)
            if spent[0] != spent[1]
                && tx.outputs[1].script == spent[0]
                && tx.outputs[2].script == spent[1]
                && carrier(REQUEST_DOUBLE_TAG).is_some() =>
        {
            SpendKind::RequestDouble
        }
        _ => SpendKind::Revoke,
    }
}

/// Output index of the token carried forward from input `input`.
pub fn token_output(kind: SpendKind, input: usize) -> Option<u32> {
    match (kind, input) {
        (SpendKind::Request, 0) => Some(1),
        (SpendKind::RequestDouble, 0 | 1) => Some(1 + input as u32),
        _ => None,
    }
}

pub fn proof_ref(tx: &Transaction, kind: SpendKind) -> Option<ProofRef> {
    let tag = match kind {
        SpendKind::Request => REQUEST_TAG,
        SpendKind::RequestDouble => REQUEST_DOUBLE_TAG,
        SpendKind::Revoke => return None,
    };
    ProofRef::decode(tx.outputs.last()?.script.payload()?, tag)
}

/// Fields of a well-formed publish transaction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublishInfo {
    pub issuer: Address,
    pub user: Address,
    pub commitment: <Secp256k1 as PrimeGroup>::Element,
    pub uses: u16,
    pub value: u64,
    pub token_script: Script,
}

/// Publish shape: one issuer-signed input; outputs `[D to user, V to
/// multisig(user, issuer), carrier(P || h || N)]`.
pub fn parse_publish(tx: &Transaction) -> Option<PublishInfo> {
    if tx.inputs.len() != 1 || tx.outputs.len() != 3 || tx.inputs[0].signer != 0 {
        return None;
    }
    let issuer = Address::from_public_key(&tx.inputs[0].public_key);
    let user = tx.outputs[0].script.address()?;
    let token_script = Script::multisig(user, issuer);
    if tx.outputs[1].script != token_script {
        return None;
    }
    let payload = PublishPayload::decode(tx.outputs[2].script.payload()?)?;
    Some(PublishInfo {
        issuer,
        user,
        commitment: payload.commitment,
        uses: payload.uses,
        value: tx.outputs[1].value,
        token_script,
    })
}
