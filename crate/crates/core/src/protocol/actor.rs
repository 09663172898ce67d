use serde::{Serialize, Serializer};

use crate::dlrep::{commit, AttributeVector, GeneratorSet};
use crate::economics::{fee_for_shape, SizeModel, TxShape};
use crate::group::{PrimeGroup, Secp256k1};
use crate::ledger::{Address, Ledger, OutPoint, Script, Transaction, TxInput, TxOutput, Txid};
use crate::KeyPair;

use super::ProtocolError;

type Element = <Secp256k1 as PrimeGroup>::Element;

/// A named key holder.
#[derive(Clone, Debug)]
pub struct Actor {
    pub name: String,
    pub key: KeyPair,
    pub address: Address,
}

impl Actor {
    pub fn from_seed(name: impl Into<String>, seed: &[u8]) -> Self {
        let key = KeyPair::from_seed(seed);
        Actor { name: name.into(), address: Address::of_key(&key), key }
    }

    pub fn script(&self) -> Script {
        Script::pay_to(self.address)
    }
}

#[derive(Clone, Debug)]
pub struct IssuerProfile {
    pub actor: Actor,
    pub generators: GeneratorSet<Secp256k1>,
    /// Transactions carrying the published generator set, in order.
    pub publication: Vec<Txid>,
}

impl IssuerProfile {
    pub fn new(actor: Actor, generators: GeneratorSet<Secp256k1>) -> Self {
        IssuerProfile { actor, generators, publication: Vec::new() }
    }
}

pub(crate) fn serialize_element<S: Serializer>(e: &Element, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&hex::encode(Secp256k1::encode(e)))
}

/// Public facts fixed at enrollment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IdentityRecord {
    pub publish_txid: Txid,
    pub issuer: Address,
    pub user: Address,
    #[serde(serialize_with = "serialize_element")]
    pub commitment: Element,
    pub uses: u32,
    pub value: u64,
    pub token_script: Script,
}

impl IdentityRecord {
    pub fn token_origin(&self) -> OutPoint {
        OutPoint::new(self.publish_txid, 1)
    }
}

/// A user's handle on one identity: the opening of its commitment and the
/// current token.
#[derive(Clone, Debug)]
pub struct Credential {
    pub record: IdentityRecord,
    pub generators: GeneratorSet<Secp256k1>,
    pub attributes: AttributeVector<Secp256k1>,
    pub token: OutPoint,
    pub token_value: u64,
    pub uses_made: u32,
}

impl Credential {
    /// Fails unless `attributes` open the enrolled commitment.
    pub fn new(
        record: IdentityRecord,
        generators: GeneratorSet<Secp256k1>,
        attributes: AttributeVector<Secp256k1>,
    ) -> Result<Self, ProtocolError> {
        if commit(&attributes, &generators)?.value() != &record.commitment {
            return Err(ProtocolError::CommitmentMismatch);
        }
        Ok(Credential {
            token: record.token_origin(),
            token_value: record.value,
            uses_made: 0,
            record,
            generators,
            attributes,
        })
    }
}

fn add_output_to_shape(shape: &mut TxShape, output: &TxOutput) {
    match &output.script {
        Script::PayToAddress { .. } => shape.p2pkh_outputs += 1,
        Script::Multisig1of2 { .. } => shape.p2sh_outputs += 1,
        Script::DataCarrier { payload } => shape.data_carriers.push(payload.len()),
    }
}

/// Builds, signs and submits a payment from `actor`'s coins covering
/// `outputs` plus a size-based fee; change of at least the dust limit goes
/// back to `actor`, smaller remainders go to the fee.
pub fn wallet_spend(
    ledger: &mut Ledger,
    actor: &Actor,
    outputs: Vec<TxOutput>,
    model: &SizeModel,
) -> Result<Txid, ProtocolError> {
    let schedule = *ledger.schedule();
    let target: u64 = outputs.iter().map(|o| o.value).sum();
    let mut coins = ledger.spendable(&actor.script());
    coins.sort_by(|a, b| b.1.value.cmp(&a.1.value).then(a.0.cmp(&b.0)));
    let available: u64 = coins.iter().map(|(_, o)| o.value).sum();

    let mut base = TxShape::default();
    for o in &outputs {
        add_output_to_shape(&mut base, o);
    }
    let mut total = 0u64;
    for (k, (_, coin)) in coins.iter().enumerate() {
        total += coin.value;
        let mut shape = TxShape { p2pkh_inputs: k as u64 + 1, ..base.clone() };
        let fee_plain = fee_for_shape(&shape, &schedule, model);
        shape.p2pkh_outputs += 1;
        let fee_change = fee_for_shape(&shape, &schedule, model);
        let change = total.checked_sub(target + fee_change).filter(|c| *c >= schedule.dust);
        if change.is_none() && total < target + fee_plain {
            continue;
        }
        let mut outs = outputs;
        if let Some(c) = change {
            outs.push(TxOutput::new(c, actor.script()));
        }
        let inputs = coins[..=k].iter().map(|(op, _)| TxInput::unsigned(*op)).collect();
        let mut tx = Transaction::new(inputs, outs);
        for i in 0..=k {
            tx.sign_input(i, &actor.key, 0);
        }
        return Ok(ledger.submit(tx)?);
    }
    let fee = fee_for_shape(&TxShape { p2pkh_inputs: coins.len().max(1) as u64, ..base }, &schedule, model);
    Err(ProtocolError::InsufficientFunds { needed: target + fee, available })
}

/// An unspent coin of exactly `amount` owned by `actor`, splitting one off
/// with a funding transaction when none exists.
pub fn exact_coin(ledger: &mut Ledger, actor: &Actor, amount: u64, model: &SizeModel) -> Result<OutPoint, ProtocolError> {
    if let Some((op, _)) = ledger.spendable(&actor.script()).into_iter().find(|(_, o)| o.value == amount) {
        return Ok(op);
    }
    let txid = wallet_spend(ledger, actor, vec![TxOutput::new(amount, actor.script())], model)?;
    Ok(OutPoint::new(txid, 0))
}
