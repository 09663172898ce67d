//! Transactions that change identity state on the ledger.

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use crate::dlrep::{self, combine, issue_commitment, AttrRef, DlrepCommitment, GeneratorSet};
use crate::economics::{fee_of, per_use_cost, SizeModel, Template, TokenPolicy};
use crate::group::{PrimeGroup, Secp256k1};
use crate::hash::Hash32;
use crate::ledger::{Address, Ledger, OutPoint, Script, Transaction, TxInput, TxOutput, Txid, MAX_DATA_CARRIER_BYTES};
use crate::{Scalar, Statement};

use super::actor::{exact_coin, wallet_spend, Actor, Credential, IdentityRecord, IssuerProfile};
use super::payload::{ProofRef, PublishPayload, REQUEST_DOUBLE_TAG, REQUEST_TAG, REVOKE_TAG};
use super::shape::{classify_spend, token_output};
use super::source::ChainSource;
use super::store::ProofStore;
use super::ProtocolError;

/// Publishes the issuer's generator set in data carriers of at most 80
/// bytes, one per transaction, chained through the issuer's change.
pub fn setup(ledger: &mut Ledger, issuer: &mut IssuerProfile, model: &SizeModel) -> Result<Vec<Txid>, ProtocolError> {
    let bytes = issuer.generators.to_publication()?;
    let mut txids = Vec::new();
    for chunk in bytes.chunks(MAX_DATA_CARRIER_BYTES) {
        txids.push(wallet_spend(ledger, &issuer.actor, vec![TxOutput::new(0, Script::data(chunk))], model)?);
    }
    issuer.publication = txids.clone();
    Ok(txids)
}

/// Reassembles a generator set published by `issuer` in `txids`.
pub fn read_generators(
    source: &dyn ChainSource,
    issuer: Address,
    txids: &[Txid],
) -> Result<GeneratorSet<Secp256k1>, ProtocolError> {
    let mut bytes = Vec::new();
    for txid in txids {
        let found = source.transaction(txid)?.ok_or(ProtocolError::UnknownTransaction(*txid))?;
        if !found.tx.inputs.iter().all(|i| Address::from_public_key(&i.public_key) == issuer) {
            return Err(ProtocolError::Publication(format!("{txid} is not signed by {issuer}")));
        }
        let (_, payload) =
            found.tx.data_carrier().ok_or_else(|| ProtocolError::Publication(format!("{txid} carries no data")))?;
        bytes.extend_from_slice(payload);
    }
    Ok(GeneratorSet::from_publication(&bytes)?)
}

/// What the issuer receives from a prospective holder.
#[derive(Clone, Debug)]
pub struct Enrollment<'a> {
    pub user: Address,
    /// Encoded `g0^{X0}`.
    pub blinded: &'a [u8],
    /// `X1..Xn`, in generator order.
    pub attributes: &'a [Scalar],
    pub uses: u32,
    /// Extra satoshi on top of the exact calibration.
    pub margin: u64,
}

/// Issues an identity: submits a publish transaction whose single input is
/// an issuer coin of exactly `V + D + f_publish`.
pub fn enroll(
    ledger: &mut Ledger,
    issuer: &IssuerProfile,
    request: &Enrollment<'_>,
    model: &SizeModel,
) -> Result<IdentityRecord, ProtocolError> {
    let blinded = Secp256k1::decode(request.blinded)
        .filter(|e| !Secp256k1::is_identity(e))
        .ok_or(ProtocolError::InvalidBlindedElement)?;
    let uses = u16::try_from(request.uses).map_err(|_| ProtocolError::UseLimitTooLarge(request.uses))?;
    let commitment = issue_commitment(&blinded, request.attributes, &issuer.generators)?;
    let schedule = *ledger.schedule();
    let policy = TokenPolicy::calibrated(request.uses, request.margin, &schedule, model)?;
    let fee = fee_of(Template::Publish, &schedule, model)?;
    let coin = exact_coin(ledger, &issuer.actor, policy.value + schedule.dust + fee, model)?;

    let token_script = Script::multisig(request.user, issuer.actor.address);
    let payload = PublishPayload { commitment: *commitment.value(), uses };
    let mut tx = Transaction::new(
        vec![TxInput::unsigned(coin)],
        vec![
            TxOutput::new(schedule.dust, Script::pay_to(request.user)),
            TxOutput::new(policy.value, token_script.clone()),
            TxOutput::new(0, Script::data(payload.encode())),
        ],
    );
    tx.sign_input(0, &issuer.actor.key, 0);
    let publish_txid = ledger.submit(tx)?;
    Ok(IdentityRecord {
        publish_txid,
        issuer: issuer.actor.address,
        user: request.user,
        commitment: *commitment.value(),
        uses: request.uses,
        value: policy.value,
        token_script,
    })
}

/// An attribute named by identity position and field label.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldRef {
    #[serde(default)]
    pub identity: usize,
    pub field: String,
}

impl FieldRef {
    pub fn new(identity: usize, field: impl Into<String>) -> Self {
        FieldRef { identity, field: field.into() }
    }

    /// Index into the concatenated attribute vector of `sets`.
    pub fn resolve(&self, sets: &[&GeneratorSet<Secp256k1>]) -> Result<AttrRef, ProtocolError> {
        let set = sets.get(self.identity).ok_or(ProtocolError::UnknownIdentity(self.identity))?;
        let index = set.index_of(&self.field).ok_or_else(|| ProtocolError::UnknownField(self.field.clone()))?;
        let offset: usize = sets[..self.identity].iter().map(|s| s.len()).sum();
        Ok(AttrRef::new(0, offset + index))
    }
}

/// Which fields a holder reveals and which hidden fields they prove equal.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disclosure {
    #[serde(default)]
    pub reveal: Vec<FieldRef>,
    #[serde(default)]
    pub link: Vec<(FieldRef, FieldRef)>,
}

fn statement_for(
    disclosure: &Disclosure,
    credentials: &[&Credential],
    context: Vec<u8>,
) -> Result<Statement, ProtocolError> {
    let sets: Vec<&GeneratorSet<Secp256k1>> = credentials.iter().map(|c| &c.generators).collect();
    let mut statement = Statement::new().with_context(context);
    for field in &disclosure.reveal {
        let at = field.resolve(&sets)?;
        let local = sets[field.identity].index_of(&field.field).expect("resolved above");
        statement = statement.reveal(at, credentials[field.identity].attributes.values()[local]);
    }
    for (a, b) in &disclosure.link {
        statement = statement.link(a.resolve(&sets)?, b.resolve(&sets)?);
    }
    Ok(statement)
}

/// Result of submitting an authentication request.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RequestReceipt {
    pub txid: Txid,
    pub proof: ProofRef,
    pub tokens: Vec<OutPoint>,
}

fn ensure_token(ledger: &Ledger, credential: &Credential) -> Result<(), ProtocolError> {
    let live = ledger.spendable(&credential.record.token_script).iter().any(|(op, _)| *op == credential.token);
    if !live {
        return Err(ProtocolError::TokenSpent { outpoint: credential.token });
    }
    Ok(())
}

fn residual(ledger: &Ledger, credential: &Credential, model: &SizeModel) -> Result<u64, ProtocolError> {
    let cost = per_use_cost(ledger.schedule(), model)?;
    let dust = ledger.schedule().dust;
    credential
        .token_value
        .checked_sub(cost)
        .filter(|r| *r >= dust)
        .ok_or(ProtocolError::UseLimitExceeded { token_value: credential.token_value, needed: cost + dust })
}

fn store_proof(
    store: &mut ProofStore,
    commitments: &[DlrepCommitment<Secp256k1>],
    credentials: &[&Credential],
    statement: &Statement,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<ProofRef, ProtocolError> {
    let witness = credentials[1..].iter().fold(credentials[0].attributes.clone(), |acc, c| acc.concat(&c.attributes));
    let proof = dlrep::prove(commitments, &[witness], statement, rng)?;
    let hash: Hash32 = store.put(&proof.encode())?;
    Ok(ProofRef { hash, locator: ProofRef::default_locator(&hash) })
}

fn commitment_of(credential: &Credential) -> DlrepCommitment<Secp256k1> {
    DlrepCommitment::from_parts(credential.record.commitment, credential.generators.clone())
}

/// Spends the holder's token in request shape, paying the service provider
/// `f_accept + D`, and stores the disclosure proof bound to the spent
/// outpoint.
#[allow(clippy::too_many_arguments)]
pub fn build_request(
    ledger: &mut Ledger,
    user: &Actor,
    credential: &mut Credential,
    sp: Address,
    disclosure: &Disclosure,
    store: &mut ProofStore,
    rng: &mut (impl RngCore + CryptoRng),
    model: &SizeModel,
) -> Result<RequestReceipt, ProtocolError> {
    credential.sync(ledger);
    ensure_token(ledger, credential)?;
    let remaining = residual(ledger, credential, model)?;
    let schedule = *ledger.schedule();
    let statement = statement_for(disclosure, &[credential], credential.token.encode().to_vec())?;
    let proof = store_proof(store, &[commitment_of(credential)], &[credential], &statement, rng)?;

    let mut tx = Transaction::new(
        vec![TxInput::unsigned(credential.token)],
        vec![
            TxOutput::new(fee_of(Template::Accept, &schedule, model)? + schedule.dust, Script::pay_to(sp)),
            TxOutput::new(remaining, credential.record.token_script.clone()),
            TxOutput::new(0, Script::data(proof.encode(REQUEST_TAG))),
        ],
    );
    tx.sign_input(0, &user.key, 0);
    let txid = ledger.submit(tx)?;
    credential.token = OutPoint::new(txid, 1);
    credential.token_value = remaining;
    credential.uses_made += 1;
    Ok(RequestReceipt { txid, proof, tokens: vec![credential.token] })
}

/// Spends two tokens together with one proof over the combined commitment.
/// Each token decreases by exactly one ordinary use.
#[allow(clippy::too_many_arguments)]
pub fn build_request_double(
    ledger: &mut Ledger,
    holders: [(&Actor, &mut Credential); 2],
    sp: Address,
    disclosure: &Disclosure,
    store: &mut ProofStore,
    rng: &mut (impl RngCore + CryptoRng),
    model: &SizeModel,
) -> Result<RequestReceipt, ProtocolError> {
    let [(user_a, cred_a), (user_b, cred_b)] = holders;
    cred_a.sync(ledger);
    cred_b.sync(ledger);
    ensure_token(ledger, cred_a)?;
    ensure_token(ledger, cred_b)?;
    let remaining_a = residual(ledger, cred_a, model)?;
    let remaining_b = residual(ledger, cred_b, model)?;
    let schedule = *ledger.schedule();

    let mut context = cred_a.token.encode().to_vec();
    context.extend(cred_b.token.encode());
    let statement = statement_for(disclosure, &[cred_a, cred_b], context)?;
    let combined = combine(&commitment_of(cred_a), &commitment_of(cred_b))?;
    let proof = store_proof(store, &[combined], &[cred_a, cred_b], &statement, rng)?;

    let pay = 2 * (fee_of(Template::Accept, &schedule, model)? + schedule.dust);
    let mut tx = Transaction::new(
        vec![TxInput::unsigned(cred_a.token), TxInput::unsigned(cred_b.token)],
        vec![
            TxOutput::new(pay, Script::pay_to(sp)),
            TxOutput::new(remaining_a, cred_a.record.token_script.clone()),
            TxOutput::new(remaining_b, cred_b.record.token_script.clone()),
            TxOutput::new(0, Script::data(proof.encode(REQUEST_DOUBLE_TAG))),
        ],
    );
    tx.sign_input(0, &user_a.key, 0);
    tx.sign_input(1, &user_b.key, 0);
    let txid = ledger.submit(tx)?;
    for (i, (cred, remaining)) in [(cred_a, remaining_a), (cred_b, remaining_b)].into_iter().enumerate() {
        cred.token = OutPoint::new(txid, 1 + i as u32);
        cred.token_value = remaining;
        cred.uses_made += 1;
    }
    Ok(RequestReceipt { txid, proof, tokens: vec![OutPoint::new(txid, 1), OutPoint::new(txid, 2)] })
}

fn known_transaction(ledger: &Ledger, txid: &Txid) -> Option<Transaction> {
    ledger.transaction(txid).map(|l| l.tx.clone()).or_else(|| ledger.mempool_transaction(txid).cloned())
}

/// Spends the provider's payment from a request, sending `D` to each
/// issuer whose token the request carried forward.
pub fn accept(ledger: &mut Ledger, sp: &Actor, request: Txid) -> Result<Txid, ProtocolError> {
    let tx = known_transaction(ledger, &request).ok_or(ProtocolError::UnknownTransaction(request))?;
    let issuers: Vec<Address> = tx.outputs[1..]
        .iter()
        .filter_map(|o| match &o.script {
            Script::Multisig1of2 { keys } => Some(keys[1]),
            _ => None,
        })
        .collect();
    if issuers.is_empty() || tx.outputs[0].script != sp.script() {
        return Err(ProtocolError::NotARequest(request));
    }
    let payment = OutPoint::new(request, 0);
    if !ledger.spendable(&sp.script()).iter().any(|(op, _)| *op == payment) {
        return Err(ProtocolError::OutputSpent(payment));
    }
    let dust = ledger.schedule().dust;
    let mut accept = Transaction::new(
        vec![TxInput::unsigned(payment)],
        issuers.iter().map(|a| TxOutput::new(dust, Script::pay_to(*a))).collect(),
    );
    accept.sign_input(0, &sp.key, 0);
    Ok(ledger.submit(accept)?)
}

/// [`accept`] for a two-token request; refuses single requests.
pub fn accept_double(ledger: &mut Ledger, sp: &Actor, request: Txid) -> Result<Txid, ProtocolError> {
    let tx = known_transaction(ledger, &request).ok_or(ProtocolError::UnknownTransaction(request))?;
    if tx.inputs.len() != 2 || tx.outputs.len() != 4 {
        return Err(ProtocolError::NotARequest(request));
    }
    accept(ledger, sp, request)
}

/// Current token of an identity on the active branch, following queued
/// transactions as well as confirmed ones. `None` once the token has been
/// spent in a non-request shape.
pub fn current_token(ledger: &Ledger, record: &IdentityRecord) -> Option<(OutPoint, u64)> {
    walk_token(ledger, record).map(|(op, value, _)| (op, value))
}

fn walk_token(ledger: &Ledger, record: &IdentityRecord) -> Option<(OutPoint, u64, u32)> {
    let mut op = record.token_origin();
    let mut hops = 0;
    loop {
        let spender = match ledger.find_spender(&op) {
            Ok(Some(s)) => known_transaction(ledger, &s.txid).map(|tx| (s.txid, tx)),
            _ => ledger
                .mempool()
                .iter()
                .find(|e| e.branch == ledger.active_branch() && e.tx.inputs.iter().any(|i| i.outpoint == op))
                .map(|e| (e.txid, e.tx.clone())),
        };
        let Some((txid, tx)) = spender else {
            let value = known_transaction(ledger, &op.txid)?.outputs.get(op.vout as usize)?.value;
            return Some((op, value, hops));
        };
        let spent: Option<Vec<Script>> = tx
            .inputs
            .iter()
            .map(|i| known_transaction(ledger, &i.outpoint.txid).and_then(|t| t.outputs.get(i.outpoint.vout as usize).map(|o| o.script.clone())))
            .collect();
        let kind = classify_spend(&tx, &spent?);
        let input = tx.inputs.iter().position(|i| i.outpoint == op)?;
        op = OutPoint::new(txid, token_output(kind, input)?);
        hops += 1;
    }
}

impl Credential {
    /// Re-reads the token from the active branch, which may differ from the
    /// cached one after a reorg. Leaves the cache alone when the token is
    /// gone for good.
    pub fn sync(&mut self, ledger: &Ledger) {
        if let Some((token, value, hops)) = walk_token(ledger, &self.record) {
            self.token = token;
            self.token_value = value;
            self.uses_made = hops;
        }
    }
}

/// Ends an identity by spending its token outside the request shape. The
/// residual goes to `destination`, or to fees when it would be dust.
pub fn revoke(
    ledger: &mut Ledger,
    actor: &Actor,
    record: &IdentityRecord,
    destination: Address,
    model: &SizeModel,
) -> Result<Txid, ProtocolError> {
    let slot = if actor.address == record.user {
        0
    } else if actor.address == record.issuer {
        1
    } else {
        return Err(ProtocolError::NotAKeyHolder(actor.address));
    };
    let (token, value) =
        current_token(ledger, record).ok_or(ProtocolError::TokenSpent { outpoint: record.token_origin() })?;
    if !ledger.spendable(&record.token_script).iter().any(|(op, _)| *op == token) {
        return Err(ProtocolError::TokenSpent { outpoint: token });
    }
    let schedule = *ledger.schedule();
    let fee = fee_of(Template::Revoke, &schedule, model)?;
    let output = match value.checked_sub(fee).filter(|v| *v >= schedule.dust) {
        Some(v) => TxOutput::new(v, Script::pay_to(destination)),
        None => {
            let mut payload = vec![REVOKE_TAG];
            payload.extend_from_slice(record.publish_txid.as_bytes());
            TxOutput::new(0, Script::data(payload))
        }
    };
    let mut tx = Transaction::new(vec![TxInput::unsigned(token)], vec![output]);
    tx.sign_input(0, &actor.key, slot);
    Ok(ledger.submit(tx)?)
}
