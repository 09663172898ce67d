//! Executes scenario steps against a fresh ledger and records a transcript.

use std::collections::BTreeMap;
use std::path::PathBuf;

use chainid_core::dlrep::{attribute_scalar, blind_contribution, AttributeVector, GeneratorSet};
use chainid_core::economics::{SizeModel, Template, UsdQuote};
use chainid_core::group::{GroupScalar, PrimeGroup, Secp256k1};
use chainid_core::ledger::{Genesis, Ledger, LedgerError, LedgerEvent, Script, Transaction, Txid};
use chainid_core::protocol::payload::{REQUEST_DOUBLE_TAG, REQUEST_TAG};
use chainid_core::protocol::{
    accept, accept_double, build_request, build_request_double, classify_spend, enroll, identity_status,
    lightweight_verify, parse_publish, read_generators, reputation_report, revoke, setup, Actor, ControlClaim,
    Credential, Demand, Disclosure, Enrollment, Explorer, FieldRef, FullLedger, HeaderOnly, IssuerProfile,
    ProofStore, ProtocolError, SpendKind, Verdict, Verifier,
};
use chainid_core::Scalar;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::config::{Action, ConfigError, FieldSpec, ScenarioConfig};
use crate::transcript::{
    ActorEntry, Balance, BranchEntry, BranchSpend, Failure, FinalState, GenesisEntry, IdentityEntry, LedgerRecord,
    Payout, StepDetail, StepEntry, Transcript, TRANSCRIPT_SCHEMA_VERSION,
};

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: u64,
    pub fee_rate: Option<u64>,
    pub usd: Option<UsdQuote>,
    /// Keep proofs on disk instead of in memory.
    pub proof_dir: Option<PathBuf>,
}

pub struct RunResult {
    pub transcript: Transcript,
    pub ledger: Ledger,
    pub store: ProofStore,
}

struct Identity {
    user: String,
    credential: Credential,
}

struct RequestInfo {
    txid: Txid,
    sp: String,
    identities: Vec<String>,
    double: bool,
}

struct Outcome {
    detail: Option<StepDetail>,
    observed: String,
    error: Option<String>,
}

struct StepError {
    kind: &'static str,
    message: String,
}

impl From<ProtocolError> for StepError {
    fn from(e: ProtocolError) -> Self {
        StepError { kind: e.kind(), message: e.to_string() }
    }
}

impl From<LedgerError> for StepError {
    fn from(e: LedgerError) -> Self {
        StepError { kind: e.kind(), message: e.to_string() }
    }
}

struct Engine<'c> {
    config: &'c ScenarioConfig,
    ledger: Ledger,
    model: SizeModel,
    store: ProofStore,
    rng: ChaCha20Rng,
    issuers: BTreeMap<String, IssuerProfile>,
    actors: BTreeMap<String, Actor>,
    identities: BTreeMap<String, Identity>,
    requests: BTreeMap<String, RequestInfo>,
}

/// Runs `config` from genesis. Configuration problems are reported before
/// any step executes; a failing step ends the run and is recorded in the
/// transcript.
pub fn run(config: &ScenarioConfig, options: &RunOptions) -> Result<RunResult, ConfigError> {
    config.validate()?;
    let mut schedule = config.schedule();
    if let Some(rate) = options.fee_rate {
        schedule.rate = rate;
    }
    if let Some(usd) = options.usd {
        schedule.usd_per_btc = usd;
    }
    schedule
        .validate()
        .map_err(|e| ConfigError::Invalid { field: "fees".into(), message: e.to_string() })?;
    let store = match &options.proof_dir {
        Some(dir) => ProofStore::at_dir(dir)
            .map_err(|e| ConfigError::Invalid { field: "proof_dir".into(), message: e.to_string() })?,
        None => ProofStore::in_memory(),
    };

    let mut actors = BTreeMap::new();
    let mut entries = Vec::new();
    let mut allocations = Vec::new();
    let mut issuers = BTreeMap::new();
    for cfg in &config.issuers {
        let actor = Actor::from_seed(&cfg.name, cfg.seed().as_bytes());
        let generators = GeneratorSet::derive(&cfg.name, &cfg.fields).map_err(|e| ConfigError::Invalid {
            field: format!("issuers.{}.fields", cfg.name),
            message: e.to_string(),
        })?;
        entries.push(ActorEntry { name: cfg.name.clone(), role: "issuer", address: actor.address });
        allocations.push((actor.address, cfg.funds));
        issuers.insert(cfg.name.clone(), IssuerProfile::new(actor.clone(), generators));
        actors.insert(cfg.name.clone(), actor);
    }
    for (role, list) in [("user", &config.users), ("provider", &config.providers)] {
        for cfg in list {
            let actor = Actor::from_seed(&cfg.name, cfg.seed().as_bytes());
            entries.push(ActorEntry { name: cfg.name.clone(), role, address: actor.address });
            allocations.push((actor.address, cfg.funds));
            actors.insert(cfg.name.clone(), actor);
        }
    }
    let genesis = Genesis::new(allocations);
    let ledger = Ledger::new(schedule, &genesis);
    let genesis_entry = GenesisEntry {
        block: ledger.header_at(0).expect("genesis block").hash(),
        txid: genesis.transaction().txid(),
        allocations: genesis.allocations.clone(),
    };

    let mut engine = Engine {
        config,
        ledger,
        model: SizeModel::standard(),
        store,
        rng: ChaCha20Rng::seed_from_u64(options.seed),
        issuers,
        actors,
        identities: BTreeMap::new(),
        requests: BTreeMap::new(),
    };

    let mut steps = Vec::new();
    let mut failure = None;
    for (index, step) in config.steps.iter().enumerate() {
        let outcome = match engine.execute(&step.action) {
            Ok(o) => o,
            Err(e) => Outcome { detail: None, observed: e.kind.to_string(), error: Some(e.message) },
        };
        let passed = match &step.expect {
            Some(e) => *e == outcome.observed,
            None => outcome.error.is_none(),
        };
        let ledger_records = engine.drain();
        if !passed {
            let message = match (&step.expect, &outcome.error) {
                (Some(e), Some(err)) => format!("expected {e}, got {}: {err}", outcome.observed),
                (Some(e), None) => format!("expected {e}, got {}", outcome.observed),
                (None, Some(err)) => err.clone(),
                (None, None) => unreachable!("a step without expectation fails only on error"),
            };
            failure = Some(Failure { step: index, action: step.action.name(), observed: outcome.observed.clone(), message });
        }
        steps.push(StepEntry {
            index,
            action: step.action.name(),
            expect: step.expect.clone(),
            observed: outcome.observed,
            passed,
            error: outcome.error,
            detail: outcome.detail,
            ledger: ledger_records,
        });
        if failure.is_some() {
            break;
        }
    }

    let final_state = engine.final_state();
    let transcript = Transcript {
        schema_version: TRANSCRIPT_SCHEMA_VERSION,
        scenario: config.name.clone(),
        seed: options.seed,
        fee_schedule: schedule,
        actors: entries,
        genesis: genesis_entry,
        steps,
        final_state,
        failure,
    };
    Ok(RunResult { transcript, ledger: engine.ledger, store: engine.store })
}

fn ok(detail: StepDetail) -> Result<Outcome, StepError> {
    Ok(Outcome { detail: Some(detail), observed: "ok".into(), error: None })
}

fn verdict_name(v: &Verdict) -> &'static str {
    match v {
        Verdict::Accept { .. } => "accept",
        Verdict::Reject(r) => r.name(),
    }
}

impl Engine<'_> {
    fn actor(&self, name: &str) -> &Actor {
        &self.actors[name]
    }

    fn execute(&mut self, action: &Action) -> Result<Outcome, StepError> {
        match action {
            Action::Setup { issuer } => {
                let profile = self.issuers.get_mut(issuer).expect("validated issuer");
                let publication = setup(&mut self.ledger, profile, &self.model)?;
                ok(StepDetail::Setup { issuer: issuer.clone(), publication, generators: profile.generators.len() })
            }
            Action::Enroll { label, issuer, user, uses, margin, attributes } => {
                let profile = &self.issuers[issuer];
                let fields = &self.config.issuers.iter().find(|i| &i.name == issuer).expect("validated issuer").fields;
                let x0 = Scalar::random(&mut self.rng);
                let blinded = Secp256k1::encode(&blind_contribution(&x0, &profile.generators));
                let attrs: Vec<Scalar> = fields.iter().map(|f| attribute_scalar::<Secp256k1>(&attributes[f])).collect();
                let request = Enrollment {
                    user: self.actor(user).address,
                    blinded: &blinded,
                    attributes: &attrs,
                    uses: *uses,
                    margin: *margin,
                };
                let record = enroll(&mut self.ledger, profile, &request, &self.model)?;
                let credential =
                    Credential::new(record.clone(), profile.generators.clone(), AttributeVector::new(x0, &attrs))?;
                self.identities
                    .insert(label.clone(), Identity { user: user.clone(), credential });
                ok(StepDetail::Enroll {
                    identity: label.clone(),
                    publish: record.publish_txid,
                    issuer: record.issuer,
                    user: record.user,
                    uses: record.uses,
                    value: record.value,
                    commitment: hex::encode(Secp256k1::encode(&record.commitment)),
                })
            }
            Action::Mine { branch, count } => {
                let branch = branch.unwrap_or(self.ledger.active_branch());
                for _ in 0..*count {
                    self.ledger.mine_on(branch)?;
                }
                Ok(Outcome { detail: None, observed: "ok".into(), error: None })
            }
            Action::Request { label, identity, sp, reveal, link } => {
                let ids = vec![identity.clone()];
                let disclosure = disclosure_for(&ids, reveal, link);
                let sp_address = self.actor(sp).address;
                let user = self.actor(&self.identities[identity].user).clone();
                let credential = &mut self.identities.get_mut(identity).expect("validated identity").credential;
                let receipt = build_request(
                    &mut self.ledger,
                    &user,
                    credential,
                    sp_address,
                    &disclosure,
                    &mut self.store,
                    &mut self.rng,
                    &self.model,
                )?;
                let token_values = vec![credential.token_value];
                self.requests.insert(
                    label.clone(),
                    RequestInfo { txid: receipt.txid, sp: sp.clone(), identities: ids, double: false },
                );
                ok(StepDetail::Request {
                    request: label.clone(),
                    txid: receipt.txid,
                    proof_hash: receipt.proof.hash.to_hex(),
                    locator: receipt.proof.locator,
                    tokens: receipt.tokens,
                    token_values,
                })
            }
            Action::RequestDouble { label, identities, sp, reveal, link } => {
                let ids = identities.to_vec();
                let disclosure = disclosure_for(&ids, reveal, link);
                let sp_address = self.actor(sp).address;
                let user_a = self.actor(&self.identities[&ids[0]].user).clone();
                let user_b = self.actor(&self.identities[&ids[1]].user).clone();
                let mut a = self.identities.remove(&ids[0]).expect("validated identity");
                let mut b = self.identities.remove(&ids[1]).expect("validated identity");
                let result = build_request_double(
                    &mut self.ledger,
                    [(&user_a, &mut a.credential), (&user_b, &mut b.credential)],
                    sp_address,
                    &disclosure,
                    &mut self.store,
                    &mut self.rng,
                    &self.model,
                );
                let token_values = vec![a.credential.token_value, b.credential.token_value];
                self.identities.insert(ids[0].clone(), a);
                self.identities.insert(ids[1].clone(), b);
                let receipt = result?;
                self.requests.insert(
                    label.clone(),
                    RequestInfo { txid: receipt.txid, sp: sp.clone(), identities: ids, double: true },
                );
                ok(StepDetail::Request {
                    request: label.clone(),
                    txid: receipt.txid,
                    proof_hash: receipt.proof.hash.to_hex(),
                    locator: receipt.proof.locator,
                    tokens: receipt.tokens,
                    token_values,
                })
            }
            Action::Verify { request, demand, trust, explorer } => self.verify(request, demand, trust.as_deref(), *explorer),
            Action::Accept { request } => {
                let info = &self.requests[request];
                let sp = self.actor(&info.sp).clone();
                let txid = if info.double {
                    accept_double(&mut self.ledger, &sp, info.txid)?
                } else {
                    accept(&mut self.ledger, &sp, info.txid)?
                };
                let tx = self.ledger.any_transaction(&txid).expect("just submitted");
                let payouts = tx
                    .outputs
                    .iter()
                    .filter_map(|o| o.script.address().map(|address| Payout { address, value: o.value }))
                    .collect();
                ok(StepDetail::Accept { request: request.clone(), txid, payouts })
            }
            Action::Revoke { identity, by, to } => {
                let actor = self.actor(by).clone();
                let destination = to.as_deref().map_or(actor.address, |t| self.actor(t).address);
                let record = self.identities[identity].credential.record.clone();
                let txid = revoke(&mut self.ledger, &actor, &record, destination, &self.model)?;
                let burned = self.ledger.any_transaction(&txid).is_some_and(|tx| tx.data_carrier().is_some());
                let signer = u8::from(self.identities[identity].user != *by);
                ok(StepDetail::Revoke { identity: identity.clone(), txid, signer, burned })
            }
            Action::Fork { at_height } => {
                let at_height = at_height.unwrap_or(self.ledger.height());
                let branch = self.ledger.fork(at_height)?;
                ok(StepDetail::Fork { branch, at_height })
            }
            Action::Reorg {} => {
                let switched = self.ledger.reorg().is_some();
                ok(StepDetail::Reorg {
                    switched,
                    active_branch: self.ledger.active_branch(),
                    height: self.ledger.height(),
                })
            }
            Action::Report { user } => {
                let rows = reputation_report(self.actor(user).address, &FullLedger(&self.ledger))
                    .map_err(|e| StepError { kind: "source_error", message: e.to_string() })?;
                ok(StepDetail::Report { user: user.clone(), rows })
            }
            Action::Lightweight { challenge, claims } => {
                let signed: Vec<ControlClaim> = claims
                    .iter()
                    .map(|c| {
                        let txids = c.requests.iter().map(|r| self.requests[r].txid).collect();
                        ControlClaim::sign(&self.actor(&c.user).key, challenge.as_bytes(), txids)
                    })
                    .collect();
                let verdict = lightweight_verify(challenge.as_bytes(), &signed, &FullLedger(&self.ledger));
                let observed = match &verdict.rejection {
                    None => "accept",
                    Some(r) => r.name(),
                };
                Ok(Outcome { detail: Some(StepDetail::Lightweight { verdict }), observed: observed.into(), error: None })
            }
            Action::Trace { identity } => {
                let origin = self.identities[identity].credential.record.token_origin();
                let mut branches = Vec::new();
                for branch in 0..self.ledger.branch_count() {
                    let height = self.ledger.height_of(branch)?;
                    let spender = self.ledger.find_spender_on(branch, &origin).ok().flatten();
                    let kind = spender.as_ref().and_then(|s| {
                        let tx = self.ledger.any_transaction(&s.txid)?;
                        Some(classify_spend(tx, &spent_scripts(&self.ledger, tx)?))
                    });
                    branches.push(BranchSpend { branch, height, spender: spender.map(|s| s.txid), kind });
                }
                ok(StepDetail::Trace { identity: identity.clone(), origin, branches })
            }
        }
    }

    fn verify(
        &mut self,
        request: &str,
        demand: &BTreeMap<String, String>,
        trust: Option<&[String]>,
        explorer: bool,
    ) -> Result<Outcome, StepError> {
        let info = &self.requests[request];
        let trusted: Vec<&str> = match trust {
            Some(list) => list.iter().map(String::as_str).collect(),
            None => self.config.issuers.iter().map(|i| i.name.as_str()).filter(|n| !self.issuers[*n].publication.is_empty()).collect(),
        };
        // Generators come from the chain, not from the issuer's own copy.
        let mut verifier = Verifier::new();
        for name in trusted {
            let profile = &self.issuers[name];
            let generators = read_generators(&FullLedger(&self.ledger), profile.actor.address, &profile.publication)?;
            verifier = verifier.trust(profile.actor.address, generators);
        }
        let reveal = demand
            .iter()
            .map(|(spec, value)| (field_ref(&info.identities, spec), value.clone()))
            .collect();
        verifier = verifier.demand(Demand { reveal, link: Vec::new() });

        let full = chainid_core::protocol::verify_request(&verifier, info.txid, &FullLedger(&self.ledger), &self.store);
        let header_only =
            chainid_core::protocol::verify_request(&verifier, info.txid, &HeaderOnly::synced(&self.ledger), &self.store);
        let explorer = explorer
            .then(|| chainid_core::protocol::verify_request(&verifier, info.txid, &Explorer::new(&self.ledger), &self.store));
        let equivalent = full == header_only;
        let observed = if equivalent { verdict_name(&full) } else { "source_divergence" };
        let error = (!equivalent).then(|| {
            format!("full ledger says {}, header-only says {}", verdict_name(&full), verdict_name(&header_only))
        });
        Ok(Outcome {
            detail: Some(StepDetail::Verify {
                request: request.to_string(),
                txid: info.txid,
                full,
                header_only,
                explorer,
                equivalent,
            }),
            observed: observed.into(),
            error,
        })
    }

    fn drain(&mut self) -> Vec<LedgerRecord> {
        self.ledger
            .drain_events()
            .into_iter()
            .map(|event| match event {
                LedgerEvent::Submitted { txid, branch } => {
                    let tx = self.ledger.any_transaction(&txid).expect("submitted transaction is known");
                    let (label, template, classification) = describe_tx(&self.ledger, tx);
                    let input_value: u64 = tx
                        .inputs
                        .iter()
                        .filter_map(|i| self.ledger.any_transaction(&i.outpoint.txid)?.outputs.get(i.outpoint.vout as usize))
                        .map(|o| o.value)
                        .sum();
                    let output_value = tx.output_total().unwrap_or(u64::MAX);
                    LedgerRecord::Submitted {
                        txid,
                        branch,
                        label,
                        template,
                        classification,
                        input_value,
                        outputs: tx.outputs.clone(),
                        fee: input_value.saturating_sub(output_value),
                    }
                }
                LedgerEvent::Mined(m) => LedgerRecord::Mined {
                    branch: m.branch,
                    height: m.height,
                    hash: m.hash,
                    included: m.included,
                    evicted: m.evicted,
                },
                LedgerEvent::Forked { branch, at_height } => LedgerRecord::Forked { branch, at_height },
                LedgerEvent::Reorged { from, to, height } => LedgerRecord::Reorged { from, to, height },
            })
            .collect()
    }

    fn final_state(&self) -> FinalState {
        let active = self.ledger.active_branch();
        let utxo = self.ledger.utxo(active).expect("active branch");
        let mut balances = Vec::new();
        for cfg in self.config.issuers.iter().map(|i| &i.name).chain(self.config.users.iter().chain(&self.config.providers).map(|a| &a.name)) {
            let actor = &self.actors[cfg];
            let script = actor.script();
            let satoshi = utxo.values().filter(|o| o.script == script).map(|o| o.value).sum();
            balances.push(Balance { name: cfg.clone(), address: actor.address, satoshi });
        }
        let identities = self
            .identities
            .iter()
            .map(|(label, id)| {
                let publish = id.credential.record.publish_txid;
                IdentityEntry {
                    label: label.clone(),
                    publish,
                    status: identity_status(&FullLedger(&self.ledger), publish).ok().flatten(),
                }
            })
            .collect();
        let branches = (0..self.ledger.branch_count())
            .map(|b| BranchEntry {
                branch: b,
                height: self.ledger.height_of(b).expect("branch exists"),
                tip: self.ledger.tip_hash(b).expect("branch exists"),
            })
            .collect();
        FinalState {
            active_branch: active,
            height: self.ledger.height(),
            branches,
            mempool: self.ledger.mempool().len(),
            balances,
            identities,
        }
    }
}

/// Scripts of the outputs `tx` spends, looked up on any branch.
pub fn spent_scripts(ledger: &Ledger, tx: &Transaction) -> Option<Vec<Script>> {
    tx.inputs
        .iter()
        .map(|i| ledger.any_transaction(&i.outpoint.txid)?.outputs.get(i.outpoint.vout as usize).map(|o| o.script.clone()))
        .collect()
}

/// Role of a transaction in the identity lifecycle, the cost template it
/// corresponds to, and its token-spend classification.
pub fn describe_tx(ledger: &Ledger, tx: &Transaction) -> (&'static str, Option<Template>, Option<SpendKind>) {
    let spent = spent_scripts(ledger, tx).unwrap_or_default();
    if spent.iter().any(|s| matches!(s, Script::Multisig1of2 { .. })) {
        let kind = classify_spend(tx, &spent);
        return match kind {
            SpendKind::Request => ("request", Some(Template::Request), Some(kind)),
            SpendKind::RequestDouble => ("request_double", Some(Template::RequestDouble), Some(kind)),
            SpendKind::Revoke => ("revoke", Some(Template::Revoke), Some(kind)),
        };
    }
    if tx.is_coinbase() {
        return ("genesis", None, None);
    }
    if tx.data_carrier().is_some() {
        return if parse_publish(tx).is_some() {
            ("publish", Some(Template::Publish), None)
        } else {
            ("generator_publication", None, None)
        };
    }
    let parent_tag = tx.inputs.first().filter(|i| i.outpoint.vout == 0).and_then(|i| {
        let parent = ledger.any_transaction(&i.outpoint.txid)?;
        parent.data_carrier().and_then(|(_, p)| p.first().copied())
    });
    match parent_tag {
        Some(REQUEST_TAG) => ("accept", Some(Template::Accept), None),
        Some(REQUEST_DOUBLE_TAG) => ("accept_double", Some(Template::AcceptDouble), None),
        _ => ("transfer", None, None),
    }
}

fn field_ref(ids: &[String], spec: &str) -> FieldRef {
    let f = FieldSpec::parse(spec);
    let index = f.identity.as_ref().map_or(0, |name| ids.iter().position(|i| i == name).expect("validated field"));
    FieldRef::new(index, f.field)
}

fn disclosure_for(ids: &[String], reveal: &[String], link: &[[String; 2]]) -> Disclosure {
    Disclosure {
        reveal: reveal.iter().map(|r| field_ref(ids, r)).collect(),
        link: link.iter().map(|[a, b]| (field_ref(ids, a), field_ref(ids, b))).collect(),
    }
}
