mod common;

use chainid_core::economics::{calibrate_v, fee_of, identity_cost, Template};
use chainid_core::group::GroupScalar;
use chainid_core::ledger::{Address, OutPoint, Script, Transaction, TxInput, TxOutput};
use chainid_core::protocol::{
    accept, classify_spend, current_token, identity_status, lightweight_verify, read_generators, reputation_report,
    revoke, verify_request, ControlClaim, Demand, Disclosure, Enrollment, Explorer, ExplorerFaults, FieldRef,
    FullLedger, HeaderOnly, IssuerProfile, ProtocolError, Rejection, SpendKind, TokenState, Verdict,
};
use chainid_core::dlrep::GeneratorSet;
use chainid_core::protocol::{enroll, setup, Actor};
use common::{reveal_status, World};

const MEMBER: [&str; 3] = ["Ada", "member", "2017"];

fn rejection(v: &Verdict) -> &'static str {
    v.rejection().map_or("accept", Rejection::name)
}

#[test]
fn setup_chunks_and_reads_back() {
    let w = World::new(1);
    let issuer = &w.issuers[0];
    let bytes = issuer.generators.to_publication().unwrap();
    assert_eq!(issuer.publication.len(), bytes.len().div_ceil(80));
    let read = read_generators(&FullLedger(&w.ledger), issuer.actor.address, &issuer.publication).unwrap();
    assert_eq!(read, issuer.generators);
    let light = HeaderOnly::synced(&w.ledger);
    assert_eq!(read_generators(&light, issuer.actor.address, &issuer.publication).unwrap(), issuer.generators);
    let stranger = Address([3; 20]);
    assert!(read_generators(&FullLedger(&w.ledger), stranger, &issuer.publication).is_err());
}

#[test]
fn bare_generator_set_needs_one_transaction() {
    let mut w = World::new(0);
    let actor = Actor::from_seed("solo", b"solo");
    let funding = w.users[0].clone();
    chainid_core::protocol::wallet_spend(&mut w.ledger, &funding, vec![TxOutput::new(1_000_000, actor.script())], &w.model)
        .unwrap();
    let no_fields: [&str; 0] = [];
    let mut profile = IssuerProfile::new(actor, GeneratorSet::derive("solo", &no_fields).unwrap());
    assert_eq!(setup(&mut w.ledger, &mut profile, &w.model).unwrap().len(), 1);
}

#[test]
fn enrollment_amounts_for_one_use() {
    let mut w = World::new(1);
    let cred = w.enroll(0, 0, MEMBER, 1, 0);
    assert_eq!(cred.record.value, 190_092);
    let publish = w.ledger.transaction(&cred.record.publish_txid).unwrap().tx.clone();
    assert_eq!(publish.inputs.len(), 1);
    let funding = w.ledger.transaction(&publish.inputs[0].outpoint.txid).unwrap().tx;
    let input_value = funding.outputs[publish.inputs[0].outpoint.vout as usize].value;
    assert_eq!(input_value, 286_758);
    assert_eq!(input_value, identity_cost(1, w.ledger.schedule(), &w.model).unwrap().satoshi);
    let values: Vec<u64> = publish.outputs.iter().map(|o| o.value).collect();
    assert_eq!(values, vec![546, 190_092, 0]);
    assert_eq!(publish.outputs[1].script, Script::multisig(w.users[0].address, w.issuers[0].actor.address));
}

#[test]
fn malformed_blinded_element_is_refused() {
    let mut w = World::new(1);
    let attrs = [chainid_core::Scalar::from_u64(1)];
    for blinded in [vec![0u8; 33], vec![2u8; 12], vec![0xffu8; 33]] {
        let result = enroll(
            &mut w.ledger,
            &w.issuers[0],
            &Enrollment { user: w.users[0].address, blinded: &blinded, attributes: &attrs, uses: 1, margin: 0 },
            &w.model,
        );
        assert!(matches!(result, Err(ProtocolError::InvalidBlindedElement)));
    }
}

#[test]
fn single_use_identity_lifecycle() {
    let mut w = World::new(1);
    let mut cred = w.enroll(0, 0, MEMBER, 1, 0);
    let receipt = w.request(0, &mut cred, &reveal_status()).unwrap();
    w.mine();
    assert_eq!(cred.token_value, 546);

    let tx = w.ledger.transaction(&receipt.txid).unwrap().tx.clone();
    let values: Vec<u64> = tx.outputs.iter().map(|o| o.value).collect();
    let f_accept = fee_of(Template::Accept, w.ledger.schedule(), &w.model).unwrap();
    assert_eq!(values, vec![f_accept + 546, 546, 0]);
    assert_eq!(classify_spend(&tx, &[cred.record.token_script.clone()]), SpendKind::Request);

    let verifier = w.verifier().demand(Demand { reveal: vec![(FieldRef::new(0, "status"), "member".into())], link: vec![] });
    let verdict = verify_request(&verifier, receipt.txid, &FullLedger(&w.ledger), &w.store);
    match &verdict {
        Verdict::Accept { chains, .. } => assert_eq!(chains[0].uses, 1),
        other => panic!("expected accept, got {other:?}"),
    }

    let second = w.request(0, &mut cred, &reveal_status());
    assert!(matches!(second, Err(ProtocolError::UseLimitExceeded { .. })));

    let before = w.ledger.balance(w.issuers[0].actor.address);
    let sp = w.sp.clone();
    accept(&mut w.ledger, &sp, receipt.txid).unwrap();
    assert!(matches!(accept(&mut w.ledger, &sp, receipt.txid), Err(ProtocolError::OutputSpent(_))));
    w.mine();
    assert_eq!(w.ledger.balance(w.issuers[0].actor.address), before + 546);
}

#[test]
fn demand_for_a_different_value_is_refused() {
    let mut w = World::new(1);
    let mut cred = w.enroll(0, 0, MEMBER, 2, 0);
    let receipt = w.request(0, &mut cred, &reveal_status()).unwrap();
    w.mine();
    let wants_guest = w.verifier().demand(Demand { reveal: vec![(FieldRef::new(0, "status"), "guest".into())], link: vec![] });
    let v = verify_request(&wants_guest, receipt.txid, &FullLedger(&w.ledger), &w.store);
    assert_eq!(rejection(&v), "statement_mismatch");
    let wants_name = w.verifier().demand(Demand { reveal: vec![(FieldRef::new(0, "name"), "Ada".into())], link: vec![] });
    let v = verify_request(&wants_name, receipt.txid, &FullLedger(&w.ledger), &w.store);
    assert_eq!(rejection(&v), "statement_mismatch");
}

#[test]
fn three_uses_then_refused() {
    let mut w = World::new(1);
    let mut cred = w.enroll(0, 0, MEMBER, 3, 0);
    let verifier = w.verifier();
    let per_use = calibrate_v(1, w.ledger.schedule(), &w.model).unwrap() - 546;
    for k in 1..=3u64 {
        let r = w.request(0, &mut cred, &reveal_status()).unwrap();
        w.mine();
        let v = verify_request(&verifier, r.txid, &FullLedger(&w.ledger), &w.store);
        assert!(v.is_accept(), "round {k}: {v:?}");
        assert_eq!(cred.token_value, cred.record.value - k * per_use);
    }
    assert_eq!(cred.token_value, 546);
    assert!(matches!(w.request(0, &mut cred, &reveal_status()), Err(ProtocolError::UseLimitExceeded { .. })));
}

#[test]
fn overfunded_token_is_stopped_by_the_count() {
    let mut w = World::new(1);
    let mut cred = w.enroll(0, 0, MEMBER, 1, 1_000_000);
    let verifier = w.verifier();
    let first = w.request(0, &mut cred, &reveal_status()).unwrap();
    w.mine();
    assert!(verify_request(&verifier, first.txid, &FullLedger(&w.ledger), &w.store).is_accept());
    let second = w.request(0, &mut cred, &reveal_status()).unwrap();
    w.mine();
    let v = verify_request(&verifier, second.txid, &FullLedger(&w.ledger), &w.store);
    assert_eq!(v, Verdict::Reject(Rejection::UseLimitExceeded { uses: 2, limit: 1 }));
    // An earlier request whose token was spent again no longer verifies.
    let v = verify_request(&verifier, first.txid, &FullLedger(&w.ledger), &w.store);
    assert_eq!(rejection(&v), "superseded");
}

#[test]
fn revocations_by_either_party() {
    for revoker in ["user", "issuer"] {
        let mut w = World::new(1);
        let mut cred = w.enroll(0, 0, MEMBER, 3, 0);
        let verifier = w.verifier();
        let r = w.request(0, &mut cred, &reveal_status()).unwrap();
        w.mine();
        assert!(verify_request(&verifier, r.txid, &FullLedger(&w.ledger), &w.store).is_accept());

        let actor = if revoker == "user" { w.users[0].clone() } else { w.issuers[0].actor.clone() };
        let dest = actor.address;
        let revoke_txid = revoke(&mut w.ledger, &actor, &cred.record, dest, &w.model).unwrap();
        w.mine();
        let expected_signer = if revoker == "user" { 0 } else { 1 };
        let v = verify_request(&verifier, r.txid, &FullLedger(&w.ledger), &w.store);
        assert_eq!(v, Verdict::Reject(Rejection::Revoked { spender: revoke_txid, signer: expected_signer }));

        let status = identity_status(&FullLedger(&w.ledger), cred.record.publish_txid).unwrap().unwrap();
        assert_eq!(status.state, TokenState::Revoked { txid: revoke_txid, signer: expected_signer });
        assert!(matches!(w.request(0, &mut cred, &reveal_status()), Err(ProtocolError::TokenSpent { .. })));
        assert!(matches!(
            revoke(&mut w.ledger, &actor, &cred.record, dest, &w.model),
            Err(ProtocolError::TokenSpent { .. })
        ));
        let tx = w.ledger.transaction(&revoke_txid).unwrap().tx.clone();
        assert_eq!(classify_spend(&tx, &[cred.record.token_script.clone()]), SpendKind::Revoke);
    }
}

#[test]
fn spending_the_token_anywhere_else_revokes() {
    let mut w = World::new(1);
    let mut cred = w.enroll(0, 0, MEMBER, 2, 0);
    let r = w.request(0, &mut cred, &reveal_status()).unwrap();
    w.mine();
    let stranger = Address([0x42; 20]);
    let mut tx = Transaction::new(vec![TxInput::unsigned(cred.token)], vec![TxOutput::new(100_000, Script::pay_to(stranger))]);
    tx.sign_input(0, &w.users[0].key, 0);
    let txid = w.ledger.submit(tx).unwrap();
    w.mine();
    let v = verify_request(&w.verifier(), r.txid, &FullLedger(&w.ledger), &w.store);
    assert_eq!(v, Verdict::Reject(Rejection::Revoked { spender: txid, signer: 0 }));
    assert_eq!(current_token(&w.ledger, &cred.record), None);
}

#[test]
fn untrusted_issuer_and_store_faults() {
    let mut w = World::new(2);
    let mut cred = w.enroll(1, 0, MEMBER, 2, 0);
    let r = w.request(0, &mut cred, &reveal_status()).unwrap();
    w.mine();
    let only_first = chainid_core::protocol::Verifier::new().trust(w.issuers[0].actor.address, w.issuers[0].generators.clone());
    let v = verify_request(&only_first, r.txid, &FullLedger(&w.ledger), &w.store);
    assert_eq!(rejection(&v), "unknown_issuer");

    let verifier = w.verifier();
    let hash = r.proof.hash;
    let good = w.store.get(&hash).unwrap();
    let mut bad = good.clone();
    bad[10] ^= 1;
    w.store.write_raw(&hash, &bad).unwrap();
    assert_eq!(rejection(&verify_request(&verifier, r.txid, &FullLedger(&w.ledger), &w.store)), "hash_mismatch");
    w.store.remove(&hash).unwrap();
    assert_eq!(rejection(&verify_request(&verifier, r.txid, &FullLedger(&w.ledger), &w.store)), "proof_missing");
    w.store.write_raw(&hash, &good).unwrap();
    assert!(verify_request(&verifier, r.txid, &FullLedger(&w.ledger), &w.store).is_accept());
}

#[test]
fn proofs_are_bound_to_their_request() {
    let mut w = World::new(1);
    let mut a = w.enroll(0, 0, MEMBER, 2, 0);
    let first = w.request(0, &mut a, &reveal_status()).unwrap();
    w.mine();
    // Craft a second request that points at the first request's proof.
    let token = a.token;
    let pay = fee_of(Template::Accept, w.ledger.schedule(), &w.model).unwrap() + 546;
    let remaining = a.token_value - pay - fee_of(Template::Request, w.ledger.schedule(), &w.model).unwrap();
    let mut tx = Transaction::new(
        vec![TxInput::unsigned(token)],
        vec![
            TxOutput::new(pay, w.sp.script()),
            TxOutput::new(remaining, a.record.token_script.clone()),
            TxOutput::new(0, Script::data(first.proof.encode(b'R'))),
        ],
    );
    tx.sign_input(0, &w.users[0].key, 0);
    let replay = w.ledger.submit(tx).unwrap();
    w.mine();
    let v = verify_request(&w.verifier(), replay, &FullLedger(&w.ledger), &w.store);
    assert_eq!(v, Verdict::Reject(Rejection::ContextMismatch));
}

#[test]
fn unconfirmed_or_foreign_transactions_are_not_requests() {
    let mut w = World::new(1);
    let mut cred = w.enroll(0, 0, MEMBER, 2, 0);
    let r = w.request(0, &mut cred, &reveal_status()).unwrap();
    let verifier = w.verifier();
    assert_eq!(rejection(&verify_request(&verifier, r.txid, &FullLedger(&w.ledger), &w.store)), "request_not_found");
    w.mine();
    let publish = cred.record.publish_txid;
    assert_eq!(rejection(&verify_request(&verifier, publish, &FullLedger(&w.ledger), &w.store)), "not_a_request");
}

#[test]
fn explorer_trust_is_visible_under_faults() {
    let mut w = World::new(1);
    let mut cred = w.enroll(0, 0, MEMBER, 2, 0);
    let r = w.request(0, &mut cred, &reveal_status()).unwrap();
    w.mine();
    let user = w.users[0].clone();
    revoke(&mut w.ledger, &user, &cred.record, user.address, &w.model).unwrap();
    w.mine();
    let verifier = w.verifier();
    let honest = Explorer::new(&w.ledger);
    assert_eq!(rejection(&verify_request(&verifier, r.txid, &honest, &w.store)), "revoked");
    let lying = Explorer::with_faults(&w.ledger, ExplorerFaults { hide_spends: true, offline: false });
    assert!(verify_request(&verifier, r.txid, &lying, &w.store).is_accept());
    let offline = Explorer::with_faults(&w.ledger, ExplorerFaults { hide_spends: false, offline: true });
    assert_eq!(rejection(&verify_request(&verifier, r.txid, &offline, &w.store)), "source_error");
}

#[test]
fn double_request_with_linked_name() {
    let mut w = World::new(2);
    let mut gov = w.enroll(0, 0, ["Ada", "citizen", "1990"], 2, 0);
    let mut uni = w.enroll(1, 1, ["Ada", "student", "2017"], 2, 0);
    let disclosure = Disclosure {
        reveal: vec![FieldRef::new(1, "status")],
        link: vec![(FieldRef::new(0, "name"), FieldRef::new(1, "name"))],
    };
    let (u0, u1) = (w.users[0].clone(), w.users[1].clone());
    let (v_gov, v_uni) = (gov.token_value, uni.token_value);
    let receipt = chainid_core::protocol::build_request_double(
        &mut w.ledger,
        [(&u0, &mut gov), (&u1, &mut uni)],
        w.sp.address,
        &disclosure,
        &mut w.store,
        &mut w.rng,
        &w.model,
    )
    .unwrap();
    w.mine();
    let per_use = calibrate_v(1, w.ledger.schedule(), &w.model).unwrap() - 546;
    assert_eq!(gov.token_value, v_gov - per_use);
    assert_eq!(uni.token_value, v_uni - per_use);

    let demand = Demand {
        reveal: vec![(FieldRef::new(1, "status"), "student".into())],
        link: vec![(FieldRef::new(0, "name"), FieldRef::new(1, "name"))],
    };
    let verifier = w.verifier().demand(demand);
    for source in [&FullLedger(&w.ledger) as &dyn chainid_core::protocol::ChainSource, &HeaderOnly::synced(&w.ledger)] {
        match verify_request(&verifier, receipt.txid, source, &w.store) {
            Verdict::Accept { kind, chains, .. } => {
                assert_eq!(kind, SpendKind::RequestDouble);
                assert_eq!(chains.len(), 2);
                assert!(chains.iter().all(|c| c.uses == 1));
            }
            other => panic!("{other:?}"),
        }
    }

    let (b0, b1) = (w.ledger.balance(w.issuers[0].actor.address), w.ledger.balance(w.issuers[1].actor.address));
    let sp = w.sp.clone();
    chainid_core::protocol::accept_double(&mut w.ledger, &sp, receipt.txid).unwrap();
    assert!(chainid_core::protocol::accept_double(&mut w.ledger, &sp, receipt.txid).is_err());
    w.mine();
    assert_eq!(w.ledger.balance(w.issuers[0].actor.address), b0 + 546);
    assert_eq!(w.ledger.balance(w.issuers[1].actor.address), b1 + 546);
    for cred in [&gov, &uni] {
        let status = identity_status(&FullLedger(&w.ledger), cred.record.publish_txid).unwrap().unwrap();
        assert_eq!(status.uses, 1);
    }
}

#[test]
fn double_request_with_unequal_linked_values_is_refused() {
    let mut w = World::new(2);
    let mut gov = w.enroll(0, 0, ["Ada", "citizen", "1990"], 2, 0);
    let mut uni = w.enroll(1, 1, ["Grace", "student", "2017"], 2, 0);
    let disclosure = Disclosure { reveal: vec![], link: vec![(FieldRef::new(0, "name"), FieldRef::new(1, "name"))] };
    let (u0, u1) = (w.users[0].clone(), w.users[1].clone());
    let result = chainid_core::protocol::build_request_double(
        &mut w.ledger,
        [(&u0, &mut gov), (&u1, &mut uni)],
        w.sp.address,
        &disclosure,
        &mut w.store,
        &mut w.rng,
        &w.model,
    );
    assert!(matches!(result, Err(ProtocolError::Dlrep(_))));
    assert!(w.ledger.mempool().is_empty());
}

#[test]
fn reputation_and_lightweight_checks() {
    let mut w = World::new(1);
    let fresh = reputation_report(Address([9; 20]), &FullLedger(&w.ledger)).unwrap();
    assert!(fresh.is_empty());
    let mut cred = w.enroll(0, 0, MEMBER, 3, 0);
    let sp = w.sp.clone();
    let mut requests = Vec::new();
    for i in 0..3 {
        let r = w.request(0, &mut cred, &reveal_status()).unwrap();
        if i < 2 {
            accept(&mut w.ledger, &sp, r.txid).unwrap();
        }
        w.mine();
        requests.push(r.txid);
    }
    let rows = reputation_report(w.users[0].address, &FullLedger(&w.ledger)).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().filter(|r| r.accept.is_some()).count(), 2);
    assert!(rows.iter().all(|r| r.sp == sp.address && r.issuer == w.issuers[0].actor.address));
    assert_eq!(rows, reputation_report(w.users[0].address, &HeaderOnly::synced(&w.ledger)).unwrap());

    let source = FullLedger(&w.ledger);
    let claim = ControlClaim::sign(&w.users[0].key, b"nonce-1", vec![requests[0]]);
    let verdict = lightweight_verify(b"nonce-1", std::slice::from_ref(&claim), &source);
    assert!(verdict.accepted && !verdict.weak_linkage);
    assert!(!lightweight_verify(b"nonce-2", &[claim], &source).accepted);
    let unaccepted = ControlClaim::sign(&w.users[0].key, b"n", vec![requests[2]]);
    assert!(!lightweight_verify(b"n", &[unaccepted], &source).accepted);
    let imposter = ControlClaim::sign(&w.users[1].key, b"n", vec![requests[0]]);
    assert!(!lightweight_verify(b"n", &[imposter], &source).accepted);
    let unknown = ControlClaim::sign(&w.users[0].key, b"n", vec![chainid_core::hash::Hash32::of(b"nothing")]);
    assert!(!lightweight_verify(b"n", &[unknown], &source).accepted);
}

#[test]
fn two_addresses_show_weak_linkage() {
    let mut w = World::new(1);
    let mut a = w.enroll(0, 0, MEMBER, 1, 0);
    let mut b = w.enroll(0, 1, MEMBER, 1, 0);
    let sp = w.sp.clone();
    let ra = w.request(0, &mut a, &reveal_status()).unwrap();
    let rb = w.request(1, &mut b, &reveal_status()).unwrap();
    accept(&mut w.ledger, &sp, ra.txid).unwrap();
    accept(&mut w.ledger, &sp, rb.txid).unwrap();
    w.mine();
    let claims = [
        ControlClaim::sign(&w.users[0].key, b"c", vec![ra.txid]),
        ControlClaim::sign(&w.users[1].key, b"c", vec![rb.txid]),
    ];
    let verdict = lightweight_verify(b"c", &claims, &FullLedger(&w.ledger));
    assert!(verdict.accepted);
    assert!(verdict.weak_linkage);
    assert_eq!(verdict.addresses.len(), 2);
}

#[test]
fn fork_gives_branch_specific_outcomes() {
    let mut w = World::new(1);
    let mut cred = w.enroll(0, 0, MEMBER, 3, 0);
    let verifier = w.verifier();
    let fork_height = w.ledger.height();
    let token = cred.token;

    // Branch A (active): the token is spent in an authentication.
    let r = w.request(0, &mut cred, &reveal_status()).unwrap();
    w.mine();
    assert!(verify_request(&verifier, r.txid, &FullLedger(&w.ledger), &w.store).is_accept());

    // Branch B: the same token is revoked by the issuer.
    let fork = w.ledger.fork(fork_height).unwrap();
    let issuer = w.issuers[0].actor.clone();
    let mut tx = Transaction::new(vec![TxInput::unsigned(token)], vec![TxOutput::new(100_000, issuer.script())]);
    tx.sign_input(0, &issuer.key, 1);
    let revoke_txid = w.ledger.submit_to(fork, tx).unwrap();
    w.ledger.mine_on(fork).unwrap();
    w.ledger.mine_on(fork).unwrap();
    assert_eq!(w.ledger.find_spender_on(fork, &token).unwrap().unwrap().txid, revoke_txid);
    assert_eq!(w.ledger.find_spender_on(0, &token).unwrap().unwrap().txid, r.txid);

    assert_eq!(w.ledger.reorg(), Some((0, fork)));
    let v = verify_request(&verifier, r.txid, &FullLedger(&w.ledger), &w.store);
    assert_eq!(rejection(&v), "request_not_found");
    let status = identity_status(&FullLedger(&w.ledger), cred.record.publish_txid).unwrap().unwrap();
    assert_eq!(status.state, TokenState::Revoked { txid: revoke_txid, signer: 1 });
    assert_eq!(status.token, OutPoint::new(cred.record.publish_txid, 1));
}

#[test]
fn header_only_matches_full_ledger_on_mixed_history() {
    let mut w = World::new(2);
    let mut a = w.enroll(0, 0, MEMBER, 2, 0);
    let mut b = w.enroll(1, 1, MEMBER, 1, 0);
    let verifier = w.verifier();
    let mut requests = Vec::new();
    requests.push(w.request(0, &mut a, &reveal_status()).unwrap().txid);
    requests.push(w.request(1, &mut b, &reveal_status()).unwrap().txid);
    w.mine();
    requests.push(w.request(0, &mut a, &reveal_status()).unwrap().txid);
    w.mine();
    let issuer = w.issuers[1].actor.clone();
    revoke(&mut w.ledger, &issuer, &b.record, issuer.address, &w.model).unwrap();
    w.mine();
    requests.push(a.record.publish_txid);
    requests.push(chainid_core::hash::Hash32::of(b"absent"));
    let full = FullLedger(&w.ledger);
    let light = HeaderOnly::synced(&w.ledger);
    for txid in requests {
        assert_eq!(
            verify_request(&verifier, txid, &full, &w.store),
            verify_request(&verifier, txid, &light, &w.store),
        );
    }
}
