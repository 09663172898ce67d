#![allow(dead_code)]

use chainid_core::dlrep::{attribute_scalar, blind_contribution, AttributeVector, GeneratorSet};
use chainid_core::economics::{FeeSchedule, SizeModel};
use chainid_core::group::{GroupScalar, PrimeGroup, Secp256k1};
use chainid_core::ledger::{Genesis, Ledger, Txid};
use chainid_core::protocol::{
    enroll, setup, Actor, Credential, Disclosure, Enrollment, FieldRef, IssuerProfile, ProofStore, RequestReceipt,
    Verifier,
};
use chainid_core::Scalar;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub const FUNDS: u64 = 50_000_000;

pub struct World {
    pub ledger: Ledger,
    pub model: SizeModel,
    pub issuers: Vec<IssuerProfile>,
    pub users: Vec<Actor>,
    pub sp: Actor,
    pub store: ProofStore,
    pub rng: ChaCha20Rng,
}

/// Fields every test issuer certifies, besides the blinding slot.
pub const FIELDS: [&str; 3] = ["name", "status", "year"];

impl World {
    /// `issuers` issuers with generator sets published and mined, and two
    /// funded users.
    pub fn new(issuers: usize) -> Self {
        let issuer_actors: Vec<Actor> =
            (0..issuers).map(|i| Actor::from_seed(format!("issuer{i}"), format!("issuer-seed-{i}").as_bytes())).collect();
        let users: Vec<Actor> = (0..2).map(|i| Actor::from_seed(format!("user{i}"), format!("user-seed-{i}").as_bytes())).collect();
        let sp = Actor::from_seed("sp", b"sp-seed");
        let genesis = Genesis::new(
            issuer_actors.iter().chain(&users).chain([&sp]).map(|a| (a.address, FUNDS)),
        );
        let mut ledger = Ledger::new(FeeSchedule::standard(), &genesis);
        let model = SizeModel::standard();
        let mut profiles = Vec::new();
        for (i, actor) in issuer_actors.into_iter().enumerate() {
            let gens = GeneratorSet::derive(&format!("issuer-{i}"), &FIELDS).unwrap();
            let mut profile = IssuerProfile::new(actor, gens);
            setup(&mut ledger, &mut profile, &model).unwrap();
            profiles.push(profile);
        }
        ledger.mine();
        World {
            ledger,
            model,
            issuers: profiles,
            users,
            sp,
            store: ProofStore::in_memory(),
            rng: ChaCha20Rng::seed_from_u64(7),
        }
    }

    pub fn verifier(&self) -> Verifier {
        self.issuers.iter().fold(Verifier::new(), |v, p| v.trust(p.actor.address, p.generators.clone()))
    }

    /// Enrolls user `user` with issuer `issuer` and mines the publish.
    pub fn enroll(&mut self, issuer: usize, user: usize, values: [&str; 3], uses: u32, margin: u64) -> Credential {
        let profile = &self.issuers[issuer];
        let x0 = Scalar::random(&mut self.rng);
        let blinded = Secp256k1::encode(&blind_contribution(&x0, &profile.generators));
        let attrs: Vec<Scalar> = values.iter().map(|v| attribute_scalar::<Secp256k1>(v)).collect();
        let record = enroll(
            &mut self.ledger,
            profile,
            &Enrollment { user: self.users[user].address, blinded: &blinded, attributes: &attrs, uses, margin },
            &self.model,
        )
        .unwrap();
        self.ledger.mine();
        Credential::new(record, profile.generators.clone(), AttributeVector::new(x0, &attrs)).unwrap()
    }

    pub fn request(&mut self, user: usize, cred: &mut Credential, disclosure: &Disclosure) -> Result<RequestReceipt, chainid_core::protocol::ProtocolError> {
        let user = self.users[user].clone();
        chainid_core::protocol::build_request(
            &mut self.ledger,
            &user,
            cred,
            self.sp.address,
            disclosure,
            &mut self.store,
            &mut self.rng,
            &self.model,
        )
    }

    pub fn mine(&mut self) -> Vec<Txid> {
        self.ledger.mine().included
    }
}

pub fn reveal_status() -> Disclosure {
    Disclosure { reveal: vec![FieldRef::new(0, "status")], link: vec![] }
}
