//! Schnorr signatures over any [`PrimeGroup`], used to authorize spends.
//!
//! Nonces are derived from the secret key and message, so signing is
//! deterministic.

use crate::group::{GroupScalar, PrimeGroup};

const KEY_DOMAIN: &[u8] = b"chainid/schnorr/key/v1";
const NONCE_DOMAIN: &[u8] = b"chainid/schnorr/nonce/v1";
const CHALLENGE_DOMAIN: &[u8] = b"chainid/schnorr/challenge/v1";

#[derive(Clone, Debug)]
pub struct SigningKey<G: PrimeGroup> {
    secret: G::Scalar,
    public: G::Element,
}

impl<G: PrimeGroup> SigningKey<G> {
    pub fn from_secret(secret: G::Scalar) -> Self {
        let public = G::pow(&G::generator(), &secret);
        SigningKey { secret, public }
    }

    /// Key derived from a seed string; the same seed always yields the same key.
    pub fn from_seed(seed: &[u8]) -> Self {
        let mut counter = 0u32;
        loop {
            let s = G::hash_to_scalar(&[KEY_DOMAIN, seed, &counter.to_be_bytes()]);
            if s != G::Scalar::from_u64(0) {
                return Self::from_secret(s);
            }
            counter += 1;
        }
    }

    pub fn public(&self) -> &G::Element {
        &self.public
    }

    pub fn public_bytes(&self) -> Vec<u8> {
        G::encode(&self.public)
    }

    pub fn sign(&self, message: &[u8]) -> Signature<G> {
        let k = G::hash_to_scalar(&[NONCE_DOMAIN, &self.secret.to_bytes(), message]);
        let r = G::pow(&G::generator(), &k);
        let e = challenge::<G>(&self.public, &r, message);
        Signature { challenge: e, response: k + e * self.secret }
    }
}

fn challenge<G: PrimeGroup>(public: &G::Element, r: &G::Element, message: &[u8]) -> G::Scalar {
    G::hash_to_scalar(&[CHALLENGE_DOMAIN, G::NAME.as_bytes(), &G::encode(public), &G::encode(r), message])
}

/// `(e, s)` with `e = H(P, g^s P^{-e}, m)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Signature<G: PrimeGroup> {
    challenge: G::Scalar,
    response: G::Scalar,
}

impl<G: PrimeGroup> Signature<G> {
    pub fn verify(&self, public: &G::Element, message: &[u8]) -> bool {
        if G::is_identity(public) {
            return false;
        }
        let r = G::op(&G::pow(&G::generator(), &self.response), &G::pow_neg(public, &self.challenge));
        challenge::<G>(public, &r, message) == self.challenge
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.challenge.to_bytes();
        out.extend(self.response.to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        let w = G::Scalar::BYTES;
        if bytes.len() != 2 * w {
            return None;
        }
        Some(Signature {
            challenge: G::Scalar::from_bytes(&bytes[..w])?,
            response: G::Scalar::from_bytes(&bytes[w..])?,
        })
    }
}

/// Decodes a public key and signature and checks them against `message`.
pub fn verify_encoded<G: PrimeGroup>(public: &[u8], signature: &[u8], message: &[u8]) -> bool {
    match (G::decode(public), Signature::<G>::from_bytes(signature)) {
        (Some(p), Some(s)) => s.verify(&p, message),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Secp256k1;

    #[test]
    fn sign_verify_roundtrip() {
        let key = SigningKey::<Secp256k1>::from_seed(b"alice");
        let sig = key.sign(b"hello");
        assert!(sig.verify(key.public(), b"hello"));
        assert!(!sig.verify(key.public(), b"hellp"));
        let other = SigningKey::<Secp256k1>::from_seed(b"bob");
        assert!(!sig.verify(other.public(), b"hello"));
        assert_eq!(sig, key.sign(b"hello"));
        let bytes = sig.to_bytes();
        assert_eq!(bytes.len(), 64);
        assert!(verify_encoded::<Secp256k1>(&key.public_bytes(), &bytes, b"hello"));
        assert!(!verify_encoded::<Secp256k1>(&key.public_bytes(), &bytes[1..], b"hello"));
    }

    #[test]
    fn identity_public_key_never_verifies() {
        let key = SigningKey::<Secp256k1>::from_seed(b"x");
        let sig = key.sign(b"m");
        assert!(!sig.verify(&Secp256k1::identity(), b"m"));
    }
}
