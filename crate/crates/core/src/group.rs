//! Prime-order groups used for commitments and signatures.
//!
//! Everything above this module is written against [`PrimeGroup`], so the
//! same commitment, proof and signature code runs over secp256k1 and over a
//! tiny subgroup of the integers mod 23 that is small enough to enumerate.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use k256::elliptic_curve::group::Group as _;
use k256::elliptic_curve::ops::Reduce;
use k256::elliptic_curve::sec1::{FromEncodedPoint, ToEncodedPoint};
use k256::elliptic_curve::PrimeField;
use k256::{AffinePoint, EncodedPoint, ProjectivePoint, U256};
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};

use crate::hash::sha256;

/// Scalars of a prime-order group, i.e. integers mod q.
pub trait GroupScalar:
    Copy
    + Eq
    + Debug
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    /// Width of the canonical big-endian encoding.
    const BYTES: usize;

    fn from_u64(value: u64) -> Self;

    /// Interprets a 32-byte digest as a big-endian integer and reduces it mod q.
    fn from_digest(digest: &[u8; 32]) -> Self;

    fn random<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Self;

    fn to_bytes(&self) -> Vec<u8>;

    /// Accepts only canonical (fully reduced, exact width) encodings.
    fn from_bytes(bytes: &[u8]) -> Option<Self>;
}

/// A cyclic group of prime order q, written multiplicatively.
pub trait PrimeGroup: Clone + Copy + Debug + Default + PartialEq + Eq + Send + Sync + 'static {
    type Scalar: GroupScalar;
    type Element: Clone + Eq + Debug + Send + Sync;

    /// Stable identifier, mixed into every hash preimage.
    const NAME: &'static str;
    /// Width of the canonical element encoding.
    const ELEMENT_BYTES: usize;

    fn identity() -> Self::Element;
    fn generator() -> Self::Element;
    fn op(a: &Self::Element, b: &Self::Element) -> Self::Element;
    fn pow(base: &Self::Element, exponent: &Self::Scalar) -> Self::Element;
    fn inverse(a: &Self::Element) -> Self::Element;
    fn encode(element: &Self::Element) -> Vec<u8>;
    fn decode(bytes: &[u8]) -> Option<Self::Element>;

    /// Deterministically maps a message to a non-identity element whose
    /// discrete log relative to the other generators is unknown.
    fn hash_to_element(domain: &[u8], message: &[u8]) -> Self::Element;

    fn is_identity(element: &Self::Element) -> bool {
        *element == Self::identity()
    }

    /// `base^exponent` followed by inversion, i.e. `base^{-exponent}`.
    fn pow_neg(base: &Self::Element, exponent: &Self::Scalar) -> Self::Element {
        Self::pow(base, &-*exponent)
    }

    fn hash_to_scalar(parts: &[&[u8]]) -> Self::Scalar {
        let digest = sha256_parts(parts);
        Self::Scalar::from_digest(&digest)
    }
}

fn sha256_parts(parts: &[&[u8]]) -> [u8; 32] {
    let mut buf = Vec::with_capacity(parts.iter().map(|p| p.len() + 4).sum());
    for part in parts {
        buf.extend_from_slice(&(part.len() as u32).to_be_bytes());
        buf.extend_from_slice(part);
    }
    sha256(&buf)
}

// ---------------------------------------------------------------------------
// Toy group: the order-11 subgroup of (Z/23Z)*, i.e. the quadratic residues.

pub const TOY_MODULUS: u64 = 23;
pub const TOY_ORDER: u64 = 11;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ToyScalar(u8);

impl ToyScalar {
    pub fn new(value: u64) -> Self {
        ToyScalar((value % TOY_ORDER) as u8)
    }

    pub fn value(self) -> u64 {
        self.0 as u64
    }
}

impl Zero for ToyScalar {
    fn zero() -> Self {
        ToyScalar(0)
    }
    fn is_zero(&self) -> bool {
        self.0 == 0
    }
}

impl One for ToyScalar {
    fn one() -> Self {
        ToyScalar(1)
    }
}

impl Add for ToyScalar {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        ToyScalar::new(self.value() + rhs.value())
    }
}

impl Sub for ToyScalar {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        ToyScalar::new(self.value() + TOY_ORDER - rhs.value())
    }
}

impl Mul for ToyScalar {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        ToyScalar::new(self.value() * rhs.value())
    }
}

impl Neg for ToyScalar {
    type Output = Self;
    fn neg(self) -> Self {
        ToyScalar::new(TOY_ORDER - self.value())
    }
}

impl GroupScalar for ToyScalar {
    const BYTES: usize = 1;

    fn from_u64(value: u64) -> Self {
        ToyScalar::new(value)
    }

    fn from_digest(digest: &[u8; 32]) -> Self {
        let r = digest
            .iter()
            .fold(0u64, |acc, &b| (acc * 256 + b as u64) % TOY_ORDER);
        ToyScalar(r as u8)
    }

    fn random<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Self {
        // Rejection sampling keeps the distribution uniform.
        loop {
            let b = (rng.next_u32() & 0x0f) as u64;
            if b < TOY_ORDER {
                return ToyScalar(b as u8);
            }
        }
    }

    fn to_bytes(&self) -> Vec<u8> {
        vec![self.0]
    }

    fn from_bytes(bytes: &[u8]) -> Option<Self> {
        match bytes {
            [b] if (*b as u64) < TOY_ORDER => Some(ToyScalar(*b)),
            _ => None,
        }
    }
}

/// Element of the toy group, stored as its residue mod 23.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ToyElement(u8);

impl ToyElement {
    /// Returns `None` unless `value` lies in the order-11 subgroup.
    pub fn new(value: u64) -> Option<Self> {
        let v = value % TOY_MODULUS;
        if v != 0 && modpow(v, TOY_ORDER, TOY_MODULUS) == 1 {
            Some(ToyElement(v as u8))
        } else {
            None
        }
    }

    pub fn value(self) -> u64 {
        self.0 as u64
    }
}

fn modpow(mut base: u64, mut exp: u64, modulus: u64) -> u64 {
    let mut acc = 1 % modulus;
    base %= modulus;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % modulus;
        }
        base = base * base % modulus;
        exp >>= 1;
    }
    acc
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ToyGroup;

impl PrimeGroup for ToyGroup {
    type Scalar = ToyScalar;
    type Element = ToyElement;

    const NAME: &'static str = "toy-z23-q11";
    const ELEMENT_BYTES: usize = 1;

    fn identity() -> ToyElement {
        ToyElement(1)
    }

    fn generator() -> ToyElement {
        ToyElement(2)
    }

    fn op(a: &ToyElement, b: &ToyElement) -> ToyElement {
        ToyElement((a.value() * b.value() % TOY_MODULUS) as u8)
    }

    fn pow(base: &ToyElement, exponent: &ToyScalar) -> ToyElement {
        ToyElement(modpow(base.value(), exponent.value(), TOY_MODULUS) as u8)
    }

    fn inverse(a: &ToyElement) -> ToyElement {
        ToyElement(modpow(a.value(), TOY_ORDER - 1, TOY_MODULUS) as u8)
    }

    fn encode(element: &ToyElement) -> Vec<u8> {
        vec![element.0]
    }

    fn decode(bytes: &[u8]) -> Option<ToyElement> {
        match bytes {
            [b] => ToyElement::new(*b as u64).filter(|e| e.0 == *b),
            _ => None,
        }
    }

    fn hash_to_element(domain: &[u8], message: &[u8]) -> ToyElement {
        let digest = sha256_parts(&[domain, message]);
        let exponent = 1 + digest.iter().fold(0u64, |acc, &b| (acc * 256 + b as u64) % (TOY_ORDER - 1));
        Self::pow(&Self::generator(), &ToyScalar::new(exponent))
    }
}

// ---------------------------------------------------------------------------
// secp256k1

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Secp256k1Scalar(pub k256::Scalar);

impl Zero for Secp256k1Scalar {
    fn zero() -> Self {
        Secp256k1Scalar(k256::Scalar::ZERO)
    }
    fn is_zero(&self) -> bool {
        bool::from(self.0.is_zero())
    }
}

impl One for Secp256k1Scalar {
    fn one() -> Self {
        Secp256k1Scalar(k256::Scalar::ONE)
    }
}

impl Add for Secp256k1Scalar {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Secp256k1Scalar(self.0 + rhs.0)
    }
}

impl Sub for Secp256k1Scalar {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Secp256k1Scalar(self.0 - rhs.0)
    }
}

impl Mul for Secp256k1Scalar {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Secp256k1Scalar(self.0 * rhs.0)
    }
}

impl Neg for Secp256k1Scalar {
    type Output = Self;
    fn neg(self) -> Self {
        Secp256k1Scalar(-self.0)
    }
}

impl GroupScalar for Secp256k1Scalar {
    const BYTES: usize = 32;

    fn from_u64(value: u64) -> Self {
        Secp256k1Scalar(k256::Scalar::from(value))
    }

    fn from_digest(digest: &[u8; 32]) -> Self {
        Secp256k1Scalar(<k256::Scalar as Reduce<U256>>::reduce_bytes(&(*digest).into()))
    }

    fn random<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Self {
        let mut wide = [0u8; 32];
        loop {
            rng.fill_bytes(&mut wide);
            if let Some(s) = Self::from_bytes(&wide) {
                return s;
            }
        }
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.0.to_bytes().to_vec()
    }

    fn from_bytes(bytes: &[u8]) -> Option<Self> {
        let arr: [u8; 32] = bytes.try_into().ok()?;
        Option::from(k256::Scalar::from_repr(arr.into())).map(Secp256k1Scalar)
    }
}

/// The curve Bitcoin signs with. Elements encode as 33-byte compressed
/// points; the identity encodes as 33 zero bytes so that every element has
/// the same width.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Secp256k1;

impl PrimeGroup for Secp256k1 {
    type Scalar = Secp256k1Scalar;
    type Element = ProjectivePoint;

    const NAME: &'static str = "secp256k1";
    const ELEMENT_BYTES: usize = 33;

    fn identity() -> ProjectivePoint {
        ProjectivePoint::IDENTITY
    }

    fn generator() -> ProjectivePoint {
        ProjectivePoint::GENERATOR
    }

    fn op(a: &ProjectivePoint, b: &ProjectivePoint) -> ProjectivePoint {
        a + b
    }

    fn pow(base: &ProjectivePoint, exponent: &Secp256k1Scalar) -> ProjectivePoint {
        base * &exponent.0
    }

    fn inverse(a: &ProjectivePoint) -> ProjectivePoint {
        -a
    }

    fn encode(element: &ProjectivePoint) -> Vec<u8> {
        if bool::from(element.is_identity()) {
            return vec![0u8; 33];
        }
        element.to_affine().to_encoded_point(true).as_bytes().to_vec()
    }

    fn decode(bytes: &[u8]) -> Option<ProjectivePoint> {
        if bytes.len() != 33 {
            return None;
        }
        if bytes.iter().all(|&b| b == 0) {
            return Some(ProjectivePoint::IDENTITY);
        }
        if bytes[0] != 0x02 && bytes[0] != 0x03 {
            return None;
        }
        let encoded = EncodedPoint::from_bytes(bytes).ok()?;
        Option::<AffinePoint>::from(AffinePoint::from_encoded_point(&encoded)).map(ProjectivePoint::from)
    }

    fn hash_to_element(domain: &[u8], message: &[u8]) -> ProjectivePoint {
        // Try-and-increment on the x coordinate.
        let mut counter = 0u32;
        loop {
            let x = sha256_parts(&[domain, message, &counter.to_be_bytes()]);
            let mut candidate = [0u8; 33];
            candidate[0] = 0x02;
            candidate[1..].copy_from_slice(&x);
            if let Some(point) = Self::decode(&candidate) {
                if !Self::is_identity(&point) {
                    return point;
                }
            }
            counter += 1;
        }
    }
}
