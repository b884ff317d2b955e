//! BN254 (alt_bn128) G1 arithmetic, the fixed generator pair, canonical
//! encodings, and the masked SHA-256 challenge function.
//!
//! Field and group arithmetic is delegated to `ark-bn254`; this module pins
//! the wire encodings and the protocol-level conventions on top of it.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use ark_bn254::{Fq, Fr, G1Affine, G1Projective};
use ark_ec::{AffineRepr, CurveGroup};
use ark_ff::{BigInteger, Field, PrimeField, Zero};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Length of a canonical point encoding.
pub const POINT_BYTES: usize = 64;
/// Length of a scalar or challenge encoding.
pub const SCALAR_BYTES: usize = 32;

/// Domain tag for the second generator.
pub const H_DOMAIN_TAG: &[u8] = b"Obscura/H/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CurveError {
    #[error("the identity point has no wire encoding")]
    IdentityNotSerializable,
    #[error("expected {expected} bytes, got {actual}")]
    WrongLength { expected: usize, actual: usize },
    #[error("coordinates do not satisfy y^2 = x^3 + 3")]
    NotOnCurve,
    #[error("coordinate is not below the base-field modulus")]
    CoordinateOutOfRange,
    #[error("scalar encoding is not below the group order")]
    ScalarOutOfRange,
}

/// An element of Z_q, always reduced.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Scalar(Fr);

impl Scalar {
    pub const ZERO: Scalar = Scalar(ark_ff::MontFp!("0"));
    pub const ONE: Scalar = Scalar(ark_ff::MontFp!("1"));

    pub fn from_u64(v: u64) -> Self {
        Scalar(Fr::from(v))
    }

    /// Interprets 32 big-endian bytes modulo q.
    pub fn from_be_bytes_reduced(bytes: &[u8; SCALAR_BYTES]) -> Self {
        Scalar(Fr::from_be_bytes_mod_order(bytes))
    }

    /// Parses a canonical encoding, rejecting values `>= q`.
    pub fn from_be_bytes_canonical(bytes: &[u8; SCALAR_BYTES]) -> Result<Self, CurveError> {
        if bytes_lt(bytes, &group_order_bytes()) {
            Ok(Self::from_be_bytes_reduced(bytes))
        } else {
            Err(CurveError::ScalarOutOfRange)
        }
    }

    pub fn to_be_bytes(&self) -> [u8; SCALAR_BYTES] {
        to_array(&self.0.into_bigint().to_bytes_be())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Uniform sample from `[0, q)` by rejection on 254-bit candidates.
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let order = group_order_bytes();
        loop {
            let mut buf = [0u8; SCALAR_BYTES];
            rng.fill_bytes(&mut buf);
            buf[0] &= 0x3f;
            if bytes_lt(&buf, &order) {
                return Self::from_be_bytes_reduced(&buf);
            }
        }
    }

    /// Uniform sample from `[1, q)`.
    pub fn random_nonzero<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        loop {
            let s = Self::random(rng);
            if !s.is_zero() {
                return s;
            }
        }
    }
}

impl Add for Scalar {
    type Output = Scalar;
    fn add(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 + rhs.0)
    }
}

impl Sub for Scalar {
    type Output = Scalar;
    fn sub(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 - rhs.0)
    }
}

impl Mul for Scalar {
    type Output = Scalar;
    fn mul(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 * rhs.0)
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-self.0)
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({})", hex::encode(self.to_be_bytes()))
    }
}

/// A masked SHA-256 output: 256-bit big-endian value with the top bit clear.
///
/// May exceed q; it is reduced whenever it enters scalar arithmetic.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Challenge([u8; SCALAR_BYTES]);

impl Challenge {
    /// Applies the 255-bit mask to a raw digest.
    pub fn from_digest(mut digest: [u8; SCALAR_BYTES]) -> Self {
        digest[0] &= 0x7f;
        Challenge(digest)
    }

    /// Accepts only already-masked encodings.
    pub fn from_be_bytes(bytes: [u8; SCALAR_BYTES]) -> Option<Self> {
        (bytes[0] & 0x80 == 0).then_some(Challenge(bytes))
    }

    pub fn to_be_bytes(&self) -> [u8; SCALAR_BYTES] {
        self.0
    }

    pub fn as_bytes(&self) -> &[u8; SCALAR_BYTES] {
        &self.0
    }

    pub fn to_scalar(&self) -> Scalar {
        Scalar::from_be_bytes_reduced(&self.0)
    }
}

impl fmt::Debug for Challenge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Challenge({})", hex::encode(self.0))
    }
}

/// A point of the order-q group (cofactor 1, so on-curve implies in-subgroup).
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupPoint(G1Affine);

impl GroupPoint {
    pub fn identity() -> Self {
        GroupPoint(G1Affine::identity())
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_zero()
    }

    /// Affine coordinates as big-endian bytes; `None` for the identity.
    pub fn coordinates(&self) -> Option<([u8; 32], [u8; 32])> {
        let (x, y) = self.0.xy()?;
        Some((
            to_array(&x.into_bigint().to_bytes_be()),
            to_array(&y.into_bigint().to_bytes_be()),
        ))
    }

    pub fn to_bytes(&self) -> Result<[u8; POINT_BYTES], CurveError> {
        serialize_point(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CurveError> {
        deserialize_point(bytes)
    }

    pub fn to_hex(&self) -> Result<String, CurveError> {
        Ok(hex::encode(serialize_point(self)?))
    }
}

impl fmt::Debug for GroupPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match serialize_point(self) {
            Ok(b) => write!(f, "GroupPoint({})", hex::encode(b)),
            Err(_) => f.write_str("GroupPoint(identity)"),
        }
    }
}

impl Serialize for GroupPoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let bytes = serialize_point(self).map_err(serde::ser::Error::custom)?;
        serializer.serialize_str(&hex::encode(bytes))
    }
}

impl<'de> Deserialize<'de> for GroupPoint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let bytes = hex::decode(&s).map_err(serde::de::Error::custom)?;
        deserialize_point(&bytes).map_err(serde::de::Error::custom)
    }
}

/// The fixed generator pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Generators {
    pub g: GroupPoint,
    pub h: GroupPoint,
}

pub fn generators() -> &'static Generators {
    static GENS: OnceLock<Generators> = OnceLock::new();
    GENS.get_or_init(|| Generators {
        g: GroupPoint(G1Affine::generator()),
        h: derive_generator_h(),
    })
}

pub fn generator_g() -> GroupPoint {
    generators().g
}

pub fn generator_h() -> GroupPoint {
    generators().h
}

/// Try-and-increment derivation of H from [`H_DOMAIN_TAG`].
///
/// Candidate x is SHA-256(tag || counter_be32) mod p; the root with even
/// integer value is taken as y.
pub fn derive_generator_h() -> GroupPoint {
    let mut counter: u32 = 0;
    loop {
        let mut hasher = Sha256::new();
        hasher.update(H_DOMAIN_TAG);
        hasher.update(counter.to_be_bytes());
        let x = Fq::from_be_bytes_mod_order(&hasher.finalize());
        let rhs = x * x * x + Fq::from(3u64);
        if let Some(mut y) = rhs.sqrt() {
            if y.into_bigint().is_odd() {
                y = -y;
            }
            let p = G1Affine::new_unchecked(x, y);
            debug_assert!(p.is_on_curve());
            return GroupPoint(p);
        }
        counter += 1;
    }
}

pub fn point_add(a: &GroupPoint, b: &GroupPoint) -> GroupPoint {
    GroupPoint((a.0 + b.0).into_affine())
}

pub fn point_neg(a: &GroupPoint) -> GroupPoint {
    GroupPoint(-a.0)
}

pub fn point_mul(p: &GroupPoint, k: &Scalar) -> GroupPoint {
    GroupPoint((p.0 * k.0).into_affine())
}

/// Scalar multiplication by a challenge, interpreted modulo q.
pub fn point_mul_challenge(p: &GroupPoint, c: &Challenge) -> GroupPoint {
    point_mul(p, &c.to_scalar())
}

/// `a*P + b*Q`, the shape of every verifier step.
pub fn double_mul(a: &Scalar, p: &GroupPoint, b: &Scalar, q: &GroupPoint) -> GroupPoint {
    let sum: G1Projective = p.0 * a.0 + q.0 * b.0;
    GroupPoint(sum.into_affine())
}

pub fn serialize_point(p: &GroupPoint) -> Result<[u8; POINT_BYTES], CurveError> {
    let (x, y) = p.coordinates().ok_or(CurveError::IdentityNotSerializable)?;
    let mut out = [0u8; POINT_BYTES];
    out[..32].copy_from_slice(&x);
    out[32..].copy_from_slice(&y);
    Ok(out)
}

pub fn deserialize_point(bytes: &[u8]) -> Result<GroupPoint, CurveError> {
    if bytes.len() != POINT_BYTES {
        return Err(CurveError::WrongLength {
            expected: POINT_BYTES,
            actual: bytes.len(),
        });
    }
    let modulus = base_field_modulus_bytes();
    let (xb, yb) = bytes.split_at(32);
    if !bytes_lt(xb, &modulus) || !bytes_lt(yb, &modulus) {
        return Err(CurveError::CoordinateOutOfRange);
    }
    let x = Fq::from_be_bytes_mod_order(xb);
    let y = Fq::from_be_bytes_mod_order(yb);
    let p = G1Affine::new_unchecked(x, y);
    if !p.is_on_curve() {
        return Err(CurveError::NotOnCurve);
    }
    Ok(GroupPoint(p))
}

/// SHA-256(m || L || R) masked to 255 bits.
pub fn hash_to_challenge(
    m: &[u8; 32],
    l: &GroupPoint,
    r: &GroupPoint,
) -> Result<Challenge, CurveError> {
    let mut hasher = Sha256::new();
    hasher.update(m);
    hasher.update(serialize_point(l)?);
    hasher.update(serialize_point(r)?);
    Ok(Challenge::from_digest(hasher.finalize().into()))
}

/// Big-endian encoding of the group order q.
pub fn group_order_bytes() -> [u8; 32] {
    to_array(&Fr::MODULUS.to_bytes_be())
}

/// Big-endian encoding of the base-field modulus p.
pub fn base_field_modulus_bytes() -> [u8; 32] {
    to_array(&Fq::MODULUS.to_bytes_be())
}

fn bytes_lt(a: &[u8], b: &[u8]) -> bool {
    debug_assert_eq!(a.len(), b.len());
    a < b
}

fn to_array(v: &[u8]) -> [u8; 32] {
    let mut out = [0u8; 32];
    out[32 - v.len()..].copy_from_slice(v);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    const Q_DEC: &str =
        "21888242871839275222246405745257275088548364400416034343698204186575808495617";

    #[test]
    fn group_order_matches_published_constant() {
        let q = Fr::MODULUS.to_string();
        assert_eq!(q, Q_DEC);
    }

    #[test]
    fn small_sub_and_negation() {
        let five = Scalar::from_u64(5);
        let three = Scalar::from_u64(3);
        assert_eq!(five - three, Scalar::from_u64(2));

        let wrapped = Scalar::ZERO - Scalar::from_u64(7);
        assert_eq!(
            hex::encode(wrapped.to_be_bytes()),
            "30644e72e131a029b85045b68181585d2833e84879b9709143e1f593effffffa"
        );
    }

    #[test]
    fn generator_encoding_is_one_two() {
        let enc = serialize_point(&generator_g()).unwrap();
        let mut expected = [0u8; 64];
        expected[31] = 1;
        expected[63] = 2;
        assert_eq!(enc, expected);
    }

    #[test]
    fn identity_cases() {
        let g = generator_g();
        assert_eq!(point_mul(&g, &Scalar::ONE), g);
        assert!(point_mul(&g, &Scalar::ZERO).is_identity());
        assert!(point_mul(&GroupPoint::identity(), &Scalar::from_u64(9)).is_identity());
        assert_eq!(point_add(&g, &GroupPoint::identity()), g);
        assert!(point_add(&g, &point_neg(&g)).is_identity());
        assert_eq!(
            serialize_point(&GroupPoint::identity()),
            Err(CurveError::IdentityNotSerializable)
        );
    }

    #[test]
    fn order_annihilates_generator() {
        // q itself as a challenge-sized integer reduces to zero.
        let q = Challenge::from_be_bytes(group_order_bytes()).unwrap();
        assert!(point_mul_challenge(&generator_g(), &q).is_identity());
    }

    #[test]
    fn doubling_agrees_with_mul_by_two() {
        let g = generator_g();
        assert_eq!(point_add(&g, &g), point_mul(&g, &Scalar::from_u64(2)));
    }

    #[test]
    fn rejects_bad_encodings() {
        assert_eq!(
            deserialize_point(&[0xff; 64]),
            Err(CurveError::CoordinateOutOfRange)
        );
        assert!(matches!(
            deserialize_point(&[0u8; 63]),
            Err(CurveError::WrongLength { .. })
        ));
        let mut enc = serialize_point(&generator_h()).unwrap();
        enc[63] ^= 1;
        assert_eq!(deserialize_point(&enc), Err(CurveError::NotOnCurve));
        // (0, 0) would be the natural identity encoding; it is rejected.
        assert_eq!(deserialize_point(&[0u8; 64]), Err(CurveError::NotOnCurve));
    }

    #[test]
    fn h_is_deterministic_and_distinct() {
        let a = derive_generator_h();
        let b = derive_generator_h();
        assert_eq!(a, b);
        assert_ne!(a, generator_g());
        assert!(!a.is_identity());
        let (_, y) = a.coordinates().unwrap();
        assert_eq!(y[31] & 1, 0, "even-y tie break");
    }

    #[test]
    fn scalar_canonical_parse() {
        assert_eq!(
            Scalar::from_be_bytes_canonical(&group_order_bytes()),
            Err(CurveError::ScalarOutOfRange)
        );
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let s = Scalar::random(&mut rng);
        assert_eq!(Scalar::from_be_bytes_canonical(&s.to_be_bytes()), Ok(s));
    }

    #[test]
    fn challenge_mask_rejects_high_bit() {
        let mut b = [0u8; 32];
        b[0] = 0x80;
        assert!(Challenge::from_be_bytes(b).is_none());
        assert_eq!(Challenge::from_digest([0xff; 32]).as_bytes()[0], 0x7f);
    }
}
