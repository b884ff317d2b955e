//! Linkable spontaneous anonymous group signatures.
//!
//! A signer holding `x` with `P = xG` somewhere in a ring proves membership
//! without revealing the index. The key image `I = xH` is deterministic in
//! `x`, so two signatures by the same key share it.

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::curve::{
    double_mul, generator_g, generator_h, hash_to_challenge, point_mul, serialize_point, Challenge,
    GroupPoint, Scalar,
};

/// Largest ring the one-byte size prefix can describe.
pub const MAX_RING_SIZE: usize = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum LsagError {
    #[error("secret scalar is zero")]
    ZeroScalar,
    #[error("ring is empty")]
    EmptyRing,
    #[error("ring has {0} members; at most 255 are allowed")]
    RingTooLarge(usize),
    #[error("ring member {0} is the identity point")]
    IdentityMember(usize),
    #[error("ring member {0} appears more than once")]
    DuplicateMember(usize),
    #[error("signer index {index} out of range for ring of size {size}")]
    BadIndex { index: usize, size: usize },
    #[error("ring member at the signer index is not the signer's commitment")]
    IndexMismatch,
    #[error("signature has {responses} responses for a ring of size {ring}")]
    LengthMismatch { responses: usize, ring: usize },
}

/// Secret scalar with its commitment and key image.
#[derive(Clone, PartialEq, Eq)]
pub struct KeyPair {
    secret: Scalar,
    commitment: GroupPoint,
    key_image: GroupPoint,
}

impl KeyPair {
    pub fn from_secret(secret: Scalar) -> Result<Self, LsagError> {
        if secret.is_zero() {
            return Err(LsagError::ZeroScalar);
        }
        Ok(KeyPair {
            secret,
            commitment: point_mul(&generator_g(), &secret),
            key_image: compute_key_image(&secret)?,
        })
    }

    pub fn secret(&self) -> &Scalar {
        &self.secret
    }

    /// `P = xG`.
    pub fn commitment(&self) -> &GroupPoint {
        &self.commitment
    }

    /// `I = xH`.
    pub fn key_image(&self) -> &GroupPoint {
        &self.key_image
    }
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyPair")
            .field("secret", &"<redacted>")
            .field("commitment", &self.commitment)
            .field("key_image", &self.key_image)
            .finish()
    }
}

/// Draws `x` uniformly from `[1, q)`.
pub fn keygen<R: RngCore + CryptoRng>(rng: &mut R) -> KeyPair {
    KeyPair::from_secret(Scalar::random_nonzero(rng)).expect("nonzero by construction")
}

pub fn compute_key_image(x: &Scalar) -> Result<GroupPoint, LsagError> {
    if x.is_zero() {
        return Err(LsagError::ZeroScalar);
    }
    Ok(point_mul(&generator_h(), x))
}

/// An ordered, duplicate-free list of commitments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ring {
    members: Vec<GroupPoint>,
}

impl Ring {
    pub fn new(members: Vec<GroupPoint>) -> Result<Self, LsagError> {
        if members.is_empty() {
            return Err(LsagError::EmptyRing);
        }
        if members.len() > MAX_RING_SIZE {
            return Err(LsagError::RingTooLarge(members.len()));
        }
        let mut seen = std::collections::HashSet::with_capacity(members.len());
        for (i, m) in members.iter().enumerate() {
            if m.is_identity() {
                return Err(LsagError::IdentityMember(i));
            }
            if !seen.insert(*m) {
                return Err(LsagError::DuplicateMember(i));
            }
        }
        Ok(Ring { members })
    }

    pub fn members(&self) -> &[GroupPoint] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn position(&self, p: &GroupPoint) -> Option<usize> {
        self.members.iter().position(|m| m == p)
    }

    pub fn into_members(self) -> Vec<GroupPoint> {
        self.members
    }
}

/// `(c0, s_0 .. s_{n-1})`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LsagSignature {
    pub c0: Challenge,
    pub responses: Vec<Scalar>,
}

/// Signs `message` (the 32-byte recipient) over `ring` with the key at `index`.
pub fn sign<R: RngCore + CryptoRng>(
    secret: &Scalar,
    ring: &Ring,
    index: usize,
    message: &[u8; 32],
    rng: &mut R,
) -> Result<LsagSignature, LsagError> {
    let n = ring.len();
    if index >= n {
        return Err(LsagError::BadIndex { index, size: n });
    }
    if secret.is_zero() {
        return Err(LsagError::ZeroScalar);
    }
    let g = generator_g();
    let h = generator_h();
    if ring.members[index] != point_mul(&g, secret) {
        return Err(LsagError::IndexMismatch);
    }
    let key_image = point_mul(&h, secret);

    let alpha = Scalar::random_nonzero(rng);
    let mut challenges = vec![Challenge::default(); n];
    let mut responses = vec![Scalar::ZERO; n];

    let l = point_mul(&g, &alpha);
    let r = point_mul(&h, &alpha);
    challenges[(index + 1) % n] =
        hash_to_challenge(message, &l, &r).expect("alpha is nonzero so L, R are not identity");

    for step in 1..n {
        let i = (index + step) % n;
        let c = challenges[i].to_scalar();
        // Resample on the (negligible) chance a decoy step lands on the identity.
        let next = loop {
            let s = Scalar::random(rng);
            let l = double_mul(&s, &g, &c, &ring.members[i]);
            let r = double_mul(&s, &h, &c, &key_image);
            if let Ok(next) = hash_to_challenge(message, &l, &r) {
                responses[i] = s;
                break next;
            }
        };
        challenges[(i + 1) % n] = next;
    }

    responses[index] = alpha - challenges[index].to_scalar() * *secret;
    Ok(LsagSignature {
        c0: challenges[0],
        responses,
    })
}

/// Per-index values recomputed by the verifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifierStep {
    pub l: GroupPoint,
    pub r: GroupPoint,
    /// Challenge produced by hashing this step.
    pub next: Option<Challenge>,
}

/// Full record of a verification pass, for inspection and tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationTrace {
    pub steps: Vec<VerifierStep>,
    pub accepted: bool,
}

pub fn verify(
    ring: &Ring,
    key_image: &GroupPoint,
    message: &[u8; 32],
    sig: &LsagSignature,
) -> Result<bool, LsagError> {
    Ok(trace_verification(ring, key_image, message, sig)?.accepted)
}

/// Runs the verifier and records `L_i`, `R_i` and the next challenge at
/// every index. A step whose points cannot be hashed ends the pass with a
/// rejection.
pub fn trace_verification(
    ring: &Ring,
    key_image: &GroupPoint,
    message: &[u8; 32],
    sig: &LsagSignature,
) -> Result<VerificationTrace, LsagError> {
    if sig.responses.len() != ring.len() {
        return Err(LsagError::LengthMismatch {
            responses: sig.responses.len(),
            ring: ring.len(),
        });
    }
    let mut steps = Vec::with_capacity(ring.len());
    if key_image.is_identity() {
        return Ok(VerificationTrace {
            steps,
            accepted: false,
        });
    }
    let g = generator_g();
    let h = generator_h();
    let mut c = sig.c0;
    for (member, s) in ring.members.iter().zip(&sig.responses) {
        let cs = c.to_scalar();
        let l = double_mul(s, &g, &cs, member);
        let r = double_mul(s, &h, &cs, key_image);
        let next = hash_to_challenge(message, &l, &r).ok();
        steps.push(VerifierStep { l, r, next });
        match next {
            Some(n) => c = n,
            None => {
                return Ok(VerificationTrace {
                    steps,
                    accepted: false,
                })
            }
        }
    }
    Ok(VerificationTrace {
        steps,
        accepted: c == sig.c0,
    })
}

/// Outcome of checking a disclosed secret against a public pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditOutcome {
    Consistent,
    Inconsistent,
}

/// Checks `P = xG` and `I = xH` for a voluntarily disclosed `x`.
pub fn audit_disclosure(
    secret: &Scalar,
    commitment: &GroupPoint,
    key_image: &GroupPoint,
) -> Result<AuditOutcome, LsagError> {
    if secret.is_zero() {
        return Err(LsagError::ZeroScalar);
    }
    let ok = point_mul(&generator_g(), secret) == *commitment
        && point_mul(&generator_h(), secret) == *key_image;
    Ok(if ok {
        AuditOutcome::Consistent
    } else {
        AuditOutcome::Inconsistent
    })
}

/// Serializes a signature as `c0 || s_0 .. s_{n-1}`; the layout carries no
/// trace of the signer index.
pub fn signature_bytes(sig: &LsagSignature) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 * (1 + sig.responses.len()));
    out.extend_from_slice(sig.c0.as_bytes());
    for s in &sig.responses {
        out.extend_from_slice(&s.to_be_bytes());
    }
    out
}

/// Encoded ring members, in order.
pub fn ring_bytes(ring: &Ring) -> Vec<u8> {
    ring.members
        .iter()
        .flat_map(|p| serialize_point(p).expect("ring members are never the identity"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::point_add;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn ring_with_signer(rng: &mut ChaCha20Rng, n: usize, pi: usize) -> (KeyPair, Ring) {
        let kp = keygen(rng);
        let members = (0..n)
            .map(|i| {
                if i == pi {
                    *kp.commitment()
                } else {
                    *keygen(rng).commitment()
                }
            })
            .collect();
        (kp, Ring::new(members).unwrap())
    }

    #[test]
    fn unit_secret_gives_generators() {
        let kp = KeyPair::from_secret(Scalar::ONE).unwrap();
        assert_eq!(*kp.commitment(), generator_g());
        assert_eq!(*kp.key_image(), generator_h());
        assert_eq!(compute_key_image(&Scalar::ONE).unwrap(), generator_h());
        assert_eq!(compute_key_image(&Scalar::ZERO), Err(LsagError::ZeroScalar));
    }

    #[test]
    fn self_ring_of_one() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (kp, ring) = ring_with_signer(&mut rng, 1, 0);
        let m = [7u8; 32];
        let sig = sign(kp.secret(), &ring, 0, &m, &mut rng).unwrap();
        assert!(verify(&ring, kp.key_image(), &m, &sig).unwrap());
    }

    #[test]
    fn every_index_of_five() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for pi in 0..5 {
            let (kp, ring) = ring_with_signer(&mut rng, 5, pi);
            let m = [pi as u8; 32];
            let sig = sign(kp.secret(), &ring, pi, &m, &mut rng).unwrap();
            assert!(verify(&ring, kp.key_image(), &m, &sig).unwrap());
            assert!(!verify(&ring, kp.key_image(), &[0xaa; 32], &sig).unwrap());
        }
    }

    #[test]
    fn signer_precondition_errors() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (kp, ring) = ring_with_signer(&mut rng, 4, 2);
        let m = [0u8; 32];
        assert_eq!(
            sign(kp.secret(), &ring, 1, &m, &mut rng),
            Err(LsagError::IndexMismatch)
        );
        assert_eq!(
            sign(kp.secret(), &ring, 4, &m, &mut rng),
            Err(LsagError::BadIndex { index: 4, size: 4 })
        );
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let (kp, ring) = ring_with_signer(&mut rng, 3, 0);
        let m = [0u8; 32];
        let mut sig = sign(kp.secret(), &ring, 0, &m, &mut rng).unwrap();
        sig.responses.pop();
        assert!(matches!(
            verify(&ring, kp.key_image(), &m, &sig),
            Err(LsagError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn ring_construction_rules() {
        let g = generator_g();
        assert_eq!(Ring::new(vec![]), Err(LsagError::EmptyRing));
        assert_eq!(Ring::new(vec![g, g]), Err(LsagError::DuplicateMember(1)));
        assert_eq!(
            Ring::new(vec![g, GroupPoint::identity()]),
            Err(LsagError::IdentityMember(1))
        );
        let mut p = g;
        let many: Vec<_> = (0..256)
            .map(|_| {
                let out = p;
                p = point_add(&p, &g);
                out
            })
            .collect();
        assert_eq!(Ring::new(many), Err(LsagError::RingTooLarge(256)));
    }

    #[test]
    fn audit_outcomes() {
        let x = Scalar::from_u64(42);
        let kp = KeyPair::from_secret(x).unwrap();
        assert_eq!(
            audit_disclosure(&x, kp.commitment(), kp.key_image()),
            Ok(AuditOutcome::Consistent)
        );
        let wrong_image = point_mul(&generator_h(), &(x + Scalar::ONE));
        assert_eq!(
            audit_disclosure(&x, kp.commitment(), &wrong_image),
            Ok(AuditOutcome::Inconsistent)
        );
        assert_eq!(
            audit_disclosure(&Scalar::ZERO, kp.commitment(), kp.key_image()),
            Err(LsagError::ZeroScalar)
        );
    }
}
