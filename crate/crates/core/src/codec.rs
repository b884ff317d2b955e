//! Packed proof payload:
//!
//! ```text
//! n (1) || P_0 .. P_{n-1} (64 each) || c0 (32) || s_0 .. s_{n-1} (32 each)
//! ```
//!
//! Total length is `96n + 33`.

use thiserror::Error;

use crate::curve::{
    deserialize_point, serialize_point, Challenge, CurveError, Scalar, POINT_BYTES, SCALAR_BYTES,
};
use crate::lsag::{LsagError, LsagSignature, Ring, MAX_RING_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("payload truncated: {0} bytes")]
    TruncatedPayload(usize),
    #[error("declared ring size {declared} does not match payload of {actual} bytes")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("ring member {index}: {source}")]
    BadPoint { index: usize, source: CurveError },
    #[error("c0 has its top bit set")]
    MalformedChallenge,
    #[error("response {0} is not below the group order")]
    NonCanonicalResponse(usize),
    #[error("ring rejected: {0}")]
    Ring(#[from] LsagError),
}

/// Expected payload length for a ring of `n`.
pub const fn payload_len(n: usize) -> usize {
    96 * n + 33
}

/// A payload that has passed length validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedProof(Vec<u8>);

impl PackedProof {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn ring_size(&self) -> usize {
        self.0[0] as usize
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }
}

impl AsRef<[u8]> for PackedProof {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

pub fn pack(ring: &Ring, sig: &LsagSignature) -> Result<PackedProof, CodecError> {
    let n = ring.len();
    if sig.responses.len() != n || n == 0 || n > MAX_RING_SIZE {
        return Err(CodecError::LengthMismatch {
            declared: n,
            actual: sig.responses.len(),
        });
    }
    let mut out = Vec::with_capacity(payload_len(n));
    out.push(n as u8);
    for p in ring.members() {
        out.extend_from_slice(&serialize_point(p).expect("ring members are never the identity"));
    }
    out.extend_from_slice(sig.c0.as_bytes());
    for s in &sig.responses {
        out.extend_from_slice(&s.to_be_bytes());
    }
    debug_assert_eq!(out.len(), payload_len(n));
    Ok(PackedProof(out))
}

/// Reads the declared ring size, checking it against the payload length.
pub fn declared_ring_size(bytes: &[u8]) -> Result<usize, CodecError> {
    let Some(&n) = bytes.first() else {
        return Err(CodecError::TruncatedPayload(0));
    };
    let n = n as usize;
    let expected = payload_len(n);
    if bytes.len() < expected {
        // Also covers a payload sized for fewer members than declared.
        if n > 0 && (bytes.len() - 33).is_multiple_of(96) && bytes.len() >= 33 {
            return Err(CodecError::LengthMismatch {
                declared: n,
                actual: bytes.len(),
            });
        }
        return Err(CodecError::TruncatedPayload(bytes.len()));
    }
    if bytes.len() != expected || n == 0 {
        return Err(CodecError::LengthMismatch {
            declared: n,
            actual: bytes.len(),
        });
    }
    Ok(n)
}

pub fn unpack(bytes: &[u8]) -> Result<(Ring, LsagSignature), CodecError> {
    let n = declared_ring_size(bytes)?;
    let points_end = 1 + n * POINT_BYTES;
    let members = bytes[1..points_end]
        .chunks_exact(POINT_BYTES)
        .enumerate()
        .map(|(index, chunk)| {
            deserialize_point(chunk).map_err(|source| CodecError::BadPoint { index, source })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let c0_bytes: [u8; SCALAR_BYTES] = bytes[points_end..points_end + SCALAR_BYTES]
        .try_into()
        .expect("slice length fixed");
    let c0 = Challenge::from_be_bytes(c0_bytes).ok_or(CodecError::MalformedChallenge)?;

    let responses = bytes[points_end + SCALAR_BYTES..]
        .chunks_exact(SCALAR_BYTES)
        .enumerate()
        .map(|(i, chunk)| {
            let arr: [u8; SCALAR_BYTES] = chunk.try_into().expect("chunk length fixed");
            Scalar::from_be_bytes_canonical(&arr).map_err(|_| CodecError::NonCanonicalResponse(i))
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok((Ring::new(members)?, LsagSignature { c0, responses }))
}

impl TryFrom<Vec<u8>> for PackedProof {
    type Error = CodecError;

    fn try_from(bytes: Vec<u8>) -> Result<Self, Self::Error> {
        declared_ring_size(&bytes)?;
        Ok(PackedProof(bytes))
    }
}
