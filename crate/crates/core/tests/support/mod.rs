//! Arbitrary-precision reference arithmetic for BN254 G1, written from the
//! textbook affine formulas. Shares no code with the library's curve path.

#![allow(dead_code)]

use num_bigint::BigUint;
use sha2::{Digest, Sha256};

pub const P_DEC: &str =
    "21888242871839275222246405745257275088696311157297823662689037894645226208583";
pub const Q_DEC: &str =
    "21888242871839275222246405745257275088548364400416034343698204186575808495617";

pub fn p() -> BigUint {
    P_DEC.parse().unwrap()
}

pub fn q() -> BigUint {
    Q_DEC.parse().unwrap()
}

pub fn from_be(bytes: &[u8]) -> BigUint {
    BigUint::from_bytes_be(bytes)
}

pub fn to_be32(v: &BigUint) -> [u8; 32] {
    let b = v.to_bytes_be();
    let mut out = [0u8; 32];
    out[32 - b.len()..].copy_from_slice(&b);
    out
}

/// Affine point; `None` is the point at infinity.
pub type RefPoint = Option<(BigUint, BigUint)>;

fn sub_mod(a: &BigUint, b: &BigUint, m: &BigUint) -> BigUint {
    ((a % m) + m - (b % m)) % m
}

fn inv_mod(a: &BigUint, m: &BigUint) -> BigUint {
    // Fermat: m is prime.
    a.modpow(&(m - 2u32), m)
}

pub fn ref_generator() -> RefPoint {
    Some((BigUint::from(1u32), BigUint::from(2u32)))
}

pub fn ref_add(a: &RefPoint, b: &RefPoint) -> RefPoint {
    let p = p();
    let (x1, y1) = match a {
        None => return b.clone(),
        Some(v) => v,
    };
    let (x2, y2) = match b {
        None => return a.clone(),
        Some(v) => v,
    };
    let lambda = if x1 == x2 {
        if (y1 + y2) % &p == BigUint::from(0u32) {
            return None;
        }
        let num = BigUint::from(3u32) * x1 * x1 % &p;
        num * inv_mod(&(BigUint::from(2u32) * y1 % &p), &p) % &p
    } else {
        sub_mod(y2, y1, &p) * inv_mod(&sub_mod(x2, x1, &p), &p) % &p
    };
    let x3 = sub_mod(&sub_mod(&(&lambda * &lambda % &p), x1, &p), x2, &p);
    let y3 = sub_mod(&(&lambda * sub_mod(x1, &x3, &p) % &p), y1, &p);
    Some((x3, y3))
}

/// Left-to-right double-and-add over `k mod q`.
pub fn ref_mul(pt: &RefPoint, k: &BigUint) -> RefPoint {
    let k = k % q();
    let mut acc: RefPoint = None;
    for i in (0..k.bits()).rev() {
        acc = ref_add(&acc, &acc);
        if k.bit(i) {
            acc = ref_add(&acc, pt);
        }
    }
    acc
}

pub fn ref_encode(pt: &RefPoint) -> [u8; 64] {
    let (x, y) = pt.as_ref().expect("identity has no encoding");
    let mut out = [0u8; 64];
    out[..32].copy_from_slice(&to_be32(x));
    out[32..].copy_from_slice(&to_be32(y));
    out
}

pub fn ref_decode(bytes: &[u8]) -> RefPoint {
    Some((from_be(&bytes[..32]), from_be(&bytes[32..64])))
}

pub fn ref_on_curve(pt: &RefPoint) -> bool {
    match pt {
        None => true,
        Some((x, y)) => {
            let p = p();
            (y * y) % &p == (x * x * x + 3u32) % &p
        }
    }
}

/// SHA-256(m || L || R) with the top bit cleared, as an integer.
pub fn ref_challenge(m: &[u8; 32], l: &RefPoint, r: &RefPoint) -> BigUint {
    let mut h = Sha256::new();
    h.update(m);
    h.update(ref_encode(l));
    h.update(ref_encode(r));
    let mut d: [u8; 32] = h.finalize().into();
    d[0] &= 0x7f;
    from_be(&d)
}

/// Independent verifier over encoded inputs.
pub fn ref_verify(
    ring: &[[u8; 64]],
    key_image: &[u8; 64],
    m: &[u8; 32],
    c0: &[u8; 32],
    responses: &[[u8; 32]],
    h: &[u8; 64],
) -> bool {
    let g = ref_generator();
    let h = ref_decode(h);
    let image = ref_decode(key_image);
    let c0 = from_be(c0);
    let mut c = c0.clone();
    for (member, s) in ring.iter().zip(responses) {
        let s = from_be(s);
        let member = ref_decode(member);
        let l = ref_add(&ref_mul(&g, &s), &ref_mul(&member, &c));
        let r = ref_add(&ref_mul(&h, &s), &ref_mul(&image, &c));
        if l.is_none() || r.is_none() {
            return false;
        }
        c = ref_challenge(m, &l, &r);
    }
    c == c0
}
