use obscura_core::codec::{pack, payload_len, unpack, CodecError};
use obscura_core::curve::{generator_g, point_mul, Challenge, Scalar};
use obscura_core::lsag::{LsagSignature, Ring};
use proptest::prelude::*;

fn arb_nonzero_scalar() -> impl Strategy<Value = Scalar> {
    any::<[u8; 32]>()
        .prop_map(|b| Scalar::from_be_bytes_reduced(&b))
        .prop_filter("nonzero", |s| !s.is_zero())
}

fn arb_proof() -> impl Strategy<Value = (Ring, LsagSignature)> {
    (1usize..=8).prop_flat_map(|n| {
        (
            proptest::collection::vec(arb_nonzero_scalar(), n),
            any::<[u8; 32]>(),
            proptest::collection::vec(any::<[u8; 32]>(), n),
        )
            .prop_filter_map("distinct members", |(keys, c0, resp)| {
                let members = keys.iter().map(|k| point_mul(&generator_g(), k)).collect();
                let ring = Ring::new(members).ok()?;
                let sig = LsagSignature {
                    c0: Challenge::from_digest(c0),
                    responses: resp.iter().map(Scalar::from_be_bytes_reduced).collect(),
                };
                Some((ring, sig))
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1_000))]

    #[test]
    fn pack_unpack_are_inverse((ring, sig) in arb_proof()) {
        let packed = pack(&ring, &sig).unwrap();
        prop_assert_eq!(packed.as_bytes().len(), payload_len(ring.len()));
        prop_assert_eq!(packed.as_bytes()[0] as usize, ring.len());
        let (r2, s2) = unpack(packed.as_bytes()).unwrap();
        prop_assert_eq!(r2, ring);
        prop_assert_eq!(s2, sig);
    }
}

#[test]
fn payload_length_for_every_ring_up_to_32() {
    for n in 1..=32u64 {
        let members = (1..=n)
            .map(|i| point_mul(&generator_g(), &Scalar::from_u64(i)))
            .collect();
        let ring = Ring::new(members).unwrap();
        let sig = LsagSignature {
            c0: Challenge::default(),
            responses: vec![Scalar::ONE; n as usize],
        };
        let packed = pack(&ring, &sig).unwrap();
        assert_eq!(packed.as_bytes().len() as u64, 96 * n + 33);
    }
}

#[test]
fn duplicate_members_on_the_wire_are_rejected() {
    let g = generator_g();
    let mut bytes = vec![2u8];
    for _ in 0..2 {
        bytes.extend_from_slice(&g.to_bytes().unwrap());
    }
    bytes.extend_from_slice(&[0u8; 96]);
    assert!(matches!(unpack(&bytes), Err(CodecError::Ring(_))));
}
