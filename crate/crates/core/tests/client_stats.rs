mod common;
mod stats;

use common::*;
use obscura_core::client::{
    build_ring, list_commitments, plan_withdrawal, select_decoys, CommitmentRecord, DecoyPolicy,
    KeyFile,
};
use obscura_core::curve::{generator_g, point_mul, GroupPoint, Scalar};
use obscura_core::ledger::submit_group;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use stats::{chi_square, truncated_geometric};

fn synthetic_records(count: u64) -> Vec<CommitmentRecord> {
    (0..count)
        .map(|i| CommitmentRecord {
            point: point_mul(&generator_g(), &Scalar::from_u64(i + 1)),
            deposit_index: i,
            round: i,
        })
        .collect()
}

fn own_point() -> GroupPoint {
    point_mul(&generator_g(), &Scalar::from_u64(9_999))
}

#[test]
fn signer_position_is_uniform() {
    let mut rng = ChaCha20Rng::seed_from_u64(21);
    let decoys: Vec<GroupPoint> = synthetic_records(4).iter().map(|r| r.point).collect();
    let own = own_point();
    let mut counts = [0u64; 5];
    for _ in 0..10_000 {
        let (_, pi) = build_ring(&own, &decoys, &mut rng).unwrap();
        counts[pi] += 1;
    }
    let fit = chi_square(&counts, &[1.0; 5], 0.01);
    assert!(fit.passes(), "chi2 {} >= {}", fit.statistic, fit.critical);
}

#[test]
fn first_draw_follows_truncated_geometric() {
    let records = synthetic_records(100);
    let policy = DecoyPolicy::default();
    let mut rng = ChaCha20Rng::seed_from_u64(22);
    let mut counts = vec![0u64; policy.window];
    for _ in 0..50_000 {
        let picked = select_decoys(&records, &own_point(), 1, &policy, &mut rng).unwrap();
        let rank = 99 - picked[0].deposit_index as usize;
        counts[rank] += 1;
    }
    let fit = chi_square(
        &counts,
        &truncated_geometric(policy.lambda, policy.window),
        0.01,
    );
    assert!(
        fit.passes(),
        "chi2 {} >= {} (df {})",
        fit.statistic,
        fit.critical,
        fit.df
    );
}

#[test]
fn older_than_window_is_never_drawn() {
    let records = synthetic_records(100);
    let mut rng = ChaCha20Rng::seed_from_u64(23);
    for _ in 0..2_000 {
        for r in
            select_decoys(&records, &own_point(), 4, &DecoyPolicy::default(), &mut rng).unwrap()
        {
            assert!(r.deposit_index >= 36);
        }
    }
}

#[test]
fn own_commitment_is_never_a_decoy() {
    let mut records = synthetic_records(10);
    let own = own_point();
    records.insert(
        7,
        CommitmentRecord {
            point: own,
            deposit_index: 10,
            round: 10,
        },
    );
    let mut rng = ChaCha20Rng::seed_from_u64(24);
    for _ in 0..10_000 {
        let picked = select_decoys(&records, &own, 4, &DecoyPolicy::default(), &mut rng).unwrap();
        assert!(picked.iter().all(|r| r.point != own));
        let mut idx: Vec<_> = picked.iter().map(|r| r.deposit_index).collect();
        idx.dedup();
        assert_eq!(idx.len(), 4);
    }
}

#[test]
fn small_pool_and_bad_lambda_are_reported() {
    let records = synthetic_records(3);
    let mut rng = ChaCha20Rng::seed_from_u64(25);
    assert!(select_decoys(&records, &own_point(), 4, &DecoyPolicy::default(), &mut rng).is_err());
    for l in [0.0, 1.0, -0.5, f64::NAN] {
        assert!(select_decoys(
            &records,
            &own_point(),
            1,
            &DecoyPolicy::with_lambda(l),
            &mut rng
        )
        .is_err());
    }
}

#[test]
fn ring_position_depends_on_randomness() {
    let decoys: Vec<GroupPoint> = synthetic_records(4).iter().map(|r| r.point).collect();
    let positions: std::collections::BTreeSet<usize> = (0..64)
        .map(|seed| {
            build_ring(&own_point(), &decoys, &mut ChaCha20Rng::seed_from_u64(seed))
                .unwrap()
                .1
        })
        .collect();
    assert!(positions.len() > 1);
}

#[test]
fn secret_never_leaves_the_client() {
    let mut pool = Pool::new(6, 26);
    let kp = pool.keys[2].clone();
    let secret_hex = KeyFile::from_keypair(&kp).x;
    let plan = plan_withdrawal(
        &pool.state,
        &kp,
        5,
        &DecoyPolicy::default(),
        recipient(1),
        relay(),
        &pool.config,
        &mut pool.rng,
    )
    .unwrap();
    let (next, receipt) = submit_group(
        &pool.state,
        &pool.config,
        std::slice::from_ref(&plan.transaction),
    )
    .unwrap();

    let blobs = [
        serde_json::to_string(&plan.transaction).unwrap(),
        serde_json::to_string(&receipt).unwrap(),
        next.persist(),
        plan.packed.to_hex(),
    ];
    for blob in &blobs {
        assert!(!blob.to_lowercase().contains(&secret_hex));
    }
    let raw = kp.secret().to_be_bytes();
    assert!(!plan.packed.as_bytes().windows(32).any(|w| w == raw));
    assert_eq!(list_commitments(&next).len(), 6);
}
