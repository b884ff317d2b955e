//! Off-chain user agent: reads commitments from the ledger log, picks
//! recency-biased decoys, shuffles the ring and builds transactions.

use rand::seq::SliceRandom;
use rand::{CryptoRng, Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{self, CodecError, PackedProof};
use crate::contract::{commitment_key, nullifier_key, ContractConfig};
use crate::curve::{serialize_point, GroupPoint, Scalar};
use crate::ledger::{
    Address, AppCall, AppEvent, AppMethod, HexBytes, LedgerState, Transaction, MIN_FEE,
};
use crate::lsag::{self, KeyPair, LsagError, Ring};

pub const DEFAULT_LAMBDA: f64 = 0.25;
pub const DEFAULT_RECENCY_WINDOW: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClientError {
    #[error("pool has {available} candidate decoys, {requested} requested")]
    InsufficientPool { available: usize, requested: usize },
    #[error("decay must lie in (0, 1), got {0}")]
    InvalidLambda(f64),
    #[error("duplicate ring member")]
    DuplicateMember,
    #[error(transparent)]
    Signer(#[from] LsagError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// A registered deposit as seen by the indexer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitmentRecord {
    pub point: GroupPoint,
    pub deposit_index: u64,
    pub round: u64,
}

/// Every commitment in deposit order, read from committed receipts.
pub fn list_commitments(state: &LedgerState) -> Vec<CommitmentRecord> {
    let mut out: Vec<CommitmentRecord> = state
        .log
        .iter()
        .flat_map(|receipt| {
            receipt.events.iter().filter_map(move |e| match e {
                AppEvent::Deposit {
                    commitment,
                    deposit_index,
                } => Some(CommitmentRecord {
                    point: *commitment,
                    deposit_index: *deposit_index,
                    round: receipt.round,
                }),
                _ => None,
            })
        })
        .collect();
    out.sort_by_key(|r| r.deposit_index);
    out
}

/// Decoy selection knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoyPolicy {
    /// Per-rank decay; rank `r` has weight `(1 - lambda)^r`.
    pub lambda: f64,
    /// Only the most recent `window` candidates are eligible.
    pub window: usize,
}

impl Default for DecoyPolicy {
    fn default() -> Self {
        DecoyPolicy {
            lambda: DEFAULT_LAMBDA,
            window: DEFAULT_RECENCY_WINDOW,
        }
    }
}

impl DecoyPolicy {
    pub fn with_lambda(lambda: f64) -> Self {
        DecoyPolicy {
            lambda,
            ..Self::default()
        }
    }

    /// Selection weight of the first draw at each recency rank.
    pub fn rank_weights(&self, candidates: usize) -> Vec<f64> {
        let keep = 1.0 - self.lambda;
        (0..candidates.min(self.window))
            .map(|r| keep.powi(r as i32))
            .collect()
    }
}

/// Draws `k` distinct decoys, newest-biased, never returning `own`.
///
/// Draws are sequential without replacement; the first draw follows the
/// rank weights exactly.
pub fn select_decoys<R: RngCore + CryptoRng>(
    records: &[CommitmentRecord],
    own: &GroupPoint,
    k: usize,
    policy: &DecoyPolicy,
    rng: &mut R,
) -> Result<Vec<CommitmentRecord>, ClientError> {
    if !(policy.lambda > 0.0 && policy.lambda < 1.0) {
        return Err(ClientError::InvalidLambda(policy.lambda));
    }
    let mut candidates: Vec<CommitmentRecord> = records
        .iter()
        .filter(|r| r.point != *own)
        .copied()
        .collect();
    candidates.sort_by_key(|r| std::cmp::Reverse(r.deposit_index));
    candidates.truncate(policy.window);
    if candidates.len() < k {
        return Err(ClientError::InsufficientPool {
            available: candidates.len(),
            requested: k,
        });
    }

    let mut weights = policy.rank_weights(candidates.len());
    let mut chosen = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = weights.iter().sum();
        let mut target = rng.gen::<f64>() * total;
        let mut pick = None;
        for (i, w) in weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            pick = Some(i);
            if target < *w {
                break;
            }
            target -= w;
        }
        let i = pick.expect("at least k candidates carry weight");
        weights[i] = 0.0;
        chosen.push(candidates[i]);
    }
    Ok(chosen)
}

/// Shuffles `decoys` together with `own`; returns the ring and own's index.
pub fn build_ring<R: RngCore + CryptoRng>(
    own: &GroupPoint,
    decoys: &[GroupPoint],
    rng: &mut R,
) -> Result<(Ring, usize), ClientError> {
    let mut members = Vec::with_capacity(decoys.len() + 1);
    members.extend_from_slice(decoys);
    members.push(*own);
    members.shuffle(rng);
    let ring = Ring::new(members).map_err(|e| match e {
        LsagError::DuplicateMember(_) => ClientError::DuplicateMember,
        other => ClientError::Signer(other),
    })?;
    let pi = ring.position(own).expect("own was inserted");
    Ok((ring, pi))
}

/// `[AppCall(Deposit, [P]), Payment(escrow, denomination)]`, one minimum fee each.
pub fn make_deposit(
    keypair: &KeyPair,
    sender: Address,
    config: &ContractConfig,
) -> Vec<Transaction> {
    let p = serialize_point(keypair.commitment()).expect("commitment is never the identity");
    let call = AppCall {
        app_id: config.app_id,
        method: AppMethod::Deposit,
        args: vec![HexBytes(p.to_vec())],
        box_refs: vec![HexBytes(commitment_key(keypair.commitment()))],
    };
    vec![
        Transaction::app_call(sender, MIN_FEE, call),
        Transaction::payment(sender, config.escrow, config.denomination, MIN_FEE),
    ]
}

/// Everything the client produced for one withdrawal.
#[derive(Debug, Clone)]
pub struct WithdrawalPlan {
    pub ring: Ring,
    pub pi: usize,
    pub key_image: GroupPoint,
    pub recipient: Address,
    pub packed: PackedProof,
    pub transaction: Transaction,
}

/// Signs over `ring` with `m = recipient` and wraps the result in a
/// withdraw call carrying fees for the call, its inner payment and opups.
pub fn make_withdraw<R: RngCore + CryptoRng>(
    keypair: &KeyPair,
    ring: &Ring,
    pi: usize,
    recipient: Address,
    sender: Address,
    config: &ContractConfig,
    rng: &mut R,
) -> Result<WithdrawalPlan, ClientError> {
    let sig = lsag::sign(keypair.secret(), ring, pi, &recipient.0, rng)?;
    let packed = codec::pack(ring, &sig)?;
    let image = serialize_point(keypair.key_image()).expect("key image is never the identity");

    let mut box_refs = vec![HexBytes(nullifier_key(keypair.key_image()))];
    box_refs.extend(ring.members().iter().map(|p| HexBytes(commitment_key(p))));
    let call = AppCall {
        app_id: config.app_id,
        method: AppMethod::Withdraw,
        args: vec![
            HexBytes(image.to_vec()),
            HexBytes(packed.as_bytes().to_vec()),
            HexBytes(recipient.0.to_vec()),
        ],
        box_refs,
    };
    let transaction = Transaction::app_call(sender, config.withdraw_fee(ring.len()), call);
    Ok(WithdrawalPlan {
        ring: ring.clone(),
        pi,
        key_image: *keypair.key_image(),
        recipient,
        packed,
        transaction,
    })
}

/// Full client flow: pick `ring_size - 1` decoys from the ledger, shuffle,
/// sign and build the transaction.
#[allow(clippy::too_many_arguments)]
pub fn plan_withdrawal<R: RngCore + CryptoRng>(
    state: &LedgerState,
    keypair: &KeyPair,
    ring_size: usize,
    policy: &DecoyPolicy,
    recipient: Address,
    sender: Address,
    config: &ContractConfig,
    rng: &mut R,
) -> Result<WithdrawalPlan, ClientError> {
    let records = list_commitments(state);
    let decoys = select_decoys(
        &records,
        keypair.commitment(),
        ring_size.saturating_sub(1),
        policy,
        rng,
    )?;
    let decoy_points: Vec<GroupPoint> = decoys.iter().map(|r| r.point).collect();
    let (ring, pi) = build_ring(keypair.commitment(), &decoy_points, rng)?;
    make_withdraw(keypair, &ring, pi, recipient, sender, config, rng)
}

/// On-disk keypair document. `x` is the secret.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyFile {
    pub secret: bool,
    pub x: String,
    #[serde(rename = "P")]
    pub commitment: String,
    #[serde(rename = "I")]
    pub key_image: String,
}

#[derive(Debug, Error)]
pub enum KeyFileError {
    #[error("malformed key file: {0}")]
    Malformed(String),
    #[error("key file fields are inconsistent with the secret")]
    Inconsistent,
}

impl KeyFile {
    pub fn from_keypair(kp: &KeyPair) -> Self {
        KeyFile {
            secret: true,
            x: hex::encode(kp.secret().to_be_bytes()),
            commitment: kp.commitment().to_hex().expect("non-identity"),
            key_image: kp.key_image().to_hex().expect("non-identity"),
        }
    }

    pub fn to_keypair(&self) -> Result<KeyPair, KeyFileError> {
        let mut x = [0u8; 32];
        hex::decode_to_slice(&self.x, &mut x)
            .map_err(|e| KeyFileError::Malformed(e.to_string()))?;
        let secret = Scalar::from_be_bytes_canonical(&x)
            .map_err(|e| KeyFileError::Malformed(e.to_string()))?;
        let kp =
            KeyPair::from_secret(secret).map_err(|e| KeyFileError::Malformed(e.to_string()))?;
        let p = kp.commitment().to_hex().expect("non-identity");
        let i = kp.key_image().to_hex().expect("non-identity");
        if p != self.commitment.to_lowercase() || i != self.key_image.to_lowercase() {
            return Err(KeyFileError::Inconsistent);
        }
        Ok(kp)
    }
}
