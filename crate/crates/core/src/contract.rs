//! The mixer application: deposit registration and the metered withdrawal
//! pipeline, executed inside [`crate::ledger::submit_group`].

use serde::{Deserialize, Serialize};

use crate::codec::{self, CodecError};
use crate::curve::{
    deserialize_point, generator_g, generator_h, hash_to_challenge, point_add, point_mul,
    point_mul_challenge, serialize_point, GroupPoint, POINT_BYTES,
};
use crate::ledger::{
    Address, AppCall, AppEvent, AppMethod, BudgetExceeded, BudgetMeter, CostTable, ExecContext,
    RejectReason, TxnKind, MIN_FEE,
};
use crate::lsag::{LsagError, LsagSignature, Ring};

pub const COMMITMENT_PREFIX: u8 = b'c';
pub const NULLIFIER_PREFIX: u8 = b'n';

/// How many opups a withdrawal issues before verifying.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpupPolicy {
    /// `factor * n` calls for a ring of `n`.
    PerRingMember(u64),
    /// A fixed count regardless of ring size.
    Fixed(u64),
}

impl OpupPolicy {
    pub fn count(&self, ring_size: usize) -> u64 {
        match *self {
            OpupPolicy::PerRingMember(f) => f * ring_size as u64,
            OpupPolicy::Fixed(k) => k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractConfig {
    pub app_id: u64,
    pub dummy_app_id: u64,
    pub escrow: Address,
    pub denomination: u64,
    pub box_mbr: u64,
    pub min_ring: usize,
    pub max_ring: usize,
    pub opup_policy: OpupPolicy,
    pub costs: CostTable,
    /// Account that funds commitment-box MBR at deposit time. The escrow
    /// itself funds only the nullifier box, out of the withdrawn amount.
    pub mbr_reserve: Address,
    /// Genesis balance of `mbr_reserve`.
    pub mbr_reserve_funding: u64,
}

impl Default for ContractConfig {
    fn default() -> Self {
        ContractConfig {
            app_id: 1001,
            dummy_app_id: 1002,
            escrow: Address::derive(b"Obscura/escrow/1001"),
            denomination: 1_000_000,
            box_mbr: 100_000,
            min_ring: 2,
            max_ring: 5,
            opup_policy: OpupPolicy::PerRingMember(20),
            costs: CostTable::default(),
            mbr_reserve: Address::derive(b"Obscura/mbr-reserve/1001"),
            mbr_reserve_funding: 1_000_000_000,
        }
    }
}

impl ContractConfig {
    pub fn payout(&self) -> u64 {
        compute_payout(self)
    }

    /// Fee a withdrawal over a ring of `n` must attach: the call itself,
    /// the inner payment, and every opup.
    pub fn withdraw_fee(&self, ring_size: usize) -> u64 {
        (2 + self.opup_policy.count(ring_size)) * MIN_FEE
    }
}

/// Denomination less one transaction fee and one box MBR.
pub fn compute_payout(config: &ContractConfig) -> u64 {
    config.denomination - MIN_FEE - config.box_mbr
}

/// `"c" || P[0:32]`.
pub fn commitment_key(p: &GroupPoint) -> Vec<u8> {
    prefixed_key(COMMITMENT_PREFIX, p)
}

/// `"n" || I[0:32]`.
pub fn nullifier_key(i: &GroupPoint) -> Vec<u8> {
    prefixed_key(NULLIFIER_PREFIX, i)
}

fn prefixed_key(prefix: u8, p: &GroupPoint) -> Vec<u8> {
    let enc = serialize_point(p).expect("protocol points are never the identity");
    let mut key = Vec::with_capacity(33);
    key.push(prefix);
    key.extend_from_slice(&enc[..32]);
    key
}

pub(crate) fn dispatch(
    ctx: &mut ExecContext<'_>,
    index: usize,
    call: &AppCall,
) -> Result<(), RejectReason> {
    if call.app_id == ctx.config.dummy_app_id {
        return match call.method {
            AppMethod::OpUp => Ok(()),
            _ => Err(RejectReason::UnsupportedMethod),
        };
    }
    if call.app_id != ctx.config.app_id {
        return Err(RejectReason::UnknownApp);
    }
    match call.method {
        AppMethod::Deposit => handle_deposit(ctx, index),
        AppMethod::Withdraw => handle_withdraw(ctx, call),
        AppMethod::OpUp => Err(RejectReason::UnsupportedMethod),
    }
}

/// Group must be `[AppCall(Deposit, [P]), Payment(escrow, denomination)]`.
pub fn handle_deposit(ctx: &mut ExecContext<'_>, index: usize) -> Result<(), RejectReason> {
    let config = ctx.config;
    let group = ctx.group;
    if group.len() != 2 || index != 0 {
        return Err(RejectReason::WrongGroupShape);
    }
    let (Some(call), TxnKind::Payment { receiver, amount }) =
        (group[0].as_app_call(), &group[1].kind)
    else {
        return Err(RejectReason::WrongGroupShape);
    };
    if *receiver != config.escrow {
        return Err(RejectReason::WrongReceiver);
    }
    if *amount != config.denomination {
        return Err(RejectReason::WrongAmount);
    }
    let [arg] = call.args.as_slice() else {
        return Err(RejectReason::MalformedPoint);
    };
    let commitment = deserialize_point(&arg.0).map_err(|_| RejectReason::MalformedPoint)?;
    let key = commitment_key(&commitment);
    if ctx.state.box_lookup(&key).is_some() {
        return Err(RejectReason::DuplicateCommitment);
    }
    ctx.state
        .box_write(&key, &arg.0, &config.mbr_reserve, config.box_mbr)?;
    let deposit_index = ctx.state.app_globals.deposit_counter;
    ctx.state.app_globals.deposit_counter += 1;
    ctx.emit(AppEvent::Deposit {
        commitment,
        deposit_index,
    });
    Ok(())
}

struct WithdrawArgs {
    key_image: GroupPoint,
    ring: Ring,
    sig: LsagSignature,
    recipient: [u8; 32],
}

fn parse_withdraw(config: &ContractConfig, call: &AppCall) -> Result<WithdrawArgs, RejectReason> {
    let [image, proof, recipient] = call.args.as_slice() else {
        return Err(RejectReason::MalformedProof);
    };
    let key_image = deserialize_point(&image.0).map_err(|_| RejectReason::MalformedPoint)?;
    let recipient: [u8; 32] = recipient
        .0
        .as_slice()
        .try_into()
        .map_err(|_| RejectReason::MalformedProof)?;

    let n = codec::declared_ring_size(&proof.0).map_err(|_| RejectReason::MalformedProof)?;
    if n > config.max_ring {
        return Err(RejectReason::RingTooLarge);
    }
    if n < config.min_ring {
        return Err(RejectReason::RingTooSmall);
    }
    let (ring, sig) = codec::unpack(&proof.0).map_err(|e| match e {
        CodecError::Ring(LsagError::DuplicateMember(_)) => RejectReason::RingDuplicate,
        _ => RejectReason::MalformedProof,
    })?;
    Ok(WithdrawArgs {
        key_image,
        ring,
        sig,
        recipient,
    })
}

/// The withdrawal pipeline: provision budget, check the nullifier, check
/// ring membership, run the metered verifier, then settle.
pub fn handle_withdraw(ctx: &mut ExecContext<'_>, call: &AppCall) -> Result<(), RejectReason> {
    let config = ctx.config;
    let args = parse_withdraw(config, call)?;

    let nullifier = nullifier_key(&args.key_image);
    let commitment_keys: Vec<Vec<u8>> = args.ring.members().iter().map(commitment_key).collect();
    let referenced = |k: &[u8]| call.box_refs.iter().any(|r| r.0 == k);
    if !referenced(&nullifier) || !commitment_keys.iter().all(|k| referenced(k)) {
        return Err(RejectReason::MissingBoxReference);
    }

    let costs = &config.costs;
    let mut meter = BudgetMeter::new(costs);
    let result = run_pipeline(ctx, &mut meter, &args, &nullifier, &commitment_keys);
    ctx.record_budget(&meter);
    result?;

    let image_bytes = serialize_point(&args.key_image).expect("validated");
    ctx.state
        .box_write(&nullifier, &image_bytes, &config.escrow, config.box_mbr)?;
    let recipient = Address(args.recipient);
    let payout = config.payout();
    ctx.inner_payment(&config.escrow, &recipient, payout)?;
    ctx.emit(AppEvent::Withdraw {
        key_image: args.key_image,
        ring: args.ring.into_members(),
        recipient,
        payout,
    });
    Ok(())
}

fn run_pipeline(
    ctx: &mut ExecContext<'_>,
    meter: &mut BudgetMeter,
    args: &WithdrawArgs,
    nullifier: &[u8],
    commitment_keys: &[Vec<u8>],
) -> Result<(), RejectReason> {
    let config = ctx.config;
    let costs = &config.costs;
    let budget = |_: BudgetExceeded| RejectReason::BudgetExceeded;

    for _ in 0..config.opup_policy.count(args.ring.len()) {
        ctx.opup(meter, config.dummy_app_id)?;
    }
    meter.charge(costs.fixed_overhead).map_err(budget)?;

    if ctx.state.box_lookup(nullifier).is_some() {
        return Err(RejectReason::DoubleSpend);
    }

    for (member, key) in args.ring.members().iter().zip(commitment_keys) {
        let stored = ctx.state.box_lookup(key);
        let expected = serialize_point(member).expect("ring members are never the identity");
        if stored != Some(&expected[..POINT_BYTES]) {
            return Err(RejectReason::UnknownRingMember);
        }
    }

    let g = generator_g();
    let h = generator_h();
    let mut c = args.sig.c0;
    for (member, s) in args.ring.members().iter().zip(&args.sig.responses) {
        meter.charge(2 * costs.scalar_mul).map_err(budget)?;
        meter.charge(costs.ec_add).map_err(budget)?;
        let l = point_add(&point_mul(&g, s), &point_mul_challenge(member, &c));

        meter.charge(2 * costs.scalar_mul).map_err(budget)?;
        meter.charge(costs.ec_add).map_err(budget)?;
        let r = point_add(&point_mul(&h, s), &point_mul_challenge(&args.key_image, &c));

        meter.charge(costs.hash_iteration).map_err(budget)?;
        c = hash_to_challenge(&args.recipient, &l, &r)
            .map_err(|_| RejectReason::InvalidSignature)?;
    }

    if c != args.sig.c0 {
        return Err(RejectReason::InvalidSignature);
    }
    Ok(())
}
