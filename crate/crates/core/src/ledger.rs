//! Deterministic simulator of the constrained execution environment.
//!
//! A [`LedgerState`] is a plain value. [`submit_group`] evaluates an atomic
//! group against a scratch copy and either returns the successor state or a
//! [`Rejection`], leaving the input untouched.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::contract::{self, ContractConfig};
use crate::curve::GroupPoint;

/// Minimum fee per transaction, inner transactions included.
pub const MIN_FEE: u64 = 1_000;
pub const MAX_BOX_KEY_LEN: usize = 64;

/// A 32-byte account identifier.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Address(pub [u8; 32]);

impl Address {
    /// Deterministic address from a label, used for simulated actors.
    pub fn derive(label: &[u8]) -> Self {
        Address(Sha256::digest(label).into())
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out)?;
        Ok(Address(out))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Address::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Byte string carried as lowercase hex in documents.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct HexBytes(pub Vec<u8>);

impl fmt::Debug for HexBytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(&self.0))
    }
}

impl From<Vec<u8>> for HexBytes {
    fn from(v: Vec<u8>) -> Self {
        HexBytes(v)
    }
}

impl From<&[u8]> for HexBytes {
    fn from(v: &[u8]) -> Self {
        HexBytes(v.to_vec())
    }
}

impl Serialize for HexBytes {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(&self.0))
    }
}

impl<'de> Deserialize<'de> for HexBytes {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(&s)
            .map(HexBytes)
            .map_err(serde::de::Error::custom)
    }
}

/// Opcode prices, in budget units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostTable {
    pub base_budget: u64,
    pub opup_contribution: u64,
    pub scalar_mul: u64,
    pub ec_add: u64,
    pub hash_iteration: u64,
    /// Parsing and box assertions outside the ring loop.
    pub fixed_overhead: u64,
}

impl Default for CostTable {
    fn default() -> Self {
        CostTable {
            base_budget: 700,
            opup_contribution: 700,
            scalar_mul: 2_675,
            ec_add: 100,
            hash_iteration: 100,
            fixed_overhead: 400,
        }
    }
}

impl CostTable {
    /// Four scalar multiplications, two additions and one hash.
    pub const fn per_ring_index(&self) -> u64 {
        4 * self.scalar_mul + 2 * self.ec_add + self.hash_iteration
    }

    /// Units a withdrawal over a ring of `n` consumes.
    pub const fn withdrawal_cost(&self, n: u64) -> u64 {
        self.per_ring_index() * n + self.fixed_overhead
    }

    /// Smallest opup count whose pooled budget covers a ring of `n`.
    pub const fn min_opups(&self, n: u64) -> u64 {
        self.withdrawal_cost(n)
            .saturating_sub(self.base_budget)
            .div_ceil(self.opup_contribution)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("budget exceeded: {consumed} + {requested} > {pooled}")]
pub struct BudgetExceeded {
    pub pooled: u64,
    pub consumed: u64,
    pub requested: u64,
}

/// Pooled opcode budget for one application call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetMeter {
    pub pooled: u64,
    pub consumed: u64,
    pub opups: u64,
    contribution: u64,
}

impl BudgetMeter {
    pub fn new(costs: &CostTable) -> Self {
        BudgetMeter {
            pooled: costs.base_budget,
            consumed: 0,
            opups: 0,
            contribution: costs.opup_contribution,
        }
    }

    pub fn charge(&mut self, units: u64) -> Result<(), BudgetExceeded> {
        let after = self.consumed.saturating_add(units);
        if after > self.pooled {
            return Err(BudgetExceeded {
                pooled: self.pooled,
                consumed: self.consumed,
                requested: units,
            });
        }
        self.consumed = after;
        Ok(())
    }

    /// Adds one opup's contribution. The dummy call itself is free.
    pub fn opup(&mut self) {
        self.opups += 1;
        self.pooled += self.contribution;
    }

    pub fn remaining(&self) -> u64 {
        self.pooled - self.consumed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AppMethod {
    Deposit,
    Withdraw,
    OpUp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppCall {
    pub app_id: u64,
    pub method: AppMethod,
    pub args: Vec<HexBytes>,
    pub box_refs: Vec<HexBytes>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TxnKind {
    Payment { receiver: Address, amount: u64 },
    AppCall(AppCall),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub sender: Address,
    pub fee: u64,
    #[serde(flatten)]
    pub kind: TxnKind,
}

impl Transaction {
    pub fn payment(sender: Address, receiver: Address, amount: u64, fee: u64) -> Self {
        Transaction {
            sender,
            fee,
            kind: TxnKind::Payment { receiver, amount },
        }
    }

    pub fn app_call(sender: Address, fee: u64, call: AppCall) -> Self {
        Transaction {
            sender,
            fee,
            kind: TxnKind::AppCall(call),
        }
    }

    pub fn as_app_call(&self) -> Option<&AppCall> {
        match &self.kind {
            TxnKind::AppCall(c) => Some(c),
            TxnKind::Payment { .. } => None,
        }
    }
}

/// Why a group was not committed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Error)]
pub enum RejectReason {
    #[error("empty group")]
    EmptyGroup,
    #[error("group fees below the pooled minimum")]
    InsufficientFee,
    #[error("insufficient balance")]
    InsufficientBalance,
    #[error("unknown application")]
    UnknownApp,
    #[error("method not supported by this application")]
    UnsupportedMethod,
    #[error("opcode budget exceeded")]
    BudgetExceeded,
    #[error("box already exists")]
    BoxAlreadyExists,
    #[error("box key longer than 64 bytes or empty")]
    KeyTooLong,
    #[error("box access without a reference")]
    MissingBoxReference,
    #[error("group shape does not match the method")]
    WrongGroupShape,
    #[error("payment amount is not the pool denomination")]
    WrongAmount,
    #[error("payment receiver is not the escrow")]
    WrongReceiver,
    #[error("commitment already registered")]
    DuplicateCommitment,
    #[error("malformed point argument")]
    MalformedPoint,
    #[error("malformed proof payload")]
    MalformedProof,
    #[error("key image already spent")]
    DoubleSpend,
    #[error("ring member has no commitment box")]
    UnknownRingMember,
    #[error("ring larger than the contract allows")]
    RingTooLarge,
    #[error("ring smaller than the contract allows")]
    RingTooSmall,
    #[error("ring contains a duplicate member")]
    RingDuplicate,
    #[error("signature closure failed")]
    InvalidSignature,
}

/// Meter snapshot attached to receipts and rejections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeterStats {
    pub pooled: u64,
    pub consumed: u64,
    pub opups: u64,
}

impl From<&BudgetMeter> for MeterStats {
    fn from(m: &BudgetMeter) -> Self {
        MeterStats {
            pooled: m.pooled,
            consumed: m.consumed,
            opups: m.opups,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("group rejected at transaction {txn_index}: {reason}")]
pub struct Rejection {
    pub reason: RejectReason,
    pub txn_index: usize,
    /// Budget state at the point of failure, for metered calls.
    pub meter: Option<MeterStats>,
}

/// Something the application recorded while executing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum AppEvent {
    Deposit {
        commitment: GroupPoint,
        deposit_index: u64,
    },
    Withdraw {
        key_image: GroupPoint,
        ring: Vec<GroupPoint>,
        recipient: Address,
        payout: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InnerPayment {
    pub receiver: Address,
    pub amount: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub round: u64,
    pub txn_count: usize,
    pub inner_opups: u64,
    pub inner_payments: Vec<InnerPayment>,
    pub fees_paid: u64,
    pub events: Vec<AppEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<MeterStats>,
}

impl Receipt {
    pub fn inner_txn_count(&self) -> u64 {
        self.inner_opups + self.inner_payments.len() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AppGlobals {
    pub deposit_counter: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LedgerState {
    pub round: u64,
    pub accounts: BTreeMap<Address, u64>,
    pub boxes: BTreeMap<Vec<u8>, Vec<u8>>,
    pub app_globals: AppGlobals,
    /// Fees paid by committed groups.
    pub fees_collected: u64,
    /// Funds backing allocated boxes.
    pub mbr_locked: u64,
    pub log: Vec<Receipt>,
}

#[derive(Debug, Error)]
#[error("malformed ledger document: {0}")]
pub struct MalformedDocument(String);

#[derive(Serialize, Deserialize)]
struct LedgerDocument {
    round: u64,
    accounts: BTreeMap<Address, u64>,
    boxes: BTreeMap<HexBytes, HexBytes>,
    app_globals: AppGlobals,
    fees_collected: u64,
    mbr_locked: u64,
    log: Vec<Receipt>,
}

impl LedgerState {
    /// Empty chain with an empty escrow, a funded MBR reserve, and the
    /// given accounts funded.
    pub fn genesis(config: &ContractConfig, funded: &[(Address, u64)]) -> Self {
        let mut state = LedgerState::default();
        state.accounts.insert(config.escrow, 0);
        state
            .accounts
            .insert(config.mbr_reserve, config.mbr_reserve_funding);
        for (addr, amount) in funded {
            *state.accounts.entry(*addr).or_default() += amount;
        }
        state
    }

    pub fn balance(&self, addr: &Address) -> u64 {
        self.accounts.get(addr).copied().unwrap_or(0)
    }

    /// Sum of balances, collected fees and locked storage deposits.
    pub fn total_value(&self) -> u128 {
        self.accounts.values().map(|&b| b as u128).sum::<u128>()
            + self.fees_collected as u128
            + self.mbr_locked as u128
    }

    pub fn box_lookup(&self, key: &[u8]) -> Option<&[u8]> {
        self.boxes.get(key).map(Vec::as_slice)
    }

    /// Creates a box, locking `mbr` from `payer`.
    pub fn box_write(
        &mut self,
        key: &[u8],
        value: &[u8],
        payer: &Address,
        mbr: u64,
    ) -> Result<(), RejectReason> {
        if key.is_empty() || key.len() > MAX_BOX_KEY_LEN {
            return Err(RejectReason::KeyTooLong);
        }
        if self.boxes.contains_key(key) {
            return Err(RejectReason::BoxAlreadyExists);
        }
        self.debit(payer, mbr)?;
        self.mbr_locked += mbr;
        self.boxes.insert(key.to_vec(), value.to_vec());
        Ok(())
    }

    pub fn transfer(
        &mut self,
        from: &Address,
        to: &Address,
        amount: u64,
    ) -> Result<(), RejectReason> {
        self.debit(from, amount)?;
        *self.accounts.entry(*to).or_default() += amount;
        Ok(())
    }

    fn debit(&mut self, from: &Address, amount: u64) -> Result<(), RejectReason> {
        let bal = self.accounts.entry(*from).or_default();
        *bal = bal
            .checked_sub(amount)
            .ok_or(RejectReason::InsufficientBalance)?;
        Ok(())
    }

    /// Moves the round counter forward without a group.
    pub fn advance_rounds(&mut self, rounds: u64) {
        self.round += rounds;
    }

    pub fn persist(&self) -> String {
        let doc = LedgerDocument {
            round: self.round,
            accounts: self.accounts.clone(),
            boxes: self
                .boxes
                .iter()
                .map(|(k, v)| (HexBytes(k.clone()), HexBytes(v.clone())))
                .collect(),
            app_globals: self.app_globals,
            fees_collected: self.fees_collected,
            mbr_locked: self.mbr_locked,
            log: self.log.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("ledger document always serializes")
    }

    pub fn load(document: &str) -> Result<Self, MalformedDocument> {
        let doc: LedgerDocument =
            serde_json::from_str(document).map_err(|e| MalformedDocument(e.to_string()))?;
        Ok(LedgerState {
            round: doc.round,
            accounts: doc.accounts,
            boxes: doc.boxes.into_iter().map(|(k, v)| (k.0, v.0)).collect(),
            app_globals: doc.app_globals,
            fees_collected: doc.fees_collected,
            mbr_locked: doc.mbr_locked,
            log: doc.log,
        })
    }
}

/// Scratch execution state for one group.
pub struct ExecContext<'a> {
    pub state: LedgerState,
    pub config: &'a ContractConfig,
    pub group: &'a [Transaction],
    pub(crate) inner_opups: u64,
    pub(crate) inner_payments: Vec<InnerPayment>,
    pub(crate) events: Vec<AppEvent>,
    pub(crate) budget: Option<MeterStats>,
}

impl<'a> ExecContext<'a> {
    /// One inner call to the dummy application.
    pub fn opup(&mut self, meter: &mut BudgetMeter, app_id: u64) -> Result<(), RejectReason> {
        if app_id != self.config.dummy_app_id {
            return Err(RejectReason::UnknownApp);
        }
        meter.opup();
        self.inner_opups += 1;
        Ok(())
    }

    pub fn inner_payment(
        &mut self,
        from: &Address,
        to: &Address,
        amount: u64,
    ) -> Result<(), RejectReason> {
        self.state.transfer(from, to, amount)?;
        self.inner_payments.push(InnerPayment {
            receiver: *to,
            amount,
        });
        Ok(())
    }

    pub fn emit(&mut self, event: AppEvent) {
        self.events.push(event);
    }

    pub fn record_budget(&mut self, meter: &BudgetMeter) {
        self.budget = Some(meter.into());
    }
}

/// Executes `group` atomically. On success returns the successor state
/// (round advanced by one, receipt appended to the log).
pub fn submit_group(
    state: &LedgerState,
    config: &ContractConfig,
    group: &[Transaction],
) -> Result<(LedgerState, Receipt), Rejection> {
    let reject = |txn_index, reason| Rejection {
        reason,
        txn_index,
        meter: None,
    };
    if group.is_empty() {
        return Err(reject(0, RejectReason::EmptyGroup));
    }
    let mut ctx = ExecContext {
        state: state.clone(),
        config,
        group,
        inner_opups: 0,
        inner_payments: Vec::new(),
        events: Vec::new(),
        budget: None,
    };

    let mut fees_paid = 0u64;
    for (i, txn) in group.iter().enumerate() {
        ctx.state
            .debit(&txn.sender, txn.fee)
            .map_err(|r| reject(i, r))?;
        ctx.state.fees_collected += txn.fee;
        fees_paid += txn.fee;
    }

    for (i, txn) in group.iter().enumerate() {
        match &txn.kind {
            TxnKind::Payment { receiver, amount } => ctx
                .state
                .transfer(&txn.sender, receiver, *amount)
                .map_err(|r| reject(i, r))?,
            TxnKind::AppCall(call) => {
                contract::dispatch(&mut ctx, i, call).map_err(|reason| Rejection {
                    reason,
                    txn_index: i,
                    meter: ctx.budget,
                })?;
            }
        }
    }

    let total_txns = group.len() as u64 + ctx.inner_opups + ctx.inner_payments.len() as u64;
    if fees_paid < MIN_FEE * total_txns {
        return Err(reject(0, RejectReason::InsufficientFee));
    }

    let mut next = ctx.state;
    next.round += 1;
    let receipt = Receipt {
        round: next.round,
        txn_count: group.len(),
        inner_opups: ctx.inner_opups,
        inner_payments: ctx.inner_payments,
        fees_paid,
        events: ctx.events,
        budget: ctx.budget,
    };
    next.log.push(receipt.clone());
    Ok((next, receipt))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_index_cost_is_eleven_thousand() {
        assert_eq!(CostTable::default().per_ring_index(), 11_000);
    }

    #[test]
    fn meter_base_budget_edges() {
        let costs = CostTable::default();
        let mut m = BudgetMeter::new(&costs);
        assert!(m.charge(700).is_ok());
        let mut m = BudgetMeter::new(&costs);
        assert!(m.charge(701).is_err());
        assert_eq!(m.consumed, 0);
    }

    #[test]
    fn opups_extend_pool() {
        let costs = CostTable::default();
        let mut m = BudgetMeter::new(&costs);
        m.opup();
        assert_eq!(m.pooled, 1_400);
        for _ in 1..100 {
            m.opup();
        }
        assert_eq!(m.pooled, 700 + 70_000);
        assert!(m.charge(55_000).is_ok());
    }

    #[test]
    fn min_opups_matches_ceiling_formula() {
        let costs = CostTable::default();
        for n in 1..=8u64 {
            let need = 11_000 * n + 400;
            assert_eq!(costs.min_opups(n), need.div_ceil(700) - 1, "n = {n}");
            assert!(costs.min_opups(n) <= 20 * n || n > 5);
        }
    }

    #[test]
    fn box_rules() {
        let payer = Address::derive(b"payer");
        let mut s = LedgerState::default();
        s.accounts.insert(payer, 1_000_000);
        s.box_write(b"k", &[1; 64], &payer, 100_000).unwrap();
        assert_eq!(s.box_lookup(b"k"), Some(&[1u8; 64][..]));
        assert_eq!(s.box_lookup(b"absent"), None);
        assert_eq!(
            s.box_write(b"k", &[2; 64], &payer, 100_000),
            Err(RejectReason::BoxAlreadyExists)
        );
        assert_eq!(
            s.box_write(&[0u8; 65], &[], &payer, 100_000),
            Err(RejectReason::KeyTooLong)
        );
        assert_eq!(s.balance(&payer), 900_000);
        assert_eq!(s.mbr_locked, 100_000);
    }

    #[test]
    fn persist_roundtrip_and_malformed() {
        let fresh = LedgerState::default();
        assert_eq!(LedgerState::load(&fresh.persist()).unwrap(), fresh);

        let payer = Address::derive(b"p");
        let mut s = LedgerState::default();
        s.accounts.insert(payer, 10_000_000);
        for i in 0..10u8 {
            s.box_write(&[b'c', i], &[i; 64], &payer, 100_000).unwrap();
        }
        let doc = s.persist();
        assert_eq!(LedgerState::load(&doc).unwrap(), s);
        assert!(LedgerState::load(&doc[..doc.len() / 2]).is_err());
    }

    #[test]
    fn hex_is_lowercase_without_prefix() {
        let mut s = LedgerState::default();
        s.accounts.insert(Address([0xAB; 32]), 5);
        let doc = s.persist();
        assert!(doc.contains(&"ab".repeat(32)));
        assert!(!doc.contains("0x"));
    }
}
