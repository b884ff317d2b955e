//! Obscura: a privacy pool built on linkable ring signatures over BN254,
//! together with a simulated execution environment to run it in.
//!
//! Layering, bottom up:
//!
//! * [`curve`]: group arithmetic, generators, encodings, challenge hash.
//! * [`lsag`]: key generation, signing, verification, audit disclosure.
//! * [`codec`]: the packed `96n + 33` byte proof payload.
//! * [`ledger`]: accounts, boxes, atomic groups, opcode metering.
//! * [`contract`]: the mixer's deposit and withdrawal logic.
//! * [`client`]: decoy selection, ring shuffling, transaction building.
//! * [`lens`] and [`scenario`]: anonymity analysis and scripted runs.

pub mod client;
pub mod codec;
pub mod contract;
pub mod curve;
pub mod ledger;
pub mod lens;
pub mod lsag;
pub mod scenario;

pub use client::{CommitmentRecord, DecoyPolicy, KeyFile, WithdrawalPlan};
pub use codec::{pack, unpack, PackedProof};
pub use contract::{compute_payout, ContractConfig, OpupPolicy};
pub use curve::{Challenge, GroupPoint, Scalar};
pub use ledger::{
    submit_group, Address, BudgetMeter, CostTable, LedgerState, Receipt, RejectReason, Rejection,
    Transaction,
};
pub use lens::{anonymity_report, chain_reaction, AnonymityReport, AttributionReport};
pub use lsag::{KeyPair, LsagSignature, Ring};
pub use scenario::{run_scenario, ScenarioScript, Transcript};
