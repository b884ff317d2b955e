//! Anonymity analysis over committed ledger history.
//!
//! [`chain_reaction`] performs iterative elimination: a withdrawal whose ring
//! has exactly one member not already explained by another key image must
//! have spent that member.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::curve::GroupPoint;
use crate::ledger::{Address, AppEvent, LedgerState};

/// One committed withdrawal as it appears in the log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WithdrawalObservation {
    pub ring: Vec<GroupPoint>,
    pub key_image: GroupPoint,
    pub round: u64,
    pub recipient: Address,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AttributionReport {
    /// key image (hex) -> commitment (hex), where deducible.
    pub attributions: BTreeMap<String, String>,
    /// key image (hex) -> ring members not explained by another key image.
    pub effective_anonymity: BTreeMap<String, usize>,
}

fn hex_of(p: &GroupPoint) -> String {
    p.to_hex().expect("logged points are never the identity")
}

pub fn observations(state: &LedgerState) -> Vec<WithdrawalObservation> {
    state
        .log
        .iter()
        .flat_map(|receipt| {
            receipt.events.iter().filter_map(move |e| match e {
                AppEvent::Withdraw {
                    key_image,
                    ring,
                    recipient,
                    ..
                } => Some(WithdrawalObservation {
                    ring: ring.clone(),
                    key_image: *key_image,
                    round: receipt.round,
                    recipient: *recipient,
                }),
                _ => None,
            })
        })
        .collect()
}

/// Fixpoint elimination. Each pass attributes, simultaneously, every
/// withdrawal left with a single unexplained member, so the result does not
/// depend on observation order.
pub fn chain_reaction(observations: &[WithdrawalObservation]) -> AttributionReport {
    let obs: Vec<(String, Vec<String>)> = observations
        .iter()
        .map(|o| (hex_of(&o.key_image), o.ring.iter().map(hex_of).collect()))
        .collect();

    // commitment -> key image it is attributed to
    let mut owner: HashMap<String, String> = HashMap::new();
    let mut attributions: BTreeMap<String, String> = BTreeMap::new();

    let unexplained = |ring: &[String], image: &str, owner: &HashMap<String, String>| {
        ring.iter()
            .filter(|m| owner.get(*m).is_none_or(|o| o == image))
            .cloned()
            .collect::<Vec<_>>()
    };

    loop {
        let mut found: Vec<(String, String)> = Vec::new();
        for (image, ring) in &obs {
            if attributions.contains_key(image) {
                continue;
            }
            if let [only] = unexplained(ring, image, &owner).as_slice() {
                found.push((image.clone(), only.clone()));
            }
        }
        if found.is_empty() {
            break;
        }
        found.sort();
        for (image, member) in found {
            owner.entry(member.clone()).or_insert_with(|| image.clone());
            attributions.insert(image, member);
        }
    }

    let effective_anonymity = obs
        .iter()
        .map(|(image, ring)| {
            let n = unexplained(ring, image, &owner).len().max(1);
            (image.clone(), n)
        })
        .collect();

    AttributionReport {
        attributions,
        effective_anonymity,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WithdrawalRow {
    pub round: u64,
    pub key_image: String,
    pub recipient: Address,
    pub ring_size: usize,
    /// Rounds between each member's deposit and this withdrawal, ring order.
    pub member_ages: Vec<u64>,
    pub effective_anonymity: usize,
    pub attributed_to: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PoolTotals {
    pub deposits: u64,
    pub spends: u64,
    pub unspent: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AnonymityReport {
    pub withdrawals: Vec<WithdrawalRow>,
    pub pool: PoolTotals,
    pub chain_reaction: AttributionReport,
}

pub fn anonymity_report(state: &LedgerState) -> AnonymityReport {
    let deposit_round: HashMap<String, u64> = crate::client::list_commitments(state)
        .into_iter()
        .map(|r| (hex_of(&r.point), r.round))
        .collect();
    let obs = observations(state);
    let chain = chain_reaction(&obs);

    let withdrawals = obs
        .iter()
        .map(|o| {
            let image = hex_of(&o.key_image);
            WithdrawalRow {
                round: o.round,
                recipient: o.recipient,
                ring_size: o.ring.len(),
                member_ages: o
                    .ring
                    .iter()
                    .map(|m| {
                        let dep = deposit_round.get(&hex_of(m)).copied().unwrap_or(o.round);
                        o.round.saturating_sub(dep)
                    })
                    .collect(),
                effective_anonymity: chain.effective_anonymity.get(&image).copied().unwrap_or(0),
                attributed_to: chain.attributions.get(&image).cloned(),
                key_image: image,
            }
        })
        .collect();

    let deposits = state.app_globals.deposit_counter;
    let spends = obs.len() as u64;
    AnonymityReport {
        withdrawals,
        pool: PoolTotals {
            deposits,
            spends,
            unspent: deposits.saturating_sub(spends),
        },
        chain_reaction: chain,
    }
}

impl AnonymityReport {
    /// Plain-text table for terminals.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "pool: {} deposits, {} spends, {} unspent",
            self.pool.deposits, self.pool.spends, self.pool.unspent
        );
        let _ = writeln!(
            out,
            "{:>6}  {:<18}  {:>4}  {:>9}  {:<18}  ages",
            "round", "key image", "n", "eff. anon", "attributed"
        );
        for row in &self.withdrawals {
            let attributed = row
                .attributed_to
                .as_deref()
                .map(|s| format!("{}..", &s[..16]))
                .unwrap_or_else(|| "-".into());
            let ages: Vec<String> = row.member_ages.iter().map(u64::to_string).collect();
            let _ = writeln!(
                out,
                "{:>6}  {:<18}  {:>4}  {:>9}  {:<18}  {}",
                row.round,
                format!("{}..", &row.key_image[..16]),
                row.ring_size,
                row.effective_anonymity,
                attributed,
                ages.join(",")
            );
        }
        out
    }
}
