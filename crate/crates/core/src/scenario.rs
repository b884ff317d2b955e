//! Scripted runs against a fresh ledger.
//!
//! ```json
//! {"seed": 7, "actions": [
//!   {"deposit": "alice"},
//!   {"withdraw": {"actor": "alice", "ring_size": 5, "delay_rounds": 2}},
//!   {"advance": 3},
//!   {"replay": 1}
//! ]}
//! ```

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{make_deposit, plan_withdrawal, DecoyPolicy};
use crate::contract::ContractConfig;
use crate::ledger::{
    submit_group, Address, LedgerState, MeterStats, Receipt, RejectReason, Transaction,
};
use crate::lens::{anonymity_report, AnonymityReport};
use crate::lsag::{keygen, KeyPair};

/// Starting balance for every actor and for the relay.
pub const ACTOR_FUNDING: u64 = 1_000_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Deposit(String),
    Withdraw {
        actor: String,
        ring_size: usize,
        #[serde(default)]
        delay_rounds: u64,
    },
    Advance(u64),
    /// Resubmit the group built by an earlier action, unchanged.
    Replay(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScript {
    pub seed: u64,
    #[serde(default)]
    pub lambda: Option<f64>,
    pub actions: Vec<Action>,
}

#[derive(Debug, Error)]
#[error("action {index}: {message}")]
pub struct ScriptError {
    pub index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Committed {
        receipt: Receipt,
    },
    Rejected {
        reason: RejectReason,
        txn_index: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        meter: Option<MeterStats>,
    },
    Advanced {
        round: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub index: usize,
    pub action: Action,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub seed: u64,
    pub entries: Vec<TranscriptEntry>,
    /// Labelled balances: `escrow`, `relay`, `actor:<name>`, `recipient:<name>`.
    pub final_balances: BTreeMap<String, u64>,
    pub meter_stats: Vec<MeterStats>,
    pub report: AnonymityReport,
}

/// A finished run. `ground_truth` maps each committed key image to the
/// commitment actually spent; it is kept out of the transcript.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub transcript: Transcript,
    pub ground_truth: BTreeMap<String, String>,
    pub state: LedgerState,
    pub config: ContractConfig,
}

pub fn actor_address(name: &str) -> Address {
    Address::derive(format!("obscura/actor/{name}").as_bytes())
}

pub fn recipient_address(name: &str) -> Address {
    Address::derive(format!("obscura/recipient/{name}").as_bytes())
}

pub fn relay_address() -> Address {
    Address::derive(b"obscura/relay")
}

struct Note {
    keypair: KeyPair,
    spent: bool,
}

pub fn run_scenario(script: &ScenarioScript) -> Result<ScenarioRun, ScriptError> {
    run_scenario_with(script, ContractConfig::default())
}

pub fn run_scenario_with(
    script: &ScenarioScript,
    config: ContractConfig,
) -> Result<ScenarioRun, ScriptError> {
    let mut rng = ChaCha20Rng::seed_from_u64(script.seed);
    let policy = match script.lambda {
        Some(l) => DecoyPolicy::with_lambda(l),
        None => DecoyPolicy::default(),
    };

    let mut actors: Vec<&str> = script
        .actions
        .iter()
        .filter_map(|a| match a {
            Action::Deposit(n) => Some(n.as_str()),
            Action::Withdraw { actor, .. } => Some(actor.as_str()),
            _ => None,
        })
        .collect();
    actors.sort_unstable();
    actors.dedup();

    let mut funded: Vec<(Address, u64)> = actors
        .iter()
        .map(|a| (actor_address(a), ACTOR_FUNDING))
        .collect();
    funded.push((relay_address(), ACTOR_FUNDING));
    let mut state = LedgerState::genesis(&config, &funded);

    let mut notes: BTreeMap<String, Vec<Note>> = BTreeMap::new();
    let mut groups: BTreeMap<usize, Vec<Transaction>> = BTreeMap::new();
    let mut ground_truth = BTreeMap::new();
    let mut entries = Vec::with_capacity(script.actions.len());
    let mut meter_stats = Vec::new();

    for (index, action) in script.actions.iter().enumerate() {
        let err = |message: String| ScriptError { index, message };
        let mut pending_truth = None;
        let group = match action {
            Action::Advance(rounds) => {
                state.advance_rounds(*rounds);
                entries.push(TranscriptEntry {
                    index,
                    action: action.clone(),
                    outcome: Outcome::Advanced { round: state.round },
                });
                continue;
            }
            Action::Deposit(actor) => {
                let kp = keygen(&mut rng);
                let group = make_deposit(&kp, actor_address(actor), &config);
                notes.entry(actor.clone()).or_default().push(Note {
                    keypair: kp,
                    spent: false,
                });
                group
            }
            Action::Withdraw {
                actor,
                ring_size,
                delay_rounds,
            } => {
                state.advance_rounds(*delay_rounds);
                let actor_notes = notes
                    .get_mut(actor)
                    .filter(|n| !n.is_empty())
                    .ok_or_else(|| err(format!("actor {actor:?} has no deposits")))?;
                // Oldest unspent note; with none left, re-spend the latest one.
                let note_idx = actor_notes
                    .iter()
                    .position(|n| !n.spent)
                    .unwrap_or(actor_notes.len() - 1);
                let note = &mut actor_notes[note_idx];
                let plan = plan_withdrawal(
                    &state,
                    &note.keypair,
                    *ring_size,
                    &policy,
                    recipient_address(actor),
                    relay_address(),
                    &config,
                    &mut rng,
                )
                .map_err(|e| err(e.to_string()))?;
                pending_truth = Some((
                    plan.key_image.to_hex().expect("non-identity"),
                    note.keypair.commitment().to_hex().expect("non-identity"),
                    note_idx,
                    actor.clone(),
                ));
                vec![plan.transaction]
            }
            Action::Replay(target) => groups
                .get(target)
                .filter(|_| *target < index)
                .cloned()
                .ok_or_else(|| err(format!("no submitted group at action {target}")))?,
        };

        let outcome = match submit_group(&state, &config, &group) {
            Ok((next, receipt)) => {
                state = next;
                if let Some(b) = receipt.budget {
                    meter_stats.push(b);
                }
                if let Some((image, commitment, idx, actor)) = pending_truth {
                    ground_truth.insert(image, commitment);
                    if let Some(n) = notes.get_mut(&actor).and_then(|v| v.get_mut(idx)) {
                        n.spent = true;
                    }
                }
                Outcome::Committed { receipt }
            }
            Err(rej) => {
                if matches!(action, Action::Deposit(_)) {
                    // The note never made it on chain.
                    if let Action::Deposit(actor) = action {
                        notes.get_mut(actor).map(Vec::pop);
                    }
                }
                Outcome::Rejected {
                    reason: rej.reason,
                    txn_index: rej.txn_index,
                    meter: rej.meter,
                }
            }
        };
        groups.insert(index, group);
        entries.push(TranscriptEntry {
            index,
            action: action.clone(),
            outcome,
        });
    }

    let mut final_balances = BTreeMap::new();
    final_balances.insert("escrow".to_string(), state.balance(&config.escrow));
    final_balances.insert("relay".to_string(), state.balance(&relay_address()));
    for a in &actors {
        final_balances.insert(format!("actor:{a}"), state.balance(&actor_address(a)));
        final_balances.insert(
            format!("recipient:{a}"),
            state.balance(&recipient_address(a)),
        );
    }

    let transcript = Transcript {
        seed: script.seed,
        entries,
        final_balances,
        meter_stats,
        report: anonymity_report(&state),
    };
    Ok(ScenarioRun {
        transcript,
        ground_truth,
        state,
        config,
    })
}
