//! Shared fixtures: a funded ledger with deposits already committed.

#![allow(dead_code)]

use obscura_core::client::{make_deposit, make_withdraw};
use obscura_core::contract::ContractConfig;
use obscura_core::ledger::{submit_group, Address, LedgerState, Transaction};
use obscura_core::lsag::{keygen, KeyPair, Ring};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub fn depositor() -> Address {
    Address::derive(b"test/depositor")
}

pub fn relay() -> Address {
    Address::derive(b"test/relay")
}

pub fn recipient(tag: u8) -> Address {
    Address::derive(&[b'r', tag])
}

pub struct Pool {
    pub config: ContractConfig,
    pub state: LedgerState,
    pub keys: Vec<KeyPair>,
    pub rng: ChaCha20Rng,
}

impl Pool {
    pub fn new(deposits: usize, seed: u64) -> Self {
        Self::with_config(deposits, seed, ContractConfig::default())
    }

    pub fn with_config(deposits: usize, seed: u64, config: ContractConfig) -> Self {
        let state = LedgerState::genesis(
            &config,
            &[
                (depositor(), 1_000_000_000_000),
                (relay(), 1_000_000_000_000),
            ],
        );
        let mut pool = Pool {
            config,
            state,
            keys: Vec::new(),
            rng: ChaCha20Rng::seed_from_u64(seed),
        };
        for _ in 0..deposits {
            pool.deposit();
        }
        pool
    }

    pub fn deposit(&mut self) -> usize {
        let kp = keygen(&mut self.rng);
        let group = make_deposit(&kp, depositor(), &self.config);
        let (next, _) = submit_group(&self.state, &self.config, &group).expect("deposit commits");
        self.state = next;
        self.keys.push(kp);
        self.keys.len() - 1
    }

    /// Ring of the first `n` keys with `signer` placed at `pi`.
    pub fn ring_for(&self, signer: usize, n: usize, pi: usize) -> Ring {
        let mut members: Vec<_> = self
            .keys
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != signer)
            .take(n - 1)
            .map(|(_, k)| *k.commitment())
            .collect();
        members.insert(pi, *self.keys[signer].commitment());
        Ring::new(members).unwrap()
    }

    pub fn withdraw_txn(&mut self, signer: usize, n: usize, pi: usize, to: Address) -> Transaction {
        let ring = self.ring_for(signer, n, pi);
        make_withdraw(
            &self.keys[signer],
            &ring,
            pi,
            to,
            relay(),
            &self.config,
            &mut self.rng,
        )
        .unwrap()
        .transaction
    }
}
