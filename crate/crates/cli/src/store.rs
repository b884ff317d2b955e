//! Ledger file handling. Writers hold an exclusive lock on a sidecar
//! `<ledger>.lock` file and replace the ledger by rename, so readers never
//! see a half-written document.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use obscura_core::contract::ContractConfig;
use obscura_core::ledger::{Address, LedgerState};

use crate::CliError;

/// Starting balance of the CLI's built-in accounts on a fresh ledger.
pub const GENESIS_FUNDING: u64 = 1_000_000_000_000;

pub fn wallet_address() -> Address {
    Address::derive(b"obscura/cli/wallet")
}

pub fn relay_address() -> Address {
    Address::derive(b"obscura/cli/relay")
}

pub fn genesis(config: &ContractConfig) -> LedgerState {
    LedgerState::genesis(
        config,
        &[
            (wallet_address(), GENESIS_FUNDING),
            (relay_address(), GENESIS_FUNDING),
        ],
    )
}

fn lock_path(ledger: &Path) -> PathBuf {
    let mut name = ledger.as_os_str().to_owned();
    name.push(".lock");
    PathBuf::from(name)
}

pub struct LedgerGuard {
    path: PathBuf,
    // Held for its lock; released on drop.
    _lock: File,
}

fn open_lock(ledger: &Path) -> Result<File, CliError> {
    OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .open(lock_path(ledger))
        .map_err(|e| CliError::io(ledger, e))
}

impl LedgerGuard {
    pub fn exclusive(path: &Path) -> Result<Self, CliError> {
        let lock = open_lock(path)?;
        lock.lock().map_err(|e| CliError::io(path, e))?;
        Ok(LedgerGuard {
            path: path.to_path_buf(),
            _lock: lock,
        })
    }

    pub fn shared(path: &Path) -> Result<Self, CliError> {
        let lock = open_lock(path)?;
        lock.lock_shared().map_err(|e| CliError::io(path, e))?;
        Ok(LedgerGuard {
            path: path.to_path_buf(),
            _lock: lock,
        })
    }

    /// A missing ledger file reads as a fresh genesis state.
    pub fn load(&self, config: &ContractConfig) -> Result<LedgerState, CliError> {
        match fs::read_to_string(&self.path) {
            Ok(doc) => {
                LedgerState::load(&doc).map_err(|e| CliError::MalformedLedger(e.to_string()))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(genesis(config)),
            Err(e) => Err(CliError::io(&self.path, e)),
        }
    }

    pub fn store(&self, state: &LedgerState) -> Result<(), CliError> {
        let mut tmp_name = self.path.as_os_str().to_owned();
        tmp_name.push(".tmp");
        let tmp = PathBuf::from(tmp_name);
        let write = || -> std::io::Result<()> {
            let mut f = File::create(&tmp)?;
            f.write_all(state.persist().as_bytes())?;
            f.sync_all()?;
            fs::rename(&tmp, &self.path)
        };
        write().map_err(|e| CliError::io(&self.path, e))
    }
}
