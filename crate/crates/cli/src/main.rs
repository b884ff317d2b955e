//! `obscura`: key management, pool operations and analysis against a
//! ledger file. Every command prints one JSON document on stdout.

mod store;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use obscura_core::client::{make_deposit, plan_withdrawal, DecoyPolicy, KeyFile, DEFAULT_LAMBDA};
use obscura_core::codec;
use obscura_core::contract::{commitment_key, nullifier_key, ContractConfig};
use obscura_core::curve::{deserialize_point, GroupPoint, Scalar};
use obscura_core::ledger::{submit_group, Address, MeterStats, Rejection};
use obscura_core::lens::anonymity_report;
use obscura_core::lsag::{self, audit_disclosure, keygen, AuditOutcome, KeyPair};
use obscura_core::scenario::{run_scenario, ScenarioScript};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use serde_json::{json, Value};
use store::LedgerGuard;

#[derive(Parser)]
#[command(name = "obscura", version, about = "Obscura privacy pool simulator")]
struct Cli {
    /// Human-readable output instead of compact JSON.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct LedgerArg {
    /// Ledger state file; created on first mutating use.
    #[arg(long)]
    ledger: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a keypair and write it to --key.
    Keygen {
        #[arg(long)]
        key: PathBuf,
        /// Deterministic randomness, for tests only.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Register the key's commitment with a 1,000,000 deposit.
    Deposit {
        #[command(flatten)]
        ledger: LedgerArg,
        #[arg(long)]
        key: PathBuf,
    },
    /// Spend the key's note to --recipient through a ring of decoys.
    Withdraw {
        #[command(flatten)]
        ledger: LedgerArg,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        recipient: String,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u8).range(2..=5))]
        ring_size: u8,
        #[arg(long, default_value_t = DEFAULT_LAMBDA)]
        lambda: f64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a packed proof offline.
    VerifyProof {
        /// Packed payload, hex.
        #[arg(long)]
        proof: String,
        /// Key image, 64-byte hex.
        #[arg(long)]
        key_image: String,
        #[arg(long)]
        recipient: String,
    },
    /// Check that a disclosed secret matches a commitment and key image.
    Audit {
        /// Key file holding the disclosed secret.
        #[arg(long)]
        key: PathBuf,
        /// Commitment to check against; defaults to the key file's.
        #[arg(long)]
        commitment: Option<String>,
        /// Key image to check against; defaults to the key file's.
        #[arg(long)]
        key_image: Option<String>,
    },
    /// Summarise ledger contents.
    Inspect {
        #[command(flatten)]
        ledger: LedgerArg,
    },
    /// Anonymity analysis.
    Lens {
        #[command(subcommand)]
        command: LensCommand,
    },
    /// Scripted runs.
    Scenario {
        #[command(subcommand)]
        command: ScenarioCommand,
    },
}

#[derive(Subcommand)]
enum LensCommand {
    /// Per-withdrawal anonymity report and chain-reaction attributions.
    Report {
        #[command(flatten)]
        ledger: LedgerArg,
    },
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Execute a script against a fresh ledger and print the transcript.
    Run {
        script: PathBuf,
        /// Overrides the script's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the script's decoy decay.
        #[arg(long)]
        lambda: Option<f64>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Io { path: PathBuf, message: String },
    MalformedLedger(String),
    InvalidInput(String),
    Rejected(Rejection),
    InvalidProof(String),
    Script { index: usize, message: String },
    Client(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Rejected(_) | CliError::InvalidProof(_) => 1,
            CliError::InvalidInput(_) => 2,
            _ => 3,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            CliError::Io { path, message } => {
                json!({"error": "Io", "path": path.display().to_string(), "message": message})
            }
            CliError::MalformedLedger(m) => json!({"error": "MalformedLedger", "message": m}),
            CliError::InvalidInput(m) => json!({"error": "InvalidInput", "message": m}),
            CliError::Rejected(r) => json!({
                "error": "Rejected",
                "reason": r.reason,
                "txn_index": r.txn_index,
                "meter": r.meter,
            }),
            CliError::InvalidProof(m) => json!({"error": "InvalidProof", "message": m}),
            CliError::Script { index, message } => {
                json!({"error": "ScriptError", "index": index, "message": message})
            }
            CliError::Client(m) => json!({"error": "ClientError", "message": m}),
        }
    }
}

type CliResult = Result<Output, CliError>;

enum Output {
    Json(Value),
    /// JSON plus a plain-text rendering for `--pretty`.
    Table(Value, String),
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn rng_for(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    }
}

fn parse_hex<const N: usize>(what: &str, s: &str) -> Result<[u8; N], CliError> {
    let mut out = [0u8; N];
    hex::decode_to_slice(s.trim_start_matches("0x"), &mut out)
        .map_err(|e| CliError::InvalidInput(format!("{what}: expected {N} hex bytes ({e})")))?;
    Ok(out)
}

fn parse_point(what: &str, s: &str) -> Result<GroupPoint, CliError> {
    let bytes: [u8; 64] = parse_hex(what, s)?;
    deserialize_point(&bytes).map_err(|e| CliError::InvalidInput(format!("{what}: {e}")))
}

fn read_key_file(path: &Path) -> Result<KeyFile, CliError> {
    let doc = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&doc).map_err(|e| CliError::InvalidInput(format!("key file: {e}")))
}

fn load_key(path: &Path) -> Result<KeyPair, CliError> {
    read_key_file(path)?
        .to_keypair()
        .map_err(|e| CliError::InvalidInput(e.to_string()))
}

fn cmd_keygen(key: &Path, seed: Option<u64>) -> CliResult {
    if key.exists() {
        return Err(CliError::InvalidInput(format!(
            "{} already exists; refusing to overwrite a key",
            key.display()
        )));
    }
    let kp = keygen(&mut rng_for(seed));
    let file = KeyFile::from_keypair(&kp);
    let doc = serde_json::to_string_pretty(&file).expect("serializable");
    write_private(key, doc.as_bytes()).map_err(|e| CliError::io(key, e))?;
    Ok(Output::Json(json!({
        "key": key.display().to_string(),
        "P": file.commitment,
        "I": file.key_image,
    })))
}

#[cfg(unix)]
fn write_private(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    use std::io::Write;
    use std::os::unix::fs::OpenOptionsExt;
    let mut f = fs::OpenOptions::new()
        .write(true)
        .create_new(true)
        .mode(0o600)
        .open(path)?;
    f.write_all(bytes)
}

#[cfg(not(unix))]
fn write_private(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    fs::write(path, bytes)
}

fn rejected(r: Rejection) -> CliError {
    CliError::Rejected(r)
}

fn cmd_deposit(ledger: &Path, key: &Path) -> CliResult {
    let config = ContractConfig::default();
    let kp = load_key(key)?;
    let guard = LedgerGuard::exclusive(ledger)?;
    let state = guard.load(&config)?;
    let group = make_deposit(&kp, store::wallet_address(), &config);
    let (next, receipt) = submit_group(&state, &config, &group).map_err(rejected)?;
    guard.store(&next)?;
    Ok(Output::Json(json!({
        "status": "committed",
        "commitment": kp.commitment(),
        "deposit_index": next.app_globals.deposit_counter - 1,
        "receipt": receipt,
    })))
}

fn cmd_withdraw(
    ledger: &Path,
    key: &Path,
    recipient: &str,
    ring_size: u8,
    lambda: f64,
    seed: Option<u64>,
) -> CliResult {
    let config = ContractConfig::default();
    let kp = load_key(key)?;
    let recipient = Address(parse_hex("recipient", recipient)?);
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(CliError::InvalidInput(format!(
            "lambda must lie in (0, 1), got {lambda}"
        )));
    }
    let guard = LedgerGuard::exclusive(ledger)?;
    let state = guard.load(&config)?;
    let plan = plan_withdrawal(
        &state,
        &kp,
        ring_size as usize,
        &DecoyPolicy::with_lambda(lambda),
        recipient,
        store::relay_address(),
        &config,
        &mut rng_for(seed),
    )
    .map_err(|e| CliError::Client(e.to_string()))?;
    let (next, receipt) =
        submit_group(&state, &config, std::slice::from_ref(&plan.transaction)).map_err(rejected)?;
    guard.store(&next)?;
    Ok(Output::Json(json!({
        "status": "committed",
        "key_image": plan.key_image,
        "recipient": recipient,
        "ring": plan.ring.members(),
        "proof": plan.packed.to_hex(),
        "receipt": receipt,
    })))
}

fn cmd_verify_proof(proof: &str, key_image: &str, recipient: &str) -> CliResult {
    let bytes = hex::decode(proof.trim_start_matches("0x"))
        .map_err(|e| CliError::InvalidInput(format!("proof: {e}")))?;
    let image = parse_point("key-image", key_image)?;
    let m: [u8; 32] = parse_hex("recipient", recipient)?;
    let (ring, sig) = codec::unpack(&bytes).map_err(|e| CliError::InvalidProof(e.to_string()))?;
    let ok =
        lsag::verify(&ring, &image, &m, &sig).map_err(|e| CliError::InvalidProof(e.to_string()))?;
    if !ok {
        return Err(CliError::InvalidProof(
            "ring equation does not close".into(),
        ));
    }
    Ok(Output::Json(json!({
        "valid": true,
        "ring_size": ring.len(),
        "ring": ring.members(),
    })))
}

fn cmd_audit(key: &Path, commitment: Option<&str>, key_image: Option<&str>) -> CliResult {
    let file = read_key_file(key)?;
    let x: [u8; 32] = parse_hex("x", &file.x)?;
    let secret = Scalar::from_be_bytes_canonical(&x)
        .map_err(|e| CliError::InvalidInput(format!("x: {e}")))?;
    let p = parse_point("commitment", commitment.unwrap_or(&file.commitment))?;
    let i = parse_point("key-image", key_image.unwrap_or(&file.key_image))?;
    let outcome =
        audit_disclosure(&secret, &p, &i).map_err(|e| CliError::InvalidInput(e.to_string()))?;
    Ok(Output::Json(json!({
        "consistent": outcome == AuditOutcome::Consistent,
        "commitment": p,
        "key_image": i,
    })))
}

fn cmd_inspect(ledger: &Path) -> CliResult {
    let config = ContractConfig::default();
    let guard = LedgerGuard::shared(ledger)?;
    let state = guard.load(&config)?;
    let commitments: Vec<Value> = obscura_core::client::list_commitments(&state)
        .iter()
        .map(|r| {
            json!({
                "deposit_index": r.deposit_index,
                "round": r.round,
                "commitment": r.point,
                "box": state.box_lookup(&commitment_key(&r.point)).is_some(),
            })
        })
        .collect();
    let spent: Vec<Value> = obscura_core::lens::observations(&state)
        .iter()
        .map(|o| {
            json!({
                "round": o.round,
                "key_image": o.key_image,
                "recipient": o.recipient,
                "ring_size": o.ring.len(),
                "box": state.box_lookup(&nullifier_key(&o.key_image)).is_some(),
            })
        })
        .collect();
    let meters: Vec<MeterStats> = state.log.iter().filter_map(|r| r.budget).collect();
    Ok(Output::Json(json!({
        "round": state.round,
        "deposit_counter": state.app_globals.deposit_counter,
        "escrow": config.escrow,
        "escrow_balance": state.balance(&config.escrow),
        "wallet_balance": state.balance(&store::wallet_address()),
        "relay_balance": state.balance(&store::relay_address()),
        "fees_collected": state.fees_collected,
        "mbr_locked": state.mbr_locked,
        "boxes": state.boxes.len(),
        "commitments": commitments,
        "nullifiers": spent,
        "withdraw_meters": meters,
    })))
}

fn cmd_lens_report(ledger: &Path) -> CliResult {
    let guard = LedgerGuard::shared(ledger)?;
    let state = guard.load(&ContractConfig::default())?;
    let report = anonymity_report(&state);
    Ok(Output::Table(to_value(&report), report.to_table()))
}

fn cmd_scenario_run(script: &Path, seed: Option<u64>, lambda: Option<f64>) -> CliResult {
    let doc = fs::read_to_string(script).map_err(|e| CliError::io(script, e))?;
    let mut parsed: ScenarioScript =
        serde_json::from_str(&doc).map_err(|e| CliError::InvalidInput(format!("script: {e}")))?;
    if let Some(s) = seed {
        parsed.seed = s;
    }
    if lambda.is_some() {
        parsed.lambda = lambda;
    }
    let run = run_scenario(&parsed).map_err(|e| CliError::Script {
        index: e.index,
        message: e.message,
    })?;
    let table = run.transcript.report.to_table();
    Ok(Output::Table(to_value(&run.transcript), table))
}

fn dispatch(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Keygen { key, seed } => cmd_keygen(key, *seed),
        Command::Deposit { ledger, key } => cmd_deposit(&ledger.ledger, key),
        Command::Withdraw {
            ledger,
            key,
            recipient,
            ring_size,
            lambda,
            seed,
        } => cmd_withdraw(&ledger.ledger, key, recipient, *ring_size, *lambda, *seed),
        Command::VerifyProof {
            proof,
            key_image,
            recipient,
        } => cmd_verify_proof(proof, key_image, recipient),
        Command::Audit {
            key,
            commitment,
            key_image,
        } => cmd_audit(key, commitment.as_deref(), key_image.as_deref()),
        Command::Inspect { ledger } => cmd_inspect(&ledger.ledger),
        Command::Lens {
            command: LensCommand::Report { ledger },
        } => cmd_lens_report(&ledger.ledger),
        Command::Scenario {
            command:
                ScenarioCommand::Run {
                    script,
                    seed,
                    lambda,
                },
        } => cmd_scenario_run(script, *seed, *lambda),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            println!(
                "{}",
                json!({"error": "Usage", "message": message.trim_end()})
            );
            return ExitCode::from(2);
        }
    };
    match dispatch(&cli) {
        Ok(Output::Table(_, table)) if cli.pretty => {
            print!("{table}");
            ExitCode::SUCCESS
        }
        Ok(Output::Json(v)) | Ok(Output::Table(v, _)) => {
            let text = if cli.pretty {
                serde_json::to_string_pretty(&v)
            } else {
                serde_json::to_string(&v)
            };
            println!("{}", text.expect("serializable"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            println!("{}", e.to_json());
            ExitCode::from(e.code())
        }
    }
}
