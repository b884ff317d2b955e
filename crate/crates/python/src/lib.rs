//! Python bindings. Points and scalars cross the boundary as hex strings,
//! messages and proofs as `bytes`, and structured results as plain dicts.

use obscura_core::client::{make_deposit, plan_withdrawal, DecoyPolicy, KeyFile};
use obscura_core::codec;
use obscura_core::contract::{compute_payout, ContractConfig};
use obscura_core::curve::{self, deserialize_point, GroupPoint, Scalar};
use obscura_core::ledger::{submit_group, Address, LedgerState};
use obscura_core::lens::{anonymity_report, chain_reaction, WithdrawalObservation};
use obscura_core::lsag::{self, AuditOutcome, Ring};
use obscura_core::scenario::{run_scenario as run_script, ScenarioScript};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

create_exception!(
    obscura,
    RejectedError,
    PyException,
    "The ledger rejected a transaction group."
);

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rng_for(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    }
}

fn point(hex_str: &str) -> PyResult<GroupPoint> {
    let bytes = hex::decode(hex_str).map_err(value_err)?;
    deserialize_point(&bytes).map_err(value_err)
}

fn point_hex(p: &GroupPoint) -> String {
    p.to_hex().expect("non-identity")
}

fn message(m: &[u8]) -> PyResult<[u8; 32]> {
    m.try_into()
        .map_err(|_| PyValueError::new_err(format!("message must be 32 bytes, got {}", m.len())))
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(module = "obscura", frozen)]
struct KeyPair(lsag::KeyPair);

#[pymethods]
impl KeyPair {
    /// Fresh keypair; `seed` makes it reproducible (tests only).
    #[staticmethod]
    #[pyo3(signature = (seed=None))]
    fn generate(seed: Option<u64>) -> Self {
        KeyPair(lsag::keygen(&mut rng_for(seed)))
    }

    #[staticmethod]
    fn from_secret(secret_hex: &str) -> PyResult<Self> {
        let bytes: [u8; 32] = hex::decode(secret_hex)
            .map_err(value_err)?
            .try_into()
            .map_err(|_| PyValueError::new_err("secret must be 32 bytes"))?;
        let x = Scalar::from_be_bytes_canonical(&bytes).map_err(value_err)?;
        lsag::KeyPair::from_secret(x)
            .map(KeyPair)
            .map_err(value_err)
    }

    #[getter]
    fn commitment(&self) -> String {
        point_hex(self.0.commitment())
    }

    #[getter]
    fn key_image(&self) -> String {
        point_hex(self.0.key_image())
    }

    fn secret_hex(&self) -> String {
        KeyFile::from_keypair(&self.0).x
    }

    fn __repr__(&self) -> String {
        format!("KeyPair(commitment={}..)", &self.commitment()[..16])
    }
}

#[pyfunction]
#[pyo3(signature = (seed=None))]
fn keygen(seed: Option<u64>) -> KeyPair {
    KeyPair::generate(seed)
}

/// Signs `message` over `ring` (hex points) at `index`; returns the packed proof.
#[pyfunction]
#[pyo3(signature = (keypair, ring, index, message, seed=None))]
fn sign<'py>(
    py: Python<'py>,
    keypair: &KeyPair,
    ring: Vec<String>,
    index: usize,
    message: &[u8],
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyBytes>> {
    let members = ring
        .iter()
        .map(|h| point(h))
        .collect::<PyResult<Vec<_>>>()?;
    let ring = Ring::new(members).map_err(value_err)?;
    let m = self::message(message)?;
    let sig =
        lsag::sign(keypair.0.secret(), &ring, index, &m, &mut rng_for(seed)).map_err(value_err)?;
    let packed = codec::pack(&ring, &sig).map_err(value_err)?;
    Ok(PyBytes::new(py, packed.as_bytes()))
}

/// True iff the packed proof verifies for `key_image` and `message`.
/// Malformed payloads raise `ValueError`.
#[pyfunction]
fn verify(proof: &[u8], key_image: &str, message: &[u8]) -> PyResult<bool> {
    let (ring, sig) = codec::unpack(proof).map_err(value_err)?;
    let image = point(key_image)?;
    lsag::verify(&ring, &image, &self::message(message)?, &sig).map_err(value_err)
}

/// `(ring, c0, responses)` as hex strings.
#[pyfunction]
fn unpack(proof: &[u8]) -> PyResult<(Vec<String>, String, Vec<String>)> {
    let (ring, sig) = codec::unpack(proof).map_err(value_err)?;
    Ok((
        ring.members().iter().map(point_hex).collect(),
        hex::encode(sig.c0.as_bytes()),
        sig.responses
            .iter()
            .map(|s| hex::encode(s.to_be_bytes()))
            .collect(),
    ))
}

/// Inverse of [`unpack`].
#[pyfunction]
fn pack<'py>(
    py: Python<'py>,
    ring: Vec<String>,
    c0: &str,
    responses: Vec<String>,
) -> PyResult<Bound<'py, PyBytes>> {
    let members = ring
        .iter()
        .map(|h| point(h))
        .collect::<PyResult<Vec<_>>>()?;
    let ring = Ring::new(members).map_err(value_err)?;
    let scalar = |h: &String| -> PyResult<Scalar> {
        let b: [u8; 32] = hex::decode(h)
            .map_err(value_err)?
            .try_into()
            .map_err(|_| PyValueError::new_err("scalars are 32 bytes"))?;
        Scalar::from_be_bytes_canonical(&b).map_err(value_err)
    };
    let c0: [u8; 32] = hex::decode(c0)
        .map_err(value_err)?
        .try_into()
        .map_err(|_| PyValueError::new_err("c0 is 32 bytes"))?;
    let sig = lsag::LsagSignature {
        c0: curve::Challenge::from_be_bytes(c0)
            .ok_or_else(|| PyValueError::new_err("c0 top bit set"))?,
        responses: responses.iter().map(scalar).collect::<PyResult<_>>()?,
    };
    let packed = codec::pack(&ring, &sig).map_err(value_err)?;
    Ok(PyBytes::new(py, packed.as_bytes()))
}

#[pyfunction]
fn payload_len(n: usize) -> usize {
    codec::payload_len(n)
}

/// Challenge for `(message, L, R)`, hex.
#[pyfunction]
fn hash_to_challenge(message: &[u8], l: &str, r: &str) -> PyResult<String> {
    let c = curve::hash_to_challenge(&self::message(message)?, &point(l)?, &point(r)?)
        .map_err(value_err)?;
    Ok(hex::encode(c.as_bytes()))
}

#[pyfunction]
fn audit(secret_hex: &str, commitment: &str, key_image: &str) -> PyResult<bool> {
    let kp = KeyPair::from_secret(secret_hex)?;
    let outcome = lsag::audit_disclosure(kp.0.secret(), &point(commitment)?, &point(key_image)?)
        .map_err(value_err)?;
    Ok(outcome == AuditOutcome::Consistent)
}

#[pyfunction]
fn payout() -> u64 {
    compute_payout(&ContractConfig::default())
}

/// Attribution analysis over `(key_image, ring)` pairs.
#[pyfunction]
fn analyze<'py>(
    py: Python<'py>,
    observations: Vec<(String, Vec<String>)>,
) -> PyResult<Bound<'py, PyAny>> {
    let obs = observations
        .iter()
        .enumerate()
        .map(|(i, (image, ring))| {
            Ok(WithdrawalObservation {
                ring: ring.iter().map(|h| point(h)).collect::<PyResult<_>>()?,
                key_image: point(image)?,
                round: i as u64,
                recipient: Address::default(),
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    to_py(py, &chain_reaction(&obs))
}

/// Runs a JSON scenario script and returns its transcript.
#[pyfunction]
fn run_scenario<'py>(py: Python<'py>, script: &str) -> PyResult<Bound<'py, PyAny>> {
    let script: ScenarioScript = serde_json::from_str(script).map_err(value_err)?;
    let run = run_script(&script).map_err(value_err)?;
    to_py(py, &run.transcript)
}

/// An in-memory ledger running the mixer contract with default settings.
#[pyclass(module = "obscura")]
struct Ledger {
    state: LedgerState,
    config: ContractConfig,
}

fn wallet() -> Address {
    Address::derive(b"obscura/py/wallet")
}

fn relay() -> Address {
    Address::derive(b"obscura/py/relay")
}

fn rejected(r: obscura_core::ledger::Rejection) -> PyErr {
    RejectedError::new_err((format!("{:?}", r.reason), r.txn_index))
}

#[pymethods]
impl Ledger {
    #[new]
    fn new() -> Self {
        let config = ContractConfig::default();
        let state = LedgerState::genesis(
            &config,
            &[(wallet(), 1_000_000_000_000), (relay(), 1_000_000_000_000)],
        );
        Ledger { state, config }
    }

    #[staticmethod]
    fn load(document: &str) -> PyResult<Self> {
        Ok(Ledger {
            state: LedgerState::load(document).map_err(value_err)?,
            config: ContractConfig::default(),
        })
    }

    fn persist(&self) -> String {
        self.state.persist()
    }

    #[getter]
    fn round(&self) -> u64 {
        self.state.round
    }

    /// Balance of a 32-byte hex address, or of `"escrow"`.
    fn balance(&self, address: &str) -> PyResult<u64> {
        let addr = if address == "escrow" {
            self.config.escrow
        } else {
            Address::from_hex(address).map_err(value_err)?
        };
        Ok(self.state.balance(&addr))
    }

    fn deposit<'py>(&mut self, py: Python<'py>, keypair: &KeyPair) -> PyResult<Bound<'py, PyAny>> {
        let group = make_deposit(&keypair.0, wallet(), &self.config);
        let (next, receipt) = submit_group(&self.state, &self.config, &group).map_err(rejected)?;
        self.state = next;
        to_py(py, &receipt)
    }

    /// Builds and submits a withdrawal; returns the receipt plus the proof.
    #[pyo3(signature = (keypair, recipient, ring_size=5, lambda_=None, seed=None))]
    fn withdraw<'py>(
        &mut self,
        py: Python<'py>,
        keypair: &KeyPair,
        recipient: &[u8],
        ring_size: usize,
        lambda_: Option<f64>,
        seed: Option<u64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let policy = lambda_.map(DecoyPolicy::with_lambda).unwrap_or_default();
        let plan = plan_withdrawal(
            &self.state,
            &keypair.0,
            ring_size,
            &policy,
            Address(message(recipient)?),
            relay(),
            &self.config,
            &mut rng_for(seed),
        )
        .map_err(value_err)?;
        let (next, receipt) = submit_group(
            &self.state,
            &self.config,
            std::slice::from_ref(&plan.transaction),
        )
        .map_err(rejected)?;
        self.state = next;
        let out = to_py(py, &receipt)?;
        out.set_item("proof", PyBytes::new(py, plan.packed.as_bytes()))?;
        out.set_item("key_image", point_hex(&plan.key_image))?;
        Ok(out)
    }

    fn report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &anonymity_report(&self.state))
    }
}

#[pymodule]
pub fn obscura(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<KeyPair>()?;
    m.add_class::<Ledger>()?;
    m.add("RejectedError", m.py().get_type::<RejectedError>())?;
    m.add_function(wrap_pyfunction!(keygen, m)?)?;
    m.add_function(wrap_pyfunction!(sign, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(pack, m)?)?;
    m.add_function(wrap_pyfunction!(unpack, m)?)?;
    m.add_function(wrap_pyfunction!(payload_len, m)?)?;
    m.add_function(wrap_pyfunction!(hash_to_challenge, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    m.add_function(wrap_pyfunction!(payout, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
