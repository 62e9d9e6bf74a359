//! Append-only, hash-chained transaction log.
//!
//! Every contract call enters through [`Ledger::submit`], runs against the
//! shared slot storage with gas metering, and is sealed into a
//! [`ChainEntry`] whose hash commits to the previous entry.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::codec;
use crate::error::ContractError;
use crate::gas::{GasMeter, GasSchedule, InvalidSchedule};
use crate::hash::{hex_bytes, keccak256_concat, Address, H256};
use crate::storage::{word_u64, SlotRead, SlotWrite, Storage, Word};

/// Op name reserved for synthetic contract-deployment entries.
pub const DEPLOY_OP: &str = "deploy";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModuleId {
    Rbac,
    ExamLifecycle,
    HashRegistry,
    ResultAudit,
    Zkp,
}

impl ModuleId {
    pub const ALL: [ModuleId; 5] = [
        ModuleId::Rbac,
        ModuleId::ExamLifecycle,
        ModuleId::HashRegistry,
        ModuleId::ResultAudit,
        ModuleId::Zkp,
    ];

    /// The four contracts deployed by a standard engine.
    pub const CONTRACTS: [ModuleId; 4] = [
        ModuleId::Rbac,
        ModuleId::ExamLifecycle,
        ModuleId::HashRegistry,
        ModuleId::ResultAudit,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModuleId::Rbac => "RBAC",
            ModuleId::ExamLifecycle => "EXAM_LIFECYCLE",
            ModuleId::HashRegistry => "HASH_REGISTRY",
            ModuleId::ResultAudit => "RESULT_AUDIT",
            ModuleId::Zkp => "ZKP",
        }
    }

    /// Human-facing contract name used in reports.
    pub fn contract_name(&self) -> &'static str {
        match self {
            ModuleId::Rbac => "RBAC Contract",
            ModuleId::ExamLifecycle => "ExamLifecycle Contract",
            ModuleId::HashRegistry => "HashRegistry Contract",
            ModuleId::ResultAudit => "ResultAudit Contract",
            ModuleId::Zkp => "Eligibility Contract",
        }
    }

    fn index(&self) -> u64 {
        *self as u64
    }
}

impl fmt::Display for ModuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModuleId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModuleId::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown module `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub seq: u64,
    pub sender: Address,
    pub target_module: ModuleId,
    pub op_name: String,
    #[serde(with = "hex_bytes")]
    pub payload: Vec<u8>,
    /// Milliseconds.
    pub timestamp: u64,
}

impl Transaction {
    pub fn is_deployment(&self) -> bool {
        self.op_name == DEPLOY_OP
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TxStatus {
    Success,
    Reverted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub name: String,
    pub topics: Vec<H256>,
    #[serde(with = "hex_bytes")]
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub tx_seq: u64,
    pub status: TxStatus,
    pub revert_reason: Option<String>,
    pub gas_used: u64,
    pub events: Vec<Event>,
    pub state_root_hash: H256,
}

impl Receipt {
    pub fn is_success(&self) -> bool {
        self.status == TxStatus::Success
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainEntry {
    pub tx: Transaction,
    pub receipt: Receipt,
    pub entry_hash: H256,
}

/// `keccak256(previous ‖ enc(tx) ‖ enc(receipt))`.
pub fn entry_hash(previous: &H256, tx: &Transaction, receipt: &Receipt) -> H256 {
    keccak256_concat(&[&previous.0, &codec::encode(tx), &codec::encode(receipt)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChainVerification {
    pub valid: bool,
    pub first_bad_seq: Option<u64>,
}

/// Recomputes every entry hash from genesis.
pub fn verify_entries(entries: &[ChainEntry]) -> ChainVerification {
    let mut previous = H256::ZERO;
    for (i, entry) in entries.iter().enumerate() {
        let recomputed = entry_hash(&previous, &entry.tx, &entry.receipt);
        if recomputed != entry.entry_hash {
            return ChainVerification {
                valid: false,
                first_bad_seq: Some(i as u64),
            };
        }
        previous = recomputed;
    }
    ChainVerification {
        valid: true,
        first_bad_seq: None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceStep {
    Guard(&'static str),
    Read(Word),
    Write(Word),
}

/// Execution context handed to a module handler for one transaction.
pub struct CallContext<'a> {
    storage: &'a mut Storage,
    journal: Vec<(Word, Word)>,
    meter: GasMeter,
    events: Vec<Event>,
    trace: Vec<TraceStep>,
    sender: Address,
    seq: u64,
    timestamp: u64,
}

impl<'a> CallContext<'a> {
    fn new(storage: &'a mut Storage, tx: &Transaction) -> Self {
        Self {
            storage,
            journal: Vec::new(),
            meter: GasMeter::default(),
            events: Vec::new(),
            trace: Vec::new(),
            sender: tx.sender,
            seq: tx.seq,
            timestamp: tx.timestamp,
        }
    }

    pub fn sender(&self) -> Address {
        self.sender
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }

    pub fn timestamp(&self) -> u64 {
        self.timestamp
    }

    /// Metered keccak256 for handler-level hashing (not slot derivation).
    pub fn keccak(&mut self, data: &[u8]) -> H256 {
        self.meter.hash_bytes(data.len());
        crate::hash::keccak256(data)
    }

    pub fn emit(&mut self, name: &str, topics: Vec<H256>, data: Vec<u8>) {
        self.meter.logs += 1;
        self.meter.log_topics += topics.len() as u64;
        self.meter.log_bytes += data.len() as u64;
        self.events.push(Event {
            name: name.to_string(),
            topics,
            data,
        });
    }

    fn rollback(&mut self) {
        for (key, prev) in self.journal.drain(..).rev() {
            self.storage.set(key, prev);
        }
        self.events.clear();
    }
}

impl SlotRead for CallContext<'_> {
    fn load(&mut self, key: &Word) -> Word {
        self.meter.slots_read += 1;
        self.trace.push(TraceStep::Read(*key));
        self.storage.get(key)
    }

    fn charge_hash(&mut self, len: usize) {
        self.meter.hash_bytes(len);
    }

    fn note_guard(&mut self, guard: &'static str) {
        self.trace.push(TraceStep::Guard(guard));
    }
}

impl SlotWrite for CallContext<'_> {
    fn store(&mut self, key: Word, value: Word) {
        let prev = self.storage.set(key, value);
        if prev.is_zero() && !value.is_zero() {
            self.meter.slots_new += 1;
        } else {
            self.meter.slots_updated += 1;
        }
        self.trace.push(TraceStep::Write(key));
        self.journal.push((key, prev));
    }
}

/// A contract module: stateless handler code over the shared storage.
pub trait Module: Send + Sync {
    fn id(&self) -> ModuleId;

    fn execute(&self, ctx: &mut CallContext<'_>, op: &str, payload: &[u8])
        -> Result<(), ContractError>;

    fn on_deploy(&self, _ctx: &mut CallContext<'_>) -> Result<(), ContractError> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LedgerConfig {
    pub gas: GasSchedule,
    /// Fixed gas charged for each synthetic deployment entry.
    pub deployment_gas: BTreeMap<ModuleId, u64>,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        // Four contracts sharing 8,383,982 gas of deployment cost.
        let deployment_gas = BTreeMap::from([
            (ModuleId::Rbac, 2_095_996),
            (ModuleId::ExamLifecycle, 2_095_996),
            (ModuleId::HashRegistry, 2_095_995),
            (ModuleId::ResultAudit, 2_095_995),
            (ModuleId::Zkp, 2_095_995),
        ]);
        Self {
            gas: GasSchedule::default(),
            deployment_gas,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("transaction seq {got} does not match chain length {expected}")]
    SeqMismatch { expected: u64, got: u64 },
    #[error(transparent)]
    InvalidSchedule(#[from] InvalidSchedule),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("replay diverged from dump at seq {0}")]
    ReplayMismatch(u64),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ModuleGas {
    pub tx_count: u64,
    pub total_gas: u64,
    pub avg_gas: f64,
}

impl ModuleGas {
    fn add(&mut self, gas: u64) {
        self.tx_count += 1;
        self.total_gas += gas;
        self.avg_gas = self.total_gas as f64 / self.tx_count as f64;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GasReport {
    /// Workflow transactions per target module.
    pub modules: BTreeMap<ModuleId, ModuleGas>,
    pub deployments: ModuleGas,
    pub workflow: ModuleGas,
    pub all: ModuleGas,
}

/// The single-writer transaction log and the state it drives.
pub struct Ledger {
    config: LedgerConfig,
    modules: BTreeMap<ModuleId, Box<dyn Module>>,
    storage: Storage,
    entries: Vec<ChainEntry>,
    last_trace: Vec<TraceStep>,
}

impl fmt::Debug for Ledger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Ledger")
            .field("modules", &self.modules.keys().collect::<Vec<_>>())
            .field("entries", &self.entries.len())
            .field("slots", &self.storage.len())
            .finish()
    }
}

impl Ledger {
    pub fn new(config: LedgerConfig) -> Result<Self, LedgerError> {
        config.gas.validate()?;
        Ok(Self {
            config,
            modules: BTreeMap::new(),
            storage: Storage::new(),
            entries: Vec::new(),
            last_trace: Vec::new(),
        })
    }

    pub fn register(&mut self, module: Box<dyn Module>) {
        self.modules.insert(module.id(), module);
    }

    pub fn config(&self) -> &LedgerConfig {
        &self.config
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn entries(&self) -> &[ChainEntry] {
        &self.entries
    }

    pub fn len(&self) -> u64 {
        self.entries.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn head_hash(&self) -> H256 {
        self.entries
            .last()
            .map(|e| e.entry_hash)
            .unwrap_or(H256::ZERO)
    }

    /// Reads and writes performed by the most recent transaction.
    pub fn last_trace(&self) -> &[TraceStep] {
        &self.last_trace
    }

    pub fn is_deployed(&self, module: ModuleId) -> bool {
        let key = deployed_slot(&mut crate::storage::StateView::new(&self.storage), module);
        !self.storage.get(&key).is_zero()
    }

    pub fn submit(&mut self, tx: Transaction) -> Result<Receipt, LedgerError> {
        if tx.seq != self.len() {
            return Err(LedgerError::SeqMismatch {
                expected: self.len(),
                got: tx.seq,
            });
        }

        let schedule = self.config.gas;
        let mut ctx = CallContext::new(&mut self.storage, &tx);
        let outcome = match self.modules.get(&tx.target_module) {
            None => Err(ContractError::UnknownModule(tx.target_module)),
            Some(module) if tx.is_deployment() => deploy(module.as_ref(), &mut ctx),
            Some(module) => module.execute(&mut ctx, &tx.op_name, &tx.payload),
        };

        let mut gas_used = ctx.meter.total(&schedule);
        let (status, revert_reason, events) = match outcome {
            Ok(()) => {
                if tx.is_deployment() {
                    gas_used = self
                        .config
                        .deployment_gas
                        .get(&tx.target_module)
                        .copied()
                        .unwrap_or(schedule.tx_base);
                }
                (TxStatus::Success, None, std::mem::take(&mut ctx.events))
            }
            Err(err) => {
                ctx.rollback();
                (TxStatus::Reverted, Some(err.to_string()), Vec::new())
            }
        };
        self.last_trace = std::mem::take(&mut ctx.trace);
        drop(ctx);

        let receipt = Receipt {
            tx_seq: tx.seq,
            status,
            revert_reason,
            gas_used,
            events,
            state_root_hash: self.storage.root(),
        };
        let hash = entry_hash(&self.head_hash(), &tx, &receipt);
        self.entries.push(ChainEntry {
            tx,
            receipt: receipt.clone(),
            entry_hash: hash,
        });
        Ok(receipt)
    }

    pub fn verify_chain(&self) -> ChainVerification {
        verify_entries(&self.entries)
    }

    pub fn gas_report(&self) -> GasReport {
        let mut report = GasReport::default();
        for entry in &self.entries {
            let gas = entry.receipt.gas_used;
            report.all.add(gas);
            if entry.tx.is_deployment() {
                report.deployments.add(gas);
            } else {
                report.workflow.add(gas);
                report
                    .modules
                    .entry(entry.tx.target_module)
                    .or_default()
                    .add(gas);
            }
        }
        report
    }

    /// Writes one JSON object per chain entry.
    pub fn dump<W: Write>(&self, mut out: W) -> Result<(), LedgerError> {
        for entry in &self.entries {
            serde_json::to_writer(&mut out, entry).map_err(|source| LedgerError::Json {
                line: entry.tx.seq as usize + 1,
                source,
            })?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    /// Replays a dump into this (empty) ledger, checking every entry hash.
    pub fn restore<R: BufRead>(&mut self, input: R) -> Result<(), LedgerError> {
        for entry in read_entries(input)? {
            let seq = entry.tx.seq;
            self.submit(entry.tx.clone())?;
            if self.entries.last() != Some(&entry) {
                return Err(LedgerError::ReplayMismatch(seq));
            }
        }
        Ok(())
    }
}

/// Parses a JSON-lines dump without replaying it.
pub fn read_entries<R: BufRead>(input: R) -> Result<Vec<ChainEntry>, LedgerError> {
    let mut entries = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|source| LedgerError::Json {
            line: i + 1,
            source,
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

fn deployed_slot<R: SlotRead>(r: &mut R, module: ModuleId) -> Word {
    r.slot("ledger.deployed", &[word_u64(module.index())])
}

fn deploy(module: &dyn Module, ctx: &mut CallContext<'_>) -> Result<(), ContractError> {
    let key = deployed_slot(ctx, module.id());
    if !ctx.load(&key).is_zero() {
        return Err(ContractError::AlreadyDeployed(module.id()));
    }
    ctx.store_u64(key, 1);
    module.on_deploy(ctx)
}
