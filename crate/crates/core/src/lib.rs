//! Deterministic examination-lifecycle ledger.
//!
//! A single-process engine that runs role management, the exam state
//! machine, anonymous script anchoring, audited marking and commit-reveal
//! eligibility proofs as gas-metered transactions on an append-only,
//! hash-chained log. Off-ledger pieces (encrypted script storage, the
//! admin's identity manifest, grade sheets) live in [`blob_store`], and
//! [`workload`] drives whole-semester scenarios through the engine.

pub mod blob_store;
pub mod codec;
pub mod contract;
pub mod engine;
pub mod error;
pub mod exam;
pub mod gas;
pub mod hash;
pub mod hash_registry;
pub mod ledger;
pub mod rbac;
pub mod result_audit;
pub mod storage;
pub mod workload;
pub mod zkp;

pub use engine::{Call, Clock, Engine, EngineConfig, EngineError};
pub use error::ContractError;
pub use exam::ExamState;
pub use hash::{keccak256, Address, H256};
pub use hash_registry::ScriptId;
pub use ledger::{ChainEntry, Event, Ledger, LedgerConfig, ModuleId, Receipt, Transaction, TxStatus};
pub use rbac::Role;
