//! Typed contract calls and their mapping onto ledger transactions.

use serde::de::DeserializeOwned;

use crate::codec;
use crate::error::ContractError;
use crate::ledger::ModuleId;

/// A call that can be carried as `(target_module, op_name, payload)`.
pub trait ContractCall: Sized {
    const MODULE: ModuleId;

    fn op_name(&self) -> &'static str;

    fn encode_args(&self) -> Vec<u8>;

    fn decode(op: &str, payload: &[u8]) -> Result<Self, ContractError>;
}

pub(crate) fn decode_args<T: DeserializeOwned>(op: &str, payload: &[u8]) -> Result<T, ContractError> {
    codec::decode(payload).map_err(|_| ContractError::MalformedPayload(op.to_string()))
}

pub(crate) fn unknown_op(module: ModuleId, op: &str) -> ContractError {
    ContractError::UnknownOp {
        module,
        op: op.to_string(),
    }
}
