//! Write-once anchoring of identity-free script IDs to content hashes.
//!
//! The student address passed to `registerScript` is consulted for the
//! enrollment check and then dropped: it is never stored or emitted.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::codec;
use crate::contract::{decode_args, unknown_op, ContractCall};
use crate::error::ContractError;
use crate::exam::{self, ExamState};
use crate::hash::{Address, H256};
use crate::ledger::{CallContext, Module, ModuleId};
use crate::rbac::{self, Role};
use crate::storage::{slot_offset, word_addr, word_short_bytes, word_u64, SlotRead, SlotWrite, Word};

const PREFIX: &str = "TS_";
const HEX_LEN: usize = 16;

/// `TS_` followed by 16 lower-case hex characters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ScriptId(String);

impl ScriptId {
    pub fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut bytes = [0u8; HEX_LEN / 2];
        rng.fill_bytes(&mut bytes);
        ScriptId(format!("{PREFIX}{}", hex::encode(bytes)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub(crate) fn to_word(&self) -> Word {
        word_short_bytes(self.0.as_bytes())
    }

    pub(crate) fn from_word(w: &Word) -> Option<ScriptId> {
        let len = PREFIX.len() + HEX_LEN;
        std::str::from_utf8(&w.0[..len]).ok()?.parse().ok()
    }
}

impl fmt::Display for ScriptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ScriptId {
    type Err = ContractError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let valid = s
            .strip_prefix(PREFIX)
            .is_some_and(|h| h.len() == HEX_LEN && h.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)));
        if valid {
            Ok(ScriptId(s.to_string()))
        } else {
            Err(ContractError::MalformedScriptId(s.to_string()))
        }
    }
}

impl TryFrom<String> for ScriptId {
    type Error = ContractError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ScriptId> for String {
    fn from(id: ScriptId) -> String {
        id.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRecord {
    pub script_id: ScriptId,
    pub exam_id: u64,
    pub content_hash: H256,
    pub registered_by: Address,
    pub registered_at_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HashCall {
    RegisterScript {
        exam_id: u64,
        script_id: ScriptId,
        content_hash: H256,
        student: Address,
    },
}

impl ContractCall for HashCall {
    const MODULE: ModuleId = ModuleId::HashRegistry;

    fn op_name(&self) -> &'static str {
        match self {
            HashCall::RegisterScript { .. } => "registerScript",
        }
    }

    fn encode_args(&self) -> Vec<u8> {
        match self {
            HashCall::RegisterScript {
                exam_id,
                script_id,
                content_hash,
                student,
            } => codec::encode(&(exam_id, script_id, content_hash, student)),
        }
    }

    fn decode(op: &str, payload: &[u8]) -> Result<Self, ContractError> {
        match op {
            "registerScript" => {
                let (exam_id, script_id, content_hash, student) = decode_args(op, payload)?;
                Ok(HashCall::RegisterScript {
                    exam_id,
                    script_id,
                    content_hash,
                    student,
                })
            }
            _ => Err(unknown_op(Self::MODULE, op)),
        }
    }
}

const REGISTERED: u64 = 0;
const CONTENT_HASH: u64 = 1;
const EXAM_ID: u64 = 2;
const REGISTERED_BY: u64 = 3;
const REGISTERED_AT: u64 = 4;

fn record_slot<R: SlotRead>(r: &mut R, id: &ScriptId) -> Word {
    r.slot("hash.script", &[id.to_word()])
}

fn exam_list_slot<R: SlotRead>(r: &mut R, exam_id: u64) -> Word {
    r.slot("hash.exam_scripts", &[word_u64(exam_id)])
}

pub fn script_record<R: SlotRead>(r: &mut R, id: &ScriptId) -> Option<ScriptRecord> {
    let base = record_slot(r, id);
    if r.load(&slot_offset(&base, REGISTERED)).is_zero() {
        return None;
    }
    Some(ScriptRecord {
        script_id: id.clone(),
        content_hash: r.load(&slot_offset(&base, CONTENT_HASH)),
        exam_id: r.load_u64(&slot_offset(&base, EXAM_ID)),
        registered_by: r.load_addr(&slot_offset(&base, REGISTERED_BY)),
        registered_at_seq: r.load_u64(&slot_offset(&base, REGISTERED_AT)),
    })
}

pub fn script_hash<R: SlotRead>(r: &mut R, id: &ScriptId) -> Result<H256, ContractError> {
    let base = record_slot(r, id);
    if r.load(&slot_offset(&base, REGISTERED)).is_zero() {
        return Err(ContractError::UnknownScript(id.to_string()));
    }
    Ok(r.load(&slot_offset(&base, CONTENT_HASH)))
}

/// Exam a script was registered under, if registered.
pub(crate) fn script_exam<R: SlotRead>(r: &mut R, id: &ScriptId) -> Option<u64> {
    let base = record_slot(r, id);
    if r.load(&slot_offset(&base, REGISTERED)).is_zero() {
        return None;
    }
    Some(r.load_u64(&slot_offset(&base, EXAM_ID)))
}

pub fn scripts_for_exam<R: SlotRead>(r: &mut R, exam_id: u64) -> Vec<ScriptId> {
    let key = exam_list_slot(r, exam_id);
    let len = r.list_len(&key);
    (0..len)
        .filter_map(|i| {
            let slot = r.list_element(&key, i, 1);
            ScriptId::from_word(&r.load(&slot))
        })
        .collect()
}

fn register_script(
    ctx: &mut CallContext<'_>,
    exam_id: u64,
    script_id: &ScriptId,
    content_hash: &H256,
    student: &Address,
) -> Result<(), ContractError> {
    let sender = ctx.sender();
    if !rbac::has_role(ctx, &sender, Role::Admin) {
        return Err(ContractError::NotAdmin);
    }
    exam::require_state(ctx, exam_id, ExamState::Active)?;
    if !rbac::is_student_enrolled(ctx, exam_id, student) {
        return Err(ContractError::NotEnrolled(exam_id));
    }
    let base = record_slot(ctx, script_id);
    if !ctx.load(&slot_offset(&base, REGISTERED)).is_zero() {
        return Err(ContractError::DuplicateScriptId(script_id.to_string()));
    }

    let seq = ctx.seq();
    ctx.store_u64(slot_offset(&base, REGISTERED), 1);
    ctx.store(slot_offset(&base, CONTENT_HASH), *content_hash);
    ctx.store_u64(slot_offset(&base, EXAM_ID), exam_id);
    ctx.store(slot_offset(&base, REGISTERED_BY), word_addr(&sender));
    ctx.store_u64(slot_offset(&base, REGISTERED_AT), seq);

    let list = exam_list_slot(ctx, exam_id);
    let element = ctx.list_push(list, 1);
    ctx.store(element, script_id.to_word());
    exam::increment_script_count(ctx, exam_id);

    ctx.emit(
        "HashRegistered",
        vec![script_id.to_word(), *content_hash, word_u64(exam_id)],
        Vec::new(),
    );
    Ok(())
}

pub struct HashRegistryModule;

impl Module for HashRegistryModule {
    fn id(&self) -> ModuleId {
        ModuleId::HashRegistry
    }

    fn execute(&self, ctx: &mut CallContext<'_>, op: &str, payload: &[u8]) -> Result<(), ContractError> {
        match HashCall::decode(op, payload)? {
            HashCall::RegisterScript {
                exam_id,
                script_id,
                content_hash,
                student,
            } => register_script(ctx, exam_id, &script_id, &content_hash, &student),
        }
    }
}
