//! Exam records and the strictly ordered five-state lifecycle.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::codec;
use crate::contract::{decode_args, unknown_op, ContractCall};
use crate::error::ContractError;
use crate::hash::Address;
use crate::ledger::{CallContext, Module, ModuleId};
use crate::rbac::{self, Role};
use crate::storage::{slot_offset, word_u64, SlotRead, SlotWrite, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExamState {
    Created,
    Active,
    Submitted,
    Scrutinized,
    Completed,
}

impl ExamState {
    pub const ALL: [ExamState; 5] = [
        ExamState::Created,
        ExamState::Active,
        ExamState::Submitted,
        ExamState::Scrutinized,
        ExamState::Completed,
    ];

    pub fn successor(self) -> Option<ExamState> {
        ExamState::ALL.get(self as usize + 1).copied()
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ExamState::Created => "CREATED",
            ExamState::Active => "ACTIVE",
            ExamState::Submitted => "SUBMITTED",
            ExamState::Scrutinized => "SCRUTINIZED",
            ExamState::Completed => "COMPLETED",
        }
    }

    fn from_code(code: u64) -> Option<ExamState> {
        // stored as index + 1 so that an absent record reads as zero
        code.checked_sub(1)
            .and_then(|i| ExamState::ALL.get(i as usize).copied())
    }

    fn code(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for ExamState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExamState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExamState::ALL
            .into_iter()
            .find(|st| st.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown exam state `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamRecord {
    pub exam_id: u64,
    pub title: String,
    pub created_by: Address,
    pub state: ExamState,
    pub script_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExamCall {
    CreateExam { exam_id: u64, title: String },
    AdvanceState { exam_id: u64, target: ExamState },
    Enroll { exam_id: u64, student: Address },
}

impl ContractCall for ExamCall {
    const MODULE: ModuleId = ModuleId::ExamLifecycle;

    fn op_name(&self) -> &'static str {
        match self {
            ExamCall::CreateExam { .. } => "createExam",
            ExamCall::AdvanceState { .. } => "advanceState",
            ExamCall::Enroll { .. } => "enroll",
        }
    }

    fn encode_args(&self) -> Vec<u8> {
        match self {
            ExamCall::CreateExam { exam_id, title } => codec::encode(&(exam_id, title)),
            ExamCall::AdvanceState { exam_id, target } => codec::encode(&(exam_id, target)),
            ExamCall::Enroll { exam_id, student } => codec::encode(&(exam_id, student)),
        }
    }

    fn decode(op: &str, payload: &[u8]) -> Result<Self, ContractError> {
        Ok(match op {
            "createExam" => {
                let (exam_id, title) = decode_args(op, payload)?;
                ExamCall::CreateExam { exam_id, title }
            }
            "advanceState" => {
                let (exam_id, target) = decode_args(op, payload)?;
                ExamCall::AdvanceState { exam_id, target }
            }
            "enroll" => {
                let (exam_id, student) = decode_args(op, payload)?;
                ExamCall::Enroll { exam_id, student }
            }
            _ => return Err(unknown_op(Self::MODULE, op)),
        })
    }
}

const STATE: u64 = 0;
const CREATED_BY: u64 = 1;
const SCRIPT_COUNT: u64 = 2;
const TITLE: u64 = 3;

fn record_slot<R: SlotRead>(r: &mut R, exam_id: u64) -> Word {
    r.slot("exam.record", &[word_u64(exam_id)])
}

fn load_state<R: SlotRead>(r: &mut R, base: &Word) -> Option<ExamState> {
    ExamState::from_code(r.load_u64(&slot_offset(base, STATE)))
}

pub fn exam_state<R: SlotRead>(r: &mut R, exam_id: u64) -> Result<ExamState, ContractError> {
    let base = record_slot(r, exam_id);
    load_state(r, &base).ok_or(ContractError::UnknownExam(exam_id))
}

pub fn exam_record<R: SlotRead>(r: &mut R, exam_id: u64) -> Option<ExamRecord> {
    let base = record_slot(r, exam_id);
    let state = load_state(r, &base)?;
    Some(ExamRecord {
        exam_id,
        title: r.load_string(&slot_offset(&base, TITLE)),
        created_by: r.load_addr(&slot_offset(&base, CREATED_BY)),
        state,
        script_count: r.load_u64(&slot_offset(&base, SCRIPT_COUNT)),
    })
}

/// Fails unless the exam exists and is exactly in `required`.
pub(crate) fn require_state<R: SlotRead>(
    r: &mut R,
    exam_id: u64,
    required: ExamState,
) -> Result<(), ContractError> {
    let actual = exam_state(r, exam_id)?;
    if actual != required {
        return Err(ContractError::WrongState {
            exam_id,
            actual,
            required: required.as_str(),
        });
    }
    Ok(())
}

pub(crate) fn increment_script_count(ctx: &mut CallContext<'_>, exam_id: u64) {
    let base = record_slot(ctx, exam_id);
    let key = slot_offset(&base, SCRIPT_COUNT);
    let count = ctx.load_u64(&key);
    ctx.store_u64(key, count + 1);
}

fn create_exam(ctx: &mut CallContext<'_>, exam_id: u64, title: &str) -> Result<(), ContractError> {
    let sender = ctx.sender();
    if !rbac::has_role(ctx, &sender, Role::Admin) {
        return Err(ContractError::NotAdmin);
    }
    let base = record_slot(ctx, exam_id);
    if load_state(ctx, &base).is_some() {
        return Err(ContractError::DuplicateExam(exam_id));
    }
    ctx.store_u64(slot_offset(&base, STATE), ExamState::Created.code());
    ctx.store_addr(slot_offset(&base, CREATED_BY), &sender);
    ctx.store_string(slot_offset(&base, TITLE), title);
    ctx.emit(
        "ExamCreated",
        vec![word_u64(exam_id), crate::storage::word_addr(&sender)],
        title.as_bytes().to_vec(),
    );
    Ok(())
}

fn advance_state(ctx: &mut CallContext<'_>, exam_id: u64, target: ExamState) -> Result<(), ContractError> {
    let sender = ctx.sender();
    if !rbac::has_role(ctx, &sender, Role::Admin) {
        return Err(ContractError::NotAdmin);
    }
    let base = record_slot(ctx, exam_id);
    let current = load_state(ctx, &base).ok_or(ContractError::UnknownExam(exam_id))?;
    if current.successor() != Some(target) {
        return Err(ContractError::IllegalTransition {
            from: current,
            to: target,
        });
    }
    ctx.store_u64(slot_offset(&base, STATE), target.code());
    ctx.emit(
        "StateAdvanced",
        vec![word_u64(exam_id), word_u64(current.code()), word_u64(target.code())],
        Vec::new(),
    );
    Ok(())
}

fn enroll(ctx: &mut CallContext<'_>, exam_id: u64, student: &Address) -> Result<(), ContractError> {
    let state = exam_state(ctx, exam_id)?;
    if !matches!(state, ExamState::Created | ExamState::Active) {
        return Err(ContractError::WrongState {
            exam_id,
            actual: state,
            required: "CREATED or ACTIVE",
        });
    }
    rbac::enroll_student(ctx, exam_id, student)
}

pub struct ExamLifecycleModule;

impl Module for ExamLifecycleModule {
    fn id(&self) -> ModuleId {
        ModuleId::ExamLifecycle
    }

    fn execute(&self, ctx: &mut CallContext<'_>, op: &str, payload: &[u8]) -> Result<(), ContractError> {
        match ExamCall::decode(op, payload)? {
            ExamCall::CreateExam { exam_id, title } => create_exam(ctx, exam_id, &title),
            ExamCall::AdvanceState { exam_id, target } => advance_state(ctx, exam_id, target),
            ExamCall::Enroll { exam_id, student } => enroll(ctx, exam_id, &student),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Engine;
    use crate::ledger::TxStatus;

    fn addr(s: &str) -> Address {
        Address::derive(s)
    }

    fn engine() -> Engine {
        let mut e = Engine::default();
        e.deploy(addr("deployer")).unwrap();
        e.grant_role(addr("deployer"), addr("admin"), Role::Admin).unwrap();
        e.grant_role(addr("admin"), addr("ex"), Role::Examiner).unwrap();
        e.grant_role(addr("admin"), addr("s"), Role::Student).unwrap();
        e
    }

    #[test]
    fn create_and_query() {
        let mut e = engine();
        assert!(matches!(e.get_exam_state(1), Err(ContractError::UnknownExam(1))));
        let r = e.create_exam(addr("admin"), 1, "CSE 101").unwrap();
        assert!(r.is_success());
        assert_eq!(e.get_exam_state(1).unwrap(), ExamState::Created);
        let rec = e.exam(1).unwrap();
        assert_eq!(rec.title, "CSE 101");
        assert_eq!(rec.created_by, addr("admin"));

        let dup = e.create_exam(addr("admin"), 1, "again").unwrap();
        assert_eq!(dup.revert_reason.as_deref(), Some("Exam 1 already exists"));
        let r = e.create_exam(addr("ex"), 2, "x").unwrap();
        assert_eq!(r.revert_reason.as_deref(), Some("Caller is not Admin"));
    }

    #[test]
    fn full_forward_walk() {
        let mut e = engine();
        e.create_exam(addr("admin"), 1, "t").unwrap();
        for target in &ExamState::ALL[1..] {
            let r = e.advance_state(addr("admin"), 1, *target).unwrap();
            assert!(r.is_success(), "{target}: {:?}", r.revert_reason);
            assert_eq!(e.get_exam_state(1).unwrap(), *target);
        }
    }

    #[test]
    fn skip_and_backward_rejected() {
        let mut e = engine();
        e.create_exam(addr("admin"), 1, "t").unwrap();
        e.advance_state(addr("admin"), 1, ExamState::Active).unwrap();
        let r = e.advance_state(addr("admin"), 1, ExamState::Scrutinized).unwrap();
        assert_eq!(
            r.revert_reason.as_deref(),
            Some("Illegal transition from ACTIVE to SCRUTINIZED")
        );
        let r = e.advance_state(addr("admin"), 9, ExamState::Active).unwrap();
        assert_eq!(r.revert_reason.as_deref(), Some("Unknown exam 9"));
    }

    #[test]
    fn enroll_gated_by_state() {
        let mut e = engine();
        e.create_exam(addr("admin"), 1, "t").unwrap();
        e.advance_state(addr("admin"), 1, ExamState::Active).unwrap();
        assert!(e.enroll(addr("admin"), 1, addr("s")).unwrap().is_success());
        assert!(e.is_student_enrolled(1, &addr("s")));

        for st in [ExamState::Submitted, ExamState::Scrutinized, ExamState::Completed] {
            e.advance_state(addr("admin"), 1, st).unwrap();
        }
        let r = e.enroll(addr("admin"), 1, addr("s")).unwrap();
        assert_eq!(r.status, TxStatus::Reverted);
        assert!(r.revert_reason.unwrap().contains("requires CREATED or ACTIVE"));

        let r = e.enroll(addr("admin"), 42, addr("s")).unwrap();
        assert_eq!(r.revert_reason.as_deref(), Some("Unknown exam 42"));
    }

    #[test]
    fn enroll_propagates_rbac_errors() {
        let mut e = engine();
        e.create_exam(addr("admin"), 1, "t").unwrap();
        let r = e.enroll(addr("ex"), 1, addr("s")).unwrap();
        assert_eq!(r.revert_reason.as_deref(), Some("Only Admin can enroll students"));
        let r = e.enroll(addr("admin"), 1, addr("ex")).unwrap();
        assert_eq!(r.revert_reason.as_deref(), Some("Address is not a registered Student"));
    }

    #[test]
    fn successor_chain() {
        assert_eq!(ExamState::Created.successor(), Some(ExamState::Active));
        assert_eq!(ExamState::Completed.successor(), None);
        assert_eq!("scrutinized".parse::<ExamState>().unwrap(), ExamState::Scrutinized);
    }
}
