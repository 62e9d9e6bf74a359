//! Mark submission, justified revision, publication, and the per-script
//! audit trail.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::codec;
use crate::contract::{decode_args, unknown_op, ContractCall};
use crate::error::ContractError;
use crate::exam::{self, ExamState};
use crate::hash::Address;
use crate::hash_registry::{self, ScriptId};
use crate::ledger::{CallContext, Module, ModuleId};
use crate::rbac::{self, Role};
use crate::storage::{slot_offset, word_u64, SlotRead, SlotWrite, Word};

pub const DEFAULT_MAX_MARKS: u64 = 100;

pub const GRADE_SHEET_HEADER: &str = "script_id,marks,status,revision_count";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MarkStatus {
    Submitted,
    Revised,
    Published,
}

impl MarkStatus {
    fn code(self) -> u64 {
        self as u64 + 1
    }

    fn from_code(code: u64) -> Option<MarkStatus> {
        match code {
            1 => Some(MarkStatus::Submitted),
            2 => Some(MarkStatus::Revised),
            3 => Some(MarkStatus::Published),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            MarkStatus::Submitted => "SUBMITTED",
            MarkStatus::Revised => "REVISED",
            MarkStatus::Published => "PUBLISHED",
        }
    }
}

impl fmt::Display for MarkStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkRecord {
    pub exam_id: u64,
    pub script_id: ScriptId,
    pub current_marks: u64,
    pub max_marks: u64,
    pub status: MarkStatus,
    pub submitted_by: Address,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub script_id: ScriptId,
    pub old_marks: Option<u64>,
    pub new_marks: u64,
    pub actor: Address,
    pub justification: Option<String>,
    pub ledger_seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultView {
    pub marks: u64,
    pub status: MarkStatus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuditCall {
    SubmitMarks {
        exam_id: u64,
        script_id: ScriptId,
        marks: u64,
    },
    ReviseMarks {
        exam_id: u64,
        script_id: ScriptId,
        new_marks: u64,
        justification: String,
    },
    PublishResult {
        exam_id: u64,
        script_id: ScriptId,
    },
}

impl ContractCall for AuditCall {
    const MODULE: ModuleId = ModuleId::ResultAudit;

    fn op_name(&self) -> &'static str {
        match self {
            AuditCall::SubmitMarks { .. } => "submitMarks",
            AuditCall::ReviseMarks { .. } => "reviseMarks",
            AuditCall::PublishResult { .. } => "publishResult",
        }
    }

    fn encode_args(&self) -> Vec<u8> {
        match self {
            AuditCall::SubmitMarks {
                exam_id,
                script_id,
                marks,
            } => codec::encode(&(exam_id, script_id, marks)),
            AuditCall::ReviseMarks {
                exam_id,
                script_id,
                new_marks,
                justification,
            } => codec::encode(&(exam_id, script_id, new_marks, justification)),
            AuditCall::PublishResult { exam_id, script_id } => codec::encode(&(exam_id, script_id)),
        }
    }

    fn decode(op: &str, payload: &[u8]) -> Result<Self, ContractError> {
        Ok(match op {
            "submitMarks" => {
                let (exam_id, script_id, marks) = decode_args(op, payload)?;
                AuditCall::SubmitMarks {
                    exam_id,
                    script_id,
                    marks,
                }
            }
            "reviseMarks" => {
                let (exam_id, script_id, new_marks, justification) = decode_args(op, payload)?;
                AuditCall::ReviseMarks {
                    exam_id,
                    script_id,
                    new_marks,
                    justification,
                }
            }
            "publishResult" => {
                let (exam_id, script_id) = decode_args(op, payload)?;
                AuditCall::PublishResult { exam_id, script_id }
            }
            _ => return Err(unknown_op(Self::MODULE, op)),
        })
    }
}

// MarkRecord layout
const STATUS: u64 = 0;
const CURRENT: u64 = 1;
const MAX: u64 = 2;
const SUBMITTED_BY: u64 = 3;
const EXAM_ID: u64 = 4;

// AuditEntry layout (array stride)
const ENTRY_WORDS: u64 = 5;
const E_OLD: u64 = 0;
const E_NEW: u64 = 1;
const E_ACTOR: u64 = 2;
const E_SEQ: u64 = 3;
const E_JUSTIFICATION: u64 = 4;

fn mark_slot<R: SlotRead>(r: &mut R, id: &ScriptId) -> Word {
    r.slot("audit.mark", &[id.to_word()])
}

fn trail_slot<R: SlotRead>(r: &mut R, id: &ScriptId) -> Word {
    r.slot("audit.trail", &[id.to_word()])
}

pub fn mark_record<R: SlotRead>(r: &mut R, id: &ScriptId) -> Option<MarkRecord> {
    let base = mark_slot(r, id);
    let status = MarkStatus::from_code(r.load_u64(&slot_offset(&base, STATUS)))?;
    Some(MarkRecord {
        exam_id: r.load_u64(&slot_offset(&base, EXAM_ID)),
        script_id: id.clone(),
        current_marks: r.load_u64(&slot_offset(&base, CURRENT)),
        max_marks: r.load_u64(&slot_offset(&base, MAX)),
        status,
        submitted_by: r.load_addr(&slot_offset(&base, SUBMITTED_BY)),
    })
}

pub fn get_result<R: SlotRead>(r: &mut R, id: &ScriptId) -> Result<ResultView, ContractError> {
    let rec = mark_record(r, id).ok_or_else(|| ContractError::UnknownMarkRecord(id.to_string()))?;
    Ok(ResultView {
        marks: rec.current_marks,
        status: rec.status,
    })
}

pub fn audit_trail<R: SlotRead>(r: &mut R, id: &ScriptId) -> Vec<AuditEntry> {
    let key = trail_slot(r, id);
    let len = r.list_len(&key);
    (0..len)
        .map(|i| {
            let base = r.list_element(&key, i, ENTRY_WORDS);
            let old = r.load_u64(&slot_offset(&base, E_OLD));
            let justification = r.load_string(&slot_offset(&base, E_JUSTIFICATION));
            AuditEntry {
                script_id: id.clone(),
                old_marks: old.checked_sub(1),
                new_marks: r.load_u64(&slot_offset(&base, E_NEW)),
                actor: r.load_addr(&slot_offset(&base, E_ACTOR)),
                justification: (!justification.is_empty()).then_some(justification),
                ledger_seq: r.load_u64(&slot_offset(&base, E_SEQ)),
            }
        })
        .collect()
}

/// CSV grade sheet for every marked script of an exam, in registration
/// order. Fails if any mark record is not yet published.
pub fn export_grade_sheet<R: SlotRead>(r: &mut R, exam_id: u64) -> Result<String, ContractError> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let header: Vec<&str> = GRADE_SHEET_HEADER.split(',').collect();
    out.write_record(&header).expect("in-memory csv write");
    for id in hash_registry::scripts_for_exam(r, exam_id) {
        let Some(rec) = mark_record(r, &id) else {
            continue;
        };
        if rec.status != MarkStatus::Published {
            return Err(ContractError::NotFinalized);
        }
        let key = trail_slot(r, &id);
        let revisions = r.list_len(&key).saturating_sub(1);
        out.write_record([
            id.as_str(),
            &rec.current_marks.to_string(),
            rec.status.as_str(),
            &revisions.to_string(),
        ])
        .expect("in-memory csv write");
    }
    let bytes = out.into_inner().expect("in-memory csv flush");
    Ok(String::from_utf8(bytes).expect("csv of ascii fields"))
}

fn append_audit(
    ctx: &mut CallContext<'_>,
    id: &ScriptId,
    old: Option<u64>,
    new: u64,
    justification: Option<&str>,
) {
    let actor = ctx.sender();
    let seq = ctx.seq();
    let key = trail_slot(ctx, id);
    let base = ctx.list_push(key, ENTRY_WORDS);
    if let Some(old) = old {
        ctx.store_u64(slot_offset(&base, E_OLD), old + 1);
    }
    ctx.store_u64(slot_offset(&base, E_NEW), new);
    ctx.store_addr(slot_offset(&base, E_ACTOR), &actor);
    ctx.store_u64(slot_offset(&base, E_SEQ), seq);
    if let Some(text) = justification {
        ctx.store_string(slot_offset(&base, E_JUSTIFICATION), text);
    }
}

fn check_range(marks: u64, max: u64) -> Result<(), ContractError> {
    if marks > max {
        return Err(ContractError::MarksOutOfRange { marks, max });
    }
    Ok(())
}

/// Loads the mark record for `id` under `exam_id`.
fn existing_record(
    ctx: &mut CallContext<'_>,
    exam_id: u64,
    id: &ScriptId,
) -> Result<(Word, MarkStatus), ContractError> {
    let base = mark_slot(ctx, id);
    let status = MarkStatus::from_code(ctx.load_u64(&slot_offset(&base, STATUS)))
        .ok_or_else(|| ContractError::UnknownMarkRecord(id.to_string()))?;
    if ctx.load_u64(&slot_offset(&base, EXAM_ID)) != exam_id {
        return Err(ContractError::UnknownMarkRecord(id.to_string()));
    }
    Ok((base, status))
}

fn submit_marks(ctx: &mut CallContext<'_>, exam_id: u64, id: &ScriptId, marks: u64) -> Result<(), ContractError> {
    let sender = ctx.sender();
    if !rbac::has_role(ctx, &sender, Role::Examiner) {
        return Err(ContractError::NotExaminer);
    }
    exam::require_state(ctx, exam_id, ExamState::Submitted)?;
    if hash_registry::script_exam(ctx, id) != Some(exam_id) {
        return Err(ContractError::UnknownScript(id.to_string()));
    }
    let base = mark_slot(ctx, id);
    if !ctx.load(&slot_offset(&base, STATUS)).is_zero() {
        return Err(ContractError::AlreadySubmitted(id.to_string()));
    }
    check_range(marks, DEFAULT_MAX_MARKS)?;

    ctx.store_u64(slot_offset(&base, STATUS), MarkStatus::Submitted.code());
    ctx.store_u64(slot_offset(&base, CURRENT), marks);
    ctx.store_u64(slot_offset(&base, MAX), DEFAULT_MAX_MARKS);
    ctx.store_addr(slot_offset(&base, SUBMITTED_BY), &sender);
    ctx.store_u64(slot_offset(&base, EXAM_ID), exam_id);
    append_audit(ctx, id, None, marks, None);
    ctx.emit(
        "MarksSubmitted",
        vec![id.to_word(), word_u64(exam_id)],
        codec::encode(&marks),
    );
    Ok(())
}

fn revise_marks(
    ctx: &mut CallContext<'_>,
    exam_id: u64,
    id: &ScriptId,
    new_marks: u64,
    justification: &str,
) -> Result<(), ContractError> {
    let sender = ctx.sender();
    if !rbac::has_role(ctx, &sender, Role::Scrutinizer) {
        return Err(ContractError::NotScrutinizer);
    }
    exam::require_state(ctx, exam_id, ExamState::Scrutinized)?;
    let (base, status) = existing_record(ctx, exam_id, id)?;
    if status == MarkStatus::Published {
        return Err(ContractError::AlreadyPublished(id.to_string()));
    }
    if justification.trim().is_empty() {
        return Err(ContractError::EmptyJustification);
    }
    let max = ctx.load_u64(&slot_offset(&base, MAX));
    check_range(new_marks, max)?;

    let old = ctx.load_u64(&slot_offset(&base, CURRENT));
    ctx.store_u64(slot_offset(&base, CURRENT), new_marks);
    ctx.store_u64(slot_offset(&base, STATUS), MarkStatus::Revised.code());
    append_audit(ctx, id, Some(old), new_marks, Some(justification));
    ctx.emit(
        "MarksRevised",
        vec![id.to_word(), word_u64(exam_id)],
        codec::encode(&(old, new_marks, justification)),
    );
    Ok(())
}

fn publish_result(ctx: &mut CallContext<'_>, exam_id: u64, id: &ScriptId) -> Result<(), ContractError> {
    let sender = ctx.sender();
    if !rbac::has_role(ctx, &sender, Role::Admin) {
        return Err(ContractError::NotAdmin);
    }
    exam::require_state(ctx, exam_id, ExamState::Completed)?;
    let (base, status) = existing_record(ctx, exam_id, id)?;
    if status == MarkStatus::Published {
        return Err(ContractError::AlreadyPublished(id.to_string()));
    }
    let marks = ctx.load_u64(&slot_offset(&base, CURRENT));
    ctx.store_u64(slot_offset(&base, STATUS), MarkStatus::Published.code());
    ctx.emit(
        "ResultPublished",
        vec![id.to_word(), word_u64(exam_id)],
        codec::encode(&marks),
    );
    Ok(())
}

/// Decodes the justification carried by a `MarksRevised` event.
pub fn revision_from_event(data: &[u8]) -> Option<(u64, u64, String)> {
    codec::decode(data).ok()
}

pub struct ResultAuditModule;

impl Module for ResultAuditModule {
    fn id(&self) -> ModuleId {
        ModuleId::ResultAudit
    }

    fn execute(&self, ctx: &mut CallContext<'_>, op: &str, payload: &[u8]) -> Result<(), ContractError> {
        match AuditCall::decode(op, payload)? {
            AuditCall::SubmitMarks {
                exam_id,
                script_id,
                marks,
            } => submit_marks(ctx, exam_id, &script_id, marks),
            AuditCall::ReviseMarks {
                exam_id,
                script_id,
                new_marks,
                justification,
            } => revise_marks(ctx, exam_id, &script_id, new_marks, &justification),
            AuditCall::PublishResult { exam_id, script_id } => publish_result(ctx, exam_id, &script_id),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Engine;
    use crate::hash::H256;

    fn addr(s: &str) -> Address {
        Address::derive(s)
    }

    fn sid(n: u64) -> ScriptId {
        format!("TS_{n:016x}").parse().unwrap()
    }

    /// One exam with scripts 1..=n registered and the exam at SUBMITTED.
    fn marked_exam(n: u64) -> Engine {
        let mut e = Engine::default();
        e.deploy(addr("deployer")).unwrap();
        e.grant_role(addr("deployer"), addr("admin"), Role::Admin).unwrap();
        e.grant_role(addr("admin"), addr("ex"), Role::Examiner).unwrap();
        e.grant_role(addr("admin"), addr("sc"), Role::Scrutinizer).unwrap();
        e.create_exam(addr("admin"), 1, "t").unwrap();
        for i in 1..=n {
            let s = addr(&format!("s{i}"));
            e.grant_role(addr("admin"), s, Role::Student).unwrap();
            e.enroll(addr("admin"), 1, s).unwrap();
        }
        e.advance_state(addr("admin"), 1, ExamState::Active).unwrap();
        for i in 1..=n {
            let s = addr(&format!("s{i}"));
            let r = e.register_script(addr("admin"), 1, sid(i), H256([i as u8; 32]), s).unwrap();
            assert!(r.is_success());
        }
        e.advance_state(addr("admin"), 1, ExamState::Submitted).unwrap();
        e
    }

    #[test]
    fn submit_revise_publish_flow() {
        let mut e = marked_exam(1);
        assert!(e.submit_marks(addr("ex"), 1, sid(1), 73).unwrap().is_success());
        assert_eq!(e.get_result(&sid(1)).unwrap(), ResultView { marks: 73, status: MarkStatus::Submitted });
        assert_eq!(e.get_audit_trail(&sid(1)).len(), 1);

        e.advance_state(addr("admin"), 1, ExamState::Scrutinized).unwrap();
        let r = e.revise_marks(addr("sc"), 1, sid(1), 78, "addition error on Q4").unwrap();
        assert!(r.is_success(), "{:?}", r.revert_reason);
        assert_eq!(e.get_result(&sid(1)).unwrap(), ResultView { marks: 78, status: MarkStatus::Revised });
        let trail = e.get_audit_trail(&sid(1));
        assert_eq!(trail.len(), 2);
        assert_eq!(trail[0].old_marks, None);
        assert_eq!(trail[0].justification, None);
        assert_eq!(trail[1].old_marks, Some(73));
        assert_eq!(trail[1].justification.as_deref(), Some("addition error on Q4"));
        assert_eq!(trail[1].actor, addr("sc"));
        assert!(trail[0].ledger_seq < trail[1].ledger_seq);

        e.advance_state(addr("admin"), 1, ExamState::Completed).unwrap();
        assert!(e.publish_result(addr("admin"), 1, sid(1)).unwrap().is_success());
        assert_eq!(e.get_result(&sid(1)).unwrap(), ResultView { marks: 78, status: MarkStatus::Published });
    }

    #[test]
    fn submit_errors() {
        let mut e = marked_exam(1);
        let r = e.submit_marks(addr("sc"), 1, sid(1), 50).unwrap();
        assert_eq!(r.revert_reason.as_deref(), Some("Caller is not Examiner"));
        let r = e.submit_marks(addr("ex"), 1, sid(99), 50).unwrap();
        assert_eq!(r.revert_reason.as_deref(), Some("Unknown script TS_0000000000000063"));
        let r = e.submit_marks(addr("ex"), 1, sid(1), 101).unwrap();
        assert_eq!(r.revert_reason.as_deref(), Some("Marks 101 outside 0..=100"));
        assert!(e.submit_marks(addr("ex"), 1, sid(1), 100).unwrap().is_success());
        let r = e.submit_marks(addr("ex"), 1, sid(1), 40).unwrap();
        assert!(r.revert_reason.unwrap().starts_with("Marks already submitted"));
    }

    #[test]
    fn submit_requires_submitted_state() {
        let mut e = Engine::default();
        e.deploy(addr("deployer")).unwrap();
        e.grant_role(addr("deployer"), addr("admin"), Role::Admin).unwrap();
        e.grant_role(addr("admin"), addr("ex"), Role::Examiner).unwrap();
        e.grant_role(addr("admin"), addr("s"), Role::Student).unwrap();
        e.create_exam(addr("admin"), 1, "t").unwrap();
        e.enroll(addr("admin"), 1, addr("s")).unwrap();
        e.advance_state(addr("admin"), 1, ExamState::Active).unwrap();
        e.register_script(addr("admin"), 1, sid(1), H256([1; 32]), addr("s")).unwrap();
        let r = e.submit_marks(addr("ex"), 1, sid(1), 50).unwrap();
        assert!(r.revert_reason.unwrap().contains("requires SUBMITTED"));
    }

    #[test]
    fn revise_errors() {
        let mut e = marked_exam(2);
        e.submit_marks(addr("ex"), 1, sid(1), 60).unwrap();
        let r = e.revise_marks(addr("sc"), 1, sid(1), 70, "x").unwrap();
        assert!(r.revert_reason.unwrap().contains("requires SCRUTINIZED"));
        e.advance_state(addr("admin"), 1, ExamState::Scrutinized).unwrap();
        let r = e.revise_marks(addr("ex"), 1, sid(1), 70, "x").unwrap();
        assert_eq!(r.revert_reason.as_deref(), Some("Caller is not Scrutinizer"));
        let r = e.revise_marks(addr("sc"), 1, sid(1), 70, "   \t").unwrap();
        assert_eq!(r.revert_reason.as_deref(), Some("Revision requires a non-empty justification"));
        let r = e.revise_marks(addr("sc"), 1, sid(2), 70, "x").unwrap();
        assert_eq!(r.revert_reason.as_deref(), Some("No mark record for TS_0000000000000002"));
        let r = e.revise_marks(addr("sc"), 1, sid(1), 170, "x").unwrap();
        assert_eq!(r.revert_reason.as_deref(), Some("Marks 170 outside 0..=100"));
        assert_eq!(e.get_audit_trail(&sid(1)).len(), 1);
    }

    #[test]
    fn published_is_final() {
        let mut e = marked_exam(1);
        e.submit_marks(addr("ex"), 1, sid(1), 60).unwrap();
        e.advance_state(addr("admin"), 1, ExamState::Scrutinized).unwrap();
        e.advance_state(addr("admin"), 1, ExamState::Completed).unwrap();
        e.publish_result(addr("admin"), 1, sid(1)).unwrap();
        let r = e.publish_result(addr("admin"), 1, sid(1)).unwrap();
        assert!(r.revert_reason.unwrap().contains("already published"));
        // revise is blocked by lifecycle and by finality
        assert!(!e.revise_marks(addr("sc"), 1, sid(1), 61, "x").unwrap().is_success());
        assert!(!e.submit_marks(addr("ex"), 1, sid(1), 61).unwrap().is_success());
    }

    #[test]
    fn grade_sheet_export() {
        let mut e = marked_exam(3);
        for i in 1..=3 {
            e.submit_marks(addr("ex"), 1, sid(i), 50 + i).unwrap();
        }
        e.advance_state(addr("admin"), 1, ExamState::Scrutinized).unwrap();
        e.revise_marks(addr("sc"), 1, sid(2), 80, "missed page").unwrap();
        e.advance_state(addr("admin"), 1, ExamState::Completed).unwrap();
        e.publish_result(addr("admin"), 1, sid(1)).unwrap();
        assert_eq!(e.export_grade_sheet(1), Err(ContractError::NotFinalized));
        e.publish_result(addr("admin"), 1, sid(2)).unwrap();
        e.publish_result(addr("admin"), 1, sid(3)).unwrap();
        let csv = e.export_grade_sheet(1).unwrap();
        assert_eq!(
            csv,
            "script_id,marks,status,revision_count\n\
             TS_0000000000000001,51,PUBLISHED,0\n\
             TS_0000000000000002,80,PUBLISHED,1\n\
             TS_0000000000000003,53,PUBLISHED,0\n"
        );
        assert_eq!(e.export_grade_sheet(1).unwrap(), csv);
    }

    #[test]
    fn justification_recoverable_from_events() {
        let mut e = marked_exam(1);
        e.submit_marks(addr("ex"), 1, sid(1), 60).unwrap();
        e.advance_state(addr("admin"), 1, ExamState::Scrutinized).unwrap();
        let r = e.revise_marks(addr("sc"), 1, sid(1), 64, "Q3 partially correct").unwrap();
        let ev = r.events.iter().find(|ev| ev.name == "MarksRevised").unwrap();
        assert_eq!(
            revision_from_event(&ev.data),
            Some((60, 64, "Q3 partially correct".to_string()))
        );
    }
}
