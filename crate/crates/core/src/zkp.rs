//! Commit-reveal eligibility proofs.
//!
//! 1. The admin hashes a student's finalized record with a random salt
//!    off-ledger and anchors only the hash.
//! 2. A third party posts immutable eligibility criteria.
//! 3. The student reveals the record; the contract recomputes the hash,
//!    evaluates the criteria and stores a single boolean.
//! 4. Anyone can read the boolean and nothing else.

use serde::{Deserialize, Serialize};

use crate::codec;
use crate::contract::{decode_args, unknown_op, ContractCall};
use crate::error::ContractError;
use crate::exam::{self, ExamState};
use crate::hash::{keccak256, Address, H256};
use crate::ledger::{CallContext, Module, ModuleId};
use crate::rbac::{self, Role};
use crate::storage::{slot_offset, word_addr, word_u64, SlotRead, SlotWrite, Word};

/// CGPA is carried as a fixed-point integer: 3.75 -> 375.
pub const CGPA_SCALE: u64 = 100;

/// Preimage of a record commitment: every integer as a 32-byte big-endian
/// word, each list preceded by its length word, then the 32-byte salt.
pub fn commitment_preimage(scaled_cgpa: u64, marks: &[u64], credits: &[u64], salt: &H256) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 * (4 + marks.len() + credits.len()));
    out.extend_from_slice(&word_u64(scaled_cgpa).0);
    for list in [marks, credits] {
        out.extend_from_slice(&word_u64(list.len() as u64).0);
        for v in list {
            out.extend_from_slice(&word_u64(*v).0);
        }
    }
    out.extend_from_slice(&salt.0);
    out
}

pub fn commitment_hash(scaled_cgpa: u64, marks: &[u64], credits: &[u64], salt: &H256) -> H256 {
    keccak256(&commitment_preimage(scaled_cgpa, marks, credits, salt))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriteriaSet {
    pub criteria_id: u64,
    pub min_scaled_cgpa: u64,
    pub min_grade_threshold: u64,
    pub min_total_credits: u64,
    pub require_all_pass: bool,
    pub pass_mark: u64,
}

impl CriteriaSet {
    pub fn evaluate(&self, scaled_cgpa: u64, marks: &[u64], credits: &[u64]) -> bool {
        let cgpa_ok = scaled_cgpa >= self.min_scaled_cgpa;
        let credits_ok = credits.iter().sum::<u64>() >= self.min_total_credits;
        let grade_ok = marks
            .iter()
            .min()
            .is_some_and(|m| *m >= self.min_grade_threshold);
        let pass_ok = !self.require_all_pass || marks.iter().all(|m| *m >= self.pass_mark);
        cgpa_ok && credits_ok && grade_ok && pass_ok
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Commitment {
    pub student: Address,
    pub commit_hash: H256,
    pub created_by: Address,
}

/// The record a student reveals when proving eligibility.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcademicRecord {
    pub scaled_cgpa: u64,
    pub marks: Vec<u64>,
    pub credits: Vec<u64>,
    pub salt: H256,
}

impl AcademicRecord {
    pub fn commitment(&self) -> H256 {
        commitment_hash(self.scaled_cgpa, &self.marks, &self.credits, &self.salt)
    }

    pub fn check_lengths(&self) -> Result<(), ContractError> {
        if self.marks.is_empty() || self.marks.len() != self.credits.len() {
            return Err(ContractError::LengthMismatch);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ZkpCall {
    /// Carries only the hash; the record itself never enters the ledger.
    CommitAcademicRecord {
        student: Address,
        commit_hash: H256,
        exam_ids: Vec<u64>,
    },
    PostCriteria {
        criteria: CriteriaSet,
    },
    ProveEligibility {
        student: Address,
        criteria_id: u64,
        record: AcademicRecord,
    },
}

impl ContractCall for ZkpCall {
    const MODULE: ModuleId = ModuleId::Zkp;

    fn op_name(&self) -> &'static str {
        match self {
            ZkpCall::CommitAcademicRecord { .. } => "commitAcademicRecord",
            ZkpCall::PostCriteria { .. } => "postCriteria",
            ZkpCall::ProveEligibility { .. } => "proveEligibility",
        }
    }

    fn encode_args(&self) -> Vec<u8> {
        match self {
            ZkpCall::CommitAcademicRecord {
                student,
                commit_hash,
                exam_ids,
            } => codec::encode(&(student, commit_hash, exam_ids)),
            ZkpCall::PostCriteria { criteria } => codec::encode(criteria),
            ZkpCall::ProveEligibility {
                student,
                criteria_id,
                record,
            } => codec::encode(&(student, criteria_id, record)),
        }
    }

    fn decode(op: &str, payload: &[u8]) -> Result<Self, ContractError> {
        Ok(match op {
            "commitAcademicRecord" => {
                let (student, commit_hash, exam_ids) = decode_args(op, payload)?;
                ZkpCall::CommitAcademicRecord {
                    student,
                    commit_hash,
                    exam_ids,
                }
            }
            "postCriteria" => ZkpCall::PostCriteria {
                criteria: decode_args(op, payload)?,
            },
            "proveEligibility" => {
                let (student, criteria_id, record) = decode_args(op, payload)?;
                ZkpCall::ProveEligibility {
                    student,
                    criteria_id,
                    record,
                }
            }
            _ => return Err(unknown_op(Self::MODULE, op)),
        })
    }
}

const C_HASH: u64 = 0;
const C_CREATED_BY: u64 = 1;

const K_EXISTS: u64 = 0;
const K_MIN_CGPA: u64 = 1;
const K_MIN_GRADE: u64 = 2;
const K_MIN_CREDITS: u64 = 3;
const K_ALL_PASS: u64 = 4;
const K_PASS_MARK: u64 = 5;
const K_POSTED_BY: u64 = 6;

// outcome encoding
const OUTCOME_FALSE: u64 = 1;
const OUTCOME_TRUE: u64 = 2;

fn commitment_slot<R: SlotRead>(r: &mut R, student: &Address) -> Word {
    r.slot("zkp.commitment", &[word_addr(student)])
}

fn criteria_slot<R: SlotRead>(r: &mut R, id: u64) -> Word {
    r.slot("zkp.criteria", &[word_u64(id)])
}

fn outcome_slot<R: SlotRead>(r: &mut R, id: u64, student: &Address) -> Word {
    r.slot("zkp.outcome", &[word_u64(id), word_addr(student)])
}

pub fn commitment<R: SlotRead>(r: &mut R, student: &Address) -> Option<Commitment> {
    let base = commitment_slot(r, student);
    let commit_hash = r.load(&slot_offset(&base, C_HASH));
    if commit_hash.is_zero() {
        return None;
    }
    Some(Commitment {
        student: *student,
        commit_hash,
        created_by: r.load_addr(&slot_offset(&base, C_CREATED_BY)),
    })
}

pub fn criteria<R: SlotRead>(r: &mut R, id: u64) -> Option<CriteriaSet> {
    let base = criteria_slot(r, id);
    if r.load(&slot_offset(&base, K_EXISTS)).is_zero() {
        return None;
    }
    Some(CriteriaSet {
        criteria_id: id,
        min_scaled_cgpa: r.load_u64(&slot_offset(&base, K_MIN_CGPA)),
        min_grade_threshold: r.load_u64(&slot_offset(&base, K_MIN_GRADE)),
        min_total_credits: r.load_u64(&slot_offset(&base, K_MIN_CREDITS)),
        require_all_pass: r.load_u64(&slot_offset(&base, K_ALL_PASS)) != 0,
        pass_mark: r.load_u64(&slot_offset(&base, K_PASS_MARK)),
    })
}

pub fn query_eligibility<R: SlotRead>(r: &mut R, criteria_id: u64, student: &Address) -> Result<bool, ContractError> {
    let key = outcome_slot(r, criteria_id, student);
    match r.load_u64(&key) {
        OUTCOME_TRUE => Ok(true),
        OUTCOME_FALSE => Ok(false),
        _ => Err(ContractError::NoOutcome),
    }
}

fn commit(
    ctx: &mut CallContext<'_>,
    student: &Address,
    commit_hash: &H256,
    exam_ids: &[u64],
) -> Result<(), ContractError> {
    let sender = ctx.sender();
    if !rbac::has_role(ctx, &sender, Role::Admin) {
        return Err(ContractError::NotAdmin);
    }
    if exam_ids.is_empty() {
        return Err(ContractError::NotFinalized);
    }
    for exam_id in exam_ids {
        if exam::exam_state(ctx, *exam_id)? != ExamState::Completed {
            return Err(ContractError::NotFinalized);
        }
        if !rbac::is_student_enrolled(ctx, *exam_id, student) {
            return Err(ContractError::NotEnrolled(*exam_id));
        }
    }
    let base = commitment_slot(ctx, student);
    if !ctx.load(&slot_offset(&base, C_HASH)).is_zero() {
        return Err(ContractError::DuplicateCommitment);
    }
    ctx.store(slot_offset(&base, C_HASH), *commit_hash);
    ctx.store_addr(slot_offset(&base, C_CREATED_BY), &sender);
    ctx.emit(
        "RecordCommitted",
        vec![word_addr(student), *commit_hash],
        Vec::new(),
    );
    Ok(())
}

fn post_criteria(ctx: &mut CallContext<'_>, c: &CriteriaSet) -> Result<(), ContractError> {
    let base = criteria_slot(ctx, c.criteria_id);
    if !ctx.load(&slot_offset(&base, K_EXISTS)).is_zero() {
        return Err(ContractError::DuplicateCriteria(c.criteria_id));
    }
    let sender = ctx.sender();
    ctx.store_u64(slot_offset(&base, K_EXISTS), 1);
    ctx.store_u64(slot_offset(&base, K_MIN_CGPA), c.min_scaled_cgpa);
    ctx.store_u64(slot_offset(&base, K_MIN_GRADE), c.min_grade_threshold);
    ctx.store_u64(slot_offset(&base, K_MIN_CREDITS), c.min_total_credits);
    ctx.store_u64(slot_offset(&base, K_ALL_PASS), c.require_all_pass as u64);
    ctx.store_u64(slot_offset(&base, K_PASS_MARK), c.pass_mark);
    ctx.store_addr(slot_offset(&base, K_POSTED_BY), &sender);
    ctx.emit(
        "CriteriaPosted",
        vec![word_u64(c.criteria_id), word_addr(&sender)],
        codec::encode(c),
    );
    Ok(())
}

fn prove(
    ctx: &mut CallContext<'_>,
    student: &Address,
    criteria_id: u64,
    record: &AcademicRecord,
) -> Result<(), ContractError> {
    let sender = ctx.sender();
    if sender != *student || !rbac::has_role(ctx, &sender, Role::Student) {
        return Err(ContractError::NotCommittedStudent);
    }
    let stored = commitment(ctx, student).ok_or(ContractError::UnknownCommitment)?;
    let criteria = criteria(ctx, criteria_id).ok_or(ContractError::UnknownCriteria(criteria_id))?;
    let out_key = outcome_slot(ctx, criteria_id, student);
    if ctx.load_u64(&out_key) != 0 {
        return Err(ContractError::AlreadyProven(criteria_id));
    }
    let preimage = commitment_preimage(record.scaled_cgpa, &record.marks, &record.credits, &record.salt);
    if ctx.keccak(&preimage) != stored.commit_hash {
        return Err(ContractError::CommitmentMismatch);
    }
    let eligible = criteria.evaluate(record.scaled_cgpa, &record.marks, &record.credits);
    ctx.store_u64(out_key, if eligible { OUTCOME_TRUE } else { OUTCOME_FALSE });
    ctx.emit(
        "EligibilityRecorded",
        vec![word_addr(student), word_u64(criteria_id)],
        vec![eligible as u8],
    );
    Ok(())
}

pub struct EligibilityModule;

impl Module for EligibilityModule {
    fn id(&self) -> ModuleId {
        ModuleId::Zkp
    }

    fn execute(&self, ctx: &mut CallContext<'_>, op: &str, payload: &[u8]) -> Result<(), ContractError> {
        match ZkpCall::decode(op, payload)? {
            ZkpCall::CommitAcademicRecord {
                student,
                commit_hash,
                exam_ids,
            } => commit(ctx, &student, &commit_hash, &exam_ids),
            ZkpCall::PostCriteria { criteria } => post_criteria(ctx, &criteria),
            ZkpCall::ProveEligibility {
                student,
                criteria_id,
                record,
            } => prove(ctx, &student, criteria_id, &record),
        }
    }
}
