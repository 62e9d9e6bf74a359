//! Role registry and per-exam enrollment registry.
//!
//! One role per address. The deployer recorded at deployment may grant
//! roles before holding ADMIN itself; every other privileged call checks the
//! stored role only.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::codec;
use crate::contract::{decode_args, unknown_op, ContractCall};
use crate::error::ContractError;
use crate::hash::Address;
use crate::ledger::{CallContext, Module, ModuleId};
use crate::storage::{word_addr, word_u64, SlotRead, SlotWrite, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Role {
    #[default]
    None,
    Admin,
    Examiner,
    Scrutinizer,
    Student,
}

impl Role {
    pub const ALL: [Role; 5] = [
        Role::None,
        Role::Admin,
        Role::Examiner,
        Role::Scrutinizer,
        Role::Student,
    ];

    fn code(self) -> u64 {
        self as u64
    }

    fn from_code(code: u64) -> Role {
        Role::ALL.get(code as usize).copied().unwrap_or(Role::None)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Role::None => "NONE",
            Role::Admin => "ADMIN",
            Role::Examiner => "EXAMINER",
            Role::Scrutinizer => "SCRUTINIZER",
            Role::Student => "STUDENT",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown role `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RbacCall {
    GrantRole { target: Address, role: Role },
    RevokeRole { target: Address },
    EnrollStudent { exam_id: u64, student: Address },
}

impl ContractCall for RbacCall {
    const MODULE: ModuleId = ModuleId::Rbac;

    fn op_name(&self) -> &'static str {
        match self {
            RbacCall::GrantRole { .. } => "grantRole",
            RbacCall::RevokeRole { .. } => "revokeRole",
            RbacCall::EnrollStudent { .. } => "enrollStudent",
        }
    }

    fn encode_args(&self) -> Vec<u8> {
        match self {
            RbacCall::GrantRole { target, role } => codec::encode(&(target, role)),
            RbacCall::RevokeRole { target } => codec::encode(target),
            RbacCall::EnrollStudent { exam_id, student } => codec::encode(&(exam_id, student)),
        }
    }

    fn decode(op: &str, payload: &[u8]) -> Result<Self, ContractError> {
        Ok(match op {
            "grantRole" => {
                let (target, role) = decode_args(op, payload)?;
                RbacCall::GrantRole { target, role }
            }
            "revokeRole" => RbacCall::RevokeRole {
                target: decode_args(op, payload)?,
            },
            "enrollStudent" => {
                let (exam_id, student) = decode_args(op, payload)?;
                RbacCall::EnrollStudent { exam_id, student }
            }
            _ => return Err(unknown_op(Self::MODULE, op)),
        })
    }
}

fn role_slot<R: SlotRead>(r: &mut R, addr: &Address) -> Word {
    r.slot("rbac.role", &[word_addr(addr)])
}

fn enrollment_slot<R: SlotRead>(r: &mut R, exam_id: u64, student: &Address) -> Word {
    r.slot("rbac.enrolled", &[word_u64(exam_id), word_addr(student)])
}

fn deployer_slot<R: SlotRead>(r: &mut R) -> Word {
    r.slot("rbac.deployer", &[])
}

pub fn role_of<R: SlotRead>(r: &mut R, addr: &Address) -> Role {
    let key = role_slot(r, addr);
    Role::from_code(r.load_u64(&key))
}

pub fn deployer<R: SlotRead>(r: &mut R) -> Address {
    let key = deployer_slot(r);
    r.load_addr(&key)
}

/// Exact role equality; roles form no hierarchy.
pub fn has_role<R: SlotRead>(r: &mut R, addr: &Address, expected: Role) -> bool {
    r.note_guard("has_role");
    role_of(r, addr) == expected
}

pub fn is_student_enrolled<R: SlotRead>(r: &mut R, exam_id: u64, student: &Address) -> bool {
    r.note_guard("is_student_enrolled");
    let key = enrollment_slot(r, exam_id, student);
    !r.load(&key).is_zero()
}

fn topic_role(role: Role) -> Word {
    word_u64(role.code())
}

pub(crate) fn grant_role(ctx: &mut CallContext<'_>, target: &Address, role: Role) -> Result<(), ContractError> {
    let sender = ctx.sender();
    let deployer = deployer(ctx);
    let is_deployer = !deployer.is_zero() && sender == deployer;
    if !is_deployer && !has_role(ctx, &sender, Role::Admin) {
        return Err(ContractError::NotAdmin);
    }
    if target.is_zero() {
        return Err(ContractError::InvalidAddress);
    }
    let key = role_slot(ctx, target);
    ctx.store_u64(key, role.code());
    ctx.emit(
        "RoleGranted",
        vec![word_addr(target), topic_role(role), word_addr(&sender)],
        Vec::new(),
    );
    Ok(())
}

pub(crate) fn revoke_role(ctx: &mut CallContext<'_>, target: &Address) -> Result<(), ContractError> {
    let sender = ctx.sender();
    if !has_role(ctx, &sender, Role::Admin) {
        return Err(ContractError::NotAdmin);
    }
    let key = role_slot(ctx, target);
    ctx.store_u64(key, Role::None.code());
    ctx.emit(
        "RoleRevoked",
        vec![word_addr(target), word_addr(&sender)],
        Vec::new(),
    );
    Ok(())
}

pub(crate) fn enroll_student(
    ctx: &mut CallContext<'_>,
    exam_id: u64,
    student: &Address,
) -> Result<(), ContractError> {
    let sender = ctx.sender();
    if !has_role(ctx, &sender, Role::Admin) {
        return Err(ContractError::EnrollNotAdmin);
    }
    if role_of(ctx, student) != Role::Student {
        return Err(ContractError::NotStudent);
    }
    let key = enrollment_slot(ctx, exam_id, student);
    ctx.store_u64(key, 1);
    ctx.emit(
        "StudentEnrolled",
        vec![word_u64(exam_id), word_addr(student)],
        Vec::new(),
    );
    Ok(())
}

pub struct RbacModule;

impl Module for RbacModule {
    fn id(&self) -> ModuleId {
        ModuleId::Rbac
    }

    fn execute(&self, ctx: &mut CallContext<'_>, op: &str, payload: &[u8]) -> Result<(), ContractError> {
        match RbacCall::decode(op, payload)? {
            RbacCall::GrantRole { target, role } => grant_role(ctx, &target, role),
            RbacCall::RevokeRole { target } => revoke_role(ctx, &target),
            RbacCall::EnrollStudent { exam_id, student } => enroll_student(ctx, exam_id, &student),
        }
    }

    fn on_deploy(&self, ctx: &mut CallContext<'_>) -> Result<(), ContractError> {
        let key = deployer_slot(ctx);
        let sender = ctx.sender();
        ctx.store_addr(key, &sender);
        Ok(())
    }
}
