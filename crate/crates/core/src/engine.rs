//! Typed front end over the ledger: builds transactions for contract calls
//! and exposes unmetered view queries.

use std::io::BufRead;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::contract::ContractCall;
use crate::error::ContractError;
use crate::exam::{self, ExamCall, ExamRecord, ExamState, ExamLifecycleModule};
use crate::hash::{Address, H256};
use crate::hash_registry::{self, HashCall, HashRegistryModule, ScriptId, ScriptRecord};
use crate::ledger::{Ledger, LedgerConfig, LedgerError, ModuleId, Receipt, Transaction, DEPLOY_OP};
use crate::rbac::{self, RbacCall, RbacModule, Role};
use crate::result_audit::{self, AuditCall, AuditEntry, ResultAuditModule, ResultView};
use crate::storage::StateView;
use crate::zkp::{self, AcademicRecord, CriteriaSet, EligibilityModule, ZkpCall};

/// Source of transaction timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Clock {
    /// `start_ms + seq * step_ms`; reproducible across runs.
    Logical { start_ms: u64, step_ms: u64 },
    System,
}

impl Default for Clock {
    fn default() -> Self {
        Clock::Logical {
            start_ms: 1_700_000_000_000,
            step_ms: 1_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub ledger: LedgerConfig,
    pub clock: Clock,
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    /// Rejected before submission (off-ledger validation).
    #[error("{0}")]
    Rejected(#[from] ContractError),
}

/// Any contract call, as carried by a ledger transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Call {
    Deploy(ModuleId),
    Rbac(RbacCall),
    Exam(ExamCall),
    Hash(HashCall),
    Audit(AuditCall),
    Zkp(ZkpCall),
}

impl Call {
    pub fn module(&self) -> ModuleId {
        match self {
            Call::Deploy(m) => *m,
            Call::Rbac(_) => RbacCall::MODULE,
            Call::Exam(_) => ExamCall::MODULE,
            Call::Hash(_) => HashCall::MODULE,
            Call::Audit(_) => AuditCall::MODULE,
            Call::Zkp(_) => ZkpCall::MODULE,
        }
    }

    pub fn op_name(&self) -> &'static str {
        match self {
            Call::Deploy(_) => DEPLOY_OP,
            Call::Rbac(c) => c.op_name(),
            Call::Exam(c) => c.op_name(),
            Call::Hash(c) => c.op_name(),
            Call::Audit(c) => c.op_name(),
            Call::Zkp(c) => c.op_name(),
        }
    }

    pub fn payload(&self) -> Vec<u8> {
        match self {
            Call::Deploy(_) => Vec::new(),
            Call::Rbac(c) => c.encode_args(),
            Call::Exam(c) => c.encode_args(),
            Call::Hash(c) => c.encode_args(),
            Call::Audit(c) => c.encode_args(),
            Call::Zkp(c) => c.encode_args(),
        }
    }
}

impl From<RbacCall> for Call {
    fn from(c: RbacCall) -> Self {
        Call::Rbac(c)
    }
}
impl From<ExamCall> for Call {
    fn from(c: ExamCall) -> Self {
        Call::Exam(c)
    }
}
impl From<HashCall> for Call {
    fn from(c: HashCall) -> Self {
        Call::Hash(c)
    }
}
impl From<AuditCall> for Call {
    fn from(c: AuditCall) -> Self {
        Call::Audit(c)
    }
}
impl From<ZkpCall> for Call {
    fn from(c: ZkpCall) -> Self {
        Call::Zkp(c)
    }
}

pub struct Engine {
    ledger: Ledger,
    clock: Clock,
}

impl Default for Engine {
    fn default() -> Self {
        Engine::new(EngineConfig::default()).expect("default gas schedule is valid")
    }
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("ledger", &self.ledger).finish()
    }
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Self, LedgerError> {
        let mut ledger = Ledger::new(config.ledger)?;
        ledger.register(Box::new(RbacModule));
        ledger.register(Box::new(ExamLifecycleModule));
        ledger.register(Box::new(HashRegistryModule));
        ledger.register(Box::new(ResultAuditModule));
        ledger.register(Box::new(EligibilityModule));
        Ok(Self {
            ledger,
            clock: config.clock,
        })
    }

    /// Rebuilds an engine by replaying a JSON-lines ledger dump.
    pub fn restore<R: BufRead>(config: EngineConfig, dump: R) -> Result<Self, LedgerError> {
        let mut engine = Engine::new(config)?;
        engine.ledger.restore(dump)?;
        Ok(engine)
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn view(&self) -> StateView<'_> {
        StateView::new(self.ledger.storage())
    }

    fn next_timestamp(&self) -> u64 {
        match self.clock {
            Clock::Logical { start_ms, step_ms } => start_ms + self.ledger.len() * step_ms,
            Clock::System => SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or_default(),
        }
    }

    pub fn submit(&mut self, sender: Address, call: &Call) -> Result<Receipt, EngineError> {
        let tx = Transaction {
            seq: self.ledger.len(),
            sender,
            target_module: call.module(),
            op_name: call.op_name().to_string(),
            payload: call.payload(),
            timestamp: self.next_timestamp(),
        };
        Ok(self.ledger.submit(tx)?)
    }

    /// Deploys the four lifecycle contracts as synthetic entries.
    pub fn deploy(&mut self, deployer: Address) -> Result<Vec<Receipt>, EngineError> {
        ModuleId::CONTRACTS
            .iter()
            .map(|m| self.submit(deployer, &Call::Deploy(*m)))
            .collect()
    }

    // ---- rbac

    pub fn grant_role(&mut self, sender: Address, target: Address, role: Role) -> Result<Receipt, EngineError> {
        self.submit(sender, &RbacCall::GrantRole { target, role }.into())
    }

    pub fn revoke_role(&mut self, sender: Address, target: Address) -> Result<Receipt, EngineError> {
        self.submit(sender, &RbacCall::RevokeRole { target }.into())
    }

    pub fn enroll_student(&mut self, sender: Address, exam_id: u64, student: Address) -> Result<Receipt, EngineError> {
        self.submit(sender, &RbacCall::EnrollStudent { exam_id, student }.into())
    }

    pub fn role_of(&self, addr: &Address) -> Role {
        rbac::role_of(&mut self.view(), addr)
    }

    pub fn has_role(&self, addr: &Address, role: Role) -> bool {
        rbac::has_role(&mut self.view(), addr, role)
    }

    pub fn is_student_enrolled(&self, exam_id: u64, student: &Address) -> bool {
        rbac::is_student_enrolled(&mut self.view(), exam_id, student)
    }

    // ---- exam lifecycle

    pub fn create_exam(&mut self, sender: Address, exam_id: u64, title: &str) -> Result<Receipt, EngineError> {
        let call = ExamCall::CreateExam {
            exam_id,
            title: title.to_string(),
        };
        self.submit(sender, &call.into())
    }

    pub fn advance_state(&mut self, sender: Address, exam_id: u64, target: ExamState) -> Result<Receipt, EngineError> {
        self.submit(sender, &ExamCall::AdvanceState { exam_id, target }.into())
    }

    pub fn enroll(&mut self, sender: Address, exam_id: u64, student: Address) -> Result<Receipt, EngineError> {
        self.submit(sender, &ExamCall::Enroll { exam_id, student }.into())
    }

    pub fn get_exam_state(&self, exam_id: u64) -> Result<ExamState, ContractError> {
        exam::exam_state(&mut self.view(), exam_id)
    }

    pub fn exam(&self, exam_id: u64) -> Option<ExamRecord> {
        exam::exam_record(&mut self.view(), exam_id)
    }

    // ---- hash registry

    pub fn register_script(
        &mut self,
        sender: Address,
        exam_id: u64,
        script_id: ScriptId,
        content_hash: H256,
        student: Address,
    ) -> Result<Receipt, EngineError> {
        let call = HashCall::RegisterScript {
            exam_id,
            script_id,
            content_hash,
            student,
        };
        self.submit(sender, &call.into())
    }

    pub fn get_script_hash(&self, script_id: &ScriptId) -> Result<H256, ContractError> {
        hash_registry::script_hash(&mut self.view(), script_id)
    }

    pub fn script(&self, script_id: &ScriptId) -> Option<ScriptRecord> {
        hash_registry::script_record(&mut self.view(), script_id)
    }

    pub fn scripts_for_exam(&self, exam_id: u64) -> Vec<ScriptId> {
        hash_registry::scripts_for_exam(&mut self.view(), exam_id)
    }

    // ---- result audit

    pub fn submit_marks(&mut self, sender: Address, exam_id: u64, script_id: ScriptId, marks: u64) -> Result<Receipt, EngineError> {
        let call = AuditCall::SubmitMarks {
            exam_id,
            script_id,
            marks,
        };
        self.submit(sender, &call.into())
    }

    pub fn revise_marks(
        &mut self,
        sender: Address,
        exam_id: u64,
        script_id: ScriptId,
        new_marks: u64,
        justification: &str,
    ) -> Result<Receipt, EngineError> {
        let call = AuditCall::ReviseMarks {
            exam_id,
            script_id,
            new_marks,
            justification: justification.to_string(),
        };
        self.submit(sender, &call.into())
    }

    pub fn publish_result(&mut self, sender: Address, exam_id: u64, script_id: ScriptId) -> Result<Receipt, EngineError> {
        self.submit(sender, &AuditCall::PublishResult { exam_id, script_id }.into())
    }

    pub fn get_result(&self, script_id: &ScriptId) -> Result<ResultView, ContractError> {
        result_audit::get_result(&mut self.view(), script_id)
    }

    pub fn get_audit_trail(&self, script_id: &ScriptId) -> Vec<AuditEntry> {
        result_audit::audit_trail(&mut self.view(), script_id)
    }

    pub fn export_grade_sheet(&self, exam_id: u64) -> Result<String, ContractError> {
        result_audit::export_grade_sheet(&mut self.view(), exam_id)
    }

    // ---- eligibility

    /// Computes the commitment off-ledger and anchors only the hash.
    /// Returns the receipt and the hash to hand to the student.
    pub fn commit_academic_record(
        &mut self,
        sender: Address,
        student: Address,
        record: &AcademicRecord,
        exam_ids: Vec<u64>,
    ) -> Result<(Receipt, H256), EngineError> {
        record.check_lengths()?;
        let commit_hash = record.commitment();
        let call = ZkpCall::CommitAcademicRecord {
            student,
            commit_hash,
            exam_ids,
        };
        let receipt = self.submit(sender, &call.into())?;
        Ok((receipt, commit_hash))
    }

    pub fn post_criteria(&mut self, sender: Address, criteria: CriteriaSet) -> Result<Receipt, EngineError> {
        self.submit(sender, &ZkpCall::PostCriteria { criteria }.into())
    }

    pub fn prove_eligibility(
        &mut self,
        sender: Address,
        student: Address,
        criteria_id: u64,
        record: AcademicRecord,
    ) -> Result<Receipt, EngineError> {
        let call = ZkpCall::ProveEligibility {
            student,
            criteria_id,
            record,
        };
        self.submit(sender, &call.into())
    }

    pub fn query_eligibility(&self, criteria_id: u64, student: &Address) -> Result<bool, ContractError> {
        zkp::query_eligibility(&mut self.view(), criteria_id, student)
    }

    pub fn criteria(&self, criteria_id: u64) -> Option<CriteriaSet> {
        zkp::criteria(&mut self.view(), criteria_id)
    }

    pub fn commitment(&self, student: &Address) -> Option<zkp::Commitment> {
        zkp::commitment(&mut self.view(), student)
    }
}
