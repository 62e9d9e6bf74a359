//! Revert reasons raised by contract handlers and view queries.

use crate::exam::ExamState;
use crate::ledger::ModuleId;

/// A handler failure. Its `Display` string is the receipt's revert reason.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContractError {
    #[error("Caller is not Admin")]
    NotAdmin,
    #[error("Invalid address")]
    InvalidAddress,
    #[error("Only Admin can enroll students")]
    EnrollNotAdmin,
    #[error("Address is not a registered Student")]
    NotStudent,

    #[error("Exam {0} already exists")]
    DuplicateExam(u64),
    #[error("Unknown exam {0}")]
    UnknownExam(u64),
    #[error("Illegal transition from {from} to {to}")]
    IllegalTransition { from: ExamState, to: ExamState },
    #[error("Exam {exam_id} is {actual}; operation requires {required}")]
    WrongState {
        exam_id: u64,
        actual: ExamState,
        required: &'static str,
    },

    #[error("Student is not enrolled in exam {0}")]
    NotEnrolled(u64),
    #[error("Script ID {0} is already registered")]
    DuplicateScriptId(String),
    #[error("Unknown script {0}")]
    UnknownScript(String),
    #[error("Malformed script ID {0}")]
    MalformedScriptId(String),

    #[error("Caller is not Examiner")]
    NotExaminer,
    #[error("Caller is not Scrutinizer")]
    NotScrutinizer,
    #[error("Marks already submitted for {0}")]
    AlreadySubmitted(String),
    #[error("Marks {marks} outside 0..={max}")]
    MarksOutOfRange { marks: u64, max: u64 },
    #[error("No mark record for {0}")]
    UnknownMarkRecord(String),
    #[error("Revision requires a non-empty justification")]
    EmptyJustification,
    #[error("Result for {0} is already published")]
    AlreadyPublished(String),
    #[error("Results are not finalized")]
    NotFinalized,

    #[error("Marks and credits lists must be non-empty and of equal length")]
    LengthMismatch,
    #[error("Commitment already exists for student")]
    DuplicateCommitment,
    #[error("Criteria {0} already posted")]
    DuplicateCriteria(u64),
    #[error("Caller is not the committed Student")]
    NotCommittedStudent,
    #[error("Revealed values do not match the stored commitment")]
    CommitmentMismatch,
    #[error("No commitment for student")]
    UnknownCommitment,
    #[error("Unknown criteria {0}")]
    UnknownCriteria(u64),
    #[error("Eligibility already proven for criteria {0}")]
    AlreadyProven(u64),
    #[error("No eligibility outcome recorded")]
    NoOutcome,

    #[error("UnknownModule: {0} is not registered")]
    UnknownModule(ModuleId),
    #[error("UnknownOp: {module} has no operation `{op}`")]
    UnknownOp { module: ModuleId, op: String },
    #[error("Malformed payload for `{0}`")]
    MalformedPayload(String),
    #[error("{0} already deployed")]
    AlreadyDeployed(ModuleId),
}
