//! Seeded generation of whole-semester transaction scripts.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::WorkloadError;
use crate::engine::Call;
use crate::exam::{ExamCall, ExamState};
use crate::hash::{Address, H256};
use crate::hash_registry::ScriptId;
use crate::ledger::ModuleId;
use crate::rbac::{RbacCall, Role};
use crate::result_audit::AuditCall;
use crate::zkp::{AcademicRecord, CriteriaSet, ZkpCall, CGPA_SCALE};

/// How scripts are spread over exams.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptsPerExam {
    Fixed(u64),
    List(Vec<u64>),
    /// Each of `total` scripts lands in a uniformly chosen exam.
    Multinomial { total: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleGrants {
    pub admins: u64,
    pub examiners: u64,
    pub scrutinizers: u64,
    pub students: u64,
}

impl RoleGrants {
    pub fn total(&self) -> u64 {
        self.admins + self.examiners + self.scrutinizers + self.students
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    /// `round(n * num / den)`, halves rounding up.
    pub fn of(&self, n: u64) -> u64 {
        let (n, num, den) = (n as u128, self.num as u128, self.den as u128);
        ((2 * n * num + den) / (2 * den)) as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub exam_count: u64,
    pub scripts_per_exam: ScriptsPerExam,
    pub role_grants: RoleGrants,
    pub revision_fraction: Fraction,
    /// Students taken through commit/prove after all exams close.
    #[serde(default)]
    pub zkp_sample: u64,
    pub rng_seed: u64,
}

// 250 revisions over the 4,439 large-scenario scripts; the same fraction
// gives 2 and 34 revisions for small and medium.
const REVISIONS: Fraction = Fraction { num: 250, den: 4_439 };

impl ScenarioSpec {
    pub fn small() -> Self {
        Self::builtin("small", 5, 43, (1, 10, 5, 42))
    }

    pub fn medium() -> Self {
        Self::builtin("medium", 25, 605, (1, 30, 10, 123))
    }

    pub fn large() -> Self {
        Self::builtin("large", 100, 4_439, (2, 60, 18, 340))
    }

    pub fn builtin_names() -> [&'static str; 3] {
        ["small", "medium", "large"]
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "small" => Some(Self::small()),
            "medium" => Some(Self::medium()),
            "large" => Some(Self::large()),
            _ => None,
        }
    }

    fn builtin(name: &str, exams: u64, scripts: u64, grants: (u64, u64, u64, u64)) -> Self {
        ScenarioSpec {
            name: name.to_string(),
            exam_count: exams,
            scripts_per_exam: ScriptsPerExam::Multinomial { total: scripts },
            role_grants: RoleGrants {
                admins: grants.0,
                examiners: grants.1,
                scrutinizers: grants.2,
                students: grants.3,
            },
            revision_fraction: REVISIONS,
            zkp_sample: 0,
            rng_seed: 0x5eed_0000 + exams,
        }
    }

    pub fn total_scripts(&self) -> u64 {
        match &self.scripts_per_exam {
            ScriptsPerExam::Fixed(n) => n * self.exam_count,
            ScriptsPerExam::List(v) => v.iter().sum(),
            ScriptsPerExam::Multinomial { total } => *total,
        }
    }

    pub fn revision_count(&self) -> u64 {
        self.revision_fraction.of(self.total_scripts())
    }

    fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |m: String| Err(WorkloadError::InvalidSpec(m));
        if self.revision_fraction.den == 0 || self.revision_fraction.num > self.revision_fraction.den {
            return bad("revision_fraction must lie in [0, 1] with a nonzero denominator".into());
        }
        if let ScriptsPerExam::List(v) = &self.scripts_per_exam {
            if v.len() as u64 != self.exam_count {
                return bad(format!("scripts_per_exam lists {} exams, exam_count is {}", v.len(), self.exam_count));
            }
        }
        if self.exam_count > 0 && self.role_grants.admins == 0 {
            return bad("at least one admin is required".into());
        }
        if self.total_scripts() > 0 && self.role_grants.examiners == 0 {
            return bad("scripts need at least one examiner".into());
        }
        if self.revision_count() > 0 && self.role_grants.scrutinizers == 0 {
            return bad("revisions need at least one scrutinizer".into());
        }
        if self.exam_count == 0 && self.total_scripts() > 0 {
            return bad("scripts without exams".into());
        }
        Ok(())
    }
}

/// One unit of scenario execution. Most steps are a single transaction;
/// `StoreScript` and `CommitRecord` also do off-ledger work first, and
/// `ExportGradeSheet` is off-ledger only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Tx { sender: Address, call: Call },
    StoreScript {
        sender: Address,
        exam_id: u64,
        script_id: ScriptId,
        student: Address,
        topsheet: Vec<u8>,
    },
    ExportGradeSheet { exam_id: u64 },
    CommitRecord {
        sender: Address,
        student: Address,
        record: AcademicRecord,
        exam_ids: Vec<u64>,
    },
}

impl Step {
    pub fn module(&self) -> Option<ModuleId> {
        match self {
            Step::Tx { call, .. } => Some(call.module()),
            Step::StoreScript { .. } => Some(ModuleId::HashRegistry),
            Step::ExportGradeSheet { .. } => None,
            Step::CommitRecord { .. } => Some(ModuleId::Zkp),
        }
    }

    fn tx(sender: Address, call: impl Into<Call>) -> Step {
        Step::Tx {
            sender,
            call: call.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub deployer: Address,
    pub scripts_per_exam: Vec<u64>,
    pub steps: Vec<Step>,
}

impl Scenario {
    pub fn tx_count(&self) -> usize {
        self.steps.iter().filter(|s| s.module().is_some()).count()
    }
}

/// Workflow transaction counts per module implied by a spec, deployments
/// excluded. Exams cost one create, four advances and one enroll per script.
pub fn expected_tx_counts(spec: &ScenarioSpec) -> BTreeMap<ModuleId, u64> {
    let scripts = spec.total_scripts();
    let zkp = if spec.zkp_sample > 0 { 1 + 2 * spec.zkp_sample } else { 0 };
    BTreeMap::from([
        (ModuleId::Rbac, spec.role_grants.total()),
        (ModuleId::ExamLifecycle, spec.exam_count * 5 + scripts),
        (ModuleId::HashRegistry, scripts),
        (ModuleId::ResultAudit, 2 * scripts + spec.revision_count()),
        (ModuleId::Zkp, zkp),
    ])
}

const JUSTIFICATIONS: [&str; 5] = [
    "totalling error on cover page",
    "unmarked answer found on page 7",
    "re-evaluation of question 3(b) after appeal",
    "marks for question 5 carried over incorrectly",
    "partial credit for alternative derivation",
];

pub(crate) const CRITERIA_ID: u64 = 1;

pub(crate) fn eligibility_criteria() -> CriteriaSet {
    CriteriaSet {
        criteria_id: CRITERIA_ID,
        min_scaled_cgpa: 250,
        min_grade_threshold: 40,
        min_total_credits: 3,
        require_all_pass: true,
        pass_mark: 40,
    }
}

fn actor(kind: &str, i: u64) -> Address {
    Address::derive(&format!("examledger/{kind}/{i}"))
}

fn spread_scripts(spec: &ScenarioSpec, rng: &mut ChaCha20Rng) -> Vec<u64> {
    match &spec.scripts_per_exam {
        ScriptsPerExam::Fixed(n) => vec![*n; spec.exam_count as usize],
        ScriptsPerExam::List(v) => v.clone(),
        ScriptsPerExam::Multinomial { total } => {
            let mut counts = vec![0u64; spec.exam_count as usize];
            for _ in 0..*total {
                let e = rng.gen_range(0..counts.len());
                counts[e] += 1;
            }
            counts
        }
    }
}

struct MarkedScript {
    exam_id: u64,
    student: Address,
    marks: u64,
}

/// Builds the full, ordered step list for a spec. Same spec, same steps.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Scenario, WorkloadError> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.rng_seed);
    let g = spec.role_grants;
    let deployer = actor("deployer", 0);
    let admins: Vec<_> = (0..g.admins).map(|i| actor("admin", i)).collect();
    let examiners: Vec<_> = (0..g.examiners).map(|i| actor("examiner", i)).collect();
    let scrutinizers: Vec<_> = (0..g.scrutinizers).map(|i| actor("scrutinizer", i)).collect();
    let students: Vec<_> = (0..g.students).map(|i| actor("student", i)).collect();

    let per_exam = spread_scripts(spec, &mut rng);
    if let Some(max) = per_exam.iter().max() {
        if *max > g.students {
            return Err(WorkloadError::InvalidSpec(format!(
                "an exam needs {max} distinct students but only {} are granted",
                g.students
            )));
        }
    }
    let total = spec.total_scripts() as usize;
    let revised: BTreeSet<usize> = index::sample(&mut rng, total, spec.revision_count() as usize)
        .into_iter()
        .collect();

    let mut steps = Vec::new();
    for m in ModuleId::CONTRACTS {
        steps.push(Step::tx(deployer, Call::Deploy(m)));
    }
    let grants = [
        (&admins, Role::Admin),
        (&examiners, Role::Examiner),
        (&scrutinizers, Role::Scrutinizer),
        (&students, Role::Student),
    ];
    for (who, role) in grants {
        for target in who {
            steps.push(Step::tx(deployer, RbacCall::GrantRole { target: *target, role }));
        }
    }

    let mut used_ids = BTreeSet::new();
    let mut marked: Vec<MarkedScript> = Vec::with_capacity(total);
    let mut global = 0usize;
    for (e, &n) in per_exam.iter().enumerate() {
        let exam_id = e as u64 + 1;
        let admin = admins[e % admins.len()];
        let advance = |target| Step::tx(admin, ExamCall::AdvanceState { exam_id, target });
        let title = format!("CSE {} Course Exam", 100 + exam_id);
        steps.push(Step::tx(admin, ExamCall::CreateExam { exam_id, title: title.clone() }));

        let takers: Vec<Address> = index::sample(&mut rng, students.len(), n as usize)
            .into_iter()
            .map(|i| students[i])
            .collect();
        for s in &takers {
            steps.push(Step::tx(admin, ExamCall::Enroll { exam_id, student: *s }));
        }
        steps.push(advance(ExamState::Active));

        let mut ids = Vec::with_capacity(takers.len());
        for s in &takers {
            let script_id = loop {
                let id = ScriptId::generate(&mut rng);
                if used_ids.insert(id.clone()) {
                    break id;
                }
            };
            let mut scan = vec![0u8; 256];
            rng.fill_bytes(&mut scan);
            let mut topsheet = format!("TOPSHEET\nexam: {exam_id}\ncourse: {title}\nscript: {script_id}\nroll: {s}\n").into_bytes();
            topsheet.extend_from_slice(&scan);
            steps.push(Step::StoreScript {
                sender: admin,
                exam_id,
                script_id: script_id.clone(),
                student: *s,
                topsheet,
            });
            ids.push(script_id);
        }
        steps.push(advance(ExamState::Submitted));

        let examiner = examiners.get(e % examiners.len().max(1)).copied();
        let mut marks = Vec::with_capacity(ids.len());
        for id in &ids {
            let m = rng.gen_range(25..=95);
            marks.push(m);
            steps.push(Step::tx(
                examiner.expect("validated: scripts imply an examiner"),
                AuditCall::SubmitMarks {
                    exam_id,
                    script_id: id.clone(),
                    marks: m,
                },
            ));
        }
        steps.push(advance(ExamState::Scrutinized));

        for (k, id) in ids.iter().enumerate() {
            if !revised.contains(&(global + k)) {
                continue;
            }
            let delta: i64 = rng.gen_range(1..=8) * if rng.gen_bool(0.8) { 1 } else { -1 };
            let new_marks = (marks[k] as i64 + delta).clamp(0, 100) as u64;
            marks[k] = new_marks;
            steps.push(Step::tx(
                scrutinizers[(global + k) % scrutinizers.len()],
                AuditCall::ReviseMarks {
                    exam_id,
                    script_id: id.clone(),
                    new_marks,
                    justification: JUSTIFICATIONS[rng.gen_range(0..JUSTIFICATIONS.len())].to_string(),
                },
            ));
        }
        steps.push(advance(ExamState::Completed));

        for id in &ids {
            steps.push(Step::tx(
                admin,
                AuditCall::PublishResult {
                    exam_id,
                    script_id: id.clone(),
                },
            ));
        }
        steps.push(Step::ExportGradeSheet { exam_id });

        for (s, m) in takers.iter().zip(&marks) {
            marked.push(MarkedScript {
                exam_id,
                student: *s,
                marks: *m,
            });
        }
        global += ids.len();
    }

    if spec.zkp_sample > 0 {
        zkp_steps(spec, &admins, &marked, &mut rng, &mut steps)?;
    }

    Ok(Scenario {
        spec: spec.clone(),
        deployer,
        scripts_per_exam: per_exam,
        steps,
    })
}

fn zkp_steps(
    spec: &ScenarioSpec,
    admins: &[Address],
    marked: &[MarkedScript],
    rng: &mut ChaCha20Rng,
    steps: &mut Vec<Step>,
) -> Result<(), WorkloadError> {
    let mut by_student: BTreeMap<Address, Vec<(u64, u64)>> = BTreeMap::new();
    for m in marked {
        by_student.entry(m.student).or_default().push((m.exam_id, m.marks));
    }
    let candidates: Vec<Address> = by_student.keys().copied().collect();
    if spec.zkp_sample as usize > candidates.len() {
        return Err(WorkloadError::InvalidSpec(format!(
            "zkp_sample {} exceeds the {} students holding results",
            spec.zkp_sample,
            candidates.len()
        )));
    }
    let sample: Vec<Address> = index::sample(rng, candidates.len(), spec.zkp_sample as usize)
        .into_iter()
        .map(|i| candidates[i])
        .collect();

    // The verifier is a third party with no role.
    let verifier = actor("verifier", 0);
    steps.push(Step::tx(verifier, ZkpCall::PostCriteria { criteria: eligibility_criteria() }));

    let mut records = Vec::with_capacity(sample.len());
    for student in &sample {
        let results = &by_student[student];
        let marks: Vec<u64> = results.iter().map(|r| r.1).collect();
        let credits = vec![3; marks.len()];
        // marks/100 on a 4.0 scale, kept in hundredths
        let scaled_cgpa = marks.iter().sum::<u64>() * 4 * CGPA_SCALE / (100 * marks.len() as u64);
        let mut salt = [0u8; 32];
        rng.fill_bytes(&mut salt);
        let record = AcademicRecord {
            scaled_cgpa,
            marks,
            credits,
            salt: H256(salt),
        };
        steps.push(Step::CommitRecord {
            sender: admins[0],
            student: *student,
            record: record.clone(),
            exam_ids: results.iter().map(|r| r.0).collect(),
        });
        records.push((*student, record));
    }
    for (student, record) in records {
        steps.push(Step::tx(
            student,
            ZkpCall::ProveEligibility {
                student,
                criteria_id: CRITERIA_ID,
                record,
            },
        ));
    }
    Ok(())
}
