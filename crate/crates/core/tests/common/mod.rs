//! Shared fixture for integration tests.
#![allow(dead_code)]

use examledger::zkp::{AcademicRecord, CriteriaSet};
use examledger::{Address, Engine, EngineConfig, ExamState, Receipt, Role, ScriptId, H256};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub struct World {
    pub engine: Engine,
    pub deployer: Address,
    pub admin: Address,
    pub examiner: Address,
    pub scrutinizer: Address,
    pub students: Vec<Address>,
    pub rng: ChaCha20Rng,
}

pub fn ok(r: Receipt) -> Receipt {
    assert!(r.is_success(), "unexpected revert: {:?}", r.revert_reason);
    r
}

pub fn reverted(r: Receipt) -> String {
    assert!(!r.is_success(), "expected a revert, tx {} succeeded", r.tx_seq);
    r.revert_reason.expect("reverted receipt carries a reason")
}

impl World {
    pub fn new(students: usize, seed: u64) -> Self {
        let mut engine = Engine::new(EngineConfig::default()).unwrap();
        let deployer = Address::derive("it/deployer");
        engine.deploy(deployer).unwrap();
        let admin = Address::derive("it/admin");
        let examiner = Address::derive("it/examiner");
        let scrutinizer = Address::derive("it/scrutinizer");
        ok(engine.grant_role(deployer, admin, Role::Admin).unwrap());
        ok(engine.grant_role(admin, examiner, Role::Examiner).unwrap());
        ok(engine.grant_role(admin, scrutinizer, Role::Scrutinizer).unwrap());
        let students: Vec<Address> = (0..students).map(|i| Address::derive(&format!("it/student/{i}"))).collect();
        for s in &students {
            ok(engine.grant_role(admin, *s, Role::Student).unwrap());
        }
        World {
            engine,
            deployer,
            admin,
            examiner,
            scrutinizer,
            students,
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn random_hash(&mut self) -> H256 {
        H256(self.rng.gen())
    }

    /// Creates the exam, enrolls every student, moves it to ACTIVE and
    /// registers one script per student.
    pub fn active_exam(&mut self, exam_id: u64) -> Vec<ScriptId> {
        ok(self.engine.create_exam(self.admin, exam_id, "Integration").unwrap());
        for s in self.students.clone() {
            ok(self.engine.enroll(self.admin, exam_id, s).unwrap());
        }
        self.advance(exam_id, ExamState::Active);
        let mut ids = Vec::new();
        for s in self.students.clone() {
            let id = ScriptId::generate(&mut self.rng);
            let h = self.random_hash();
            ok(self.engine.register_script(self.admin, exam_id, id.clone(), h, s).unwrap());
            ids.push(id);
        }
        ids
    }

    pub fn advance(&mut self, exam_id: u64, to: ExamState) {
        ok(self.engine.advance_state(self.admin, exam_id, to).unwrap());
    }

    /// Full cycle with marks submitted, left at SCRUTINIZED.
    pub fn scrutinized_exam(&mut self, exam_id: u64, marks: u64) -> Vec<ScriptId> {
        let ids = self.active_exam(exam_id);
        self.advance(exam_id, ExamState::Submitted);
        for id in &ids {
            ok(self.engine.submit_marks(self.examiner, exam_id, id.clone(), marks).unwrap());
        }
        self.advance(exam_id, ExamState::Scrutinized);
        ids
    }
}

pub fn criteria(id: u64) -> CriteriaSet {
    CriteriaSet {
        criteria_id: id,
        min_scaled_cgpa: 300,
        min_grade_threshold: 50,
        min_total_credits: 9,
        require_all_pass: true,
        pass_mark: 40,
    }
}

pub fn record(salt: H256) -> AcademicRecord {
    AcademicRecord {
        scaled_cgpa: 377,
        marks: vec![83, 91, 67],
        credits: vec![3, 4, 3],
        salt,
    }
}
