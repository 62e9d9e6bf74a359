//! Exam state machine and access control, exercised through the engine.

mod common;

use common::{ok, reverted, World};
use examledger::exam::ExamCall;
use examledger::hash_registry::HashCall;
use examledger::ledger::TraceStep;
use examledger::rbac::RbacCall;
use examledger::result_audit::AuditCall;
use examledger::storage::word_to_u64;
use examledger::zkp::ZkpCall;
use examledger::{Address, Call, ExamState, ModuleId, Role, ScriptId, H256};
use proptest::prelude::*;

#[test]
fn all_twenty_five_transitions() {
    let mut w = World::new(1, 1);
    let mut exam_id = 100;
    for from in ExamState::ALL {
        for to in ExamState::ALL {
            exam_id += 1;
            ok(w.engine.create_exam(w.admin, exam_id, "fsm").unwrap());
            let mut s = ExamState::Created;
            while s != from {
                s = s.successor().unwrap();
                w.advance(exam_id, s);
            }
            let r = w.engine.advance_state(w.admin, exam_id, to).unwrap();
            let legal = from.successor() == Some(to);
            assert_eq!(r.is_success(), legal, "{from} -> {to}");
            if legal {
                assert_eq!(w.engine.get_exam_state(exam_id).unwrap(), to);
            } else {
                assert_eq!(r.revert_reason.unwrap(), format!("Illegal transition from {from} to {to}"));
                assert_eq!(w.engine.get_exam_state(exam_id).unwrap(), from);
            }
        }
    }
}

#[test]
fn state_advanced_events_are_strictly_increasing() {
    let mut w = World::new(2, 2);
    w.scrutinized_exam(1, 60);
    w.advance(1, ExamState::Completed);
    // Retry every backward or repeated move; none may emit.
    for s in ExamState::ALL {
        reverted(w.engine.advance_state(w.admin, 1, s).unwrap());
    }
    let codes: Vec<(u64, u64)> = w
        .engine
        .ledger()
        .entries()
        .iter()
        .flat_map(|e| e.receipt.events.iter())
        .filter(|ev| ev.name == "StateAdvanced" && word_to_u64(&ev.topics[0]) == 1)
        .map(|ev| (word_to_u64(&ev.topics[1]), word_to_u64(&ev.topics[2])))
        .collect();
    assert_eq!(codes.len(), 4);
    for (i, (from, to)) in codes.iter().enumerate() {
        assert_eq!(to, &(from + 1));
        if i > 0 {
            assert_eq!(*from, codes[i - 1].1);
        }
    }
}

#[test]
fn operations_are_gated_by_state() {
    let mut w = World::new(1, 3);
    let ids = w.active_exam(1);
    let id = ids[0].clone();
    let r = reverted(w.engine.submit_marks(w.examiner, 1, id.clone(), 50).unwrap());
    assert!(r.contains("requires SUBMITTED"), "{r}");
    w.advance(1, ExamState::Submitted);
    let late = ScriptId::generate(&mut w.rng);
    let r = reverted(w.engine.register_script(w.admin, 1, late, H256([1; 32]), w.students[0]).unwrap());
    assert!(r.contains("requires ACTIVE"), "{r}");
    ok(w.engine.submit_marks(w.examiner, 1, id.clone(), 50).unwrap());
    let r = reverted(w.engine.revise_marks(w.scrutinizer, 1, id.clone(), 55, "recount").unwrap());
    assert!(r.contains("requires SCRUTINIZED"), "{r}");
    let r = reverted(w.engine.publish_result(w.admin, 1, id.clone()).unwrap());
    assert!(r.contains("requires COMPLETED"), "{r}");
    let r = reverted(w.engine.enroll(w.admin, 1, w.students[0]).unwrap());
    assert!(r.contains("CREATED or ACTIVE"), "{r}");
}

/// One world with an exam parked in each state, so every operation can be
/// tried with its state precondition already satisfied.
struct Fixture {
    w: World,
    calls: Vec<(Call, Address)>,
}

fn fixture() -> Fixture {
    let mut w = World::new(2, 4);
    ok(w.engine.create_exam(w.admin, 5, "created").unwrap());
    w.active_exam(1);
    let submitted = w.active_exam(2);
    w.advance(2, ExamState::Submitted);
    let scrutinized = w.scrutinized_exam(3, 70);
    let completed = w.scrutinized_exam(4, 70);
    w.advance(4, ExamState::Completed);
    let outsider = Address::derive("it/outsider");
    let student = w.students[0];
    let record = common::record(H256([9; 32]));
    let (r, _) = w.engine.commit_academic_record(w.admin, student, &record, vec![4]).unwrap();
    ok(r);
    ok(w.engine.post_criteria(outsider, common::criteria(1)).unwrap());
    let fresh = ScriptId::generate(&mut w.rng);

    let calls = vec![
        (RbacCall::GrantRole { target: outsider, role: Role::Examiner }.into(), w.admin),
        (RbacCall::RevokeRole { target: w.students[1] }.into(), w.admin),
        (RbacCall::EnrollStudent { exam_id: 5, student }.into(), w.admin),
        (ExamCall::CreateExam { exam_id: 6, title: "new".into() }.into(), w.admin),
        (ExamCall::AdvanceState { exam_id: 5, target: ExamState::Active }.into(), w.admin),
        (ExamCall::Enroll { exam_id: 5, student }.into(), w.admin),
        (
            HashCall::RegisterScript {
                exam_id: 1,
                script_id: fresh,
                content_hash: H256([3; 32]),
                student,
            }
            .into(),
            w.admin,
        ),
        (
            AuditCall::SubmitMarks {
                exam_id: 2,
                script_id: submitted[0].clone(),
                marks: 40,
            }
            .into(),
            w.examiner,
        ),
        (
            AuditCall::ReviseMarks {
                exam_id: 3,
                script_id: scrutinized[0].clone(),
                new_marks: 75,
                justification: "re-added page 3".into(),
            }
            .into(),
            w.scrutinizer,
        ),
        (
            AuditCall::PublishResult {
                exam_id: 4,
                script_id: completed[0].clone(),
            }
            .into(),
            w.admin,
        ),
        (
            ZkpCall::CommitAcademicRecord {
                student: w.students[1],
                commit_hash: H256([4; 32]),
                exam_ids: vec![4],
            }
            .into(),
            w.admin,
        ),
        (
            ZkpCall::ProveEligibility {
                student,
                criteria_id: 1,
                record,
            }
            .into(),
            student,
        ),
    ];
    Fixture { w, calls }
}

#[test]
fn only_the_authorized_role_succeeds() {
    let Fixture { mut w, calls } = fixture();
    let outsider = Address::derive("it/no-role");
    let actors = [w.admin, w.examiner, w.scrutinizer, w.students[0], w.students[1], outsider, w.deployer];
    for (call, authorized) in calls {
        for actor in actors {
            if actor == authorized {
                continue;
            }
            // The deployer keeps its bootstrap right to grant roles.
            if actor == w.deployer && matches!(call, Call::Rbac(RbacCall::GrantRole { .. })) {
                continue;
            }
            let root = w.engine.ledger().storage().root();
            let r = w.engine.submit(actor, &call).unwrap();
            assert!(!r.is_success(), "{} by unauthorized actor succeeded", call.op_name());
            assert_eq!(w.engine.ledger().storage().root(), root);
        }
        ok(w.engine.submit(authorized, &call).unwrap());
    }
}

#[test]
fn revoked_actor_is_denied() {
    let mut w = World::new(1, 5);
    let ids = w.active_exam(1);
    w.advance(1, ExamState::Submitted);
    ok(w.engine.revoke_role(w.admin, w.examiner).unwrap());
    assert_eq!(w.engine.role_of(&w.examiner), Role::None);
    let r = reverted(w.engine.submit_marks(w.examiner, 1, ids[0].clone(), 50).unwrap());
    assert_eq!(r, "Caller is not Examiner");
    ok(w.engine.grant_role(w.admin, w.examiner, Role::Examiner).unwrap());
    ok(w.engine.submit_marks(w.examiner, 1, ids[0].clone(), 50).unwrap());
}

#[test]
fn every_mutation_checks_a_guard_before_writing() {
    let Fixture { mut w, calls } = fixture();
    let mut seen = 0;
    for (call, sender) in calls {
        let r = w.engine.submit(sender, &call).unwrap();
        assert!(r.is_success(), "{}: {:?}", call.op_name(), r.revert_reason);
        let trace = w.engine.ledger().last_trace();
        let first_write = trace.iter().position(|s| matches!(s, TraceStep::Write(_)));
        let first_guard = trace.iter().position(|s| matches!(s, TraceStep::Guard(_)));
        match (first_guard, first_write) {
            (Some(g), Some(wr)) => assert!(g < wr, "{} writes before any guard", call.op_name()),
            (_, None) => panic!("{} wrote nothing", call.op_name()),
            (None, Some(_)) => panic!("{} has no guard", call.op_name()),
        }
        seen += 1;
    }
    assert_eq!(seen, 12);
}

#[test]
fn criteria_posting_is_open_and_deploy_is_one_shot() {
    let mut w = World::new(0, 6);
    let anyone = Address::derive("it/anyone");
    ok(w.engine.post_criteria(anyone, common::criteria(9)).unwrap());
    assert!(w.engine.ledger().last_trace().iter().all(|s| !matches!(s, TraceStep::Guard(_))));
    let r = reverted(w.engine.post_criteria(w.admin, common::criteria(9)).unwrap());
    assert_eq!(r, "Criteria 9 already posted");
    let r = w.engine.submit(anyone, &Call::Deploy(ModuleId::Rbac)).unwrap();
    assert!(!r.is_success());
}

fn op_for(i: usize, student: Address, script: &ScriptId) -> Call {
    match i % 10 {
        0 => RbacCall::GrantRole { target: student, role: Role::Admin }.into(),
        1 => RbacCall::RevokeRole { target: student }.into(),
        2 => RbacCall::EnrollStudent { exam_id: 1, student }.into(),
        3 => ExamCall::CreateExam { exam_id: 77, title: "x".into() }.into(),
        4 => ExamCall::AdvanceState { exam_id: 1, target: ExamState::Submitted }.into(),
        5 => HashCall::RegisterScript {
            exam_id: 1,
            script_id: script.clone(),
            content_hash: H256([5; 32]),
            student,
        }
        .into(),
        6 => AuditCall::SubmitMarks { exam_id: 1, script_id: script.clone(), marks: 1 }.into(),
        7 => AuditCall::ReviseMarks {
            exam_id: 1,
            script_id: script.clone(),
            new_marks: 2,
            justification: "j".into(),
        }
        .into(),
        8 => AuditCall::PublishResult { exam_id: 1, script_id: script.clone() }.into(),
        _ => ZkpCall::CommitAcademicRecord {
            student,
            commit_hash: H256([6; 32]),
            exam_ids: vec![1],
        }
        .into(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// An address that was never granted a role cannot change state.
    #[test]
    fn default_deny(label in "[a-z]{1,12}", ops in proptest::collection::vec(0usize..10, 1..20)) {
        let mut w = World::new(1, 8);
        let ids = w.active_exam(1);
        let stranger = Address::derive(&format!("stranger/{label}"));
        prop_assume!(w.engine.role_of(&stranger) == Role::None);
        let root = w.engine.ledger().storage().root();
        for i in ops {
            let r = w.engine.submit(stranger, &op_for(i, w.students[0], &ids[0])).unwrap();
            prop_assert!(!r.is_success());
        }
        prop_assert_eq!(w.engine.ledger().storage().root(), root);
    }
}
