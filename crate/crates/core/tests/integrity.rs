//! Immutability of anchored hashes and published results, tamper
//! detection on the chain, and audit-trail replay.

mod common;

use common::{ok, reverted, World};
use examledger::ledger::verify_entries;
use examledger::result_audit::{revision_from_event, MarkStatus};
use examledger::{codec, ChainEntry, Engine, EngineConfig, ExamState, Receipt, Transaction, H256};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;

#[test]
fn anchored_hash_cannot_be_replaced() {
    let mut w = World::new(2, 11);
    let ids = w.active_exam(1);
    let original = w.engine.get_script_hash(&ids[0]).unwrap();
    for student in w.students.clone() {
        let r = reverted(w.engine.register_script(w.admin, 1, ids[0].clone(), H256([0xee; 32]), student).unwrap());
        assert_eq!(r, format!("Script ID {} is already registered", ids[0]));
    }
    assert_eq!(w.engine.get_script_hash(&ids[0]).unwrap(), original);
    assert_eq!(w.engine.scripts_for_exam(1).len(), 2);
}

#[test]
fn published_results_are_frozen() {
    let mut w = World::new(1, 12);
    let ids = w.scrutinized_exam(1, 64);
    let id = ids[0].clone();
    ok(w.engine.revise_marks(w.scrutinizer, 1, id.clone(), 66, "missed a sub-question").unwrap());
    w.advance(1, ExamState::Completed);
    ok(w.engine.publish_result(w.admin, 1, id.clone()).unwrap());
    let root = w.engine.ledger().storage().root();
    let trail = w.engine.get_audit_trail(&id);

    let attempts = [
        w.engine.submit_marks(w.examiner, 1, id.clone(), 90).unwrap(),
        w.engine.revise_marks(w.scrutinizer, 1, id.clone(), 90, "late appeal").unwrap(),
        w.engine.publish_result(w.admin, 1, id.clone()).unwrap(),
        w.engine.register_script(w.admin, 1, id.clone(), H256([1; 32]), w.students[0]).unwrap(),
        w.engine.advance_state(w.admin, 1, ExamState::Scrutinized).unwrap(),
    ];
    for r in attempts {
        assert!(!r.is_success());
    }
    assert_eq!(w.engine.ledger().storage().root(), root);
    assert_eq!(w.engine.get_audit_trail(&id), trail);
    let view = w.engine.get_result(&id).unwrap();
    assert_eq!((view.marks, view.status), (66, MarkStatus::Published));
}

/// Re-encodes `value` with one byte flipped, retrying positions until the
/// result still decodes to a different value of the same type.
fn flip_one<T: Serialize + DeserializeOwned + PartialEq>(value: &T, rng: &mut ChaCha20Rng) -> T {
    let bytes = codec::encode(value);
    loop {
        let mut b = bytes.clone();
        let i = rng.gen_range(0..b.len());
        b[i] ^= 1 << rng.gen_range(0..8);
        if let Ok(t) = codec::decode::<T>(&b) {
            if t != *value {
                return t;
            }
        }
    }
}

fn tamper(entries: &mut [ChainEntry], rng: &mut ChaCha20Rng) -> u64 {
    let i = rng.gen_range(0..entries.len());
    let e = &mut entries[i];
    match rng.gen_range(0..3) {
        0 => e.tx = flip_one::<Transaction>(&e.tx, rng),
        1 => e.receipt = flip_one::<Receipt>(&e.receipt, rng),
        _ => {
            let byte = rng.gen_range(0..32);
            e.entry_hash.0[byte] ^= 1 << rng.gen_range(0..8);
        }
    }
    i as u64
}

#[test]
fn single_byte_tampering_is_located() {
    let mut w = World::new(4, 13);
    let ids = w.scrutinized_exam(1, 50);
    ok(w.engine.revise_marks(w.scrutinizer, 1, ids[1].clone(), 52, "totalling error").unwrap());
    let clean = w.engine.ledger().entries().to_vec();
    assert!(verify_entries(&clean).valid);

    let mut rng = ChaCha20Rng::seed_from_u64(0x7a3);
    for trial in 0..100 {
        let mut entries = clean.clone();
        let seq = tamper(&mut entries, &mut rng);
        let v = verify_entries(&entries);
        assert!(!v.valid, "trial {trial}");
        assert_eq!(v.first_bad_seq, Some(seq), "trial {trial}");

        let mut dump = Vec::new();
        for e in &entries {
            serde_json::to_writer(&mut dump, e).unwrap();
            dump.push(b'\n');
        }
        assert!(Engine::restore(EngineConfig::default(), &dump[..]).is_err(), "trial {trial}");
    }
}

#[test]
fn clean_dump_replays_to_the_same_state() {
    let mut w = World::new(3, 14);
    w.scrutinized_exam(1, 71);
    let mut dump = Vec::new();
    w.engine.ledger().dump(&mut dump).unwrap();
    let replay = Engine::restore(EngineConfig::default(), &dump[..]).unwrap();
    assert_eq!(replay.ledger().head_hash(), w.engine.ledger().head_hash());
    assert_eq!(replay.ledger().storage().root(), w.engine.ledger().storage().root());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn audit_trail_replays_to_current_marks(
        initial in 0u64..=100,
        revisions in proptest::collection::vec((0u64..=100, "[a-z][a-z ]{0,30}"), 0..=50),
    ) {
        let mut w = World::new(1, 15);
        let ids = w.scrutinized_exam(1, initial);
        let id = ids[0].clone();
        let mut emitted = Vec::new();
        for (marks, why) in &revisions {
            let r = ok(w.engine.revise_marks(w.scrutinizer, 1, id.clone(), *marks, why).unwrap());
            let ev = r.events.iter().find(|e| e.name == "MarksRevised").unwrap();
            emitted.push(revision_from_event(&ev.data).unwrap());
        }

        let trail = w.engine.get_audit_trail(&id);
        prop_assert_eq!(trail.len(), 1 + revisions.len());
        prop_assert_eq!(trail[0].old_marks, None);
        prop_assert_eq!(trail[0].new_marks, initial);
        let mut folded = trail[0].new_marks;
        for (entry, (old, new, why)) in trail[1..].iter().zip(&emitted) {
            prop_assert_eq!(entry.old_marks, Some(folded));
            prop_assert_eq!((*old, *new), (folded, entry.new_marks));
            let j = entry.justification.as_deref().unwrap();
            prop_assert!(!j.trim().is_empty());
            prop_assert_eq!(j, why.as_str());
            prop_assert_eq!(entry.actor, w.scrutinizer);
            folded = entry.new_marks;
        }
        prop_assert_eq!(w.engine.get_result(&id).unwrap().marks, folded);
        let seqs: Vec<u64> = trail.iter().map(|e| e.ledger_seq).collect();
        prop_assert!(seqs.windows(2).all(|p| p[0] < p[1]));
    }
}

#[test]
fn blank_justifications_are_rejected() {
    let mut w = World::new(1, 16);
    let ids = w.scrutinized_exam(1, 30);
    for blank in ["", " ", "\t\n"] {
        let r = reverted(w.engine.revise_marks(w.scrutinizer, 1, ids[0].clone(), 35, blank).unwrap());
        assert_eq!(r, "Revision requires a non-empty justification");
    }
    assert_eq!(w.engine.get_audit_trail(&ids[0]).len(), 1);
}
