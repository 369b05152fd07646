mod common;

use std::sync::Arc;

use synsel_study::session::Phase;
use synsel_study::{SessionStore, StudyError, StudyService};

fn service(store: SessionStore) -> StudyService {
    let catalog = common::catalog(30);
    let bank = common::bank(&catalog);
    StudyService::new(catalog, bank, store).unwrap().with_clock(|| 42)
}

fn answer_all(svc: &StudyService, id: &str, phase: Phase) {
    let pre = svc.pretest(id).unwrap();
    let answers: Vec<(String, String)> = pre
        .sets
        .iter()
        .flat_map(|s| s.questions.iter().map(|q| (q.question_id.clone(), q.choices[0].clone())))
        .collect();
    svc.submit_answers(id, phase, &answers).unwrap();
}

#[test]
fn create_is_idempotent_per_participant_and_seed() {
    let svc = service(SessionStore::in_memory());
    let a = svc.create_session("ann", 3, Some(70.0)).unwrap();
    let b = svc.create_session("ann", 3, Some(70.0)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.assigned_sets.len(), 15);
    assert!(matches!(svc.create_session("ann", 4, None), Err(StudyError::Duplicate(_))));
    let s = svc.session(&a.session_id).unwrap();
    assert_eq!(s.model_assignment.len(), 15);
    let other = service(SessionStore::in_memory());
    assert_eq!(other.create_session("ann", 3, None).unwrap().assigned_sets, a.assigned_sets);
}

#[test]
fn posttest_requires_finished_pretest() {
    let svc = service(SessionStore::in_memory());
    let id = svc.create_session("bo", 1, None).unwrap().session_id;
    let set = svc.session(&id).unwrap().assigned_sets[0].clone();
    assert!(matches!(svc.posttest(&id, &set), Err(StudyError::Precondition(_))));
    answer_all(&svc, &id, Phase::Pretest);
    let view = svc.posttest(&id, &set).unwrap();
    assert_eq!(view.set.questions.len(), 3);
    assert!(view.examples.iter().all(|w| w.revealed.is_empty() && w.remaining == 3));
    assert!(matches!(svc.posttest(&id, "nope"), Err(StudyError::NotFound(_))));
}

#[test]
fn posttest_questions_match_pretest() {
    let svc = service(SessionStore::in_memory());
    let id = svc.create_session("cy", 1, None).unwrap().session_id;
    let pre = svc.pretest(&id).unwrap();
    answer_all(&svc, &id, Phase::Pretest);
    for set in &pre.sets {
        assert_eq!(&svc.posttest(&id, &set.set_id).unwrap().set, set);
    }
}

#[test]
fn readme_reveals_one_example_per_click_up_to_three() {
    let svc = service(SessionStore::in_memory());
    let id = svc.create_session("di", 5, None).unwrap().session_id;
    answer_all(&svc, &id, Phase::Pretest);
    let session = svc.session(&id).unwrap();
    let set = session.assigned_sets[0].clone();
    let word = svc.catalog().get(&set).unwrap().words()[0].clone();
    let expected = svc.arm_examples(&session, &set, &word).unwrap();
    for i in 0..3 {
        let ack = svc.readme(&id, &set, &word).unwrap();
        assert_eq!(ack.example_index, i);
        assert_eq!(ack.example, expected[i]);
        let view = svc.posttest(&id, &set).unwrap();
        assert_eq!(view.examples[0].revealed, expected[..=i].to_vec());
        assert!(view.examples[1].revealed.is_empty());
    }
    assert!(matches!(svc.readme(&id, &set, &word), Err(StudyError::CapReached { .. })));
    assert_eq!(svc.session(&id).unwrap().readme_count(&set, &word), 3);
    assert!(matches!(svc.readme(&id, &set, "banana"), Err(StudyError::Invalid(_))));
}

#[test]
fn arms_show_their_own_examples() {
    let svc = service(SessionStore::in_memory());
    let id = svc.create_session("ed", 9, None).unwrap().session_id;
    let session = svc.session(&id).unwrap();
    for set_id in &session.assigned_sets {
        let set = svc.catalog().get(set_id).unwrap();
        let word = &set.words()[1];
        let shown = svc.arm_examples(&session, set_id, word).unwrap();
        assert_eq!(shown.len(), 3);
        let arm = session.model_assignment[set_id];
        let tag = match arm {
            synsel_study::Arm::Entailment => "entailment",
            synsel_study::Arm::Context => "context",
            synsel_study::Arm::Random => "candidates",
        };
        assert!(shown.iter().all(|e| e.sentence_id.contains(tag)), "{arm:?} {shown:?}");
        assert_eq!(shown, svc.arm_examples(&session, set_id, word).unwrap());
    }
}

#[test]
fn questionnaire_accepts_ratings_one_to_four() {
    let svc = service(SessionStore::in_memory());
    let id = svc.create_session("fa", 2, None).unwrap().session_id;
    answer_all(&svc, &id, Phase::Pretest);
    let set = svc.session(&id).unwrap().assigned_sets[1].clone();
    svc.questionnaire(&id, &set, 4).unwrap();
    assert!(matches!(svc.questionnaire(&id, &set, 5), Err(StudyError::Invalid(_))));
    assert!(matches!(svc.questionnaire(&id, &set, 0), Err(StudyError::Invalid(_))));
    assert_eq!(svc.session(&id).unwrap().questionnaire[&set], 4);
}

#[test]
fn answers_are_validated() {
    let svc = service(SessionStore::in_memory());
    let id = svc.create_session("gu", 2, None).unwrap().session_id;
    let session = svc.session(&id).unwrap();
    let unassigned = svc.catalog().set_ids().into_iter().find(|s| !session.model_assignment.contains_key(*s)).unwrap();
    let q = svc.catalog().get(unassigned).unwrap().questions[0].clone();
    let err = svc.submit_answers(&id, Phase::Pretest, &[(q.question_id, q.gold)]).unwrap_err();
    assert!(matches!(err, StudyError::Invalid(_)));
    let own = svc.catalog().get(&session.assigned_sets[0]).unwrap().questions[0].clone();
    let err = svc.submit_answers(&id, Phase::Pretest, &[(own.question_id.clone(), "maybe".into())]).unwrap_err();
    assert!(matches!(err, StudyError::Invalid(_)));
    let err = svc.submit_answers(&id, Phase::Posttest, &[(own.question_id, own.gold)]).unwrap_err();
    assert!(matches!(err, StudyError::Precondition(_)));
}

#[test]
fn event_log_replay_restores_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let ids: Vec<String>;
    let before;
    {
        let svc = service(SessionStore::on_disk(dir.path()).unwrap().with_snapshot_every(7));
        ids = (0..3).map(|p| svc.create_session(&format!("p{p}"), 1, Some(50.0 + p as f64)).unwrap().session_id).collect();
        for id in &ids {
            answer_all(&svc, id, Phase::Pretest);
            let set = svc.session(id).unwrap().assigned_sets[2].clone();
            let word = svc.catalog().get(&set).unwrap().words()[1].clone();
            svc.readme(id, &set, &word).unwrap();
            svc.readme(id, &set, &word).unwrap();
            svc.questionnaire(id, &set, 3).unwrap();
        }
        before = svc.sessions();
    }
    assert!(dir.path().join(format!("{}.snapshot.json", ids[0])).exists());
    let svc = service(SessionStore::on_disk(dir.path()).unwrap());
    assert_eq!(svc.sessions(), before);
    assert!(matches!(svc.create_session("p0", 9, None), Err(StudyError::Duplicate(_))));
    let (replayed, _) = SessionStore::load_session(dir.path(), &ids[1]).unwrap();
    std::fs::remove_file(dir.path().join(format!("{}.snapshot.json", ids[1]))).unwrap();
    let (from_log, n) = SessionStore::load_session(dir.path(), &ids[1]).unwrap();
    assert_eq!(replayed, from_log);
    assert_eq!(n, 1 + 45 + 3);
}

#[test]
fn concurrent_sessions_do_not_interfere() {
    let svc = Arc::new(service(SessionStore::in_memory()));
    let handles: Vec<_> = (0..8)
        .map(|p| {
            let svc = Arc::clone(&svc);
            std::thread::spawn(move || {
                let id = svc.create_session(&format!("t{p}"), 0, Some(1.0)).unwrap().session_id;
                answer_all(&svc, &id, Phase::Pretest);
                let set = svc.session(&id).unwrap().assigned_sets[0].clone();
                let word = svc.catalog().get(&set).unwrap().words()[0].clone();
                for _ in 0..3 {
                    svc.readme(&id, &set, &word).unwrap();
                }
                id
            })
        })
        .collect();
    for h in handles {
        let id = h.join().unwrap();
        let s = svc.session(&id).unwrap();
        assert_eq!(s.pretest_answers.len(), 45);
        assert_eq!(s.readme_events.len(), 3);
    }
    assert_eq!(svc.sessions().len(), 8);
}
