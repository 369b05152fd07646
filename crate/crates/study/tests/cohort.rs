mod common;

use synsel_study::session::{Arm, StudySession};
use synsel_study::store::{load_dir, write_log};
use synsel_study::{compute_improvement, group_report};

fn sessions() -> (synsel_study::catalog::Catalog, Vec<StudySession>) {
    let fx = common::cohort();
    let dir = tempfile::tempdir().unwrap();
    for (id, events) in &fx.logs {
        write_log(dir.path(), id, events).unwrap();
    }
    let sessions = load_dir(dir.path()).unwrap().into_iter().map(|(s, _)| s).collect();
    (fx.catalog, sessions)
}

fn close(found: Option<f64>, want: f64) {
    let found = found.expect("value present");
    assert!((found - want).abs() <= 0.01, "found {found}, want {want}");
}

#[test]
fn group_report_reproduces_reference_cohort() {
    let (catalog, sessions) = sessions();
    assert_eq!(sessions.len(), 29);
    let r = group_report(&sessions, &catalog).unwrap();
    assert_eq!(r.above.participants.len(), 12);
    assert_eq!(r.below.participants.len(), 17);
    let want_above = [(0.75, 4.34, 2.40), (0.42, 4.43, 2.36), (0.00, 3.46, 2.39)];
    let want_below = [(0.18, 5.42, 2.58), (-0.24, 5.41, 2.68), (0.47, 5.41, 2.47)];
    for (arm, (a, b)) in Arm::ALL.iter().zip(want_above.iter().zip(&want_below)) {
        let (ga, gb) = (&r.above.per_arm[arm], &r.below.per_arm[arm]);
        close(ga.improvement_mean, a.0);
        close(ga.examples_read_mean, a.1);
        close(ga.difficulty_mean, a.2);
        close(gb.improvement_mean, b.0);
        close(gb.examples_read_mean, b.1);
        close(gb.difficulty_mean, b.2);
    }
    assert_eq!(r.improved[&Arm::Entailment], 16);
    assert_eq!(r.improved[&Arm::Context], 12);
    assert_eq!(r.improved[&Arm::Random], 11);
}

#[test]
fn report_recomputes_from_raw_answers() {
    let (catalog, sessions) = sessions();
    let r = group_report(&sessions, &catalog).unwrap();
    let above: Vec<&StudySession> = sessions.iter().filter(|s| s.proficiency_score == Some(80.0)).collect();
    let mut total = 0i64;
    for s in &above {
        for set_id in &s.assigned_sets {
            if s.model_assignment[set_id] != Arm::Entailment {
                continue;
            }
            let set = catalog.get(set_id).unwrap();
            for q in &set.questions {
                let pre = s.pretest_answers[&q.question_id].choice == q.gold;
                let post = s.posttest_answers[&q.question_id].choice == q.gold;
                total += i64::from(post) - i64::from(pre);
            }
        }
    }
    let mean = total as f64 / above.len() as f64;
    assert!((r.above.per_arm[&Arm::Entailment].improvement_mean.unwrap() - mean).abs() < 1e-12);
}

#[test]
fn missing_proficiency_lists_sessions() {
    let (catalog, mut sessions) = sessions();
    sessions[3].proficiency_score = None;
    let id = sessions[3].session_id.clone();
    match group_report(&sessions, &catalog) {
        Err(synsel_study::StudyError::MissingProficiency(ids)) => assert_eq!(ids, vec![id]),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn equal_scores_form_one_group() {
    let (catalog, mut sessions) = sessions();
    for s in &mut sessions {
        s.proficiency_score = Some(70.1);
    }
    let r = group_report(&sessions, &catalog).unwrap();
    assert_eq!(r.above.participants.len(), 29);
    assert!(r.below.participants.is_empty());
    assert_eq!(r.below.per_arm[&Arm::Entailment].improvement_mean, None);
}

#[test]
fn improvement_per_arm() {
    let (catalog, sessions) = sessions();
    let imp = compute_improvement(&sessions[0], &catalog).unwrap();
    assert_eq!(imp.values().map(|a| a.sets).sum::<usize>(), 15);
    let mut unfinished = sessions[0].clone();
    unfinished.posttest_answers.clear();
    assert!(compute_improvement(&unfinished, &catalog).is_err());
}
