#![allow(dead_code)]

use std::collections::BTreeMap;

use synsel_study::catalog::{BankEntry, Catalog, ExampleBank, ExampleSource, QuestionSet, StudyExample, StudyQuestion};
use synsel_study::session::{Arm, Phase, SessionEvent};

pub fn words(i: usize) -> [String; 2] {
    [format!("word{i:02}a"), format!("word{i:02}b")]
}

/// `n` sets, one pair each; gold alternates a, b, a.
pub fn catalog(n: usize) -> Catalog {
    let sets = (0..n)
        .map(|i| QuestionSet {
            set_id: format!("set{i:02}"),
            pair_id: format!("pair{i:02}"),
            questions: (0..3)
                .map(|j| StudyQuestion {
                    question_id: format!("set{i:02}-q{j}"),
                    text: format!("question {j} with a ___ in it"),
                    choices: words(i),
                    gold: words(i)[j % 2].clone(),
                })
                .collect(),
            provenance: "fixture".into(),
        })
        .collect();
    Catalog::new(sets).unwrap()
}

pub fn bank(catalog: &Catalog) -> ExampleBank {
    let mut entries = Vec::new();
    for set in catalog.sets() {
        for word in set.words() {
            for (source, n) in [(ExampleSource::Entailment, 3), (ExampleSource::Context, 3), (ExampleSource::Candidates, 10)] {
                entries.push(BankEntry {
                    pair_id: set.pair_id.clone(),
                    source,
                    word: word.clone(),
                    examples: (0..n)
                        .map(|k| StudyExample {
                            sentence_id: format!("{}-{source:?}-{word}-{k}", set.pair_id).to_lowercase(),
                            text: format!("{source:?} example {k} for {word}"),
                        })
                        .collect(),
                });
            }
        }
    }
    ExampleBank::new(entries).unwrap()
}

fn other(set: &QuestionSet, gold: &str) -> String {
    set.words().iter().find(|w| *w != gold).unwrap().clone()
}

/// Spreads `total` over `slots` as evenly as possible, larger values first.
fn spread(total: usize, slots: usize) -> Vec<usize> {
    (0..slots).map(|i| total / slots + usize::from(i < total % slots)).collect()
}

pub struct Cohort {
    pub catalog: Catalog,
    pub logs: Vec<(String, Vec<SessionEvent>)>,
}

/// Per-arm summed deltas for one group, as (+1, -1) participant counts.
struct Deltas {
    plus: usize,
    minus: usize,
}

/// 12 above-average and 17 below-average participants, five sets per arm,
/// built so the group report lands on the reference cohort aggregates.
pub fn cohort() -> Cohort {
    let catalog = catalog(30);
    let set_ids: Vec<String> = catalog.set_ids().into_iter().map(String::from).collect();
    // (size, proficiency, deltas per arm, examples read totals, rating totals)
    let groups = [
        (12usize, 80.0, [Deltas { plus: 9, minus: 0 }, Deltas { plus: 7, minus: 2 }, Deltas { plus: 3, minus: 3 }], [260, 266, 208], [144, 142, 143]),
        (17usize, 60.0, [Deltas { plus: 7, minus: 4 }, Deltas { plus: 5, minus: 9 }, Deltas { plus: 8, minus: 0 }], [461, 460, 460], [219, 228, 210]),
    ];
    let mut logs = Vec::new();
    let mut participant = 0;
    for (size, score, deltas, reads, ratings) in groups {
        let slots = size * 5;
        let reads: Vec<Vec<usize>> = reads.iter().map(|&t| spread(t, slots)).collect();
        let ratings: Vec<Vec<usize>> = ratings.iter().map(|&t| spread(t, slots)).collect();
        for p in 0..size {
            let pid = format!("student{participant:02}");
            let sid = format!("{pid}-0");
            let offset = participant % 2;
            participant += 1;
            let assigned: Vec<String> = (0..15).map(|k| set_ids[(2 * k + offset) % 30].clone()).collect();
            let assignment: BTreeMap<String, Arm> =
                assigned.iter().enumerate().map(|(k, s)| (s.clone(), Arm::ALL[k / 5])).collect();
            let mut events = vec![SessionEvent::Created {
                session_id: sid.clone(),
                participant_id: pid,
                seed: 0,
                assigned_sets: assigned.clone(),
                model_assignment: assignment,
                proficiency_score: Some(score),
                at: 0,
            }];
            let mut at = 1;
            let mut post = Vec::new();
            let mut tail = Vec::new();
            for (k, set_id) in assigned.iter().enumerate() {
                let (arm, slot) = (k / 5, p * 5 + k % 5);
                let d = &deltas[arm];
                let delta: i32 = if k % 5 == 0 && p < d.plus {
                    1
                } else if k % 5 == 0 && p < d.plus + d.minus {
                    -1
                } else {
                    0
                };
                let set = catalog.get(set_id).unwrap();
                // one correct answer before, 1 + delta after
                let post_correct = (1 + delta) as usize;
                for (j, q) in set.questions.iter().enumerate() {
                    let wrong = other(set, &q.gold);
                    let pre_choice = if j == 0 { q.gold.clone() } else { wrong.clone() };
                    events.push(SessionEvent::Answered { phase: Phase::Pretest, question_id: q.question_id.clone(), choice: pre_choice, at });
                    at += 1;
                    let post_choice = if j < post_correct { q.gold.clone() } else { wrong };
                    post.push((q.question_id.clone(), post_choice));
                }
                for r in 0..reads[arm][slot] {
                    let word = set.words()[r / 3].clone();
                    tail.push(SessionEvent::Readme { set_id: set_id.clone(), word, example_index: r % 3, at: 0 });
                }
                tail.push(SessionEvent::Rated { set_id: set_id.clone(), rating: ratings[arm][slot] as u8, at: 0 });
            }
            for (question_id, choice) in post {
                events.push(SessionEvent::Answered { phase: Phase::Posttest, question_id, choice, at });
                at += 1;
            }
            for mut e in tail {
                match &mut e {
                    SessionEvent::Readme { at: t, .. } | SessionEvent::Rated { at: t, .. } => *t = at,
                    _ => {}
                }
                at += 1;
                events.push(e);
            }
            logs.push((sid, events));
        }
    }
    Cohort { catalog, logs }
}
