//! Per-arm improvement and the proficiency-group report, recomputed from raw
//! answers every time.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::{Result, StudyError};
use crate::session::{Arm, Phase, StudySession};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ArmImprovement {
    pub sets: usize,
    pub pre_correct: usize,
    pub post_correct: usize,
    /// Post-test correct minus pre-test correct over the arm's sets.
    pub improvement: i64,
    pub examples_read: usize,
    pub rated_sets: usize,
    pub rating_sum: u32,
}

fn correct(session: &StudySession, catalog: &Catalog, set_id: &str, phase: Phase) -> Result<usize> {
    let answers = session.answers(phase);
    Ok(catalog
        .get(set_id)?
        .questions
        .iter()
        .filter(|q| answers.get(&q.question_id).is_some_and(|a| a.choice == q.gold))
        .count())
}

/// Per-arm score change and examples read for one finished session.
pub fn compute_improvement(session: &StudySession, catalog: &Catalog) -> Result<BTreeMap<Arm, ArmImprovement>> {
    for phase in [Phase::Pretest, Phase::Posttest] {
        if !session.complete(phase, catalog)? {
            return Err(StudyError::Incomplete(format!("{}: {phase:?} unanswered questions", session.session_id)));
        }
    }
    let mut out: BTreeMap<Arm, ArmImprovement> = Arm::ALL.iter().map(|&a| (a, ArmImprovement::default())).collect();
    for set_id in &session.assigned_sets {
        let arm = session.arm(set_id)?;
        let pre = correct(session, catalog, set_id, Phase::Pretest)?;
        let post = correct(session, catalog, set_id, Phase::Posttest)?;
        let entry = out.get_mut(&arm).expect("all arms present");
        entry.sets += 1;
        entry.pre_correct += pre;
        entry.post_correct += post;
        entry.improvement += post as i64 - pre as i64;
        entry.examples_read += session.readme_events.iter().filter(|e| &e.set_id == set_id).count();
        if let Some(r) = session.questionnaire.get(set_id) {
            entry.rated_sets += 1;
            entry.rating_sum += u32::from(*r);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ArmGroupStats {
    /// Mean per-participant improvement; `None` when nobody had this arm.
    pub improvement_mean: Option<f64>,
    /// Examples read per (participant, set).
    pub examples_read_mean: Option<f64>,
    /// Difficulty rating per rated (participant, set).
    pub difficulty_mean: Option<f64>,
    pub improved: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub participants: Vec<String>,
    pub per_arm: BTreeMap<Arm, ArmGroupStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub threshold: f64,
    /// Participants at or above the mean proficiency.
    pub above: GroupStats,
    pub below: GroupStats,
    /// Participants whose summed delta under the arm is positive.
    pub improved: BTreeMap<Arm, usize>,
}

fn group_stats(members: &[(&StudySession, BTreeMap<Arm, ArmImprovement>)]) -> GroupStats {
    let per_arm = Arm::ALL
        .iter()
        .map(|&arm| {
            let rows: Vec<&ArmImprovement> = members.iter().map(|(_, m)| &m[&arm]).filter(|r| r.sets > 0).collect();
            let ratio = |num: f64, den: usize| (den > 0).then(|| num / den as f64);
            let sets: usize = rows.iter().map(|r| r.sets).sum();
            let stats = ArmGroupStats {
                improvement_mean: ratio(rows.iter().map(|r| r.improvement as f64).sum(), rows.len()),
                examples_read_mean: ratio(rows.iter().map(|r| r.examples_read as f64).sum(), sets),
                difficulty_mean: ratio(
                    rows.iter().map(|r| f64::from(r.rating_sum)).sum(),
                    rows.iter().map(|r| r.rated_sets).sum(),
                ),
                improved: rows.iter().filter(|r| r.improvement > 0).count(),
            };
            (arm, stats)
        })
        .collect();
    GroupStats { participants: members.iter().map(|(s, _)| s.participant_id.clone()).collect(), per_arm }
}

/// Splits participants at the mean proficiency (ties go above) and summarises each arm.
pub fn group_report(sessions: &[StudySession], catalog: &Catalog) -> Result<StudyReport> {
    let missing: Vec<String> =
        sessions.iter().filter(|s| s.proficiency_score.is_none()).map(|s| s.session_id.clone()).collect();
    if !missing.is_empty() {
        return Err(StudyError::MissingProficiency(missing));
    }
    if sessions.is_empty() {
        return Err(StudyError::Precondition("no sessions to report".into()));
    }
    let scores: Vec<f64> = sessions.iter().filter_map(|s| s.proficiency_score).collect();
    let threshold = scores.iter().sum::<f64>() / scores.len() as f64;
    let cut = threshold - 1e-9 * threshold.abs().max(1.0);
    let mut above = Vec::new();
    let mut below = Vec::new();
    for s in sessions {
        let row = (s, compute_improvement(s, catalog)?);
        if s.proficiency_score.unwrap_or(f64::NAN) >= cut {
            above.push(row);
        } else {
            below.push(row);
        }
    }
    let (above, below) = (group_stats(&above), group_stats(&below));
    let improved = Arm::ALL.iter().map(|a| (*a, above.per_arm[a].improved + below.per_arm[a].improved)).collect();
    Ok(StudyReport { threshold, above, below, improved })
}
