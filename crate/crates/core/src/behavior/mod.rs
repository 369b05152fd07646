//! The behavior check: the same quiz answered with appropriate and with
//! corrupted example sets, compared by a paired t-test.

pub mod stats;

use std::collections::HashSet;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::Agent;
use crate::corpus::{Member, NearSynonymPair, SentencePool, TargetSentence};
use crate::instances::ExampleSet;
use crate::quiz::{make_quiz_excluding, run_quiz, Quiz};
use crate::{jsonl, Error, Result};

pub use stats::{paired_t_test, pearson_correlation, welch_t_test, TTest};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialCondition {
    Appropriate,
    Inappropriate,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TTestKind {
    #[default]
    Paired,
    Welch,
}

impl TTestKind {
    pub fn run(self, a: &[f64], b: &[f64]) -> Result<TTest> {
        match self {
            TTestKind::Paired => paired_t_test(a, b),
            TTestKind::Welch => welch_t_test(a, b),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorReport {
    pub pair_id: String,
    pub n_sets: usize,
    pub k: usize,
    pub quiz_id: String,
    pub test: TTestKind,
    pub set_ids: Vec<String>,
    pub acc_good: Vec<f64>,
    pub acc_bad: Vec<f64>,
    /// Absent when the test hit the degenerate-variance path; see `t_error`.
    pub t_score: Option<f64>,
    pub p_value: Option<f64>,
    pub t_error: Option<String>,
    pub delta: f64,
    pub lexical_acc: f64,
}

impl BehaviorReport {
    pub fn from_accuracies(
        pair_id: impl Into<String>,
        quiz: &Quiz,
        set_ids: Vec<String>,
        acc_good: Vec<f64>,
        acc_bad: Vec<f64>,
        test: TTestKind,
    ) -> Self {
        let n = acc_good.len() as f64;
        let lexical_acc = acc_good.iter().sum::<f64>() / n;
        let delta = lexical_acc - acc_bad.iter().sum::<f64>() / n;
        let (t_score, p_value, t_error) = match test.run(&acc_good, &acc_bad) {
            Ok(r) => (Some(r.t), Some(r.p), None),
            Err(e) => (None, None, Some(e.to_string())),
        };
        Self {
            pair_id: pair_id.into(),
            n_sets: acc_good.len(),
            k: quiz.k,
            quiz_id: quiz.quiz_id.clone(),
            test,
            set_ids,
            acc_good,
            acc_bad,
            t_score,
            p_value,
            t_error,
            delta,
            lexical_acc,
        }
    }

    /// Re-runs the configured t-test, surfacing the degenerate error if any.
    pub fn t_test(&self) -> Result<TTest> {
        self.test.run(&self.acc_good, &self.acc_bad)
    }

    pub fn record(&self) -> ReportRecord {
        ReportRecord {
            pair_id: self.pair_id.clone(),
            n_sets: self.n_sets,
            t: self.t_score,
            p: self.p_value,
            acc: self.lexical_acc,
            delta: self.delta,
        }
    }
}

/// Report-file row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub pair_id: String,
    pub n_sets: usize,
    pub t: Option<f64>,
    pub p: Option<f64>,
    pub acc: f64,
    pub delta: f64,
}

pub fn write_reports(path: &Path, reports: &[BehaviorReport]) -> Result<()> {
    jsonl::write_records(path, reports.iter().map(BehaviorReport::record))
}

/// Swaps every member's target word; slots stay where they were.
pub fn corrupt_example_set(set: &ExampleSet, pair: &NearSynonymPair) -> Result<ExampleSet> {
    if !set.is_authentic() {
        return Err(Error::InvalidSet(format!("set {} is already corrupted", set.set_id())));
    }
    set.swapped(pair)
}

#[derive(Clone, Debug)]
pub struct BehaviorOptions {
    pub n_sets: usize,
    pub k: usize,
    pub seed: u64,
    pub test: TTestKind,
}

impl BehaviorOptions {
    pub fn new(n_sets: usize, k: usize, seed: u64) -> Self {
        Self { n_sets, k, seed, test: TTestKind::Paired }
    }
}

fn choose3(n: usize) -> u128 {
    if n < 3 {
        0
    } else {
        let n = n as u128;
        n * (n - 1) * (n - 2) / 6
    }
}

/// Unranks a lexicographic 3-combination of 0..n.
fn unrank3(n: usize, mut rank: u128) -> [usize; 3] {
    let mut out = [0; 3];
    let mut start = 0;
    for (slot, item) in out.iter_mut().enumerate() {
        let remaining = 2 - slot;
        let mut c = start;
        loop {
            let block = if remaining == 0 { 1 } else { binom(n - c - 1, remaining) };
            if rank < block {
                break;
            }
            rank -= block;
            c += 1;
        }
        *item = c;
        start = c + 1;
    }
    out
}

fn binom(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    (0..r).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// `n_sets` distinct 3+3 sets, uniform without replacement over all combinations.
pub fn sample_example_sets(
    pair_id: &str,
    sources: [&[TargetSentence]; 2],
    n_sets: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ExampleSet>> {
    let per = [choose3(sources[0].len()), choose3(sources[1].len())];
    let total = per[0] * per[1];
    if (n_sets as u128) > total {
        return Err(Error::PoolTooSmall(format!(
            "{n_sets} sets requested but only {total} distinct 3+3 combinations exist"
        )));
    }
    let ranks: Vec<u128> = if total <= 1 << 24 {
        index::sample(rng, total as usize, n_sets).into_iter().map(|r| r as u128).collect()
    } else {
        let mut seen = HashSet::with_capacity(n_sets);
        let mut out = Vec::with_capacity(n_sets);
        while out.len() < n_sets {
            let r = rng.random_range(0..total);
            if seen.insert(r) {
                out.push(r);
            }
        }
        out
    };
    ranks
        .into_iter()
        .map(|r| {
            let (a, b) = (unrank3(sources[0].len(), r / per[1]), unrank3(sources[1].len(), r % per[1]));
            let w1: Vec<_> = a.iter().map(|&i| sources[0][i].clone()).collect();
            let w2: Vec<_> = b.iter().map(|&i| sources[1][i].clone()).collect();
            ExampleSet::from_slots(pair_id, &w1, &w2)
        })
        .collect()
}

/// Runs one shared quiz against `n_sets` authentic test-split sets and their
/// corrupted twins. Set sentences never appear as quiz questions.
pub fn run_behavior_check(agent: &Agent, pool: &SentencePool, opts: &BehaviorOptions) -> Result<BehaviorReport> {
    if opts.n_sets < 2 {
        return Err(Error::Config("behavior check needs at least 2 sets".into()));
    }
    let pair = pool.pair();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let quiz = make_quiz_excluding(pool, opts.k, opts.seed, &HashSet::new())?;
    let quiz_ids = quiz.ids();
    let rest: [Vec<TargetSentence>; 2] = Member::BOTH.map(|m| {
        pool.test(m).iter().filter(|s| !quiz_ids.contains(s.sentence_id.as_str())).cloned().collect()
    });
    let sets = sample_example_sets(pair.id(), [&rest[0], &rest[1]], opts.n_sets, &mut rng)?;
    let results: Vec<(f64, f64)> = sets
        .par_iter()
        .map(|set| {
            let good = run_quiz(agent, set, &quiz, pair)?;
            let bad = run_quiz(agent, &corrupt_example_set(set, pair)?, &quiz, pair)?;
            Ok((good.accuracy, bad.accuracy))
        })
        .collect::<Result<_>>()?;
    let (acc_good, acc_bad) = results.into_iter().unzip();
    Ok(BehaviorReport::from_accuracies(
        pair.id(),
        &quiz,
        sets.iter().map(ExampleSet::set_id).collect(),
        acc_good,
        acc_bad,
        opts.test,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub pair_id: String,
    pub acc: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaSummary {
    pub rows: Vec<DeltaRow>,
    pub pearson: f64,
}

impl DeltaSummary {
    pub fn from_rows(rows: Vec<DeltaRow>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::StatsInput(format!("delta summary needs at least 2 pairs, got {}", rows.len())));
        }
        let acc: Vec<f64> = rows.iter().map(|r| r.acc).collect();
        let delta: Vec<f64> = rows.iter().map(|r| r.delta).collect();
        let pearson = pearson_correlation(&acc, &delta)?;
        Ok(Self { rows, pearson })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("pair_id,acc,delta\n");
        for r in &self.rows {
            out.push_str(&format!("{},{:.4},{:.4}\n", r.pair_id, r.acc, r.delta));
        }
        out
    }
}

/// Per-pair (Acc, Δ) table plus the correlation between the two columns.
pub fn delta_summary(reports: &[BehaviorReport]) -> Result<DeltaSummary> {
    DeltaSummary::from_rows(
        reports
            .iter()
            .map(|r| DeltaRow { pair_id: r.pair_id.clone(), acc: r.lexical_acc, delta: r.delta })
            .collect(),
    )
}
