//! Model input layout.
//!
//! Entailment pairs: `[CLS] example [SEP] question [SEP]`.
//! Context sets: `[CLS] e1 [SEP] … e6 [SEP] question-with-[MASK] [SEP]`.
//!
//! Sentences are cut to a window that always keeps the target slot. Entailment
//! pairs share the budget in proportion to their lengths; context sets shrink
//! the longest example first and never touch the question.

use serde::{Deserialize, Serialize};

use crate::corpus::TargetSentence;
use crate::{Error, Result};

pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const MASK: &str = "[MASK]";
pub const UNK: &str = "[UNK]";
pub const SPECIAL_TOKENS: [&str; 4] = [CLS, SEP, MASK, UNK];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpanRole {
    Example(usize),
    Question,
}

/// Location of one sentence inside an encoded sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub role: SpanRole,
    pub start: usize,
    pub len: usize,
    /// Absolute position of the target slot.
    pub slot: usize,
}

impl Span {
    pub fn positions(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedSequence {
    /// Lowercased tokens including the special markers.
    pub tokens: Vec<String>,
    /// 0 for examples, 1 for the question.
    pub segments: Vec<u8>,
    pub spans: Vec<Span>,
}

impl EncodedSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn question(&self) -> &Span {
        self.spans.iter().find(|s| s.role == SpanRole::Question).expect("every encoding has a question span")
    }
}

/// The `keep`-token window of `s` that contains its target, as (start, target offset).
fn window(s: &TargetSentence, keep: usize) -> (usize, usize) {
    let n = s.tokens.len();
    let keep = keep.min(n).max(1);
    let start = s.target_index.saturating_sub(keep / 2).min(n - keep);
    (start, s.target_index - start)
}

struct Builder {
    seq: EncodedSequence,
}

impl Builder {
    fn new() -> Self {
        let mut b = Self { seq: EncodedSequence { tokens: Vec::new(), segments: Vec::new(), spans: Vec::new() } };
        b.push(CLS.to_string(), 0);
        b
    }

    fn push(&mut self, token: String, segment: u8) {
        self.seq.tokens.push(token);
        self.seq.segments.push(segment);
    }

    fn sentence(&mut self, s: &TargetSentence, keep: usize, role: SpanRole, mask: bool) {
        let segment = u8::from(role == SpanRole::Question);
        let (start, offset) = window(s, keep);
        let len = keep.min(s.tokens.len()).max(1);
        let span_start = self.seq.tokens.len();
        for (i, tok) in s.tokens[start..start + len].iter().enumerate() {
            let tok = if mask && i == offset { MASK.to_string() } else { tok.to_lowercase() };
            self.push(tok, segment);
        }
        self.seq.spans.push(Span { role, start: span_start, len, slot: span_start + offset });
        self.push(SEP.to_string(), segment);
    }
}

/// Lengths after sharing `budget` tokens in proportion to `a` and `b`.
pub fn proportional_lengths(a: usize, b: usize, budget: usize) -> (usize, usize) {
    if a + b <= budget {
        return (a, b);
    }
    let ka = ((budget as f64) * (a as f64) / ((a + b) as f64)).floor() as usize;
    let ka = ka.clamp(1, budget - 1);
    (ka, budget - ka)
}

pub fn encode_entailment_input(example: &TargetSentence, question: &TargetSentence, max_len: usize) -> EncodedSequence {
    let (ka, kb) = proportional_lengths(example.tokens.len(), question.tokens.len(), max_len - 3);
    let mut b = Builder::new();
    b.sentence(example, ka, SpanRole::Example(0), false);
    b.sentence(question, kb, SpanRole::Question, false);
    b.seq
}

/// Per-example lengths after longest-first trimming to fit `budget`.
pub fn longest_first_lengths(lengths: &[usize], budget: usize) -> Option<Vec<usize>> {
    if lengths.len() > budget {
        return None;
    }
    let mut out = lengths.to_vec();
    let mut total: usize = out.iter().sum();
    while total > budget {
        let (i, _) = out
            .iter()
            .enumerate()
            .max_by(|(i, a), (j, b)| a.cmp(b).then(j.cmp(i)))
            .expect("non-empty");
        out[i] -= 1;
        total -= 1;
    }
    Some(out)
}

pub fn encode_context_input(
    examples: &[&TargetSentence],
    question: &TargetSentence,
    max_len: usize,
) -> Result<EncodedSequence> {
    // [CLS] + one [SEP] per sentence + the question itself
    let fixed = 1 + examples.len() + 1 + question.tokens.len();
    let budget = max_len.saturating_sub(fixed);
    let lengths: Vec<usize> = examples.iter().map(|e| e.tokens.len()).collect();
    let kept = (fixed <= max_len)
        .then(|| longest_first_lengths(&lengths, budget))
        .flatten()
        .ok_or_else(|| {
            Error::SequenceTooLong(format!(
                "question of {} tokens leaves no room for {} examples within {max_len}",
                question.tokens.len(),
                examples.len()
            ))
        })?;
    let mut b = Builder::new();
    for (k, (e, keep)) in examples.iter().zip(kept).enumerate() {
        b.sentence(e, keep, SpanRole::Example(k), false);
    }
    b.sentence(question, question.tokens.len(), SpanRole::Question, true);
    Ok(b.seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Member;

    fn sent(n: usize, target: usize) -> TargetSentence {
        let mut tokens: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
        tokens[target] = "little".into();
        TargetSentence {
            sentence_id: format!("s{n}"),
            pair_id: "p".into(),
            tokens,
            target_index: target,
            filled_word: Member::First,
            context_owner: Member::First,
            split: None,
        }
    }

    #[test]
    fn short_pair_layout() {
        let e = encode_entailment_input(&sent(20, 3), &sent(20, 10), 256);
        assert_eq!(e.len(), 43);
        assert_eq!(e.tokens[0], CLS);
        assert_eq!(e.tokens[21], SEP);
        assert_eq!(e.tokens[42], SEP);
        assert_eq!(e.segments.iter().filter(|&&s| s == 1).count(), 21);
        assert_eq!(e.tokens[e.spans[0].slot], "little");
    }

    #[test]
    fn long_pair_truncates_proportionally() {
        let e = encode_entailment_input(&sent(200, 150), &sent(200, 5), 256);
        assert_eq!(e.len(), 256);
        // 253 tokens shared equally by two 200-token sentences
        assert_eq!((e.spans[0].len, e.spans[1].len), (126, 127));
        for s in &e.spans {
            assert_eq!(e.tokens[s.slot], "little");
        }
    }

    #[test]
    fn context_fits() {
        let exs: Vec<TargetSentence> = (0..6).map(|_| sent(15, 2)).collect();
        let refs: Vec<&TargetSentence> = exs.iter().collect();
        let e = encode_context_input(&refs, &sent(20, 4), 256).unwrap();
        assert_eq!(e.len(), 1 + 6 * 16 + 21);
        assert_eq!(e.tokens.iter().filter(|t| *t == MASK).count(), 1);
        assert_eq!(e.tokens[e.question().slot], MASK);
    }

    #[test]
    fn context_trims_longest_examples_only() {
        let lens = [100, 20, 60, 15, 80, 10];
        let exs: Vec<TargetSentence> = lens.iter().map(|&n| sent(n, n / 2)).collect();
        let refs: Vec<&TargetSentence> = exs.iter().collect();
        let q = sent(30, 7);
        let e = encode_context_input(&refs, &q, 128).unwrap();
        assert_eq!(e.len(), 128);
        let qs = e.question();
        assert_eq!(qs.len, 30);
        let kept: Vec<String> = e.tokens[qs.positions()].to_vec();
        let mut expected: Vec<String> = q.tokens.iter().map(|t| t.to_lowercase()).collect();
        expected[7] = MASK.into();
        assert_eq!(kept, expected);
        // budget 128 - 38 = 90 over examples; short ones untouched
        let ex_lens: Vec<usize> = e.spans[..6].iter().map(|s| s.len).collect();
        assert_eq!(ex_lens.iter().sum::<usize>(), 90);
        assert_eq!(ex_lens[5], 10);
        assert_eq!(ex_lens[3], 15);
    }

    #[test]
    fn oversize_question_errors() {
        let exs: Vec<TargetSentence> = (0..6).map(|_| sent(10, 1)).collect();
        let refs: Vec<&TargetSentence> = exs.iter().collect();
        assert!(encode_context_input(&refs, &sent(60, 1), 64).is_err());
    }

    #[test]
    fn encoding_is_pure() {
        let (a, b) = (sent(30, 2), sent(25, 20));
        assert_eq!(encode_entailment_input(&a, &b, 32), encode_entailment_input(&a, &b, 32));
    }
}
