use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{NearSynonymPair, PosTagger, TargetSentence, MAX_SENTENCE_TOKENS, MIN_SENTENCE_TOKENS};
use crate::Result;

/// A plain-text document, one sentence per line.
#[derive(Clone, Debug)]
pub struct Document {
    pub name: String,
    pub text: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipReport {
    pub tagger_failures: Vec<String>,
    pub out_of_length: usize,
    pub no_target: usize,
    pub multiple_targets: usize,
    pub pos_mismatch: usize,
    pub duplicates: usize,
}

impl SkipReport {
    fn merge(&mut self, other: SkipReport) {
        self.tagger_failures.extend(other.tagger_failures);
        self.out_of_length += other.out_of_length;
        self.no_target += other.no_target;
        self.multiple_targets += other.multiple_targets;
        self.pos_mismatch += other.pos_mismatch;
        self.duplicates += other.duplicates;
    }
}

#[derive(Clone, Debug, Default)]
pub struct IngestOutput {
    pub sentences: Vec<TargetSentence>,
    pub skipped: SkipReport,
}

/// Whitespace split with leading/trailing punctuation peeled into tokens.
pub fn tokenize(line: &str) -> Vec<String> {
    const LEAD: &[char] = &['"', '\'', '(', '[', '{', '“', '‘'];
    const TRAIL: &[char] = &['.', ',', ';', ':', '!', '?', '"', '\'', ')', ']', '}', '”', '’'];
    let mut out = Vec::new();
    for chunk in line.split_whitespace() {
        let mut word = chunk;
        while let Some(c) = word.chars().next().filter(|c| LEAD.contains(c) && word.len() > c.len_utf8()) {
            out.push(c.to_string());
            word = &word[c.len_utf8()..];
        }
        let mut tail = Vec::new();
        while let Some(c) = word.chars().last().filter(|c| TRAIL.contains(c) && word.len() > c.len_utf8()) {
            tail.push(c.to_string());
            word = &word[..word.len() - c.len_utf8()];
        }
        out.push(word.to_string());
        out.extend(tail.into_iter().rev());
    }
    out
}

/// Reads every `*.txt` file under `dir`, in file-name order.
pub fn read_corpus_dir(dir: &Path) -> Result<Vec<Document>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "txt"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            Ok(Document {
                name: p.file_stem().unwrap_or_default().to_string_lossy().into_owned(),
                text: std::fs::read_to_string(&p)?,
            })
        })
        .collect()
}

/// Pulls single-occurrence target sentences for `pair` out of the documents.
///
/// Documents are scanned in parallel; the output keeps document order and
/// drops later duplicates (lowercased, whitespace-normalised token string).
pub fn ingest_corpus(docs: &[Document], pair: &NearSynonymPair, tagger: &dyn PosTagger) -> IngestOutput {
    let per_doc: Vec<(Vec<TargetSentence>, SkipReport)> = docs
        .par_iter()
        .map(|doc| ingest_document(doc, pair, tagger))
        .collect();

    let mut out = IngestOutput::default();
    let mut seen = HashSet::new();
    for (sentences, skipped) in per_doc {
        out.skipped.merge(skipped);
        for s in sentences {
            let key = s.tokens.iter().map(|t| t.to_lowercase()).collect::<Vec<_>>().join(" ");
            if seen.insert(key) {
                out.sentences.push(s);
            } else {
                out.skipped.duplicates += 1;
            }
        }
    }
    out
}

fn ingest_document(doc: &Document, pair: &NearSynonymPair, tagger: &dyn PosTagger) -> (Vec<TargetSentence>, SkipReport) {
    let mut report = SkipReport::default();
    let mut sentences = Vec::new();
    for (line_no, line) in doc.text.lines().enumerate() {
        let tokens = tokenize(line);
        if tokens.is_empty() {
            continue;
        }
        if !(MIN_SENTENCE_TOKENS..=MAX_SENTENCE_TOKENS).contains(&tokens.len()) {
            report.out_of_length += 1;
            continue;
        }
        let hits: Vec<(usize, super::Member)> = tokens
            .iter()
            .enumerate()
            .filter_map(|(i, t)| pair.identify(t).map(|(m, _)| (i, m)))
            .collect();
        let (target_index, member) = match hits.as_slice() {
            [] => {
                report.no_target += 1;
                continue;
            }
            [hit] => *hit,
            _ => {
                report.multiple_targets += 1;
                continue;
            }
        };
        let tags = match tagger.tag(&tokens) {
            Ok(tags) if tags.len() == tokens.len() => tags,
            Ok(tags) => {
                report.tagger_failures.push(format!(
                    "{}:{}: {} tags for {} tokens",
                    doc.name,
                    line_no + 1,
                    tags.len(),
                    tokens.len()
                ));
                continue;
            }
            Err(e) => {
                report.tagger_failures.push(format!("{}:{}: {e}", doc.name, line_no + 1));
                continue;
            }
        };
        if tags[target_index] != Some(pair.pos()) {
            report.pos_mismatch += 1;
            continue;
        }
        sentences.push(TargetSentence {
            sentence_id: format!("{}-{}-{}", pair.id(), doc.name, line_no + 1),
            pair_id: pair.id().to_string(),
            tokens,
            target_index,
            filled_word: member,
            context_owner: member,
            split: None,
        });
    }
    (sentences, report)
}
