use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{read_pairs, write_pairs, Member, NearSynonymPair, Split, TargetSentence};
use crate::{jsonl, Error, Result};

/// Balanced train/test sentences for one pair. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct SentencePool {
    pair: NearSynonymPair,
    train: [Vec<TargetSentence>; 2],
    test: [Vec<TargetSentence>; 2],
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct PoolMeta {
    pair_id: String,
    seed: u64,
}

impl SentencePool {
    /// Assembles a pool from already-split sentences, checking balance and disjointness.
    pub fn from_parts(
        pair: NearSynonymPair,
        train: [Vec<TargetSentence>; 2],
        test: [Vec<TargetSentence>; 2],
        seed: u64,
    ) -> Result<Self> {
        if train[0].len() != train[1].len() || test[0].len() != test[1].len() {
            return Err(Error::PoolTooSmall(format!(
                "unbalanced pool: train {}/{} test {}/{}",
                train[0].len(),
                train[1].len(),
                test[0].len(),
                test[1].len()
            )));
        }
        let mut ids = std::collections::HashSet::new();
        for (split, sets) in [(Split::Train, &train), (Split::Test, &test)] {
            for member in Member::BOTH {
                for s in &sets[member.slot()] {
                    s.validate(&pair)?;
                    if s.filled_word != member || !s.is_authentic() || s.split != Some(split) {
                        return Err(Error::InvalidSentence {
                            id: s.sentence_id.clone(),
                            reason: format!("misplaced in {split:?} pool of {member}"),
                        });
                    }
                    if !ids.insert(s.sentence_id.clone()) {
                        return Err(Error::InvalidSentence {
                            id: s.sentence_id.clone(),
                            reason: "duplicate sentence id".into(),
                        });
                    }
                }
            }
        }
        Ok(Self { pair, train, test, seed })
    }

    pub fn pair(&self) -> &NearSynonymPair {
        &self.pair
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn train(&self, member: Member) -> &[TargetSentence] {
        &self.train[member.slot()]
    }

    pub fn test(&self, member: Member) -> &[TargetSentence] {
        &self.test[member.slot()]
    }

    pub fn split(&self, split: Split, member: Member) -> &[TargetSentence] {
        match split {
            Split::Train => self.train(member),
            Split::Test => self.test(member),
        }
    }

    pub fn sentences(&self) -> impl Iterator<Item = &TargetSentence> {
        self.train.iter().chain(self.test.iter()).flatten()
    }

    pub fn pool_file(dir: &Path, pair_id: &str) -> std::path::PathBuf {
        dir.join(format!("{pair_id}.pool.jsonl"))
    }

    /// Writes `<pair_id>.pool.jsonl` and `<pair_id>.meta.json` into `dir`.
    ///
    /// The caller owns `pairs.tsv`; see [`SentencePool::save_all`].
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        jsonl::write_records(&Self::pool_file(dir, self.pair.id()), self.sentences())?;
        let meta = PoolMeta { pair_id: self.pair.id().to_string(), seed: self.seed };
        std::fs::write(dir.join(format!("{}.meta.json", self.pair.id())), serde_json::to_string(&meta)?)?;
        Ok(())
    }

    pub fn save_all(dir: &Path, pools: &[SentencePool]) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let pairs: Vec<NearSynonymPair> = pools.iter().map(|p| p.pair.clone()).collect();
        write_pairs(&dir.join("pairs.tsv"), &pairs)?;
        pools.iter().try_for_each(|p| p.save(dir))
    }

    pub fn load(dir: &Path, pair: &NearSynonymPair) -> Result<Self> {
        let records: Vec<TargetSentence> = jsonl::read_records(&Self::pool_file(dir, pair.id()))?;
        let meta: PoolMeta =
            serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{}.meta.json", pair.id())))?)?;
        let mut train: [Vec<TargetSentence>; 2] = Default::default();
        let mut test: [Vec<TargetSentence>; 2] = Default::default();
        for s in records {
            let bucket = match s.split {
                Some(Split::Train) => &mut train,
                Some(Split::Test) => &mut test,
                None => {
                    return Err(Error::InvalidSentence {
                        id: s.sentence_id,
                        reason: "pool record without split".into(),
                    })
                }
            };
            bucket[s.filled_word.slot()].push(s);
        }
        Self::from_parts(pair.clone(), train, test, meta.seed)
    }

    /// Loads every pool listed in `<dir>/pairs.tsv`.
    pub fn load_all(dir: &Path) -> Result<Vec<Self>> {
        read_pairs(&dir.join("pairs.tsv"))?
            .into_iter()
            .map(|p| Self::load(dir, &p.with_regular_inflections()))
            .collect()
    }
}

/// Samples `per_word_total` sentences per word without replacement and splits
/// the first `train_count` of each into train, the rest into test.
pub fn build_pool(
    pair: &NearSynonymPair,
    sentences: &[TargetSentence],
    per_word_total: usize,
    train_count: usize,
    seed: u64,
) -> Result<SentencePool> {
    if train_count >= per_word_total {
        return Err(Error::Config(format!(
            "train count {train_count} must be below per-word total {per_word_total}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train: [Vec<TargetSentence>; 2] = Default::default();
    let mut test: [Vec<TargetSentence>; 2] = Default::default();
    for member in Member::BOTH {
        let mut candidates: Vec<&TargetSentence> = sentences
            .iter()
            .filter(|s| s.pair_id == pair.id() && s.filled_word == member && s.is_authentic())
            .collect();
        if candidates.len() < per_word_total {
            return Err(Error::InsufficientCandidates {
                word: pair.word(member).to_string(),
                need: per_word_total,
                have: candidates.len(),
            });
        }
        candidates.sort_by(|a, b| a.sentence_id.cmp(&b.sentence_id));
        let picked = index::sample(&mut rng, candidates.len(), per_word_total);
        for (rank, i) in picked.into_iter().enumerate() {
            let mut s = candidates[i].clone();
            if rank < train_count {
                s.split = Some(Split::Train);
                train[member.slot()].push(s);
            } else {
                s.split = Some(Split::Test);
                test[member.slot()].push(s);
            }
        }
    }
    SentencePool::from_parts(pair.clone(), train, test, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Pos;

    fn pair() -> NearSynonymPair {
        NearSynonymPair::new("p", "little", "small", Pos::Adj).unwrap()
    }

    fn sentences(per_word: [usize; 2]) -> Vec<TargetSentence> {
        let mut out = Vec::new();
        for m in Member::BOTH {
            for i in 0..per_word[m.slot()] {
                out.push(TargetSentence {
                    sentence_id: format!("{}-{i:04}", m.number()),
                    pair_id: "p".into(),
                    tokens: vec!["a".into(), pair().word(m).into(), format!("thing{i}")],
                    target_index: 1,
                    filled_word: m,
                    context_owner: m,
                    split: None,
                });
            }
        }
        out
    }

    #[test]
    fn full_scale_split_counts() {
        let pool = build_pool(&pair(), &sentences([5200, 5100]), 5000, 4000, 1).unwrap();
        for m in Member::BOTH {
            assert_eq!(pool.train(m).len(), 4000);
            assert_eq!(pool.test(m).len(), 1000);
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let s = sentences([30, 30]);
        let a = build_pool(&pair(), &s, 10, 8, 42).unwrap();
        let b = build_pool(&pair(), &s, 10, 8, 42).unwrap();
        assert_eq!(a, b);
        let c = build_pool(&pair(), &s, 10, 8, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn insufficient_candidates_names_deficit() {
        let err = build_pool(&pair(), &sentences([6, 20]), 10, 8, 0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("insufficient candidates"), "{msg}");
        assert!(msg.contains("need 10 have 6"), "{msg}");
        assert!(msg.contains("little"), "{msg}");
    }

    #[test]
    fn save_is_byte_identical() {
        let s = sentences([30, 30]);
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        SentencePool::save_all(&a, &[build_pool(&pair(), &s, 10, 8, 7).unwrap()]).unwrap();
        SentencePool::save_all(&b, &[build_pool(&pair(), &s, 10, 8, 7).unwrap()]).unwrap();
        let read = |d: &Path| std::fs::read(SentencePool::pool_file(d, "p")).unwrap();
        assert_eq!(read(&a), read(&b));
        let loaded = SentencePool::load_all(&a).unwrap();
        assert_eq!(loaded[0].train(Member::First).len(), 8);
    }
}
