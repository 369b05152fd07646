//! A synthetic near-synonym pair for desk-scale end-to-end runs.
//!
//! Two pseudo-words share a pool of filler tokens but each has its own set of
//! collocates. A context is "native" to a word when it was generated from that
//! word's collocates, so both the filled word and the context owner are known
//! exactly, which is what the label rules need.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Member, NearSynonymPair, Pos, TargetSentence};

#[derive(Clone, Debug)]
pub struct SyntheticSpec {
    pub pair_id: String,
    pub words: [String; 2],
    /// Collocates per word; the two sets are disjoint.
    pub signature_size: usize,
    pub filler_size: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Chance that a context position holds a collocate rather than filler.
    pub signature_rate: f64,
    /// Per-sentence signature rate is drawn uniformly within this distance of `signature_rate`.
    pub signature_jitter: f64,
    /// Chance that a collocate position borrows from the partner word.
    pub cross_rate: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            pair_id: "synthetic".into(),
            words: ["blick".into(), "dax".into()],
            signature_size: 12,
            filler_size: 40,
            min_len: 8,
            max_len: 14,
            signature_rate: 0.35,
            signature_jitter: 0.25,
            cross_rate: 0.1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticPair {
    spec: SyntheticSpec,
    pair: NearSynonymPair,
}

impl SyntheticPair {
    pub fn new(spec: SyntheticSpec) -> Self {
        let pair = NearSynonymPair::new(spec.pair_id.clone(), &spec.words[0], &spec.words[1], Pos::Adj)
            .expect("synthetic words are distinct single tokens");
        Self { spec, pair }
    }

    pub fn pair(&self) -> &NearSynonymPair {
        &self.pair
    }

    pub fn collocate(&self, member: Member, i: usize) -> String {
        let prefix = if member == Member::First { "ka" } else { "zo" };
        format!("{prefix}{i:02}")
    }

    fn filler(i: usize) -> String {
        format!("fil{i:02}")
    }

    /// One authentic sentence native to `member`.
    pub fn sentence(&self, rng: &mut impl Rng, member: Member, id: String) -> TargetSentence {
        let s = &self.spec;
        let len = rng.random_range(s.min_len..=s.max_len);
        let target_index = rng.random_range(0..len);
        let rate = if s.signature_jitter > 0.0 {
            rng.random_range(s.signature_rate - s.signature_jitter..=s.signature_rate + s.signature_jitter).clamp(0.0, 1.0)
        } else {
            s.signature_rate
        };
        let tokens = (0..len)
            .map(|i| {
                if i == target_index {
                    return self.pair.word(member).to_string();
                }
                if rng.random_bool(rate) {
                    let owner = if rng.random_bool(s.cross_rate) { member.other() } else { member };
                    self.collocate(owner, rng.random_range(0..s.signature_size))
                } else {
                    Self::filler(rng.random_range(0..s.filler_size))
                }
            })
            .collect();
        TargetSentence {
            sentence_id: id,
            pair_id: self.pair.id().to_string(),
            tokens,
            target_index,
            filled_word: member,
            context_owner: member,
            split: None,
        }
    }

    /// `per_word` authentic sentences for each member, ids `<pair>-<n>-<i>`.
    pub fn generate(&self, per_word: usize, seed: u64) -> Vec<TargetSentence> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Member::BOTH
            .into_iter()
            .flat_map(|m| (0..per_word).map(move |i| (m, i)))
            .map(|(m, i)| {
                let id = format!("{}-{}-{i:05}", self.pair.id(), m.number());
                self.sentence(&mut rng, m, id)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentences_are_valid_and_native() {
        let syn = SyntheticPair::new(SyntheticSpec::default());
        let all = syn.generate(50, 1);
        assert_eq!(all.len(), 100);
        for s in &all {
            s.validate(syn.pair()).unwrap();
            assert!(s.is_authentic());
        }
        assert_eq!(all, syn.generate(50, 1));
    }
}
