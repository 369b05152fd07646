use std::collections::HashSet;

use synsel_core::corpus::{build_pool, Member, SentencePool};
use synsel_core::selector::gmm::{gmm_baseline_select, ContextEmbedder, DiagonalGmm, HashedContextEmbedder};
use synsel_core::selector::CandidatePool;
use synsel_core::synthetic::{SyntheticPair, SyntheticSpec};

fn pool() -> SentencePool {
    let syn = SyntheticPair::new(SyntheticSpec::default());
    build_pool(syn.pair(), &syn.generate(400, 8), 400, 300, 2).unwrap()
}

#[test]
fn word_mixtures_separate_test_contexts() {
    let p = pool();
    let emb = HashedContextEmbedder::default();
    let models: Vec<DiagonalGmm> = Member::BOTH
        .iter()
        .map(|&m| {
            let data: Vec<Vec<f64>> = p.train(m).iter().map(|s| emb.embed(s)).collect();
            DiagonalGmm::fit(&data, 10, 3, 100).unwrap()
        })
        .collect();
    let mut right = 0;
    let mut total = 0;
    for m in Member::BOTH {
        for s in p.test(m) {
            let v = emb.embed(s);
            let own = models[m.slot()].log_likelihood(&v);
            let other = models[m.other().slot()].log_likelihood(&v);
            right += usize::from(own > other);
            total += 1;
        }
    }
    // chance is 0.5 with sd 0.035 over 200 contexts
    assert!(right as f64 / total as f64 > 0.7, "{right}/{total}");
}

#[test]
fn baseline_picks_three_candidates_per_word() {
    let p = pool();
    let cands = CandidatePool::sample(&p, 10, &HashSet::new(), 4, |_| Vec::new()).unwrap();
    let train = Member::BOTH.map(|m| p.train(m));
    let emb = HashedContextEmbedder::default();
    let a = gmm_baseline_select(&cands, train, &emb, 10, 1).unwrap();
    assert_eq!(a, gmm_baseline_select(&cands, train, &emb, 10, 1).unwrap());
    assert_eq!(a.components, [10, 10]);
    for m in Member::BOTH {
        let ids: HashSet<&str> = cands.candidates(m).iter().map(|s| s.sentence_id.as_str()).collect();
        assert_eq!(a.picks[m.slot()].len(), 3);
        assert!(a.picks[m.slot()].iter().all(|id| ids.contains(id.as_str())));
    }
}

#[test]
fn baseline_shrinks_mixture_for_tiny_training_split() {
    let p = pool();
    let cands = CandidatePool::sample(&p, 5, &HashSet::new(), 4, |_| Vec::new()).unwrap();
    let train = Member::BOTH.map(|m| &p.train(m)[..6]);
    let sel = gmm_baseline_select(&cands, train, &HashedContextEmbedder::default(), 10, 1).unwrap();
    assert_eq!(sel.components, [6, 6]);
}
