//! Mixture-model baseline: a diagonal Gaussian mixture per word over context
//! embeddings, candidates ranked by the likelihood ratio against the partner.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CandidatePool;
use crate::corpus::{Member, TargetSentence};
use crate::{Error, Result};

pub const DEFAULT_COMPONENTS: usize = 10;
const VARIANCE_FLOOR: f64 = 1e-4;

/// Maps a sentence's target context to a fixed-length vector.
pub trait ContextEmbedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, sentence: &TargetSentence) -> Vec<f64>;
}

/// Hashed bag of context tokens within `window` of the target, weighted by
/// 1/distance and L2-normalised.
#[derive(Clone, Debug)]
pub struct HashedContextEmbedder {
    pub dim: usize,
    pub window: usize,
}

impl Default for HashedContextEmbedder {
    fn default() -> Self {
        Self { dim: 128, window: 5 }
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

impl ContextEmbedder for HashedContextEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, s: &TargetSentence) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let lo = s.target_index.saturating_sub(self.window);
        let hi = (s.target_index + self.window + 1).min(s.tokens.len());
        for i in lo..hi {
            if i == s.target_index {
                continue;
            }
            let h = fnv1a(&s.tokens[i].to_lowercase());
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            v[(h % self.dim as u64) as usize] += sign / i.abs_diff(s.target_index) as f64;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalGmm {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl DiagonalGmm {
    pub fn components(&self) -> usize {
        self.weights.len()
    }

    fn component_log_density(&self, c: usize, x: &[f64]) -> f64 {
        let mut ll = self.weights[c].ln();
        for ((xi, mu), var) in x.iter().zip(&self.means[c]).zip(&self.variances[c]) {
            ll -= 0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (xi - mu) * (xi - mu) / var);
        }
        ll
    }

    pub fn log_likelihood(&self, x: &[f64]) -> f64 {
        let parts: Vec<f64> = (0..self.components()).map(|c| self.component_log_density(c, x)).collect();
        log_sum_exp(&parts)
    }

    /// EM from a k-means++ start. `k` must not exceed the number of points.
    pub fn fit(data: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<Self> {
        if k == 0 || data.len() < k {
            return Err(Error::Config(format!("cannot fit {k} components to {} points", data.len())));
        }
        let dim = data[0].len();
        if data.iter().any(|x| x.len() != dim) {
            return Err(Error::Config("embeddings differ in dimension".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut means = vec![data[rng.random_range(0..data.len())].clone()];
        while means.len() < k {
            let d: Vec<f64> = data.iter().map(|x| means.iter().map(|m| sq_dist(x, m)).fold(f64::INFINITY, f64::min)).collect();
            let total: f64 = d.iter().sum();
            let next = if total > 0.0 {
                let mut r = rng.random::<f64>() * total;
                d.iter().position(|&di| {
                    r -= di;
                    r <= 0.0
                }).unwrap_or(data.len() - 1)
            } else {
                rng.random_range(0..data.len())
            };
            means.push(data[next].clone());
        }
        let global_mean: Vec<f64> = (0..dim).map(|j| data.iter().map(|x| x[j]).sum::<f64>() / data.len() as f64).collect();
        let global_var: Vec<f64> = (0..dim)
            .map(|j| (data.iter().map(|x| (x[j] - global_mean[j]).powi(2)).sum::<f64>() / data.len() as f64).max(VARIANCE_FLOOR))
            .collect();
        let mut gmm = Self { weights: vec![1.0 / k as f64; k], means, variances: vec![global_var; k] };
        let mut prev = f64::NEG_INFINITY;
        let mut resp = vec![vec![0.0; k]; data.len()];
        for _ in 0..max_iter {
            let mut total_ll = 0.0;
            for (x, r) in data.iter().zip(resp.iter_mut()) {
                let parts: Vec<f64> = (0..k).map(|c| gmm.component_log_density(c, x)).collect();
                let lse = log_sum_exp(&parts);
                total_ll += lse;
                for c in 0..k {
                    r[c] = (parts[c] - lse).exp();
                }
            }
            for c in 0..k {
                let nk: f64 = resp.iter().map(|r| r[c]).sum::<f64>().max(1e-10);
                gmm.weights[c] = nk / data.len() as f64;
                for j in 0..dim {
                    let mu = data.iter().zip(&resp).map(|(x, r)| r[c] * x[j]).sum::<f64>() / nk;
                    let var = data.iter().zip(&resp).map(|(x, r)| r[c] * (x[j] - mu).powi(2)).sum::<f64>() / nk;
                    gmm.means[c][j] = mu;
                    gmm.variances[c][j] = var.max(VARIANCE_FLOOR);
                }
            }
            if (total_ll - prev).abs() < 1e-6 * total_ll.abs().max(1.0) {
                break;
            }
            prev = total_ll;
        }
        Ok(gmm)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmSelection {
    pub picks: [Vec<String>; 2],
    /// Components actually fitted per word.
    pub components: [usize; 2],
}

/// Fits one mixture per word on its training contexts and keeps the three
/// candidates per word with the highest own-minus-partner log-likelihood.
pub fn gmm_baseline_select(
    pool: &CandidatePool,
    train: [&[TargetSentence]; 2],
    embedder: &dyn ContextEmbedder,
    components: usize,
    seed: u64,
) -> Result<GmmSelection> {
    let mut models = Vec::with_capacity(2);
    let mut fitted = [0; 2];
    for m in Member::BOTH {
        let data: Vec<Vec<f64>> = train[m.slot()].iter().map(|s| embedder.embed(s)).collect();
        if data.is_empty() {
            return Err(Error::PoolTooSmall(format!("no training contexts for {m}")));
        }
        let k = if data.len() < components {
            log::warn!("only {} training contexts for {m}; reducing mixture to {} components", data.len(), data.len());
            data.len()
        } else {
            components
        };
        fitted[m.slot()] = k;
        models.push(DiagonalGmm::fit(&data, k, seed.wrapping_add(m.slot() as u64), 200)?);
    }
    let picks = Member::BOTH.map(|m| {
        let (own, other) = (&models[m.slot()], &models[m.other().slot()]);
        let mut scored: Vec<(f64, &str)> = pool
            .candidates(m)
            .iter()
            .map(|s| {
                let v = embedder.embed(s);
                (own.log_likelihood(&v) - other.log_likelihood(&v), s.sentence_id.as_str())
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        scored.into_iter().take(3).map(|(_, id)| id.to_string()).collect()
    });
    Ok(GmmSelection { picks, components: fitted })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Embeds by reading two numbers from the tokens, for clean geometric fixtures.
    struct CoordEmbedder;

    impl ContextEmbedder for CoordEmbedder {
        fn dim(&self) -> usize {
            2
        }

        fn embed(&self, s: &TargetSentence) -> Vec<f64> {
            vec![s.tokens[0].parse().unwrap(), s.tokens[2].parse().unwrap()]
        }
    }

    fn point(id: String, m: Member, x: f64, y: f64) -> TargetSentence {
        let w = if m == Member::First { "blick" } else { "dax" };
        TargetSentence {
            sentence_id: id,
            pair_id: "synthetic".into(),
            tokens: vec![format!("{x}"), w.into(), format!("{y}"), "fil00".into(), "fil01".into()],
            target_index: 1,
            filled_word: m,
            context_owner: m,
            split: None,
        }
    }

    #[test]
    fn fit_recovers_separated_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data: Vec<Vec<f64>> = (0..200)
            .map(|i| {
                let c = if i % 2 == 0 { -3.0 } else { 3.0 };
                vec![c + rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)]
            })
            .collect();
        let g = DiagonalGmm::fit(&data, 2, 4, 100).unwrap();
        let mut mus: Vec<f64> = g.means.iter().map(|m| m[0]).collect();
        mus.sort_by(f64::total_cmp);
        assert!((mus[0] + 3.0).abs() < 0.2 && (mus[1] - 3.0).abs() < 0.2, "{mus:?}");
        assert_eq!(g, DiagonalGmm::fit(&data, 2, 4, 100).unwrap());
    }

    #[test]
    fn reduces_components_when_data_is_scarce() {
        let train1: Vec<_> = (0..4).map(|i| point(format!("t1{i}"), Member::First, i as f64, 0.0)).collect();
        let train2: Vec<_> = (0..12).map(|i| point(format!("t2{i}"), Member::Second, -(i as f64), 1.0)).collect();
        let c1: Vec<_> = (0..3).map(|i| point(format!("a{i}"), Member::First, 1.0, 0.0)).collect();
        let c2: Vec<_> = (0..3).map(|i| point(format!("b{i}"), Member::Second, -1.0, 1.0)).collect();
        let pool = CandidatePool::new("synthetic", [c1, c2], [vec![], vec![]]).unwrap();
        let sel = gmm_baseline_select(&pool, [&train1, &train2], &CoordEmbedder, 10, 0).unwrap();
        assert_eq!(sel.components, [4, 10]);
    }

    #[test]
    fn hashed_embedding_ignores_target() {
        let e = HashedContextEmbedder::default();
        let a = point("x".into(), Member::First, 1.0, 2.0);
        let mut b = a.clone();
        b.tokens[1] = "dax".into();
        assert_eq!(e.embed(&a), e.embed(&b));
        let n: f64 = e.embed(&a).iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-9);
    }
}
