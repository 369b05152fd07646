//! Desk-scale trainable classifier: token embeddings, per-span pooling and a
//! linear head.
//!
//! Each sentence span is summarised as the mean embedding of its context
//! tokens together with the embedding of its target slot.
//!
//! * Entailment: the example summary `u` and question summary `v` feed a
//!   linear head over `[u, v, u*v, |u-v|]`.
//! * Context: the question context attends over the six example contexts
//!   (dot-product scores with a learned temperature); the attention-weighted
//!   slot embeddings `p` and the question context `q` feed a linear head over
//!   `[q, p]`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use std::path::Path;

use super::backend::{ClassifierBackend, LabeledInput, ModelInput};
use super::encode::{EncodedSequence, SpanRole, SPECIAL_TOKENS, UNK};
use super::optim::{self, softmax2, Differentiable};
use super::{AgentConfig, AgentMode, BackendKind, TrainingReport};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn build<'a>(sequences: impl IntoIterator<Item = &'a EncodedSequence>) -> Self {
        let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        let mut seen: std::collections::HashSet<String> = tokens.iter().cloned().collect();
        let mut rest = std::collections::BTreeSet::new();
        for seq in sequences {
            for t in &seq.tokens {
                if !seen.contains(t) {
                    rest.insert(t.clone());
                }
            }
        }
        for t in rest {
            seen.insert(t.clone());
            tokens.push(t);
        }
        Self::from_tokens(tokens)
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Self { tokens, index }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or_else(|| self.index[UNK])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpanIds {
    ctx: Vec<u32>,
    slot: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LightInput {
    Pair { example: SpanIds, question: SpanIds },
    Set { examples: Vec<SpanIds>, question: SpanIds },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LightModel {
    mode: AgentMode,
    dim: usize,
    vocab: Vocabulary,
    params: Vec<f64>,
}

impl LightModel {
    pub fn new(mode: AgentMode, vocab: Vocabulary, cfg: &AgentConfig) -> Self {
        let dim = cfg.light.embedding_dim;
        let head = match mode {
            AgentMode::Entailment => 2 * 8 * dim + 2,
            AgentMode::Context => 1 + 2 * 2 * dim + 2,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let scale = cfg.light.init_scale;
        let n_emb = vocab.len() * dim;
        let mut params: Vec<f64> = (0..n_emb + head).map(|_| rng.random_range(-scale..scale)).collect();
        if mode == AgentMode::Context {
            params[n_emb] = 1.0;
        }
        Self { mode, dim, vocab, params }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Rebuilds the token index after deserialisation.
    pub fn reindex(&mut self) {
        self.vocab = Vocabulary::from_tokens(std::mem::take(&mut self.vocab.tokens));
    }

    pub fn lower(&self, seq: &EncodedSequence) -> LightInput {
        let span_ids = |i: usize| {
            let span = seq.spans[i];
            SpanIds {
                ctx: span.positions().filter(|&p| p != span.slot).map(|p| self.vocab.id(&seq.tokens[p])).collect(),
                slot: self.vocab.id(&seq.tokens[span.slot]),
            }
        };
        let q = seq.spans.iter().position(|s| s.role == SpanRole::Question).expect("question span");
        let examples: Vec<SpanIds> = (0..seq.spans.len()).filter(|&i| i != q).map(span_ids).collect();
        match self.mode {
            AgentMode::Entailment => LightInput::Pair {
                example: examples.into_iter().next().expect("example span"),
                question: span_ids(q),
            },
            AgentMode::Context => LightInput::Set { examples, question: span_ids(q) },
        }
    }

    fn emb(&self, id: u32) -> &[f64] {
        let d = self.dim;
        &self.params[id as usize * d..(id as usize + 1) * d]
    }

    fn head_offset(&self) -> usize {
        self.vocab.len() * self.dim
    }

    fn ctx_mean(&self, ids: &[u32]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        if ids.is_empty() {
            return out;
        }
        for &id in ids {
            for (o, e) in out.iter_mut().zip(self.emb(id)) {
                *o += e;
            }
        }
        let n = ids.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }

    fn summary(&self, span: &SpanIds) -> Vec<f64> {
        let mut r = self.ctx_mean(&span.ctx);
        r.extend_from_slice(self.emb(span.slot));
        r
    }

    fn scatter_ctx(&self, ids: &[u32], g: &[f64], grad: &mut [f64]) {
        if ids.is_empty() {
            return;
        }
        let d = self.dim;
        let n = ids.len() as f64;
        for &id in ids {
            let row = &mut grad[id as usize * d..(id as usize + 1) * d];
            for (r, gi) in row.iter_mut().zip(g) {
                *r += gi / n;
            }
        }
    }

    fn scatter_slot(&self, id: u32, g: &[f64], grad: &mut [f64]) {
        let d = self.dim;
        for (r, gi) in grad[id as usize * d..(id as usize + 1) * d].iter_mut().zip(g) {
            *r += gi;
        }
    }

    fn linear(&self, offset: usize, f: &[f64]) -> [f64; 2] {
        let w = &self.params[offset..offset + 2 * f.len()];
        let b = &self.params[offset + 2 * f.len()..offset + 2 * f.len() + 2];
        let dot = |row: &[f64]| row.iter().zip(f).map(|(a, b)| a * b).sum::<f64>();
        [dot(&w[..f.len()]) + b[0], dot(&w[f.len()..]) + b[1]]
    }

    /// Back-propagates through the linear head; returns d(loss)/d(features).
    fn linear_backward(&self, offset: usize, f: &[f64], gz: [f64; 2], grad: &mut [f64]) -> Vec<f64> {
        let n = f.len();
        let mut gf = vec![0.0; n];
        for c in 0..2 {
            let row = offset + c * n;
            for j in 0..n {
                grad[row + j] += gz[c] * f[j];
                gf[j] += self.params[row + j] * gz[c];
            }
            grad[offset + 2 * n + c] += gz[c];
        }
        gf
    }

    fn pair_features(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut f = Vec::with_capacity(4 * u.len());
        f.extend_from_slice(u);
        f.extend_from_slice(v);
        f.extend(u.iter().zip(v).map(|(a, b)| a * b));
        f.extend(u.iter().zip(v).map(|(a, b)| (a - b).abs()));
        f
    }

    /// Attention weights, raw dot products, pooled slot vector and question context.
    #[allow(clippy::type_complexity)]
    fn attend(&self, examples: &[SpanIds], question: &SpanIds) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
        let gamma = self.params[self.head_offset()];
        let qc = self.ctx_mean(&question.ctx);
        let cs: Vec<Vec<f64>> = examples.iter().map(|e| self.ctx_mean(&e.ctx)).collect();
        let dots: Vec<f64> = cs.iter().map(|c| c.iter().zip(&qc).map(|(a, b)| a * b).sum()).collect();
        let m = dots.iter().fold(f64::NEG_INFINITY, |m, &d| m.max(gamma * d));
        let e: Vec<f64> = dots.iter().map(|&d| (gamma * d - m).exp()).collect();
        let s: f64 = e.iter().sum();
        let alpha: Vec<f64> = e.iter().map(|x| x / s).collect();
        let mut pooled = vec![0.0; self.dim];
        for (a, ex) in alpha.iter().zip(examples) {
            for (p, v) in pooled.iter_mut().zip(self.emb(ex.slot)) {
                *p += a * v;
            }
        }
        (alpha, dots, pooled, qc, cs)
    }
}

impl Differentiable for LightModel {
    type Input = LightInput;

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn probs(&self, input: &LightInput) -> [f64; 2] {
        match input {
            LightInput::Pair { example, question } => {
                let f = self.pair_features(&self.summary(example), &self.summary(question));
                softmax2(self.linear(self.head_offset(), &f))
            }
            LightInput::Set { examples, question } => {
                let (_, _, pooled, mut f, _) = self.attend(examples, question);
                f.extend(pooled);
                softmax2(self.linear(self.head_offset() + 1, &f))
            }
        }
    }

    fn accumulate(&self, input: &LightInput, label: usize, grad: &mut [f64]) -> f64 {
        let d = self.dim;
        match input {
            LightInput::Pair { example, question } => {
                let u = self.summary(example);
                let v = self.summary(question);
                let f = self.pair_features(&u, &v);
                let p = softmax2(self.linear(self.head_offset(), &f));
                let mut gz = p;
                gz[label] -= 1.0;
                let gf = self.linear_backward(self.head_offset(), &f, gz, grad);
                let n = 2 * d;
                let mut gu = vec![0.0; n];
                let mut gv = vec![0.0; n];
                for j in 0..n {
                    let sign = (u[j] - v[j]).signum() * f64::from(u[j] != v[j]);
                    gu[j] = gf[j] + gf[2 * n + j] * v[j] + gf[3 * n + j] * sign;
                    gv[j] = gf[n + j] + gf[2 * n + j] * u[j] - gf[3 * n + j] * sign;
                }
                for (span, g) in [(example, &gu), (question, &gv)] {
                    self.scatter_ctx(&span.ctx, &g[..d], grad);
                    self.scatter_slot(span.slot, &g[d..], grad);
                }
                optim::cross_entropy(p, label)
            }
            LightInput::Set { examples, question } => {
                let gamma_at = self.head_offset();
                let gamma = self.params[gamma_at];
                let (alpha, dots, pooled, qc, cs) = self.attend(examples, question);
                let mut f = qc.clone();
                f.extend_from_slice(&pooled);
                let p = softmax2(self.linear(gamma_at + 1, &f));
                let mut gz = p;
                gz[label] -= 1.0;
                let gf = self.linear_backward(gamma_at + 1, &f, gz, grad);
                let mut gqc = gf[..d].to_vec();
                let gp = &gf[d..];
                let galpha: Vec<f64> = examples
                    .iter()
                    .map(|e| self.emb(e.slot).iter().zip(gp).map(|(a, b)| a * b).sum())
                    .collect();
                let mix: f64 = alpha.iter().zip(&galpha).map(|(a, g)| a * g).sum();
                let mut ggamma = 0.0;
                for (k, ex) in examples.iter().enumerate() {
                    let ga = alpha[k] * (galpha[k] - mix);
                    ggamma += ga * dots[k];
                    let gs: Vec<f64> = gp.iter().map(|g| alpha[k] * g).collect();
                    self.scatter_slot(ex.slot, &gs, grad);
                    let gc: Vec<f64> = qc.iter().map(|q| ga * gamma * q).collect();
                    self.scatter_ctx(&ex.ctx, &gc, grad);
                    for (gq, c) in gqc.iter_mut().zip(&cs[k]) {
                        *gq += ga * gamma * c;
                    }
                }
                grad[gamma_at] += ggamma;
                self.scatter_ctx(&question.ctx, &gqc, grad);
                optim::cross_entropy(p, label)
            }
        }
    }
}

/// Backend wrapper that builds the vocabulary from the training inputs.
pub struct LightBackend {
    mode: AgentMode,
    model: Option<LightModel>,
}

impl LightBackend {
    pub fn new(mode: AgentMode) -> Self {
        Self { mode, model: None }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mut model: LightModel = serde_json::from_str(&std::fs::read_to_string(dir.join("backend.json"))?)?;
        model.reindex();
        Ok(Self { mode: model.mode, model: Some(model) })
    }

    pub fn model(&self) -> Option<&LightModel> {
        self.model.as_ref()
    }
}

impl ClassifierBackend for LightBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Light
    }

    fn train(&mut self, train: &[LabeledInput<'_>], held_out: &[LabeledInput<'_>], cfg: &AgentConfig) -> Result<TrainingReport> {
        let encode = |items: &[LabeledInput<'_>]| -> Result<Vec<(EncodedSequence, usize)>> {
            items.iter().map(|i| Ok((i.input.encode(cfg.max_sequence_length)?, i.label))).collect()
        };
        let (train, held_out) = (encode(train)?, encode(held_out)?);
        let vocab = Vocabulary::build(train.iter().map(|(s, _)| s));
        let mut model = LightModel::new(self.mode, vocab, cfg);
        let lower = |items: Vec<(EncodedSequence, usize)>, m: &LightModel| -> Vec<(LightInput, usize)> {
            items.into_iter().map(|(s, y)| (m.lower(&s), y)).collect()
        };
        let (train, held_out) = (lower(train, &model), lower(held_out, &model));
        let report = optim::fit(&mut model, &train, &held_out, cfg)?;
        self.model = Some(model);
        Ok(report)
    }

    fn predict(&self, batch: &[ModelInput<'_>], cfg: &AgentConfig) -> Result<Vec<[f64; 2]>> {
        let model = self.model.as_ref().ok_or_else(|| Error::Backend("light model is untrained".into()))?;
        batch
            .iter()
            .map(|i| Ok(model.probs(&model.lower(&i.encode(cfg.max_sequence_length)?))))
            .collect()
    }

    fn save(&self, dir: &Path) -> Result<()> {
        let model = self.model.as_ref().ok_or_else(|| Error::Backend("light model is untrained".into()))?;
        std::fs::write(dir.join("backend.json"), serde_json::to_string(model)?)?;
        std::fs::write(dir.join("vocab.txt"), model.vocab.tokens.join("\n") + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::encode::{encode_context_input, encode_entailment_input};
    use crate::corpus::{Member, TargetSentence};

    fn sent(words: &str, target: usize, m: Member) -> TargetSentence {
        TargetSentence {
            sentence_id: words.into(),
            pair_id: "p".into(),
            tokens: words.split(' ').map(String::from).collect(),
            target_index: target,
            filled_word: m,
            context_owner: m,
            split: None,
        }
    }

    /// Central finite differences against the analytic gradient.
    fn check_gradient(mode: AgentMode, seq: EncodedSequence, label: usize) {
        let mut cfg = AgentConfig::light_desk(mode);
        cfg.light.embedding_dim = 4;
        let vocab = Vocabulary::build([&seq]);
        let mut model = LightModel::new(mode, vocab, &cfg);
        let input = model.lower(&seq);
        let mut grad = vec![0.0; model.params.len()];
        model.accumulate(&input, label, &mut grad);
        let h = 1e-6;
        for (i, &analytic) in grad.iter().enumerate() {
            let orig = model.params[i];
            model.params[i] = orig + h;
            let up = optim::cross_entropy(model.probs(&input), label);
            model.params[i] = orig - h;
            let down = optim::cross_entropy(model.probs(&input), label);
            model.params[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            assert!((numeric - analytic).abs() < 1e-6, "param {i}: numeric {numeric} analytic {analytic}");
        }
    }

    #[test]
    fn entailment_gradient_matches_finite_differences() {
        let e = sent("the ka01 blick fil02 ka03", 2, Member::First);
        let q = sent("fil04 dax zo02 fil01", 1, Member::Second);
        check_gradient(AgentMode::Entailment, encode_entailment_input(&e, &q, 64), 1);
    }

    #[test]
    fn context_gradient_matches_finite_differences() {
        let exs: Vec<TargetSentence> = (0..6)
            .map(|k| {
                let m = Member::from_slot(k / 3);
                let w = if k < 3 { "blick" } else { "dax" };
                sent(&format!("fil0{k} {w} ka0{k} zo0{}", 5 - k), 1, m)
            })
            .collect();
        let refs: Vec<&TargetSentence> = exs.iter().collect();
        let q = sent("ka01 fil03 blick zo04", 2, Member::First);
        check_gradient(AgentMode::Context, encode_context_input(&refs, &q, 128).unwrap(), 0);
    }

    #[test]
    fn unknown_tokens_map_to_unk() {
        let v = Vocabulary::from_tokens(SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect());
        assert_eq!(v.id("never-seen"), v.id(UNK));
    }
}
