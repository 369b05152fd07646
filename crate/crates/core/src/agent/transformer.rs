//! Adapter for a pretrained encoder with a fine-tuned classification head.
//!
//! The encoder is read from a word-vector file (`<count> <dim>` header, then
//! `token v1 … vd` per line) and runs one bidirectional self-attention layer
//! over token + position + segment embeddings. Its weights stay frozen; only
//! the task-specific head over `[h_CLS, mean(h)]` is trained.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::backend::{ClassifierBackend, LabeledInput, ModelInput};
use super::encode::{EncodedSequence, UNK};
use super::optim::{self, softmax2, Differentiable};
use super::{AgentConfig, BackendKind, TrainingReport};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct PretrainedEncoder {
    path: PathBuf,
    dim: usize,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
}

fn token_seed(token: &str) -> u64 {
    // FNV-1a
    token.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

impl PretrainedEncoder {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Backend(format!("{}: empty encoder file", path.display())))?;
        let dims: Vec<usize> = header.split_whitespace().filter_map(|v| v.parse().ok()).collect();
        let [count, dim] = dims[..] else {
            return Err(Error::Backend(format!("{}: bad header '{header}'", path.display())));
        };
        let mut index = HashMap::with_capacity(count);
        let mut vectors = Vec::with_capacity(count * dim);
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let mut cols = line.split_whitespace();
            let token = cols.next().unwrap_or_default().to_string();
            let values: Vec<f64> = cols
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Backend(format!("{}: line {}: {e}", path.display(), n + 2)))?;
            if values.len() != dim {
                return Err(Error::Backend(format!(
                    "{}: line {}: expected {dim} values, got {}",
                    path.display(),
                    n + 2,
                    values.len()
                )));
            }
            index.insert(token, vectors.len() / dim);
            vectors.extend(values);
        }
        Ok(Self { path: path.to_path_buf(), dim, index, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Pretrained vector, or a fixed pseudo-random one for markers the file lacks.
    fn token_vector(&self, token: &str) -> Vec<f64> {
        if let Some(&i) = self.index.get(token) {
            return self.vectors[i * self.dim..(i + 1) * self.dim].to_vec();
        }
        if token.starts_with('[') || token == UNK {
            let mut rng = ChaCha8Rng::seed_from_u64(token_seed(token));
            return (0..self.dim).map(|_| rng.random_range(-0.5..0.5)).collect();
        }
        vec![0.0; self.dim]
    }

    /// `[h_CLS, mean(h)]` after one residual self-attention layer.
    pub fn features(&self, seq: &EncodedSequence) -> Vec<f64> {
        let d = self.dim;
        let segment = self.token_vector("[SEGMENT-B]");
        let x: Vec<Vec<f64>> = seq
            .tokens
            .iter()
            .enumerate()
            .map(|(pos, tok)| {
                let mut v = self.token_vector(tok);
                for (i, vi) in v.iter_mut().enumerate() {
                    let rate = (pos as f64) / 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
                    *vi += 0.1 * if i % 2 == 0 { rate.sin() } else { rate.cos() };
                    if seq.segments[pos] == 1 {
                        *vi += 0.1 * segment[i];
                    }
                }
                v
            })
            .collect();
        let scale = (d as f64).sqrt();
        let h: Vec<Vec<f64>> = x
            .iter()
            .map(|xi| {
                let scores: Vec<f64> = x.iter().map(|xj| xi.iter().zip(xj).map(|(a, b)| a * b).sum::<f64>() / scale).collect();
                let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
                let z: f64 = w.iter().sum();
                let mut out = xi.clone();
                for (wj, xj) in w.iter().zip(&x) {
                    for (o, v) in out.iter_mut().zip(xj) {
                        *o += wj / z * v;
                    }
                }
                out
            })
            .collect();
        let mut f = h[0].clone();
        let n = h.len() as f64;
        f.extend((0..d).map(|i| h.iter().map(|hi| hi[i]).sum::<f64>() / n));
        f
    }
}

/// Linear classification head over frozen encoder features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationHead {
    params: Vec<f64>,
}

impl ClassificationHead {
    fn new(inputs: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (inputs as f64).sqrt();
        Self { params: (0..2 * inputs + 2).map(|_| rng.random_range(-bound..bound)).collect() }
    }

    fn logits(&self, f: &[f64]) -> [f64; 2] {
        let n = f.len();
        let row = |c: usize| self.params[c * n..(c + 1) * n].iter().zip(f).map(|(a, b)| a * b).sum::<f64>() + self.params[2 * n + c];
        [row(0), row(1)]
    }
}

impl Differentiable for ClassificationHead {
    type Input = Vec<f64>;

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn probs(&self, f: &Vec<f64>) -> [f64; 2] {
        softmax2(self.logits(f))
    }

    fn accumulate(&self, f: &Vec<f64>, label: usize, grad: &mut [f64]) -> f64 {
        let p = self.probs(f);
        let n = f.len();
        for c in 0..2 {
            let g = p[c] - f64::from(c == label);
            for j in 0..n {
                grad[c * n + j] += g * f[j];
            }
            grad[2 * n + c] += g;
        }
        optim::cross_entropy(p, label)
    }
}

#[derive(Serialize, Deserialize)]
struct SavedHead {
    encoder: PathBuf,
    head: ClassificationHead,
}

pub struct TransformerBackend {
    encoder: PretrainedEncoder,
    head: Option<ClassificationHead>,
}

impl TransformerBackend {
    pub fn new(cfg: &AgentConfig) -> Result<Self> {
        let path = cfg.transformer.encoder_path.as_ref().ok_or_else(|| {
            Error::Config("the transformer backend needs transformer.encoder_path (a word-vector file)".into())
        })?;
        Ok(Self { encoder: PretrainedEncoder::load(path)?, head: None })
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let saved: SavedHead = serde_json::from_str(&std::fs::read_to_string(dir.join("backend.json"))?)?;
        Ok(Self { encoder: PretrainedEncoder::load(&saved.encoder)?, head: Some(saved.head) })
    }

    fn featurize(&self, inputs: &[ModelInput<'_>], cfg: &AgentConfig) -> Result<Vec<Vec<f64>>> {
        inputs.iter().map(|i| Ok(self.encoder.features(&i.encode(cfg.max_sequence_length)?))).collect()
    }
}

impl ClassifierBackend for TransformerBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Transformer
    }

    fn train(&mut self, train: &[LabeledInput<'_>], held_out: &[LabeledInput<'_>], cfg: &AgentConfig) -> Result<TrainingReport> {
        let lower = |items: &[LabeledInput<'_>]| -> Result<Vec<(Vec<f64>, usize)>> {
            items
                .iter()
                .map(|i| Ok((self.encoder.features(&i.input.encode(cfg.max_sequence_length)?), i.label)))
                .collect()
        };
        let (train, held_out) = (lower(train)?, lower(held_out)?);
        let mut head = ClassificationHead::new(2 * self.encoder.dim(), cfg.seed);
        let report = optim::fit(&mut head, &train, &held_out, cfg)?;
        self.head = Some(head);
        Ok(report)
    }

    fn predict(&self, batch: &[ModelInput<'_>], cfg: &AgentConfig) -> Result<Vec<[f64; 2]>> {
        let head = self.head.as_ref().ok_or_else(|| Error::Backend("transformer head is untrained".into()))?;
        Ok(self.featurize(batch, cfg)?.iter().map(|f| head.probs(f)).collect())
    }

    fn save(&self, dir: &Path) -> Result<()> {
        let head = self.head.clone().ok_or_else(|| Error::Backend("transformer head is untrained".into()))?;
        let saved = SavedHead { encoder: self.encoder.path().to_path_buf(), head };
        std::fs::write(dir.join("backend.json"), serde_json::to_string(&saved)?)?;
        Ok(())
    }
}
