//! Paragraph vectors, distributed-memory variant, trained with negative sampling.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::distributions::{Distribution, Uniform, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vocab::Vocab;
use super::EmbedderError;
use crate::persist;

const MAGIC: &[u8; 8] = b"MVDD2V01";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Doc2VecConfig {
    pub dim: usize,
    pub window: usize,
    pub negative: usize,
    pub epochs: usize,
    pub lr: f64,
    pub min_lr: f64,
    /// SGD passes over the statement when inferring a new vector.
    pub infer_steps: usize,
    pub normalize_identifiers: bool,
    pub unit_norm: bool,
    pub seed: u64,
}

impl Default for Doc2VecConfig {
    fn default() -> Self {
        Doc2VecConfig {
            dim: 100,
            window: 4,
            negative: 5,
            epochs: 20,
            lr: 0.025,
            min_lr: 0.0001,
            infer_steps: 50,
            normalize_identifiers: false,
            unit_norm: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFormat {
    #[default]
    Binary,
    Json,
}

#[derive(Debug, Clone)]
pub struct Doc2VecModel {
    pub config: Doc2VecConfig,
    pub vocab: Vocab,
    /// Input word vectors, `|V| x d`.
    pub words: Array2<f64>,
    /// Output (negative-sampling) vectors, `|V| x d`.
    pub output: Array2<f64>,
    /// Mean per-example loss of each training epoch.
    pub loss_history: Vec<f64>,
    noise: WeightedIndex<f64>,
}

impl PartialEq for Doc2VecModel {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.vocab == other.vocab
            && self.words == other.words
            && self.output == other.output
    }
}

/// Loss and gradient of one PV-DM prediction.
#[derive(Debug, Clone)]
pub struct PvdmGrad {
    pub loss: f64,
    pub doc: Array1<f64>,
    pub words: Array2<f64>,
    pub output: Array2<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn hidden(doc: ArrayView1<f64>, words: ArrayView2<f64>, ctx: &[usize]) -> Array1<f64> {
    let mut h = doc.to_owned();
    for &c in ctx {
        h += &words.row(c);
    }
    h / (1 + ctx.len()) as f64
}

/// Shared core: returns the loss, the gradient w.r.t. the hidden vector and the
/// per-output-row scalar gradients `(row, g)` where `d output[row] = g * h`.
fn core(
    h: &Array1<f64>,
    output: ArrayView2<f64>,
    target: usize,
    negatives: &[usize],
) -> (f64, Array1<f64>, Vec<(usize, f64)>) {
    let mut loss = 0.0;
    let mut dh = Array1::zeros(h.len());
    let mut rows = Vec::with_capacity(1 + negatives.len());
    let targets = std::iter::once((target, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0)));
    for (o, label) in targets {
        let s = h.dot(&output.row(o));
        let p = sigmoid(s);
        loss -= if label > 0.5 {
            p.max(1e-300).ln()
        } else {
            (1.0 - p).max(1e-300).ln()
        };
        let g = p - label;
        dh.scaled_add(g, &output.row(o));
        rows.push((o, g));
    }
    (loss, dh, rows)
}

/// Loss and full gradients of predicting `target` from the document vector
/// and the `ctx` word vectors, against the given negative samples.
pub fn pvdm_loss_grad(
    doc: ArrayView1<f64>,
    words: ArrayView2<f64>,
    output: ArrayView2<f64>,
    ctx: &[usize],
    target: usize,
    negatives: &[usize],
) -> PvdmGrad {
    let h = hidden(doc, words, ctx);
    let (loss, dh, rows) = core(&h, output, target, negatives);
    let scale = 1.0 / (1 + ctx.len()) as f64;
    let mut g_words = Array2::zeros(words.raw_dim());
    for &c in ctx {
        g_words.row_mut(c).scaled_add(scale, &dh);
    }
    let mut g_out = Array2::zeros(output.raw_dim());
    for (o, g) in rows {
        g_out.row_mut(o).scaled_add(g, &h);
    }
    PvdmGrad {
        loss,
        doc: &dh * scale,
        words: g_words,
        output: g_out,
    }
}

fn context(doc: &[usize], i: usize, window: usize) -> Vec<usize> {
    let lo = i.saturating_sub(window);
    let hi = (i + window).min(doc.len() - 1);
    (lo..=hi).filter(|&j| j != i).map(|j| doc[j]).collect()
}

fn noise_distribution(vocab: &Vocab) -> Result<WeightedIndex<f64>, EmbedderError> {
    WeightedIndex::new(vocab.counts().iter().map(|&c| (c as f64).powf(0.75)))
        .map_err(|_| EmbedderError::EmptyCorpus)
}

fn sample_negatives(
    noise: &WeightedIndex<f64>,
    k: usize,
    target: usize,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    // bounded retries: a one-word vocabulary has no valid negative
    for _ in 0..k * 10 {
        if out.len() == k {
            break;
        }
        let n = noise.sample(rng);
        if n != target {
            out.push(n);
        }
    }
    out
}

fn init_matrix(rows: usize, dim: usize, rng: &mut impl Rng) -> Array2<f64> {
    let bound = 0.5 / dim as f64;
    let dist = Uniform::new_inclusive(-bound, bound);
    Array2::from_shape_simple_fn((rows, dim), || dist.sample(rng))
}

fn fnv1a(tokens: &[String]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for t in tokens {
        for b in t.bytes().chain(std::iter::once(0xff)) {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

pub fn train_doc2vec(
    corpus: &[Vec<String>],
    config: &Doc2VecConfig,
) -> Result<Doc2VecModel, EmbedderError> {
    if corpus.iter().all(|d| d.is_empty()) {
        return Err(EmbedderError::EmptyCorpus);
    }
    let vocab = Vocab::build(corpus.iter());
    let noise = noise_distribution(&vocab)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dim = config.dim;
    let mut words = init_matrix(vocab.len(), dim, &mut rng);
    let mut output = Array2::zeros((vocab.len(), dim));
    let docs: Vec<Vec<usize>> = corpus
        .iter()
        .filter(|d| !d.is_empty())
        .map(|d| vocab.encode(d))
        .collect();
    let mut doc_vecs = init_matrix(docs.len(), dim, &mut rng);

    let positions: usize = docs.iter().map(Vec::len).sum();
    let total = (positions * config.epochs).max(1) as f64;
    let mut done = 0usize;
    let mut order: Vec<usize> = (0..docs.len()).collect();
    let mut loss_history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &d in &order {
            let doc = &docs[d];
            for i in 0..doc.len() {
                let lr = config.lr - (config.lr - config.min_lr) * (done as f64 / total);
                done += 1;
                let ctx = context(doc, i, config.window);
                let negs = sample_negatives(&noise, config.negative, doc[i], &mut rng);
                let h = hidden(doc_vecs.row(d), words.view(), &ctx);
                let (loss, dh, rows) = core(&h, output.view(), doc[i], &negs);
                epoch_loss += loss;
                for (o, g) in rows {
                    output.row_mut(o).scaled_add(-lr * g, &h);
                }
                let step = -lr / (1 + ctx.len()) as f64;
                doc_vecs.row_mut(d).scaled_add(step, &dh);
                for &c in &ctx {
                    words.row_mut(c).scaled_add(step, &dh);
                }
            }
        }
        loss_history.push(epoch_loss / positions.max(1) as f64);
        log::debug!("doc2vec epoch loss {:.5}", loss_history.last().unwrap());
    }
    Ok(Doc2VecModel {
        config: config.clone(),
        vocab,
        words,
        output,
        loss_history,
        noise,
    })
}

impl Doc2VecModel {
    pub fn dim(&self) -> usize {
        self.config.dim
    }

    /// Infers a document vector with the word and output matrices frozen.
    pub fn infer_vector(&self, tokens: &[String]) -> Vec<f64> {
        let dim = self.config.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(tokens) ^ self.config.seed);
        let mut doc = init_matrix(1, dim, &mut rng).index_axis_move(Axis(0), 0);
        let ids = self.vocab.encode(tokens);
        if ids.is_empty() {
            return doc.to_vec();
        }
        let steps = self.config.infer_steps;
        let total = (steps * ids.len()).max(1) as f64;
        let mut done = 0usize;
        for _ in 0..steps {
            for i in 0..ids.len() {
                let lr =
                    self.config.lr - (self.config.lr - self.config.min_lr) * (done as f64 / total);
                done += 1;
                let ctx = context(&ids, i, self.config.window);
                let negs = sample_negatives(&self.noise, self.config.negative, ids[i], &mut rng);
                let h = hidden(doc.view(), self.words.view(), &ctx);
                let (_, dh, _) = core(&h, self.output.view(), ids[i], &negs);
                doc.scaled_add(-lr / (1 + ctx.len()) as f64, &dh);
            }
        }
        if self.config.unit_norm {
            let n = doc.dot(&doc).sqrt();
            if n > 0.0 {
                doc /= n;
            }
        }
        doc.to_vec()
    }

    fn header(&self) -> Header {
        Header {
            version: VERSION,
            dim: self.config.dim,
            vocab_size: self.vocab.len(),
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            loss_history: self.loss_history.clone(),
        }
    }

    /// Binary encoding, as written by `save` with `ModelFormat::Binary`.
    pub fn to_bytes(&self) -> Result<Vec<u8>, EmbedderError> {
        let mut buf = Vec::new();
        persist::write_container(
            &mut buf,
            MAGIC,
            &self.header(),
            &[
                self.words.as_slice().unwrap(),
                self.output.as_slice().unwrap(),
            ],
        )?;
        Ok(buf)
    }

    pub fn save(&self, path: &Path, format: ModelFormat) -> Result<(), EmbedderError> {
        let bytes = match format {
            ModelFormat::Binary => self.to_bytes()?,
            ModelFormat::Json => serde_json::to_vec(&JsonModel {
                header: self.header(),
                words: self.words.as_slice().unwrap().to_vec(),
                output: self.output.as_slice().unwrap().to_vec(),
            })?,
        };
        std::fs::write(path, bytes)?;
        Ok(())
    }

    /// Loads either format, detected from the file contents.
    pub fn load(path: &Path) -> Result<Self, EmbedderError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EmbedderError> {
        let (header, words, output) = if persist::has_magic(bytes, MAGIC) {
            let (header, mut arrays): (Header, _) = persist::read_container(bytes, MAGIC)?;
            if arrays.len() != 2 {
                return Err(EmbedderError::Format("expected two matrices".into()));
            }
            let output = arrays.pop().unwrap();
            let words = arrays.pop().unwrap();
            (header, words, output)
        } else {
            let m: JsonModel = serde_json::from_slice(bytes)?;
            (m.header, m.words, m.output)
        };
        Self::from_parts(header, words, output)
    }

    fn from_parts(h: Header, words: Vec<f64>, output: Vec<f64>) -> Result<Self, EmbedderError> {
        if h.version != VERSION {
            return Err(EmbedderError::Format(format!(
                "unsupported version {}",
                h.version
            )));
        }
        if h.dim != h.config.dim || h.vocab_size != h.vocab.len() {
            return Err(EmbedderError::Format("header fields disagree".into()));
        }
        let shape = (h.vocab_size, h.dim);
        let bad = |_| EmbedderError::Format("matrix size does not match header".into());
        let words = Array2::from_shape_vec(shape, words).map_err(bad)?;
        let output = Array2::from_shape_vec(shape, output).map_err(bad)?;
        Ok(Doc2VecModel {
            noise: noise_distribution(&h.vocab)?,
            config: h.config,
            vocab: h.vocab,
            words,
            output,
            loss_history: h.loss_history,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    dim: usize,
    vocab_size: usize,
    config: Doc2VecConfig,
    vocab: Vocab,
    loss_history: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct JsonModel {
    header: Header,
    words: Vec<f64>,
    output: Vec<f64>,
}
