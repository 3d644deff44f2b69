//! Word-level recurrent model: an LSTM reads the clause's word embeddings
//! from a zero state; its last hidden state, concatenated with the meta
//! vector, feeds an affine layer and a two-way softmax.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::config::{EpochRecord, LocalConfig, TrainConfig, DEFAULT_THRESHOLD};
use super::BestTracker;
use crate::corpus::Clause;
use crate::error::{Error, Result};
use crate::eval::Confusion;
use crate::features::{encode_meta, META_DIM};
use crate::math::{sqrt, Matrix};
use crate::nn::{
    softmax, softmax_cross_entropy, DenseParams, LstmParams, LstmState, Optimizer, ParamBlock,
    Parameterized, StepCache,
};
use crate::rng::{Rng, STREAM_INIT, STREAM_SHUFFLE};

/// Word → embedding row. Row 0 is reserved for unknown words.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl Vocab {
    pub const UNK: u32 = 0;

    /// Known words in row order (row `i + 1` holds `words[i]`).
    pub fn from_words(words: Vec<String>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i as u32 + 1).is_some() {
                return Err(Error::InvalidConfig(format!(
                    "duplicate vocabulary word `{w}`"
                )));
            }
        }
        Ok(Vocab { words, index })
    }

    /// Every distinct training word, sorted.
    pub fn build<'a>(clauses: impl IntoIterator<Item = &'a Clause>) -> Self {
        let mut set = alloc::collections::BTreeSet::new();
        for c in clauses {
            for w in &c.words {
                set.insert(w.clone());
            }
        }
        Vocab::from_words(set.into_iter().collect()).expect("set is duplicate-free")
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Rows including the unknown-word row.
    pub fn rows(&self) -> usize {
        self.words.len() + 1
    }

    pub fn row(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(Self::UNK) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalParams {
    pub embedding: Matrix,
    pub lstm: LstmParams,
    pub output: DenseParams,
}

impl Parameterized for LocalParams {
    fn blocks(&self) -> Vec<ParamBlock<'_>> {
        let mut out = vec![ParamBlock {
            name: "embedding".into(),
            shape: vec![self.embedding.rows(), self.embedding.cols()],
            data: self.embedding.as_slice(),
        }];
        for mut b in self.lstm.blocks() {
            b.name = format!("lstm.{}", b.name);
            out.push(b);
        }
        for mut b in self.output.blocks() {
            b.name = format!("output.{}", b.name);
            out.push(b);
        }
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.embedding.as_mut_slice()];
        out.extend(self.lstm.blocks_mut());
        out.extend(self.output.blocks_mut());
        out
    }
}

impl LocalParams {
    pub fn zeros(vocab_rows: usize, config: &LocalConfig) -> Self {
        LocalParams {
            embedding: Matrix::zeros(vocab_rows, config.embed),
            lstm: LstmParams::zeros(config.hidden, config.embed),
            output: DenseParams::zeros(2, config.hidden + META_DIM),
        }
    }

    pub fn init(vocab_rows: usize, config: &LocalConfig, rng: &mut Rng) -> Self {
        let mut embedding = Matrix::zeros(vocab_rows, config.embed);
        rng.fill_uniform(embedding.as_mut_slice(), 1.0 / sqrt(config.embed as f64));
        LocalParams {
            embedding,
            lstm: LstmParams::init(config.hidden, config.embed, rng),
            output: DenseParams::init(2, config.hidden + META_DIM, rng),
        }
    }

    fn trace(&self, rows: &[usize], meta: &[f64; META_DIM]) -> Result<LocalTrace> {
        if rows.is_empty() {
            return Err(Error::InvalidClause("words must be non-empty".into()));
        }
        let mut state = LstmState::zeros(self.lstm.hidden());
        let mut caches = Vec::with_capacity(rows.len());
        for &r in rows {
            let (next, cache) = self.lstm.forward(self.embedding.row(r), &state)?;
            state = next;
            caches.push(cache);
        }
        let mut features = state.h;
        features.extend_from_slice(meta);
        let logits = self.output.forward(&features)?;
        Ok(LocalTrace {
            caches,
            features,
            logits,
        })
    }

    /// `Σ weight·CE` and accumulated gradients for one clause.
    fn backward(
        &self,
        rows: &[usize],
        trace: &LocalTrace,
        gold: usize,
        weight: f64,
        grads: &mut LocalParams,
    ) -> Result<f64> {
        let (ce, mut dlogits) = softmax_cross_entropy(&trace.logits, gold)?;
        for d in &mut dlogits {
            *d *= weight;
        }
        let dfeat = self
            .output
            .backward(&trace.features, &dlogits, &mut grads.output)?;
        let hsz = self.lstm.hidden();
        let mut dh = dfeat[..hsz].to_vec();
        let mut dc = vec![0.0; hsz];
        for (t, &r) in rows.iter().enumerate().rev() {
            let (dx, dhp, dcp) = self
                .lstm
                .backward(&trace.caches[t], &dh, &dc, &mut grads.lstm)?;
            crate::math::axpy(grads.embedding.row_mut(r), 1.0, &dx);
            dh = dhp;
            dc = dcp;
        }
        Ok(weight * ce)
    }
}

struct LocalTrace {
    caches: Vec<StepCache>,
    features: Vec<f64>,
    logits: Vec<f64>,
}

#[cfg(test)]
impl LocalTrace {
    fn steps(&self) -> usize {
        self.caches.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalContextModel {
    pub config: LocalConfig,
    pub vocab: Vocab,
    pub params: LocalParams,
}

impl LocalContextModel {
    pub fn new(vocab: Vocab, config: LocalConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::with_stream(seed, STREAM_INIT);
        let params = LocalParams::init(vocab.rows(), &config, &mut rng);
        Ok(LocalContextModel {
            config,
            vocab,
            params,
        })
    }

    fn rows(&self, clause: &Clause) -> Vec<usize> {
        clause.words.iter().map(|w| self.vocab.row(w)).collect()
    }

    /// `[p(0), p(1)]` for one clause.
    pub fn forward(&self, clause: &Clause) -> Result<[f64; 2]> {
        let trace = self
            .params
            .trace(&self.rows(clause), &encode_meta(clause))?;
        let p = softmax(&trace.logits);
        Ok([p[0], p[1]])
    }

    /// Copies externally supplied vectors into the rows of known words.
    /// Returns how many rows were replaced.
    pub fn load_embeddings(&mut self, table: &BTreeMap<String, Vec<f64>>) -> Result<usize> {
        let mut replaced = 0;
        for (word, vector) in table {
            if vector.len() != self.config.embed {
                return Err(Error::ShapeMismatch {
                    what: "pretrained embedding",
                    expected: self.config.embed,
                    got: vector.len(),
                });
            }
            let row = self.vocab.row(word);
            if row != Vocab::UNK as usize {
                self.params.embedding.row_mut(row).copy_from_slice(vector);
                replaced += 1;
            }
        }
        Ok(replaced)
    }
}

/// Encoded clause: embedding rows, meta vector and gold label.
#[derive(Debug, Clone, PartialEq)]
pub struct WordExample {
    pub rows: Vec<usize>,
    pub meta: [f64; META_DIM],
    pub label: bool,
}

impl WordExample {
    pub fn encode(vocab: &Vocab, clause: &Clause) -> Self {
        WordExample {
            rows: clause.words.iter().map(|w| vocab.row(w)).collect(),
            meta: encode_meta(clause),
            label: clause.label,
        }
    }
}

/// Mean weighted cross-entropy over `batch`.
pub fn local_loss(params: &LocalParams, batch: &[&WordExample], pos_weight: f64) -> Result<f64> {
    let mut total = 0.0;
    for ex in batch {
        let trace = params.trace(&ex.rows, &ex.meta)?;
        let (ce, _) = softmax_cross_entropy(&trace.logits, ex.label as usize)?;
        total += if ex.label { pos_weight } else { 1.0 } * ce;
    }
    Ok(total / batch.len() as f64)
}

pub fn local_loss_and_grad(
    params: &LocalParams,
    batch: &[&WordExample],
    pos_weight: f64,
    grads: &mut LocalParams,
) -> Result<f64> {
    grads.zero();
    let n = batch.len() as f64;
    let mut total = 0.0;
    for ex in batch {
        let trace = params.trace(&ex.rows, &ex.meta)?;
        let w = if ex.label { pos_weight } else { 1.0 } / n;
        total += params.backward(&ex.rows, &trace, ex.label as usize, w, grads)?;
    }
    Ok(total)
}

fn confusion(params: &LocalParams, data: &[WordExample]) -> Result<Confusion> {
    let mut c = Confusion::default();
    for ex in data {
        let trace = params.trace(&ex.rows, &ex.meta)?;
        c.record(softmax(&trace.logits)[1] >= DEFAULT_THRESHOLD, ex.label);
    }
    Ok(c)
}

/// Mini-batch training over clauses; vocabulary comes from the training clauses.
pub fn local_train(
    train: &[&Clause],
    cv: &[&Clause],
    model_config: LocalConfig,
    config: &TrainConfig,
) -> Result<(LocalContextModel, Vec<EpochRecord>)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let vocab = Vocab::build(train.iter().copied());
    let mut model = LocalContextModel::new(vocab, model_config, config.seed)?;
    let train_ex: Vec<WordExample> = train
        .iter()
        .map(|c| WordExample::encode(&model.vocab, c))
        .collect();
    let cv_ex: Vec<WordExample> = cv
        .iter()
        .map(|c| WordExample::encode(&model.vocab, c))
        .collect();

    let mut grads = model.params.zeros_like();
    let mut opt = Optimizer::new(config.optimizer);
    let mut rng = Rng::with_stream(config.seed, STREAM_SHUFFLE);
    let mut order: Vec<usize> = (0..train_ex.len()).collect();
    let mut tracker = BestTracker::new(config.patience);
    for epoch in 1..=config.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for idx in order.chunks(config.batch_size) {
            let batch: Vec<&WordExample> = idx.iter().map(|&i| &train_ex[i]).collect();
            let loss = local_loss_and_grad(&model.params, &batch, config.pos_weight, &mut grads)?;
            loss_sum += loss * batch.len() as f64;
            opt.step(&mut model.params, &grads)?;
        }
        let cv_scores = if cv_ex.is_empty() {
            None
        } else {
            Some(confusion(&model.params, &cv_ex)?.scores())
        };
        let train_loss = loss_sum / train_ex.len() as f64;
        log::info!("epoch {epoch}: train loss {train_loss:.5}");
        if !tracker.observe(epoch, train_loss, cv_scores, &model.params) {
            break;
        }
    }
    let (best, history) = tracker.finish();
    model.params = best.expect("at least one epoch ran");
    Ok((model, history))
}
