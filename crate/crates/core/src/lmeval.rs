//! Per-community LSTM language models over frozen community embeddings,
//! targeted next-word perplexity and the embedding-substitution experiment.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{CorpusError, CorpusStore, DomainSpec, Vocabulary};
use crate::shiftindex::{select_words, Column, IndexError, SelectionMode, ShiftTable};
use crate::stats::{wilcoxon_signed_rank, TestResult};
use crate::vectorspace::{EmbeddingSpace, SpaceError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LmError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("invalid language-model config: {0}")]
    InvalidConfig(&'static str),
    #[error("split ratios must be non-negative and sum to 1")]
    InvalidRatios,
    #[error("{documents} documents cannot fill train, validation and test parts")]
    TooFewDocuments { documents: usize },
    #[error("hidden size {hidden} differs from embedding dim {dim}")]
    HiddenMismatch { hidden: usize, dim: usize },
    #[error("no training targets")]
    EmptyTraining,
    #[error("non-finite loss {loss} in epoch {epoch} after {updates} updates")]
    Diverged { epoch: usize, updates: usize, loss: f64 },
    #[error("word `{0}` absent from test")]
    WordAbsent(String),
    #[error("override has dim {got}, model expects {expected}")]
    OverrideDim { expected: usize, got: usize },
    #[error("perplexity must be positive, got {0}")]
    NonPositivePerplexity(f64),
    #[error("no model for community `{0}`")]
    MissingModel(String),
    #[error("shape mismatch in model parts")]
    Shape,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LMConfig {
    pub layers: usize,
    /// Must equal the embedding dimension.
    pub hidden_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub batch_size: usize,
    /// Truncation length for backpropagation through time.
    pub bptt: usize,
    /// Global gradient-norm clip; 0 disables clipping.
    pub clip_norm: f64,
    /// Train on whole documents from the front of the split until this
    /// many tokens are covered.
    pub max_train_tokens: Option<usize>,
    pub max_valid_tokens: Option<usize>,
    pub seed: u64,
}

impl Default for LMConfig {
    fn default() -> Self {
        LMConfig {
            layers: 2,
            hidden_size: 200,
            epochs: 40,
            learning_rate: 1e-3,
            dropout: 0.2,
            batch_size: 20,
            bptt: 35,
            clip_norm: 5.0,
            max_train_tokens: None,
            max_valid_tokens: None,
            seed: 1,
        }
    }
}

impl LMConfig {
    pub fn validate(&self) -> Result<(), LmError> {
        if self.layers == 0 {
            return Err(LmError::InvalidConfig("layers must be positive"));
        }
        if self.hidden_size == 0 {
            return Err(LmError::InvalidConfig("hidden_size must be positive"));
        }
        if self.epochs == 0 {
            return Err(LmError::InvalidConfig("epochs must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(LmError::InvalidConfig("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(LmError::InvalidConfig("dropout must be in [0, 1)"));
        }
        if self.batch_size == 0 || self.bptt == 0 {
            return Err(LmError::InvalidConfig("batch_size and bptt must be positive"));
        }
        if !(self.clip_norm >= 0.0) {
            return Err(LmError::InvalidConfig("clip_norm must be non-negative"));
        }
        Ok(())
    }
}

/// Document indices of one community, partitioned for LM training.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentSplit {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

/// Random document-level partition by `ratios` (train, valid, test).
pub fn split(store: &CorpusStore, community: &str, ratios: [f64; 3], seed: u64) -> Result<DocumentSplit, LmError> {
    if ratios.iter().any(|r| !(*r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(LmError::InvalidRatios);
    }
    let n = store.community(community)?.documents.len();
    let n_train = (ratios[0] * n as f64).round() as usize;
    let n_valid = (ratios[1] * n as f64).round() as usize;
    if n_train == 0 || n_valid == 0 || n_train + n_valid >= n {
        return Err(LmError::TooFewDocuments { documents: n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = idx[..n_train].to_vec();
    let mut valid = idx[n_train..n_train + n_valid].to_vec();
    let mut test = idx[n_train + n_valid..].to_vec();
    train.sort_unstable();
    valid.sort_unstable();
    test.sort_unstable();
    Ok(DocumentSplit { train, valid, test })
}

/// Maps documents to LM ids: vocabulary ids, with every other type mapped
/// to the UNK id `vocab.len()`.
pub fn encode_documents(
    store: &CorpusStore,
    community: &str,
    vocab: &Vocabulary,
    documents: &[usize],
) -> Result<Vec<Vec<u32>>, LmError> {
    let corpus = store.community(community)?;
    let map = vocab.type_map(&store.types);
    let unk = vocab.len() as u32;
    Ok(documents
        .iter()
        .map(|&d| {
            corpus.documents[d]
                .tokens
                .iter()
                .map(|&t| map.get(t as usize).copied().flatten().unwrap_or(unk))
                .collect()
        })
        .collect())
}

fn take_tokens(docs: &[Vec<u32>], cap: Option<usize>) -> &[Vec<u32>] {
    let Some(cap) = cap else { return docs };
    let mut total = 0;
    for (i, d) in docs.iter().enumerate() {
        if total >= cap {
            return &docs[..i];
        }
        total += d.len();
    }
    docs
}

#[inline]
fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    let mut acc = [F::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] = acc[k] + x[k] * y[k];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s = s + *x * *y;
    }
    s
}

#[inline]
fn axpy<F: Float>(alpha: F, x: &[F], y: &mut [F]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

#[inline]
fn sigmoid<F: Float>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// Log-softmax in place; returns nothing, `logits` becomes log-probabilities.
fn log_softmax<F: Float>(logits: &mut [F]) {
    let max = logits.iter().fold(F::neg_infinity(), |m, &x| m.max(x));
    let sum = logits.iter().fold(F::zero(), |s, &x| s + (x - max).exp());
    let lse = max + sum.ln();
    for x in logits.iter_mut() {
        *x = *x - lse;
    }
}

/// LSTM language model with a frozen input table. Trainable parameters
/// live in one flat vector: per layer the gate matrix (`4H x 2H`, gate
/// order input, forget, cell, output; columns input then recurrent) and
/// bias (`4H`), then the output matrix (`V x H`) and bias (`V`).
///
/// The input table has `V + 1` rows; the last is the UNK row. UNK is never
/// a prediction target.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageModel<F = f32> {
    community: String,
    vocab_size: usize,
    hidden: usize,
    layers: usize,
    embeddings: Vec<F>,
    params: Vec<F>,
}

/// Recurrent state, `layers * hidden` each.
#[derive(Debug, Clone)]
pub struct State<F> {
    h: Vec<F>,
    c: Vec<F>,
}

impl<F: Float> State<F> {
    fn zero(layers: usize, hidden: usize) -> Self {
        State {
            h: vec![F::zero(); layers * hidden],
            c: vec![F::zero(); layers * hidden],
        }
    }

    fn reset(&mut self) {
        self.h.iter_mut().for_each(|x| *x = F::zero());
        self.c.iter_mut().for_each(|x| *x = F::zero());
    }
}

fn param_count(vocab_size: usize, hidden: usize, layers: usize) -> usize {
    layers * (4 * hidden * 2 * hidden + 4 * hidden) + vocab_size * hidden + vocab_size
}

impl<F: Float> LanguageModel<F> {
    /// Fresh model over `embeddings` (`(V + 1) x hidden`, UNK row last).
    pub fn new<R: Rng>(
        community: &str,
        embeddings: Vec<F>,
        vocab_size: usize,
        hidden: usize,
        layers: usize,
        rng: &mut R,
    ) -> Result<Self, LmError> {
        if hidden == 0 || layers == 0 || vocab_size == 0 || embeddings.len() != (vocab_size + 1) * hidden {
            return Err(LmError::Shape);
        }
        let mut params = vec![F::zero(); param_count(vocab_size, hidden, layers)];
        let k = 1.0 / (hidden as f64).sqrt();
        let out_start = layers * (8 * hidden * hidden + 4 * hidden);
        for p in params[..out_start].iter_mut() {
            *p = F::from(rng.random_range(-k..k)).unwrap();
        }
        for p in params[out_start..out_start + vocab_size * hidden].iter_mut() {
            *p = F::from(rng.random_range(-0.1..0.1)).unwrap();
        }
        Ok(LanguageModel {
            community: community.to_string(),
            vocab_size,
            hidden,
            layers,
            embeddings,
            params,
        })
    }

    pub fn from_parts(
        community: &str,
        vocab_size: usize,
        hidden: usize,
        layers: usize,
        embeddings: Vec<F>,
        params: Vec<F>,
    ) -> Result<Self, LmError> {
        if hidden == 0
            || layers == 0
            || embeddings.len() != (vocab_size + 1) * hidden
            || params.len() != param_count(vocab_size, hidden, layers)
        {
            return Err(LmError::Shape);
        }
        Ok(LanguageModel {
            community: community.to_string(),
            vocab_size,
            hidden,
            layers,
            embeddings,
            params,
        })
    }

    pub fn community(&self) -> &str {
        &self.community
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn unk_id(&self) -> u32 {
        self.vocab_size as u32
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn embeddings(&self) -> &[F] {
        &self.embeddings
    }

    pub fn embedding(&self, id: u32) -> &[F] {
        let h = self.hidden;
        &self.embeddings[id as usize * h..(id as usize + 1) * h]
    }

    pub fn params(&self) -> &[F] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [F] {
        &mut self.params
    }

    fn layer_block(&self) -> usize {
        8 * self.hidden * self.hidden + 4 * self.hidden
    }

    fn layer_w(&self, l: usize) -> Range<usize> {
        let start = l * self.layer_block();
        start..start + 8 * self.hidden * self.hidden
    }

    fn layer_b(&self, l: usize) -> Range<usize> {
        let end = (l + 1) * self.layer_block();
        end - 4 * self.hidden..end
    }

    /// Range of the output matrix and bias within [`Self::params`].
    pub fn output_range(&self) -> Range<usize> {
        self.layers * self.layer_block()..self.params.len()
    }

    fn out_w(&self) -> Range<usize> {
        let s = self.layers * self.layer_block();
        s..s + self.vocab_size * self.hidden
    }

    fn out_b(&self) -> Range<usize> {
        let s = self.out_w().end;
        s..s + self.vocab_size
    }

    fn cell_forward(&self, l: usize, x: &[F], state: &mut State<F>, gates: &mut [F], tc: &mut [F]) {
        let h = self.hidden;
        let w = &self.params[self.layer_w(l)];
        let b = &self.params[self.layer_b(l)];
        let h_prev = &state.h[l * h..(l + 1) * h];
        for r in 0..4 * h {
            let row = &w[r * 2 * h..(r + 1) * 2 * h];
            gates[r] = b[r] + dot(&row[..h], x) + dot(&row[h..], h_prev);
        }
        for k in 0..h {
            let i = sigmoid(gates[k]);
            let f = sigmoid(gates[h + k]);
            let g = gates[2 * h + k].tanh();
            let o = sigmoid(gates[3 * h + k]);
            gates[k] = i;
            gates[h + k] = f;
            gates[2 * h + k] = g;
            gates[3 * h + k] = o;
            let c = f * state.c[l * h + k] + i * g;
            state.c[l * h + k] = c;
            tc[k] = c.tanh();
            state.h[l * h + k] = o * tc[k];
        }
    }

    /// Runs one step without dropout and returns the top hidden state.
    fn step_eval<'s>(&self, x: &[F], state: &'s mut State<F>, gates: &mut [F], tc: &mut [F]) -> &'s [F] {
        let h = self.hidden;
        let mut input = x.to_vec();
        for l in 0..self.layers {
            self.cell_forward(l, &input, state, gates, tc);
            input.copy_from_slice(&state.h[l * h..(l + 1) * h]);
        }
        &state.h[(self.layers - 1) * h..]
    }

    fn output_logits(&self, top: &[F], logits: &mut [F]) {
        let h = self.hidden;
        let w = &self.params[self.out_w()];
        let b = &self.params[self.out_b()];
        for (v, z) in logits.iter_mut().enumerate() {
            *z = b[v] + dot(&w[v * h..(v + 1) * h], top);
        }
    }

    /// Log-probabilities of the next token after feeding `x` from zero
    /// state.
    pub fn next_log_probs(&self, x: &[F]) -> Vec<F> {
        let mut state = State::zero(self.layers, self.hidden);
        let mut gates = vec![F::zero(); 4 * self.hidden];
        let mut tc = vec![F::zero(); self.hidden];
        let top = self.step_eval(x, &mut state, &mut gates, &mut tc).to_vec();
        let mut logits = vec![F::zero(); self.vocab_size];
        self.output_logits(&top, &mut logits);
        log_softmax(&mut logits);
        logits
    }

    /// Summed next-token negative log-likelihood and target count over
    /// documents, each read from zero state without dropout.
    pub fn nll(&self, docs: &[Vec<u32>]) -> (f64, usize) {
        let mut state = State::zero(self.layers, self.hidden);
        let mut gates = vec![F::zero(); 4 * self.hidden];
        let mut tc = vec![F::zero(); self.hidden];
        let mut logits = vec![F::zero(); self.vocab_size];
        let (mut sum, mut count) = (0.0f64, 0usize);
        for doc in docs {
            state.reset();
            for (t, &tok) in doc.iter().enumerate() {
                let Some(&next) = doc.get(t + 1) else { break };
                let top = self.step_eval(self.embedding(tok), &mut state, &mut gates, &mut tc);
                if next as usize >= self.vocab_size {
                    continue;
                }
                let top = top.to_vec();
                self.output_logits(&top, &mut logits);
                log_softmax(&mut logits);
                sum -= logits[next as usize].to_f64().unwrap();
                count += 1;
            }
        }
        (sum, count)
    }

    pub fn perplexity(&self, docs: &[Vec<u32>]) -> Option<f64> {
        let (sum, count) = self.nll(docs);
        (count > 0).then(|| (sum / count as f64).exp())
    }

    /// Mean next-token loss over `docs` (each from zero state, full
    /// backpropagation through the document, no dropout) and its gradient
    /// with respect to [`Self::params`].
    pub fn loss_and_gradient(&self, docs: &[Vec<u32>]) -> (F, Vec<F>) {
        let mut grad = vec![F::zero(); self.params.len()];
        let mut total = F::zero();
        let mut count = 0usize;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for doc in docs {
            let stream = positions(doc, self.vocab_size);
            let mut tape = Tape::new(stream.len(), self.layers, self.hidden, self.vocab_size);
            let mut state = State::zero(self.layers, self.hidden);
            let (l, c) = self.window(&stream, &mut state, &mut tape, 0.0, &mut rng, &mut grad);
            total = total + l;
            count += c;
        }
        if count > 0 {
            let inv = F::one() / F::from(count).unwrap();
            grad.iter_mut().for_each(|g| *g = *g * inv);
            total = total * inv;
        }
        (total, grad)
    }

    /// Forward and backward over one truncated window of a stream,
    /// continuing from `state` and leaving it at the window's end.
    /// Gradients of the summed loss are added to `grad`.
    fn window<R: Rng>(
        &self,
        stream: &[Pos],
        state: &mut State<F>,
        tape: &mut Tape<F>,
        dropout: f64,
        rng: &mut R,
        grad: &mut [F],
    ) -> (F, usize) {
        let (h, nl, v) = (self.hidden, self.layers, self.vocab_size);
        let keep = F::from(1.0 / (1.0 - dropout)).unwrap();
        let mut loss = F::zero();
        let mut count = 0;
        let mut gates = vec![F::zero(); 4 * h];
        let mut tc = vec![F::zero(); h];
        for (t, pos) in stream.iter().enumerate() {
            if pos.reset {
                state.reset();
            }
            for m in 0..=nl {
                let mask = tape.mask_mut(t, m);
                for x in mask.iter_mut() {
                    *x = if dropout > 0.0 && rng.random::<f64>() < dropout {
                        F::zero()
                    } else if dropout > 0.0 {
                        keep
                    } else {
                        F::one()
                    };
                }
            }
            let emb = self.embedding(pos.input);
            for k in 0..h {
                let m = tape.mask(t, 0)[k];
                tape.inp_mut(t, 0)[k] = emb[k] * m;
            }
            for l in 0..nl {
                tape.hprev_mut(t, l).copy_from_slice(&state.h[l * h..(l + 1) * h]);
                tape.cprev_mut(t, l).copy_from_slice(&state.c[l * h..(l + 1) * h]);
                let x = tape.inp(t, l).to_vec();
                self.cell_forward(l, &x, state, &mut gates, &mut tc);
                tape.gates_mut(t, l).copy_from_slice(&gates);
                tape.tc_mut(t, l).copy_from_slice(&tc);
                let mask = tape.mask(t, l + 1).to_vec();
                let out: Vec<F> = (0..h).map(|k| state.h[l * h + k] * mask[k]).collect();
                if l + 1 < nl {
                    tape.inp_mut(t, l + 1).copy_from_slice(&out);
                } else {
                    tape.top_mut(t).copy_from_slice(&out);
                }
            }
            if let Some(target) = pos.target {
                let top = tape.top(t).to_vec();
                let probs = tape.probs_mut(t);
                self.output_logits(&top, probs);
                log_softmax(probs);
                loss = loss - probs[target as usize];
                for p in probs.iter_mut() {
                    *p = p.exp();
                }
                count += 1;
            }
        }

        let (ow, ob) = (self.out_w(), self.out_b());
        let mut dh_next = vec![F::zero(); nl * h];
        let mut dc_next = vec![F::zero(); nl * h];
        let mut dtop = vec![F::zero(); h];
        let mut dx = vec![F::zero(); h];
        let mut dhp = vec![F::zero(); h];
        let mut dz = vec![F::zero(); 4 * h];
        for t in (0..stream.len()).rev() {
            dtop.iter_mut().for_each(|x| *x = F::zero());
            if let Some(target) = stream[t].target {
                let top = tape.top(t).to_vec();
                let probs = tape.probs(t);
                for u in 0..v {
                    let d = if u == target as usize {
                        probs[u] - F::one()
                    } else {
                        probs[u]
                    };
                    if d == F::zero() {
                        continue;
                    }
                    let wrow = &self.params[ow.start + u * h..ow.start + (u + 1) * h];
                    axpy(d, wrow, &mut dtop);
                    axpy(d, &top, &mut grad[ow.start + u * h..ow.start + (u + 1) * h]);
                    grad[ob.start + u] = grad[ob.start + u] + d;
                }
            }
            let mut from_above = dtop.clone();
            for l in (0..nl).rev() {
                let mask = tape.mask(t, l + 1);
                let dh: Vec<F> = (0..h).map(|k| from_above[k] * mask[k] + dh_next[l * h + k]).collect();
                let gates = tape.gates(t, l);
                let tcv = tape.tc(t, l);
                let cprev = tape.cprev(t, l);
                for k in 0..h {
                    let (i, f, g, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
                    let dc = dc_next[l * h + k] + dh[k] * o * (F::one() - tcv[k] * tcv[k]);
                    let d_o = dh[k] * tcv[k];
                    dz[k] = dc * g * i * (F::one() - i);
                    dz[h + k] = dc * cprev[k] * f * (F::one() - f);
                    dz[2 * h + k] = dc * i * (F::one() - g * g);
                    dz[3 * h + k] = d_o * o * (F::one() - o);
                    dc_next[l * h + k] = dc * f;
                }
                let wr = self.layer_w(l);
                let br = self.layer_b(l);
                let x = tape.inp(t, l);
                let hprev = tape.hprev(t, l);
                dx.iter_mut().for_each(|e| *e = F::zero());
                dhp.iter_mut().for_each(|e| *e = F::zero());
                for r in 0..4 * h {
                    let d = dz[r];
                    let row = &self.params[wr.start + r * 2 * h..wr.start + (r + 1) * 2 * h];
                    axpy(d, &row[..h], &mut dx);
                    axpy(d, &row[h..], &mut dhp);
                    let grow = &mut grad[wr.start + r * 2 * h..wr.start + (r + 1) * 2 * h];
                    axpy(d, x, &mut grow[..h]);
                    axpy(d, hprev, &mut grow[h..]);
                    grad[br.start + r] = grad[br.start + r] + d;
                }
                dh_next[l * h..(l + 1) * h].copy_from_slice(&dhp);
                from_above.copy_from_slice(&dx);
            }
            if stream[t].reset {
                dh_next.iter_mut().for_each(|x| *x = F::zero());
                dc_next.iter_mut().for_each(|x| *x = F::zero());
            }
        }
        (loss, count)
    }
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    input: u32,
    target: Option<u32>,
    reset: bool,
}

fn positions(doc: &[u32], vocab_size: usize) -> Vec<Pos> {
    (0..doc.len().saturating_sub(1))
        .map(|t| Pos {
            input: doc[t],
            target: Some(doc[t + 1]).filter(|&n| (n as usize) < vocab_size),
            reset: t == 0,
        })
        .collect()
}

/// Activations saved during the forward pass of one window.
struct Tape<F> {
    layers: usize,
    hidden: usize,
    vocab: usize,
    inp: Vec<F>,
    hprev: Vec<F>,
    cprev: Vec<F>,
    gates: Vec<F>,
    tc: Vec<F>,
    masks: Vec<F>,
    top: Vec<F>,
    probs: Vec<F>,
}

macro_rules! tape_slot {
    ($get:ident, $get_mut:ident, $field:ident, $width:expr) => {
        fn $get(&self, t: usize, l: usize) -> &[F] {
            let w = $width(self);
            let i = (t * self.layers + l) * w;
            &self.$field[i..i + w]
        }
        fn $get_mut(&mut self, t: usize, l: usize) -> &mut [F] {
            let w = $width(self);
            let i = (t * self.layers + l) * w;
            &mut self.$field[i..i + w]
        }
    };
}

impl<F: Float> Tape<F> {
    fn new(steps: usize, layers: usize, hidden: usize, vocab: usize) -> Self {
        let z = |n: usize| vec![F::zero(); n];
        Tape {
            layers,
            hidden,
            vocab,
            inp: z(steps * layers * hidden),
            hprev: z(steps * layers * hidden),
            cprev: z(steps * layers * hidden),
            gates: z(steps * layers * 4 * hidden),
            tc: z(steps * layers * hidden),
            masks: z(steps * (layers + 1) * hidden),
            top: z(steps * hidden),
            probs: z(steps * vocab),
        }
    }

    tape_slot!(inp, inp_mut, inp, |s: &Self| s.hidden);
    tape_slot!(hprev, hprev_mut, hprev, |s: &Self| s.hidden);
    tape_slot!(cprev, cprev_mut, cprev, |s: &Self| s.hidden);
    tape_slot!(gates, gates_mut, gates, |s: &Self| 4 * s.hidden);
    tape_slot!(tc, tc_mut, tc, |s: &Self| s.hidden);

    fn mask(&self, t: usize, m: usize) -> &[F] {
        let i = (t * (self.layers + 1) + m) * self.hidden;
        &self.masks[i..i + self.hidden]
    }

    fn mask_mut(&mut self, t: usize, m: usize) -> &mut [F] {
        let i = (t * (self.layers + 1) + m) * self.hidden;
        &mut self.masks[i..i + self.hidden]
    }

    fn top(&self, t: usize) -> &[F] {
        &self.top[t * self.hidden..(t + 1) * self.hidden]
    }

    fn top_mut(&mut self, t: usize) -> &mut [F] {
        &mut self.top[t * self.hidden..(t + 1) * self.hidden]
    }

    fn probs(&self, t: usize) -> &[F] {
        &self.probs[t * self.vocab..(t + 1) * self.vocab]
    }

    fn probs_mut(&mut self, t: usize) -> &mut [F] {
        &mut self.probs[t * self.vocab..(t + 1) * self.vocab]
    }
}

struct Adam {
    m: Vec<f32>,
    v: Vec<f32>,
    t: i32,
    lr: f32,
}

impl Adam {
    const B1: f32 = 0.9;
    const B2: f32 = 0.999;
    const EPS: f32 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr: lr as f32,
        }
    }

    fn step(&mut self, params: &mut [f32], grad: &[f32]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        let step = self.lr * c2.sqrt() / c1;
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * g;
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * g * g;
            params[i] -= step * self.m[i] / (self.v[i].sqrt() + Self::EPS);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_perplexity: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedLm {
    pub model: LanguageModel<f32>,
    pub history: Vec<EpochStats>,
    /// Epoch (1-based) whose parameters were kept.
    pub best_epoch: usize,
}

/// Input table for `community`: its composed vectors plus a random UNK row
/// with the table's per-entry scale.
pub fn community_input_table(space: &EmbeddingSpace, community: &str, seed: u64) -> Result<Vec<f32>, LmError> {
    let c = space.community_index(community)?;
    let mut table = space.community_table(c);
    let rms = (table.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>() / table.len().max(1) as f64).sqrt();
    let half = if rms > 0.0 {
        rms * 3f64.sqrt()
    } else {
        0.5 / space.dim() as f64
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0c0f_fee0);
    for _ in 0..space.dim() {
        table.push(rng.random_range(-half..half) as f32);
    }
    Ok(table)
}

/// Trains an LM for `community` on encoded documents. Keeps the parameters
/// of the epoch with the best validation perplexity.
pub fn train_lm(
    train: &[Vec<u32>],
    valid: &[Vec<u32>],
    space: &EmbeddingSpace,
    community: &str,
    cfg: &LMConfig,
) -> Result<TrainedLm, LmError> {
    cfg.validate()?;
    if cfg.hidden_size != space.dim() {
        return Err(LmError::HiddenMismatch {
            hidden: cfg.hidden_size,
            dim: space.dim(),
        });
    }
    let vocab_size = space.vocab().len();
    let embeddings = community_input_table(space, community, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = LanguageModel::new(community, embeddings, vocab_size, cfg.hidden_size, cfg.layers, &mut rng)?;
    let train = take_tokens(train, cfg.max_train_tokens);
    let valid = take_tokens(valid, cfg.max_valid_tokens);
    let docs: Vec<Vec<Pos>> = train
        .iter()
        .map(|d| positions(d, vocab_size))
        .filter(|p| !p.is_empty())
        .collect();
    if docs.iter().all(|d| d.iter().all(|p| p.target.is_none())) {
        return Err(LmError::EmptyTraining);
    }

    let (h, nl) = (cfg.hidden_size, cfg.layers);
    let mut adam = Adam::new(model.params.len(), cfg.learning_rate);
    let mut grad = vec![0.0f32; model.params.len()];
    let mut tape = Tape::new(cfg.bptt, nl, h, vocab_size);
    let mut best: Option<(f64, usize, Vec<f32>)> = None;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut updates = 0usize;
    let mut order: Vec<usize> = (0..docs.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut streams: Vec<Vec<Pos>> = vec![Vec::new(); cfg.batch_size.min(docs.len())];
        for &d in &order {
            let s = (0..streams.len()).min_by_key(|&s| (streams[s].len(), s)).unwrap();
            streams[s].extend_from_slice(&docs[d]);
        }
        let mut states: Vec<State<f32>> = streams.iter().map(|_| State::zero(nl, h)).collect();
        let longest = streams.iter().map(|s| s.len()).max().unwrap_or(0);
        let (mut epoch_loss, mut epoch_count) = (0.0f64, 0usize);
        let mut t0 = 0;
        while t0 < longest {
            let (mut loss, mut count) = (0.0f32, 0usize);
            for (s, stream) in streams.iter().enumerate() {
                if t0 >= stream.len() {
                    continue;
                }
                let win = &stream[t0..(t0 + cfg.bptt).min(stream.len())];
                let (l, c) = model.window(win, &mut states[s], &mut tape, cfg.dropout, &mut rng, &mut grad);
                loss += l;
                count += c;
            }
            t0 += cfg.bptt;
            if count == 0 {
                grad.iter_mut().for_each(|g| *g = 0.0);
                continue;
            }
            if !loss.is_finite() {
                return Err(LmError::Diverged {
                    epoch,
                    updates,
                    loss: loss as f64,
                });
            }
            let inv = 1.0 / count as f32;
            let mut norm = 0.0f64;
            for g in grad.iter_mut() {
                *g *= inv;
                norm += (*g as f64) * (*g as f64);
            }
            let norm = norm.sqrt();
            if cfg.clip_norm > 0.0 && norm > cfg.clip_norm {
                let s = (cfg.clip_norm / norm) as f32;
                grad.iter_mut().for_each(|g| *g *= s);
            }
            adam.step(&mut model.params, &grad);
            grad.iter_mut().for_each(|g| *g = 0.0);
            updates += 1;
            epoch_loss += loss as f64;
            epoch_count += count;
        }
        let train_loss = epoch_loss / epoch_count.max(1) as f64;
        let valid_perplexity = model.perplexity(valid).unwrap_or(train_loss.exp());
        if !valid_perplexity.is_finite() {
            return Err(LmError::Diverged {
                epoch,
                updates,
                loss: valid_perplexity,
            });
        }
        history.push(EpochStats {
            epoch,
            train_loss,
            valid_perplexity,
        });
        if best.as_ref().is_none_or(|(p, _, _)| valid_perplexity < *p) {
            best = Some((valid_perplexity, epoch, model.params.clone()));
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    model.params = params;
    Ok(TrainedLm {
        model,
        history,
        best_epoch,
    })
}

/// How a targeted probe treats the recurrent state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProbeMode {
    /// Each occurrence is read from zero state, conditioning on the word
    /// alone.
    #[default]
    Reset,
    /// Documents are run in full and the word's input row is replaced at
    /// its occurrences.
    CarryContext,
}

/// Successor counts of every word in a test split (UNK successors are
/// skipped).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuccessorIndex {
    map: BTreeMap<u32, Vec<(u32, u64)>>,
}

impl SuccessorIndex {
    pub fn build(test: &[Vec<u32>], vocab_size: usize) -> Self {
        let mut counts: BTreeMap<u32, BTreeMap<u32, u64>> = BTreeMap::new();
        for doc in test {
            for pair in doc.windows(2) {
                if (pair[1] as usize) < vocab_size {
                    *counts.entry(pair[0]).or_default().entry(pair[1]).or_insert(0) += 1;
                }
            }
        }
        SuccessorIndex {
            map: counts.into_iter().map(|(w, m)| (w, m.into_iter().collect())).collect(),
        }
    }

    pub fn successors(&self, word: u32) -> Option<&[(u32, u64)]> {
        self.map.get(&word).map(|v| v.as_slice())
    }
}

fn check_override<F: Float>(lm: &LanguageModel<F>, o: Option<&[F]>) -> Result<(), LmError> {
    match o {
        Some(v) if v.len() != lm.hidden => Err(LmError::OverrideDim {
            expected: lm.hidden,
            got: v.len(),
        }),
        _ => Ok(()),
    }
}

/// Perplexity of the successors of `word` given only its input vector.
pub fn perplexity_from_successors<F: Float>(lm: &LanguageModel<F>, successors: &[(u32, u64)], input: &[F]) -> f64 {
    let logp = lm.next_log_probs(input);
    let (mut sum, mut n) = (0.0, 0u64);
    for &(s, c) in successors {
        sum -= logp[s as usize].to_f64().unwrap() * c as f64;
        n += c;
    }
    (sum / n as f64).exp()
}

/// Targeted perplexity of `word` (an LM id) over `test`.
pub fn target_perplexity<F: Float>(
    lm: &LanguageModel<F>,
    test: &[Vec<u32>],
    word: u32,
    override_vec: Option<&[F]>,
) -> Result<f64, LmError> {
    target_perplexity_with(lm, test, word, override_vec, ProbeMode::Reset)
}

pub fn target_perplexity_with<F: Float>(
    lm: &LanguageModel<F>,
    test: &[Vec<u32>],
    word: u32,
    override_vec: Option<&[F]>,
    mode: ProbeMode,
) -> Result<f64, LmError> {
    check_override(lm, override_vec)?;
    let absent = || LmError::WordAbsent(format!("#{word}"));
    let input = override_vec.unwrap_or_else(|| lm.embedding(word));
    match mode {
        ProbeMode::Reset => {
            let index = SuccessorIndex::build(test, lm.vocab_size);
            let succ = index.successors(word).ok_or_else(absent)?;
            Ok(perplexity_from_successors(lm, succ, input))
        }
        ProbeMode::CarryContext => {
            let mut state = State::zero(lm.layers, lm.hidden);
            let mut gates = vec![F::zero(); 4 * lm.hidden];
            let mut tc = vec![F::zero(); lm.hidden];
            let mut logits = vec![F::zero(); lm.vocab_size];
            let (mut sum, mut n) = (0.0f64, 0u64);
            for doc in test.iter().filter(|d| d.contains(&word)) {
                state.reset();
                for (t, &tok) in doc.iter().enumerate() {
                    let Some(&next) = doc.get(t + 1) else { break };
                    let x = if tok == word { input } else { lm.embedding(tok) };
                    let top = lm.step_eval(x, &mut state, &mut gates, &mut tc);
                    if tok == word && (next as usize) < lm.vocab_size {
                        let top = top.to_vec();
                        lm.output_logits(&top, &mut logits);
                        log_softmax(&mut logits);
                        sum -= logits[next as usize].to_f64().unwrap();
                        n += 1;
                    }
                }
            }
            if n == 0 {
                return Err(absent());
            }
            Ok((sum / n as f64).exp())
        }
    }
}

/// Relative perplexity increase `(alt - train) / train`.
pub fn ppl_change(ppl_train: f64, ppl_alt: f64) -> Result<f64, LmError> {
    if !(ppl_train > 0.0) {
        return Err(LmError::NonPositivePerplexity(ppl_train));
    }
    Ok((ppl_alt - ppl_train) / ppl_train)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WordSets {
    pub shift: Vec<String>,
    pub noshift: Vec<String>,
}

/// Shift and no-shift words for the domain row and each community row.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExperimentSets {
    pub domain: WordSets,
    pub communities: Vec<(String, WordSets)>,
}

impl ExperimentSets {
    /// Top-`k` and bottom-`k` positive words of the dsi column and of every
    /// csi column.
    pub fn from_table(table: &ShiftTable, k: usize) -> Result<Self, LmError> {
        let sets = |col: &Column| -> Result<WordSets, LmError> {
            Ok(WordSets {
                shift: select_words(table, col, SelectionMode::TopK(k))?.words,
                noshift: select_words(table, col, SelectionMode::BottomKPositive(k))?.words,
            })
        };
        Ok(ExperimentSets {
            domain: sets(&Column::Dsi)?,
            communities: table
                .members
                .iter()
                .map(|m| Ok((m.clone(), sets(&Column::Csi(m.clone()))?)))
                .collect::<Result<_, LmError>>()?,
        })
    }
}

/// How alternatives from several sibling communities enter a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AltAggregation {
    /// Average the per-alternative changes of each word.
    #[default]
    PerWordMean,
    /// Keep every alternative as its own value.
    Pooled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOptions {
    pub aggregation: AltAggregation,
    pub mode: ProbeMode,
    /// Cells with fewer surviving words carry no significance test.
    pub min_words: usize,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            aggregation: AltAggregation::PerWordMean,
            mode: ProbeMode::Reset,
            min_words: 6,
        }
    }
}

/// One community's model with its encoded test documents.
#[derive(Debug, Clone, Copy)]
pub struct ProbeModel<'a> {
    pub model: &'a LanguageModel<f32>,
    pub test: &'a [Vec<u32>],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetLabel {
    Shift,
    NoShift,
}

impl SetLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SetLabel::Shift => "shift",
            SetLabel::NoShift => "no.shift",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Domain,
    Community,
}

/// Probe results of one word under one model.
#[derive(Debug, Clone, PartialEq)]
pub struct WordProbe {
    pub word: String,
    /// Community whose LM was probed.
    pub model: String,
    pub ppl_train: f64,
    /// Perplexity and change with the first cell's alternative.
    pub ppl_a: f64,
    pub change_a: f64,
    /// `(community, perplexity, change)` for each alternative of the
    /// second cell.
    pub alts_b: Vec<(String, f64, f64)>,
    /// Mean of the second cell's changes.
    pub change_b: f64,
}

/// A row of the substitution table: two cells and the paired test between
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRow {
    pub kind: RowKind,
    /// Domain name or community name.
    pub row: String,
    pub set: SetLabel,
    pub cell_a: String,
    pub cell_b: String,
    pub probes: Vec<WordProbe>,
    pub median_a: f64,
    pub median_b: f64,
    /// Wilcoxon signed-rank between the paired cell values, when
    /// available.
    pub test: Option<TestResult>,
    pub note: Option<String>,
    pub dropped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerplexityReport {
    pub domain: String,
    pub rows: Vec<CellRow>,
}

impl PerplexityReport {
    pub fn row(&self, kind: RowKind, row: &str, set: SetLabel) -> Option<&CellRow> {
        self.rows
            .iter()
            .find(|r| r.kind == kind && r.row == row && r.set == set)
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

struct Prober<'a> {
    space: &'a EmbeddingSpace,
    probe: ProbeModel<'a>,
    index: SuccessorIndex,
    mode: ProbeMode,
}

impl<'a> Prober<'a> {
    fn new(space: &'a EmbeddingSpace, probe: ProbeModel<'a>, mode: ProbeMode) -> Self {
        Prober {
            space,
            probe,
            index: SuccessorIndex::build(probe.test, probe.model.vocab_size()),
            mode,
        }
    }

    /// Perplexity of `word` with the vector from `source` (`None` = the
    /// model's own input row).
    fn ppl(&self, id: u32, source: Option<&str>) -> Result<f64, LmError> {
        let alt = match source {
            Some(c) => Some(self.space.vector_by_id(id, self.space.community_index(c)?)),
            None => None,
        };
        match self.mode {
            ProbeMode::Reset => {
                let succ = self
                    .index
                    .successors(id)
                    .ok_or_else(|| LmError::WordAbsent(self.space.vocab().word(id).to_string()))?;
                let input = alt.as_deref().unwrap_or_else(|| self.probe.model.embedding(id));
                Ok(perplexity_from_successors(self.probe.model, succ, input))
            }
            ProbeMode::CarryContext => {
                target_perplexity_with(self.probe.model, self.probe.test, id, alt.as_deref(), self.mode)
            }
        }
    }

    /// Probes `word`: own row, then `a`, then each of `b`.
    fn word(&self, word: &str, a: &str, b: &[&str]) -> Result<WordProbe, LmError> {
        let id = self.space.word_id(word)?;
        let ppl_train = self.ppl(id, None)?;
        let ppl_a = self.ppl(id, Some(a))?;
        let mut alts_b = Vec::with_capacity(b.len());
        for &c in b {
            let p = self.ppl(id, Some(c))?;
            alts_b.push((c.to_string(), p, ppl_change(ppl_train, p)?));
        }
        let change_b = alts_b.iter().map(|x| x.2).sum::<f64>() / alts_b.len() as f64;
        Ok(WordProbe {
            word: word.to_string(),
            model: self.probe.model.community().to_string(),
            ppl_train,
            ppl_a,
            change_a: ppl_change(ppl_train, ppl_a)?,
            alts_b,
            change_b,
        })
    }
}

fn finish_row(
    kind: RowKind,
    row: &str,
    set: SetLabel,
    cells: (&str, &str),
    probes: Vec<WordProbe>,
    dropped: Vec<String>,
    options: &ExperimentOptions,
) -> CellRow {
    let a: Vec<f64> = probes.iter().map(|p| p.change_a).collect();
    let (b, pairs): (Vec<f64>, Vec<(f64, f64)>) = match options.aggregation {
        AltAggregation::PerWordMean => (
            probes.iter().map(|p| p.change_b).collect(),
            probes.iter().map(|p| (p.change_a, p.change_b)).collect(),
        ),
        AltAggregation::Pooled => (
            probes.iter().flat_map(|p| p.alts_b.iter().map(|x| x.2)).collect(),
            probes
                .iter()
                .flat_map(|p| p.alts_b.iter().map(move |x| (p.change_a, x.2)))
                .collect(),
        ),
    };
    let (test, note) = if probes.len() < options.min_words {
        (
            None,
            Some(format!("{} words survived, significance unavailable", probes.len())),
        )
    } else {
        match wilcoxon_signed_rank(&pairs) {
            Ok(t) => (Some(t), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    CellRow {
        kind,
        row: row.to_string(),
        set,
        cell_a: cells.0.to_string(),
        cell_b: cells.1.to_string(),
        probes,
        median_a: median(&a),
        median_b: median(&b),
        test,
        note,
        dropped,
    }
}

/// Embedding-substitution experiment over one domain.
///
/// Domain rows probe every member's LM with the global vector (`c->g`)
/// and with each sibling's vector (`c->D-c`), pooling (member, word)
/// pairs. Community rows probe the global LM with the community's vector
/// (`g->c`) and with each sibling's vector (`g->D-c`). Words absent from a
/// test split are dropped and listed. With no member models the domain
/// rows are omitted.
pub fn substitution_experiment(
    space: &EmbeddingSpace,
    domain: &DomainSpec,
    global: ProbeModel<'_>,
    members: &[ProbeModel<'_>],
    sets: &ExperimentSets,
    options: &ExperimentOptions,
) -> Result<PerplexityReport, LmError> {
    let g_name = global.model.community().to_string();
    let member_probers: Vec<(&str, Prober<'_>)> = domain
        .members
        .iter()
        .filter(|_| !members.is_empty())
        .map(|m| {
            let p = members
                .iter()
                .find(|p| p.model.community() == m)
                .ok_or_else(|| LmError::MissingModel(m.clone()))?;
            Ok((m.as_str(), Prober::new(space, *p, options.mode)))
        })
        .collect::<Result<_, LmError>>()?;
    let g_prober = Prober::new(space, global, options.mode);
    let siblings = |c: &str| -> Vec<&str> { domain.members.iter().map(|m| m.as_str()).filter(|m| *m != c).collect() };

    let mut rows = Vec::new();
    let domain_sets = [
        (SetLabel::Shift, &sets.domain.shift),
        (SetLabel::NoShift, &sets.domain.noshift),
    ];
    for (set, words) in domain_sets.into_iter().filter(|_| !member_probers.is_empty()) {
        let mut probes = Vec::new();
        let mut dropped = Vec::new();
        for (c, prober) in &member_probers {
            for w in words {
                match prober.word(w, &g_name, &siblings(c)) {
                    Ok(p) => probes.push(p),
                    Err(LmError::WordAbsent(_)) => dropped.push(format!("{w}@{c}")),
                    Err(e) => return Err(e),
                }
            }
        }
        rows.push(finish_row(
            RowKind::Domain,
            &domain.name,
            set,
            ("c->g", "c->D-c"),
            probes,
            dropped,
            options,
        ));
    }
    for (c, ws) in &sets.communities {
        if !domain.contains(c) {
            return Err(LmError::Index(IndexError::NotInDomain {
                community: c.clone(),
                domain: domain.name.clone(),
            }));
        }
        let sib = siblings(c);
        for (set, words) in [(SetLabel::Shift, &ws.shift), (SetLabel::NoShift, &ws.noshift)] {
            let mut probes = Vec::new();
            let mut dropped = Vec::new();
            for w in words {
                match g_prober.word(w, c, &sib) {
                    Ok(p) => probes.push(p),
                    Err(LmError::WordAbsent(_)) => dropped.push(format!("{w}@{g_name}")),
                    Err(e) => return Err(e),
                }
            }
            rows.push(finish_row(
                RowKind::Community,
                c,
                set,
                ("g->c", "g->D-c"),
                probes,
                dropped,
                options,
            ));
        }
    }
    Ok(PerplexityReport {
        domain: domain.name.clone(),
        rows,
    })
}
