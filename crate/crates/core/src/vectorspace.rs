//! Jointly parameterized skip-gram: a shared main table plus one deviation
//! table per community. A word's vector in community `c` is
//! `main[w] + dev_c[w]`.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{CommunityId, CorpusStore, Vocabulary};
use crate::sgns;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("invalid training config: {0}")]
    InvalidConfig(&'static str),
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("empty vocabulary")]
    EmptyVocabulary,
    #[error("unknown word `{0}`")]
    UnknownWord(String),
    #[error("unknown community `{0}`")]
    UnknownCommunity(String),
    #[error("undefined cosine for a zero vector")]
    UndefinedCosine,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("table shape mismatch: {0}")]
    Shape(&'static str),
    #[error("non-finite parameter")]
    NonFinite,
    #[error("training diverged in epoch {epoch}, community `{community}`, document {document} (score {score})")]
    Diverged {
        epoch: usize,
        community: String,
        document: usize,
        score: f32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f32,
    pub min_lr: f32,
    /// L2 coefficient on deviation rows.
    pub l2_lambda: f32,
    /// L2 coefficient on main rows; zero unless explicitly requested.
    pub l2_main: f32,
    /// Frequent-word subsampling threshold; `None` disables it.
    pub subsample: Option<f64>,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            dim: 200,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            min_lr: 0.0001,
            l2_lambda: 1e-4,
            l2_main: 0.0,
            subsample: None,
            seed: 1,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), SpaceError> {
        if self.dim == 0 {
            return Err(SpaceError::InvalidConfig("dim must be >= 1"));
        }
        if self.window == 0 {
            return Err(SpaceError::InvalidConfig("window must be >= 1"));
        }
        if self.negatives == 0 {
            return Err(SpaceError::InvalidConfig("negatives must be >= 1"));
        }
        if !(self.l2_lambda >= 0.0) || !(self.l2_main >= 0.0) {
            return Err(SpaceError::InvalidConfig("l2 coefficients must be >= 0"));
        }
        if !(self.learning_rate > 0.0) || !(self.min_lr >= 0.0) {
            return Err(SpaceError::InvalidConfig("learning rates must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace {
    vocab: Vocabulary,
    communities: Vec<CommunityId>,
    dim: usize,
    main: Vec<f32>,
    deviations: Vec<Vec<f32>>,
    context: Vec<f32>,
    config: TrainingConfig,
}

impl EmbeddingSpace {
    /// Assembles a space from raw row-major tables.
    pub fn from_parts(
        vocab: Vocabulary,
        communities: Vec<CommunityId>,
        dim: usize,
        main: Vec<f32>,
        deviations: Vec<Vec<f32>>,
        context: Vec<f32>,
        config: TrainingConfig,
    ) -> Result<Self, SpaceError> {
        let n = vocab.len() * dim;
        if dim == 0 {
            return Err(SpaceError::Shape("dim must be >= 1"));
        }
        if main.len() != n || context.len() != n {
            return Err(SpaceError::Shape("main/context tables must be V x dim"));
        }
        if deviations.len() != communities.len() {
            return Err(SpaceError::Shape("one deviation table per community"));
        }
        if deviations.iter().any(|d| d.len() != n) {
            return Err(SpaceError::Shape("deviation tables must be V x dim"));
        }
        let finite = main
            .iter()
            .chain(deviations.iter().flatten())
            .chain(context.iter())
            .all(|x| x.is_finite());
        if !finite {
            return Err(SpaceError::NonFinite);
        }
        Ok(EmbeddingSpace {
            vocab,
            communities,
            dim,
            main,
            deviations,
            context,
            config,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn communities(&self) -> &[CommunityId] {
        &self.communities
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.config
    }

    pub fn main_table(&self) -> &[f32] {
        &self.main
    }

    pub fn deviation_tables(&self) -> &[Vec<f32>] {
        &self.deviations
    }

    pub fn context_table(&self) -> &[f32] {
        &self.context
    }

    pub fn community_index(&self, name: &str) -> Result<usize, SpaceError> {
        self.communities
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| SpaceError::UnknownCommunity(name.to_string()))
    }

    pub fn global_index(&self) -> Option<usize> {
        self.communities.iter().position(|c| c.is_global())
    }

    pub fn word_id(&self, word: &str) -> Result<u32, SpaceError> {
        self.vocab
            .id(word)
            .ok_or_else(|| SpaceError::UnknownWord(word.to_string()))
    }

    pub fn main_row(&self, id: u32) -> &[f32] {
        let i = id as usize * self.dim;
        &self.main[i..i + self.dim]
    }

    pub fn deviation_row(&self, community: usize, id: u32) -> &[f32] {
        let i = id as usize * self.dim;
        &self.deviations[community][i..i + self.dim]
    }

    /// Composed vector by ids: `main[id] + dev_community[id]`.
    pub fn vector_by_id(&self, id: u32, community: usize) -> Vec<f32> {
        self.main_row(id)
            .iter()
            .zip(self.deviation_row(community, id))
            .map(|(&m, &d)| m + d)
            .collect()
    }

    pub fn vector(&self, word: &str, community: &str) -> Result<Vec<f32>, SpaceError> {
        let id = self.word_id(word)?;
        let c = self.community_index(community)?;
        Ok(self.vector_by_id(id, c))
    }

    /// All composed vectors of one community, row-major V x dim.
    pub fn community_table(&self, community: usize) -> Vec<f32> {
        self.main
            .iter()
            .zip(&self.deviations[community])
            .map(|(&m, &d)| m + d)
            .collect()
    }

    /// Top-k (word, community) pairs within `scope` by cosine to the query
    /// vector, excluding the query pair itself. Ties go to the lower
    /// vocabulary id, then to the earlier community in `scope`.
    pub fn nearest_neighbors(
        &self,
        word: &str,
        community: &str,
        k: usize,
        scope: &[&str],
    ) -> Result<NeighborList, SpaceError> {
        if k == 0 {
            return Err(SpaceError::ZeroK);
        }
        let qid = self.word_id(word)?;
        let qc = self.community_index(community)?;
        let query = self.vector_by_id(qid, qc);
        let scope_idx = scope
            .iter()
            .map(|s| self.community_index(s))
            .collect::<Result<Vec<_>, _>>()?;
        let mut scored = Vec::new();
        for id in 0..self.vocab.len() as u32 {
            for (si, &ci) in scope_idx.iter().enumerate() {
                if id == qid && ci == qc {
                    continue;
                }
                let v = self.vector_by_id(id, ci);
                if let Ok(cos) = cosine(&query, &v) {
                    scored.push((cos, id, si));
                }
            }
        }
        scored.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        scored.truncate(k);
        Ok(NeighborList {
            word: word.to_string(),
            community: community.to_string(),
            neighbors: scored
                .into_iter()
                .map(|(cosine, id, si)| Neighbor {
                    word: self.vocab.word(id).to_string(),
                    community: scope[si].to_string(),
                    cosine,
                })
                .collect(),
        })
    }
}

/// Cosine similarity accumulated in `f64`.
pub fn cosine(a: &[f32], b: &[f32]) -> Result<f64, SpaceError> {
    let (mut ab, mut aa, mut bb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return Err(SpaceError::UndefinedCosine);
    }
    Ok((ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub word: String,
    pub community: String,
    pub cosine: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub word: String,
    pub community: String,
    pub neighbors: Vec<Neighbor>,
}

const UNIGRAM_TABLE_PER_WORD: usize = 500;
const UNIGRAM_TABLE_MIN: usize = 100_000;

/// A store carved down to the communities of one space, with tokens
/// mapped to vocabulary ids (out-of-vocabulary tokens removed), plus the
/// negative-sampling table.
#[derive(Debug, Clone)]
pub struct TrainingCorpus {
    pub communities: Vec<CommunityId>,
    /// Per community, per document, vocabulary ids.
    pub documents: Vec<Vec<Vec<u32>>>,
    pub counts: Vec<u64>,
    pub total_tokens: u64,
    unigram_table: Vec<u32>,
}

impl TrainingCorpus {
    /// Uses every community of `store`.
    pub fn new(store: &CorpusStore, vocab: &Vocabulary) -> Result<Self, SpaceError> {
        let names: Vec<&str> = store.communities.iter().map(|c| c.id.name.as_str()).collect();
        Self::for_communities(store, vocab, &names)
    }

    pub fn for_communities(store: &CorpusStore, vocab: &Vocabulary, names: &[&str]) -> Result<Self, SpaceError> {
        if vocab.is_empty() {
            return Err(SpaceError::EmptyVocabulary);
        }
        let map = vocab.type_map(&store.types);
        let mut communities = Vec::new();
        let mut documents = Vec::new();
        let mut counts = vec![0u64; vocab.len()];
        let mut total = 0u64;
        for name in names {
            let c = store
                .community(name)
                .map_err(|_| SpaceError::UnknownCommunity(name.to_string()))?;
            communities.push(c.id.clone());
            let docs: Vec<Vec<u32>> = c
                .documents
                .iter()
                .map(|d| {
                    d.tokens
                        .iter()
                        .filter_map(|&t| map.get(t as usize).copied().flatten())
                        .collect::<Vec<u32>>()
                })
                .filter(|d| !d.is_empty())
                .collect();
            for d in &docs {
                total += d.len() as u64;
                for &w in d {
                    counts[w as usize] += 1;
                }
            }
            documents.push(docs);
        }
        if total == 0 {
            return Err(SpaceError::EmptyCorpus);
        }
        let unigram_table = unigram_table(&counts);
        Ok(TrainingCorpus {
            communities,
            documents,
            counts,
            total_tokens: total,
            unigram_table,
        })
    }

    #[inline]
    pub fn sample_negative<R: Rng>(&self, rng: &mut R) -> u32 {
        self.unigram_table[rng.random_range(0..self.unigram_table.len())]
    }

    /// Keep probability for frequent-word subsampling.
    fn keep_probability(&self, threshold: Option<f64>) -> Option<Vec<f32>> {
        let t = threshold?;
        let total = self.total_tokens as f64;
        Some(
            self.counts
                .iter()
                .map(|&n| {
                    if n == 0 {
                        return 1.0;
                    }
                    let f = n as f64 / total;
                    (((f / t).sqrt() + 1.0) * t / f).min(1.0) as f32
                })
                .collect(),
        )
    }
}

/// Word2vec-style table of ids in proportion to count^0.75.
fn unigram_table(counts: &[u64]) -> Vec<u32> {
    let size = (counts.len() * UNIGRAM_TABLE_PER_WORD).max(UNIGRAM_TABLE_MIN);
    let weights: Vec<f64> = counts.iter().map(|&n| (n as f64).powf(0.75)).collect();
    let total: f64 = weights.iter().sum();
    let mut table = Vec::with_capacity(size);
    let mut cumulative = 0.0;
    let mut w = 0usize;
    for i in 0..size {
        let position = (i as f64 + 0.5) / size as f64;
        while w + 1 < weights.len() && (cumulative + weights[w]) / total < position {
            cumulative += weights[w];
            w += 1;
        }
        table.push(w as u32);
    }
    table
}

/// Mutable views over the tables a training step touches. Hogwild
/// trainers build one view per worker over shared storage.
pub struct TableViewMut<'a> {
    pub main: &'a mut [f32],
    pub deviations: Vec<&'a mut [f32]>,
    pub context: &'a mut [f32],
    pub dim: usize,
}

/// Reusable per-worker buffers.
pub struct Scratch {
    h: Vec<f32>,
    grad_h: Vec<f32>,
    targets: Vec<(u32, bool)>,
    filtered: Vec<u32>,
}

impl Scratch {
    pub fn new(dim: usize, negatives: usize) -> Self {
        Scratch {
            h: vec![0.0; dim],
            grad_h: vec![0.0; dim],
            targets: Vec::with_capacity(negatives + 1),
            filtered: Vec::new(),
        }
    }
}

/// Drives skip-gram updates over a [`TrainingCorpus`].
pub struct SkipGramTrainer<'a> {
    pub corpus: &'a TrainingCorpus,
    pub config: &'a TrainingConfig,
    keep: Option<Vec<f32>>,
}

impl<'a> SkipGramTrainer<'a> {
    pub fn new(corpus: &'a TrainingCorpus, config: &'a TrainingConfig) -> Result<Self, SpaceError> {
        config.validate()?;
        Ok(SkipGramTrainer {
            corpus,
            config,
            keep: corpus.keep_probability(config.subsample),
        })
    }

    /// Total target positions over all epochs; the learning-rate schedule
    /// decays linearly over this count.
    pub fn total_positions(&self) -> u64 {
        self.corpus.total_tokens * self.config.epochs as u64
    }

    pub fn learning_rate(&self, processed: u64) -> f32 {
        let progress = (processed as f64 / self.total_positions().max(1) as f64).min(1.0) as f32;
        let lr = self.config.learning_rate - (self.config.learning_rate - self.config.min_lr) * progress;
        lr.max(self.config.min_lr)
    }

    /// One pass of skip-gram updates over a document. Returns the score of
    /// the last scored pair, which is non-finite iff the model diverged.
    pub fn train_document<R: Rng>(
        &self,
        tables: &mut TableViewMut<'_>,
        community: usize,
        doc: &[u32],
        lr: f32,
        rng: &mut R,
        scratch: &mut Scratch,
    ) -> f32 {
        let dim = tables.dim;
        let cfg = self.config;
        let mut filtered = core::mem::take(&mut scratch.filtered);
        let tokens: &[u32] = match &self.keep {
            Some(keep) => {
                filtered.clear();
                for &w in doc {
                    let p = keep[w as usize];
                    if p >= 1.0 || rng.random::<f32>() < p {
                        filtered.push(w);
                    }
                }
                &filtered
            }
            None => doc,
        };
        let mut last = 0.0f32;
        for (i, &w) in tokens.iter().enumerate() {
            let radius = rng.random_range(1..=cfg.window);
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(tokens.len() - 1);
            let row = w as usize * dim;
            for j in lo..=hi {
                if j == i {
                    continue;
                }
                let u = tokens[j];
                {
                    let main_row = &tables.main[row..row + dim];
                    let dev_row = &tables.deviations[community][row..row + dim];
                    for ((h, &m), &d) in scratch.h.iter_mut().zip(main_row).zip(dev_row) {
                        *h = m + d;
                    }
                }
                scratch.targets.clear();
                scratch.targets.push((u, true));
                for _ in 0..cfg.negatives {
                    let n = self.corpus.sample_negative(rng);
                    if n != u {
                        scratch.targets.push((n, false));
                    }
                }
                scratch.grad_h.iter_mut().for_each(|g| *g = 0.0);
                last = sgns::score_targets(&scratch.h, tables.context, &scratch.targets, lr, &mut scratch.grad_h);
                sgns::apply_input_step(
                    &mut tables.main[row..row + dim],
                    &mut tables.deviations[community][row..row + dim],
                    &scratch.grad_h,
                    lr,
                    cfg.l2_lambda,
                    cfg.l2_main,
                );
            }
        }
        scratch.filtered = filtered;
        last
    }
}

/// Initial tables: main rows uniform in `[-0.5/dim, 0.5/dim]`, deviation
/// and context tables zero.
pub fn initial_tables(
    vocab_len: usize,
    communities: usize,
    dim: usize,
    seed: u64,
) -> (Vec<f32>, Vec<Vec<f32>>, Vec<f32>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_7ab1e5);
    let half = 0.5 / dim as f32;
    let main = (0..vocab_len * dim).map(|_| rng.random_range(-half..half)).collect();
    let deviations = (0..communities).map(|_| vec![0.0; vocab_len * dim]).collect();
    (main, deviations, vec![0.0; vocab_len * dim])
}

/// Deterministic single-threaded training over every community of the
/// corpus.
pub fn train(corpus: &TrainingCorpus, vocab: &Vocabulary, cfg: &TrainingConfig) -> Result<EmbeddingSpace, SpaceError> {
    let trainer = SkipGramTrainer::new(corpus, cfg)?;
    let dim = cfg.dim;
    let (mut main, mut deviations, mut context) = initial_tables(vocab.len(), corpus.communities.len(), dim, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut scratch = Scratch::new(dim, cfg.negatives);
    let mut schedule: Vec<(usize, usize)> = corpus
        .documents
        .iter()
        .enumerate()
        .flat_map(|(c, docs)| (0..docs.len()).map(move |d| (c, d)))
        .collect();
    let mut processed = 0u64;
    {
        let mut tables = TableViewMut {
            main: &mut main,
            deviations: deviations.iter_mut().map(|d| d.as_mut_slice()).collect(),
            context: &mut context,
            dim,
        };
        for epoch in 0..cfg.epochs {
            schedule.shuffle(&mut rng);
            for &(c, d) in &schedule {
                let doc = &corpus.documents[c][d];
                let lr = trainer.learning_rate(processed);
                let score = trainer.train_document(&mut tables, c, doc, lr, &mut rng, &mut scratch);
                if !score.is_finite() {
                    return Err(SpaceError::Diverged {
                        epoch,
                        community: corpus.communities[c].name.clone(),
                        document: d,
                        score,
                    });
                }
                processed += doc.len() as u64;
            }
        }
    }
    EmbeddingSpace::from_parts(
        vocab.clone(),
        corpus.communities.clone(),
        dim,
        main,
        deviations,
        context,
        cfg.clone(),
    )
}

/// Convenience wrapper: trains one space over the given communities of a
/// store (typically a domain's members plus the global community).
pub fn train_space(
    store: &CorpusStore,
    vocab: &Vocabulary,
    communities: &[&str],
    cfg: &TrainingConfig,
) -> Result<EmbeddingSpace, SpaceError> {
    let corpus = TrainingCorpus::for_communities(store, vocab, communities)?;
    train(&corpus, vocab, cfg)
}

/// Largest ratio `|dev_c[w]| / |main[w]|` over all words and communities.
pub fn max_deviation_ratio(space: &EmbeddingSpace) -> f64 {
    let mut worst = 0.0f64;
    for id in 0..space.vocab().len() as u32 {
        let m = norm(space.main_row(id));
        for c in 0..space.communities().len() {
            let d = norm(space.deviation_row(c, id));
            if m > 0.0 {
                worst = worst.max(d / m);
            }
        }
    }
    worst
}

fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
}
