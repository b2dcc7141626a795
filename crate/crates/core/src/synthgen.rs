//! Synthetic multi-community corpora with planted semantic shifts.
//!
//! Text comes from a mixture of unigram topics. Vocabulary word `i` lives in
//! topic `i % topics` and each topic is Zipfian over its own words, blended
//! with a corpus-wide Zipfian background. Every document draws one topic.
//!
//! Planted words are removed from the topic distributions and written into
//! documents by replacing tokens, so their counts are exact. In an affected
//! community each occurrence goes to a document of the word's shifted topic
//! with probability `alpha`, otherwise to its home topic.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Geometric};
use thiserror::Error;

use crate::corpus::Record;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("token budget {budget} is below 10x the vocabulary size {vocab}")]
    BudgetTooSmall { budget: usize, vocab: usize },
    #[error("need at least one member community")]
    NoCommunities,
    #[error("duplicate community `{0}`")]
    DuplicateCommunity(String),
    #[error("need at least 2 topics and at most the vocabulary size")]
    Topics,
    #[error("need at least one author per community")]
    NoAuthors,
    #[error("mean document length must be at least 1")]
    DocumentLength,
    #[error("planted word `{0}` is not in the vocabulary")]
    UnknownWord(String),
    #[error("word `{0}` planted twice")]
    DuplicatePlanted(String),
    #[error("planted word `{word}` targets unknown community `{community}`")]
    UnknownCommunity { word: String, community: String },
    #[error("alpha for `{0}` outside [0, 1]")]
    Alpha(String),
    #[error("prominence target for `{0}` outside (0, 1)")]
    Prominence(String),
    #[error("dissemination target for `{0}` outside (0, 1]")]
    Dissemination(String),
    #[error("prominence target for `{0}` leaves no occurrences")]
    ZeroCount(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShiftLevel {
    /// Shifted in every member of the domain.
    Domain,
    /// Shifted in one member only.
    Community(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedWord {
    pub word: String,
    pub level: ShiftLevel,
    /// Share of affected-community occurrences drawn from the shifted topic.
    pub alpha: f64,
    /// Target Pro at the word's level (domain vs global, or community vs
    /// siblings). `None` keeps the natural count everywhere.
    pub prominence: Option<f64>,
    /// Target share of authors using the word in each affected community.
    pub dissemination: Option<f64>,
}

impl PlantedWord {
    pub fn domain(word: impl Into<String>, alpha: f64) -> Self {
        PlantedWord {
            word: word.into(),
            level: ShiftLevel::Domain,
            alpha,
            prominence: None,
            dissemination: None,
        }
    }

    pub fn community(word: impl Into<String>, community: impl Into<String>, alpha: f64) -> Self {
        PlantedWord {
            word: word.into(),
            level: ShiftLevel::Community(community.into()),
            alpha,
            prominence: None,
            dissemination: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftScenario {
    pub vocab_size: usize,
    /// Member communities of the single domain.
    pub communities: Vec<String>,
    pub global: String,
    pub domain: String,
    pub tokens_per_community: usize,
    pub authors_per_community: usize,
    pub topics: usize,
    pub zipf_exponent: f64,
    /// Share of every topic taken by the corpus-wide background.
    pub background: f64,
    pub mean_doc_len: f64,
    pub planted: Vec<PlantedWord>,
    /// Words that occur in one community only, per member.
    pub jargon_per_community: usize,
    pub jargon_count: usize,
    pub seed: u64,
}

impl Default for ShiftScenario {
    fn default() -> Self {
        ShiftScenario {
            vocab_size: 2000,
            communities: vec!["c0".into(), "c1".into(), "c2".into()],
            global: "g".into(),
            domain: "d".into(),
            tokens_per_community: 1_000_000,
            authors_per_community: 200,
            topics: 20,
            zipf_exponent: 1.0,
            background: 0.3,
            mean_doc_len: 20.0,
            planted: Vec::new(),
            jargon_per_community: 0,
            jargon_count: 50,
            seed: 1,
        }
    }
}

/// Name of vocabulary word `i`.
pub fn word_name(i: usize) -> String {
    format!("w{i:04}")
}

/// Name of jargon word `i` of member `community` (by position).
pub fn jargon_name(community: usize, i: usize) -> String {
    format!("j{community}x{i}")
}

pub fn author_name(community: &str, i: usize) -> String {
    format!("{community}_u{i}")
}

fn word_index(word: &str, vocab: usize) -> Option<usize> {
    let i: usize = word.strip_prefix('w')?.parse().ok()?;
    (i < vocab && word_name(i) == word).then_some(i)
}

impl ShiftScenario {
    /// Home topic of vocabulary word `i`.
    pub fn home_topic(&self, i: usize) -> usize {
        i % self.topics
    }

    /// Topic an affected community uses for word `i`.
    pub fn shifted_topic(&self, i: usize) -> usize {
        (i + self.topics / 2) % self.topics
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.communities.is_empty() {
            return Err(SynthError::NoCommunities);
        }
        let mut names: Vec<&str> = self.communities.iter().map(|s| s.as_str()).collect();
        names.push(&self.global);
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(SynthError::DuplicateCommunity(String::from(*n)));
            }
        }
        if self.tokens_per_community < 10 * self.vocab_size {
            return Err(SynthError::BudgetTooSmall {
                budget: self.tokens_per_community,
                vocab: self.vocab_size,
            });
        }
        if self.topics < 2 || self.topics > self.vocab_size {
            return Err(SynthError::Topics);
        }
        if self.authors_per_community == 0 {
            return Err(SynthError::NoAuthors);
        }
        if !(self.mean_doc_len >= 1.0) {
            return Err(SynthError::DocumentLength);
        }
        for (k, p) in self.planted.iter().enumerate() {
            let w = &p.word;
            if word_index(w, self.vocab_size).is_none() {
                return Err(SynthError::UnknownWord(w.clone()));
            }
            if self.planted[..k].iter().any(|q| &q.word == w) {
                return Err(SynthError::DuplicatePlanted(w.clone()));
            }
            if let ShiftLevel::Community(c) = &p.level {
                if !self.communities.contains(c) {
                    return Err(SynthError::UnknownCommunity {
                        word: w.clone(),
                        community: c.clone(),
                    });
                }
            }
            if !(0.0..=1.0).contains(&p.alpha) {
                return Err(SynthError::Alpha(w.clone()));
            }
            if let Some(pr) = p.prominence {
                if !(pr > 0.0 && pr < 1.0) {
                    return Err(SynthError::Prominence(w.clone()));
                }
            }
            if let Some(d) = p.dissemination {
                if !(d > 0.0 && d <= 1.0) {
                    return Err(SynthError::Dissemination(w.clone()));
                }
            }
        }
        Ok(())
    }

    /// Mixture weight of every vocabulary word with planted words included.
    fn marginal_weights(&self) -> Vec<Vec<f64>> {
        let v = self.vocab_size;
        let k = self.topics;
        let s = self.zipf_exponent;
        let bg: Vec<f64> = (0..v).map(|i| 1.0 / ((i + 1) as f64).powf(s)).collect();
        let bg_sum: f64 = bg.iter().sum();
        (0..k)
            .map(|t| {
                let members: Vec<usize> = (t..v).step_by(k).collect();
                let zsum: f64 = (0..members.len()).map(|r| 1.0 / ((r + 1) as f64).powf(s)).sum();
                let mut w: Vec<f64> = bg.iter().map(|b| self.background * b / bg_sum).collect();
                for (r, &i) in members.iter().enumerate() {
                    w[i] += (1.0 - self.background) / ((r + 1) as f64).powf(s) / zsum;
                }
                w
            })
            .collect()
    }

    /// Expected share of word `i` in a community (topics uniform).
    pub fn natural_rate(&self, i: usize) -> f64 {
        let w = self.marginal_weights();
        w.iter().map(|t| t[i]).sum::<f64>() / self.topics as f64
    }

    /// Count multiplier applied in affected communities to reach the
    /// prominence target, relative to the natural count elsewhere.
    pub fn prominence_multiplier(&self, p: &PlantedWord) -> f64 {
        let d = self.communities.len() as f64;
        match p.prominence {
            None => 1.0,
            Some(pr) => match p.level {
                ShiftLevel::Domain => pr / ((1.0 - pr) * d),
                ShiftLevel::Community(_) => pr * (d - 1.0) / (1.0 - pr),
            },
        }
    }
}

struct Doc {
    topic: usize,
    author: usize,
    tokens: Vec<u32>,
    locked: Vec<bool>,
}

/// Generates the records of every member community followed by the
/// global community. Output is a pure function of the scenario.
pub fn generate(scenario: &ShiftScenario) -> Result<Vec<Record>, SynthError> {
    scenario.validate()?;
    let sc = scenario;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let planted_idx: Vec<usize> = sc
        .planted
        .iter()
        .map(|p| word_index(&p.word, sc.vocab_size).unwrap())
        .collect();
    let marginal = sc.marginal_weights();
    let natural: Vec<f64> = planted_idx
        .iter()
        .map(|&i| marginal.iter().map(|t| t[i]).sum::<f64>() / sc.topics as f64)
        .collect();
    let tables: Vec<WeightedAliasIndex<f64>> = marginal
        .into_iter()
        .map(|mut w| {
            for &i in &planted_idx {
                w[i] = 0.0;
            }
            WeightedAliasIndex::new(w).expect("topic weights")
        })
        .collect();
    let words: Vec<String> = (0..sc.vocab_size).map(word_name).collect();
    let geo = Geometric::new(1.0 / sc.mean_doc_len).expect("document length");

    let names: Vec<&String> = sc.communities.iter().chain(core::iter::once(&sc.global)).collect();
    let mut out = Vec::new();
    for (ci, &name) in names.iter().enumerate() {
        let is_member = ci < sc.communities.len();
        let mut docs = Vec::new();
        let mut remaining = sc.tokens_per_community;
        while remaining > 0 {
            let len = (1 + geo.sample(&mut rng) as usize).min(remaining);
            remaining -= len;
            let topic = rng.random_range(0..sc.topics);
            let author = rng.random_range(0..sc.authors_per_community);
            let tokens = (0..len).map(|_| tables[topic].sample(&mut rng) as u32).collect();
            docs.push(Doc {
                topic,
                author,
                tokens,
                locked: vec![false; len],
            });
        }
        let mut by_topic: Vec<Vec<usize>> = vec![Vec::new(); sc.topics];
        for (d, doc) in docs.iter().enumerate() {
            by_topic[doc.topic].push(d);
        }

        for (p, (&i, &rate)) in sc.planted.iter().zip(planted_idx.iter().zip(&natural)) {
            let affected = is_member
                && match &p.level {
                    ShiftLevel::Domain => true,
                    ShiftLevel::Community(c) => c == name,
                };
            let base = rate * sc.tokens_per_community as f64;
            let count = if affected {
                (base * sc.prominence_multiplier(p)).round() as usize
            } else {
                base.round() as usize
            };
            if count == 0 {
                return Err(SynthError::ZeroCount(p.word.clone()));
            }
            let authors = match (affected, p.dissemination) {
                (true, Some(r)) => ((r * sc.authors_per_community as f64).ceil() as usize).max(1),
                _ => sc.authors_per_community,
            };
            let home = sc.home_topic(i);
            let shifted = sc.shifted_topic(i);
            let eligible = |topic: usize, docs: &[Doc]| -> Vec<usize> {
                by_topic[topic]
                    .iter()
                    .copied()
                    .filter(|&d| docs[d].author < authors && docs[d].locked.iter().any(|l| !l))
                    .collect()
            };
            let pools = [eligible(home, &docs), eligible(shifted, &docs)];
            let fallback: Vec<usize> = (0..docs.len()).filter(|&d| docs[d].author < authors).collect();
            for _ in 0..count {
                let u: f64 = rng.random();
                let pool = if affected && u < p.alpha { &pools[1] } else { &pools[0] };
                let pool = if pool.is_empty() { &fallback } else { pool };
                place(&mut docs, pool, i as u32, &mut rng);
            }
        }

        if is_member {
            let all: Vec<usize> = (0..docs.len()).collect();
            for j in 0..sc.jargon_per_community {
                let id = (sc.vocab_size + j) as u32;
                for _ in 0..sc.jargon_count {
                    place(&mut docs, &all, id, &mut rng);
                }
            }
        }

        for doc in docs {
            out.push(Record {
                community: name.clone(),
                author: author_name(name, doc.author),
                body: render(&doc.tokens, &words, ci),
            });
        }
    }
    Ok(out)
}

fn render(tokens: &[u32], words: &[String], community: usize) -> String {
    let mut body = String::with_capacity(tokens.len() * 6);
    for (k, &t) in tokens.iter().enumerate() {
        if k > 0 {
            body.push(' ');
        }
        match words.get(t as usize) {
            Some(w) => body.push_str(w),
            None => body.push_str(&jargon_name(community, t as usize - words.len())),
        }
    }
    body
}

/// Overwrites a random unlocked token of a random document from `pool`.
fn place<R: Rng>(docs: &mut [Doc], pool: &[usize], word: u32, rng: &mut R) {
    for _ in 0..1000 {
        let &d = pool.choose(rng).expect("non-empty pool");
        let doc = &mut docs[d];
        let free: Vec<usize> = (0..doc.tokens.len()).filter(|&t| !doc.locked[t]).collect();
        if let Some(&t) = free.choose(rng) {
            doc.tokens[t] = word;
            doc.locked[t] = true;
            return;
        }
    }
    panic!("no free position for word {word}");
}
