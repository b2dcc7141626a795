//! Word-form features: frequency, prominence, specificity (strongest bigram
//! collocation by log-likelihood ratio) and dissemination across authors.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use hashbrown::HashMap;
use thiserror::Error;

use crate::corpus::{CommunityCorpus, CorpusError, CorpusStore, DomainSpec, Vocabulary};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("word `{0}` does not occur in scope")]
    UnknownWord(String),
    #[error("community `{community}` is not a member of domain `{domain}`")]
    NotInDomain { community: String, domain: String },
    #[error("zero denominator for `{0}`")]
    ZeroDenominator(String),
    #[error("inconsistent contingency table: {0:?}")]
    InconsistentContingency(BigramContingency),
}

/// Where a feature is measured. Community scope still needs the domain,
/// since prominence compares against the sibling communities.
#[derive(Debug, Clone, PartialEq)]
pub enum Scope {
    Community { community: String, domain: DomainSpec },
    Domain(DomainSpec),
}

impl Scope {
    pub fn label(&self) -> String {
        match self {
            Scope::Community { community, .. } => community.clone(),
            Scope::Domain(d) => alloc::format!("domain:{}", d.name),
        }
    }

    fn inside(&self) -> Vec<&str> {
        match self {
            Scope::Community { community, .. } => vec![community.as_str()],
            Scope::Domain(d) => d.members.iter().map(|m| m.as_str()).collect(),
        }
    }

    fn validate(&self) -> Result<(), FeatureError> {
        if let Scope::Community { community, domain } = self {
            if !domain.contains(community) {
                return Err(FeatureError::NotInDomain {
                    community: community.clone(),
                    domain: domain.name.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Dissemination weighting. `InverseRelFreq` multiplies the user ratio by
/// `1 - RelFreq`; `LogFreqMinusOne` by `Freq - 1` (an earlier variant that
/// yields negative values).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DisseminationVariant {
    #[default]
    InverseRelFreq,
    LogFreqMinusOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeatureOptions {
    pub dissemination: DisseminationVariant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub word: String,
    pub freq: f64,
    pub pro: f64,
    pub spe_raw: f64,
    pub spe: f64,
    pub dis: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub scope: String,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn row(&self, word: &str) -> Option<&FeatureRow> {
        self.rows.iter().find(|r| r.word == word)
    }
}

/// 2x2 table for a bigram `(u, v)`: joint count, how often `u` fills the
/// first slot, how often `v` fills the second, and the bigram total.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BigramContingency {
    pub joint: u64,
    pub first: u64,
    pub second: u64,
    pub total: u64,
}

impl BigramContingency {
    fn cells(&self) -> Option<[f64; 4]> {
        let (n11, n1x, nx1, n) = (
            self.joint as i128,
            self.first as i128,
            self.second as i128,
            self.total as i128,
        );
        let n12 = n1x - n11;
        let n21 = nx1 - n11;
        let n22 = n - n1x - nx1 + n11;
        if n <= 0 || n12 < 0 || n21 < 0 || n22 < 0 {
            return None;
        }
        Some([n11 as f64, n12 as f64, n21 as f64, n22 as f64])
    }
}

/// Dunning's log-likelihood ratio `2 * sum O ln(O / E)` over the four
/// cells, with empty cells contributing zero.
pub fn llr_bigram(ct: BigramContingency) -> Result<f64, FeatureError> {
    let cells = ct.cells().ok_or(FeatureError::InconsistentContingency(ct))?;
    let n = ct.total as f64;
    let rows = [ct.first as f64, n - ct.first as f64];
    let cols = [ct.second as f64, n - ct.second as f64];
    let mut sum = 0.0;
    for (i, &o) in cells.iter().enumerate() {
        if o > 0.0 {
            let e = rows[i / 2] * cols[i % 2] / n;
            sum += o * (o / e).ln();
        }
    }
    Ok((2.0 * sum).max(0.0))
}

/// Adjacent-token bigram counts within documents of a scope.
#[derive(Debug, Clone)]
pub struct BigramIndex {
    pub pairs: HashMap<(u32, u32), u64>,
    pub first: Vec<u64>,
    pub second: Vec<u64>,
    pub total: u64,
}

impl BigramIndex {
    pub fn build<'a>(communities: impl IntoIterator<Item = &'a CommunityCorpus>, types: usize) -> Self {
        let mut pairs = HashMap::new();
        let mut first = vec![0u64; types];
        let mut second = vec![0u64; types];
        let mut total = 0;
        for c in communities {
            for doc in &c.documents {
                for w in doc.tokens.windows(2) {
                    *pairs.entry((w[0], w[1])).or_insert(0u64) += 1;
                    first[w[0] as usize] += 1;
                    second[w[1] as usize] += 1;
                    total += 1;
                }
            }
        }
        BigramIndex {
            pairs,
            first,
            second,
            total,
        }
    }

    pub fn contingency(&self, u: u32, v: u32) -> BigramContingency {
        BigramContingency {
            joint: self.pairs.get(&(u, v)).copied().unwrap_or(0),
            first: self.first[u as usize],
            second: self.second[v as usize],
            total: self.total,
        }
    }

    /// Highest LLR over all bigrams touching each type, indexed by type id.
    pub fn max_llr_per_type(&self) -> Vec<f64> {
        let mut best = vec![0.0f64; self.first.len()];
        for &(u, v) in self.pairs.keys() {
            let score = llr_bigram(self.contingency(u, v)).unwrap_or(0.0);
            let (u, v) = (u as usize, v as usize);
            if score > best[u] {
                best[u] = score;
            }
            if score > best[v] {
                best[v] = score;
            }
        }
        best
    }
}

struct ScopeCounts<'a> {
    store: &'a CorpusStore,
    inside: Vec<&'a CommunityCorpus>,
    outside: Vec<&'a CommunityCorpus>,
}

impl<'a> ScopeCounts<'a> {
    fn new(store: &'a CorpusStore, scope: &Scope) -> Result<Self, FeatureError> {
        scope.validate()?;
        let inside = scope
            .inside()
            .into_iter()
            .map(|c| store.community(c))
            .collect::<Result<Vec<_>, _>>()?;
        let outside = match scope {
            Scope::Community { community, domain } => domain
                .members
                .iter()
                .filter(|m| *m != community)
                .map(|m| store.community(m))
                .collect::<Result<Vec<_>, _>>()?,
            Scope::Domain(_) => vec![store.global()?],
        };
        Ok(ScopeCounts { store, inside, outside })
    }

    fn inside_count(&self, t: u32) -> u64 {
        self.inside.iter().map(|c| c.count(t)).sum()
    }

    fn outside_count(&self, t: u32) -> u64 {
        self.outside.iter().map(|c| c.count(t)).sum()
    }

    fn inside_total(&self) -> u64 {
        self.inside.iter().map(|c| c.total_tokens()).sum()
    }

    fn users(&self, t: u32) -> usize {
        if self.inside.len() == 1 {
            return self.inside[0].word_author_count(t);
        }
        let mut all: Vec<u32> = self.inside.iter().flat_map(|c| c.word_authors(t)).collect();
        all.sort_unstable();
        all.dedup();
        all.len()
    }

    fn all_users(&self) -> usize {
        if self.inside.len() == 1 {
            return self.inside[0].author_count();
        }
        let mut all: Vec<u32> = self.inside.iter().flat_map(|c| c.authors().iter().copied()).collect();
        all.sort_unstable();
        all.dedup();
        all.len()
    }

    fn type_id(&self, word: &str) -> Result<u32, FeatureError> {
        self.store
            .types
            .get(word)
            .ok_or_else(|| FeatureError::UnknownWord(word.to_string()))
    }

    fn freq(&self, t: u32, word: &str) -> Result<f64, FeatureError> {
        let n = self.inside_count(t);
        let total = self.inside_total();
        if n == 0 || total == 0 {
            return Err(FeatureError::UnknownWord(word.to_string()));
        }
        Ok((n as f64 / total as f64).log10())
    }

    fn pro(&self, t: u32, word: &str) -> Result<f64, FeatureError> {
        let inside = self.inside_count(t);
        let denom = inside + self.outside_count(t);
        if denom == 0 {
            return Err(FeatureError::ZeroDenominator(word.to_string()));
        }
        Ok(inside as f64 / denom as f64)
    }

    fn dis(&self, t: u32, word: &str, variant: DisseminationVariant) -> Result<f64, FeatureError> {
        let users = self.all_users();
        if users == 0 {
            return Err(FeatureError::ZeroDenominator(word.to_string()));
        }
        let ratio = self.users(t) as f64 / users as f64;
        let weight = match variant {
            DisseminationVariant::InverseRelFreq => {
                let total = self.inside_total();
                if total == 0 {
                    return Err(FeatureError::ZeroDenominator(word.to_string()));
                }
                1.0 - self.inside_count(t) as f64 / total as f64
            }
            DisseminationVariant::LogFreqMinusOne => self.freq(t, word)? - 1.0,
        };
        Ok(ratio * weight)
    }
}

/// `log10(N^w / N)` within the scope (pooled over members for a domain).
pub fn frequency(store: &CorpusStore, word: &str, scope: &Scope) -> Result<f64, FeatureError> {
    let s = ScopeCounts::new(store, scope)?;
    let t = s.type_id(word)?;
    s.freq(t, word)
}

/// Share of the word's occurrences that fall inside the scope: against
/// sibling communities for a community, against the global community for a
/// domain.
pub fn prominence(store: &CorpusStore, word: &str, scope: &Scope) -> Result<f64, FeatureError> {
    let s = ScopeCounts::new(store, scope)?;
    let t = s.type_id(word)?;
    s.pro(t, word)
}

pub fn dissemination(
    store: &CorpusStore,
    word: &str,
    scope: &Scope,
    variant: DisseminationVariant,
) -> Result<f64, FeatureError> {
    let s = ScopeCounts::new(store, scope)?;
    let t = s.type_id(word)?;
    s.dis(t, word, variant)
}

/// Raw specificity of `word` and its min-max normalization over the
/// vocabulary within the scope.
pub fn specificity(
    store: &CorpusStore,
    vocab: &Vocabulary,
    word: &str,
    scope: &Scope,
) -> Result<(f64, f64), FeatureError> {
    let s = ScopeCounts::new(store, scope)?;
    let t = s.type_id(word)?;
    if s.inside_count(t) == 0 {
        return Err(FeatureError::UnknownWord(word.to_string()));
    }
    let index = BigramIndex::build(s.inside.iter().copied(), store.types.len());
    let best = index.max_llr_per_type();
    let (lo, hi) = vocab_range(store, vocab, &best);
    Ok((best[t as usize], normalize(best[t as usize], lo, hi)))
}

fn vocab_range(store: &CorpusStore, vocab: &Vocabulary, best: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for w in vocab.words() {
        if let Some(t) = store.types.get(w) {
            let v = best[t as usize];
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (lo, hi)
}

fn normalize(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// All four features for every vocabulary word in one scope.
pub fn feature_table(
    store: &CorpusStore,
    vocab: &Vocabulary,
    scope: &Scope,
    options: FeatureOptions,
) -> Result<FeatureTable, FeatureError> {
    let s = ScopeCounts::new(store, scope)?;
    let index = BigramIndex::build(s.inside.iter().copied(), store.types.len());
    let best = index.max_llr_per_type();
    let (lo, hi) = vocab_range(store, vocab, &best);
    let mut rows = Vec::with_capacity(vocab.len());
    for word in vocab.words() {
        let t = s.type_id(word)?;
        rows.push(FeatureRow {
            word: word.clone(),
            freq: s.freq(t, word)?,
            pro: s.pro(t, word)?,
            spe_raw: best[t as usize],
            spe: normalize(best[t as usize], lo, hi),
            dis: s.dis(t, word, options.dissemination)?,
        });
    }
    Ok(FeatureTable {
        scope: scope.label(),
        rows,
    })
}
