//! Community-tagged corpora: tokenization, ingestion, size equalization and
//! the shared vocabulary.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use hashbrown::HashMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("community name must be nonempty")]
    EmptyCommunityName,
    #[error("community `{0}` declared more than once")]
    DuplicateCommunity(String),
    #[error("expected exactly one global community, found {0}")]
    GlobalCount(usize),
    #[error("unknown community `{0}`")]
    UnknownCommunity(String),
    #[error("domain `{0}` needs at least two member communities")]
    DomainTooSmall(String),
    #[error("domain `{domain}` lists the global community `{community}` as a member")]
    GlobalInDomain { domain: String, community: String },
    #[error("insufficient corpus: community `{community}` has {available} tokens, {requested} requested")]
    InsufficientCorpus {
        community: String,
        available: u64,
        requested: u64,
    },
    #[error("store has no global community")]
    MissingGlobal,
    #[error("store has no member community")]
    MissingMember,
    #[error("empty shared vocabulary at min_count {0}")]
    EmptyVocabulary(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CommunityKind {
    Member,
    Global,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CommunityId {
    pub name: String,
    pub kind: CommunityKind,
}

impl CommunityId {
    pub fn member(name: impl Into<String>) -> Self {
        CommunityId {
            name: name.into(),
            kind: CommunityKind::Member,
        }
    }

    pub fn global(name: impl Into<String>) -> Self {
        CommunityId {
            name: name.into(),
            kind: CommunityKind::Global,
        }
    }

    pub fn is_global(&self) -> bool {
        self.kind == CommunityKind::Global
    }
}

/// A named set of member communities sharing a topic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainSpec {
    pub name: String,
    pub members: Vec<String>,
}

impl DomainSpec {
    pub fn new(name: impl Into<String>, members: &[&str]) -> Self {
        DomainSpec {
            name: name.into(),
            members: members.iter().map(|m| m.to_string()).collect(),
        }
    }

    pub fn contains(&self, community: &str) -> bool {
        self.members.iter().any(|m| m == community)
    }
}

/// Community declarations plus tokenizer options. Each community may list
/// the raw source names (e.g. forum names) that map onto it; an empty list
/// means the community name itself is the only source.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusConfig {
    pub communities: Vec<(CommunityId, Vec<String>)>,
    pub domains: Vec<DomainSpec>,
    pub lowercase: bool,
}

impl CorpusConfig {
    pub fn new(communities: Vec<CommunityId>, domains: Vec<DomainSpec>) -> Self {
        CorpusConfig {
            communities: communities.into_iter().map(|c| (c, Vec::new())).collect(),
            domains,
            lowercase: true,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut seen: Vec<&str> = Vec::new();
        let mut globals = 0;
        for (c, _) in &self.communities {
            if c.name.is_empty() {
                return Err(CorpusError::EmptyCommunityName);
            }
            if seen.contains(&c.name.as_str()) {
                return Err(CorpusError::DuplicateCommunity(c.name.clone()));
            }
            seen.push(&c.name);
            if c.is_global() {
                globals += 1;
            }
        }
        if globals != 1 {
            return Err(CorpusError::GlobalCount(globals));
        }
        for d in &self.domains {
            if d.members.len() < 2 {
                return Err(CorpusError::DomainTooSmall(d.name.clone()));
            }
            for m in &d.members {
                match self.communities.iter().find(|(c, _)| &c.name == m) {
                    None => return Err(CorpusError::UnknownCommunity(m.clone())),
                    Some((c, _)) if c.is_global() => {
                        return Err(CorpusError::GlobalInDomain {
                            domain: d.name.clone(),
                            community: m.clone(),
                        })
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    fn source_map(&self) -> HashMap<&str, usize> {
        let mut map = HashMap::new();
        for (i, (c, sources)) in self.communities.iter().enumerate() {
            if sources.is_empty() {
                map.insert(c.name.as_str(), i);
            }
            for s in sources {
                map.insert(s.as_str(), i);
            }
        }
        map
    }
}

fn is_punctuation(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Splits on whitespace and emits every punctuation character as its own
/// token. Lowercasing happens before splitting.
pub fn tokenize(text: &str, lowercase: bool) -> Vec<String> {
    let lowered;
    let text = if lowercase {
        lowered = text.to_lowercase();
        lowered.as_str()
    } else {
        text
    };
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let mut start = None;
        for (i, ch) in chunk.char_indices() {
            if is_punctuation(ch) {
                if let Some(s) = start.take() {
                    tokens.push(chunk[s..i].to_string());
                }
                tokens.push(chunk[i..i + ch.len_utf8()].to_string());
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            tokens.push(chunk[s..].to_string());
        }
    }
    tokens
}

/// One raw input record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub community: String,
    pub author: String,
    pub body: String,
}

/// String interner; ids are dense and assigned in first-seen order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    items: Vec<String>,
    index: HashMap<String, u32>,
}

impl Lexicon {
    pub fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.index.get(s) {
            return id;
        }
        let id = self.items.len() as u32;
        self.items.push(s.to_string());
        self.index.insert(s.to_string(), id);
        id
    }

    pub fn get(&self, s: &str) -> Option<u32> {
        self.index.get(s).copied()
    }

    pub fn resolve(&self, id: u32) -> &str {
        &self.items[id as usize]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn from_items(items: Vec<String>) -> Self {
        let index = items.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect();
        Lexicon { items, index }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    /// Interned author; `None` for deleted or anonymous posts.
    pub author: Option<u32>,
    /// Interned token types.
    pub tokens: Vec<u32>,
}

/// One community's documents and the counts derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityCorpus {
    pub id: CommunityId,
    pub documents: Vec<Document>,
    total_tokens: u64,
    counts: Vec<u64>,
    /// Sorted, deduplicated (type, author) pairs.
    word_authors: Vec<(u32, u32)>,
    /// Sorted distinct authors.
    authors: Vec<u32>,
}

impl CommunityCorpus {
    pub fn new(id: CommunityId, documents: Vec<Document>) -> Self {
        let mut corpus = CommunityCorpus {
            id,
            documents,
            total_tokens: 0,
            counts: Vec::new(),
            word_authors: Vec::new(),
            authors: Vec::new(),
        };
        corpus.rebuild();
        corpus
    }

    fn rebuild(&mut self) {
        self.total_tokens = 0;
        self.counts.clear();
        self.word_authors.clear();
        self.authors.clear();
        for doc in &self.documents {
            self.total_tokens += doc.tokens.len() as u64;
            for &t in &doc.tokens {
                let t = t as usize;
                if t >= self.counts.len() {
                    self.counts.resize(t + 1, 0);
                }
                self.counts[t] += 1;
            }
            if let Some(a) = doc.author {
                self.authors.push(a);
                self.word_authors.extend(doc.tokens.iter().map(|&t| (t, a)));
            }
        }
        self.authors.sort_unstable();
        self.authors.dedup();
        self.word_authors.sort_unstable();
        self.word_authors.dedup();
    }

    /// N_c.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// N^w_c by interned type id.
    pub fn count(&self, word: u32) -> u64 {
        self.counts.get(word as usize).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// U_c.
    pub fn author_count(&self) -> usize {
        self.authors.len()
    }

    pub fn authors(&self) -> &[u32] {
        &self.authors
    }

    /// The authors who used `word`, sorted.
    pub fn word_authors(&self, word: u32) -> impl Iterator<Item = u32> + '_ {
        let start = self.word_authors.partition_point(|&(w, _)| w < word);
        self.word_authors[start..]
            .iter()
            .take_while(move |&&(w, _)| w == word)
            .map(|&(_, a)| a)
    }

    /// U^w_c.
    pub fn word_author_count(&self, word: u32) -> usize {
        self.word_authors(word).count()
    }
}

/// Tallies of records that did not make it into the store.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestTally {
    pub accepted: u64,
    pub unconfigured: u64,
    pub malformed: u64,
    pub empty: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStore {
    pub types: Lexicon,
    pub author_names: Lexicon,
    pub communities: Vec<CommunityCorpus>,
    pub domains: Vec<DomainSpec>,
    pub tally: IngestTally,
}

impl CorpusStore {
    pub fn empty(config: &CorpusConfig) -> Result<Self, CorpusError> {
        config.validate()?;
        Ok(CorpusStore {
            types: Lexicon::default(),
            author_names: Lexicon::default(),
            communities: config
                .communities
                .iter()
                .map(|(c, _)| CommunityCorpus::new(c.clone(), Vec::new()))
                .collect(),
            domains: config.domains.clone(),
            tally: IngestTally::default(),
        })
    }

    pub fn community_index(&self, name: &str) -> Result<usize, CorpusError> {
        self.communities
            .iter()
            .position(|c| c.id.name == name)
            .ok_or_else(|| CorpusError::UnknownCommunity(name.to_string()))
    }

    pub fn community(&self, name: &str) -> Result<&CommunityCorpus, CorpusError> {
        Ok(&self.communities[self.community_index(name)?])
    }

    pub fn global(&self) -> Result<&CommunityCorpus, CorpusError> {
        self.communities
            .iter()
            .find(|c| c.id.is_global())
            .ok_or(CorpusError::MissingGlobal)
    }

    pub fn domain(&self, name: &str) -> Option<&DomainSpec> {
        self.domains.iter().find(|d| d.name == name)
    }

    /// Count of `word` (a surface string) in `community`; 0 when unseen.
    pub fn word_count(&self, word: &str, community: &str) -> Result<u64, CorpusError> {
        let c = self.community(community)?;
        Ok(self.types.get(word).map_or(0, |id| c.count(id)))
    }

    /// Adds one record. Returns false when the record was skipped.
    pub fn add_record(&mut self, config: &CorpusConfig, record: &Record) -> bool {
        let sources = config.source_map();
        self.add_with_sources(&sources, config.lowercase, record)
    }

    fn add_with_sources(&mut self, sources: &HashMap<&str, usize>, lowercase: bool, record: &Record) -> bool {
        let Some(&ci) = sources.get(record.community.as_str()) else {
            self.tally.unconfigured += 1;
            return false;
        };
        let tokens = tokenize(&record.body, lowercase);
        if tokens.is_empty() {
            self.tally.empty += 1;
            return false;
        }
        let tokens = tokens.iter().map(|t| self.types.intern(t)).collect();
        let author = if record.author.is_empty() {
            None
        } else {
            Some(self.author_names.intern(&record.author))
        };
        self.communities[ci].documents.push(Document { author, tokens });
        self.tally.accepted += 1;
        true
    }

    fn rebuild_counts(&mut self) {
        for c in &mut self.communities {
            c.rebuild();
        }
    }

    /// Keeps only the listed communities (plus nothing else); used to carve
    /// a per-domain view out of a workspace store.
    pub fn restrict(&self, names: &[&str]) -> Result<CorpusStore, CorpusError> {
        let mut communities = Vec::with_capacity(names.len());
        for n in names {
            communities.push(self.community(n)?.clone());
        }
        Ok(CorpusStore {
            types: self.types.clone(),
            author_names: self.author_names.clone(),
            communities,
            domains: self
                .domains
                .iter()
                .filter(|d| d.members.iter().all(|m| names.contains(&m.as_str())))
                .cloned()
                .collect(),
            tally: self.tally,
        })
    }
}

/// Builds a store from a stream of records. Malformed records arrive as
/// `Err` and are only tallied.
pub fn ingest<I, E>(records: I, config: &CorpusConfig) -> Result<CorpusStore, CorpusError>
where
    I: IntoIterator<Item = Result<Record, E>>,
{
    let mut store = CorpusStore::empty(config)?;
    let sources = config.source_map();
    for r in records {
        match r {
            Ok(record) => {
                store.add_with_sources(&sources, config.lowercase, &record);
            }
            Err(_) => store.tally.malformed += 1,
        }
    }
    store.rebuild_counts();
    Ok(store)
}

/// Retains whole documents of `community`, drawn uniformly without
/// replacement, until the retained token count first reaches
/// `target_tokens`. Retained documents keep their original order.
pub fn subsample(
    store: &CorpusStore,
    community: &str,
    target_tokens: u64,
    seed: u64,
) -> Result<CorpusStore, CorpusError> {
    let ci = store.community_index(community)?;
    let corpus = &store.communities[ci];
    if target_tokens > corpus.total_tokens() {
        return Err(CorpusError::InsufficientCorpus {
            community: community.to_string(),
            available: corpus.total_tokens(),
            requested: target_tokens,
        });
    }
    let mut order: Vec<usize> = (0..corpus.documents.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut keep = alloc::vec![false; corpus.documents.len()];
    let mut acc = 0u64;
    for &i in &order {
        if acc >= target_tokens {
            break;
        }
        keep[i] = true;
        acc += corpus.documents[i].tokens.len() as u64;
    }
    let documents = corpus
        .documents
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(d, _)| d.clone())
        .collect();
    let mut out = store.clone();
    out.communities[ci] = CommunityCorpus::new(corpus.id.clone(), documents);
    Ok(out)
}

/// Bidirectional word/id mapping over the shared vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
    min_count: u64,
}

impl Vocabulary {
    pub fn from_words(words: Vec<String>, min_count: u64) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        Vocabulary {
            words,
            index,
            min_count,
        }
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// Maps store type ids onto vocabulary ids.
    pub fn type_map(&self, types: &Lexicon) -> Vec<Option<u32>> {
        types.items().iter().map(|t| self.id(t)).collect()
    }
}

/// Words with at least `min_count` occurrences in every community of the
/// store, ordered by descending total count then lexicographically.
pub fn build_vocabulary(store: &CorpusStore, min_count: u64) -> Result<Vocabulary, CorpusError> {
    if !store.communities.iter().any(|c| c.id.is_global()) {
        return Err(CorpusError::MissingGlobal);
    }
    if !store.communities.iter().any(|c| !c.id.is_global()) {
        return Err(CorpusError::MissingMember);
    }
    let mut selected: Vec<(u64, &str)> = Vec::new();
    for t in 0..store.types.len() as u32 {
        let mut total = 0u64;
        let mut shared = true;
        for c in &store.communities {
            let n = c.count(t);
            if n < min_count || n == 0 {
                shared = false;
                break;
            }
            total += n;
        }
        if shared {
            selected.push((total, store.types.resolve(t)));
        }
    }
    if selected.is_empty() {
        return Err(CorpusError::EmptyVocabulary(min_count));
    }
    selected.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    Ok(Vocabulary::from_words(
        selected.into_iter().map(|(_, w)| w.to_string()).collect(),
        min_count,
    ))
}

/// Per-word totals across all communities, keyed by surface form.
pub fn pooled_counts(store: &CorpusStore, communities: &[&str]) -> Result<BTreeMap<String, u64>, CorpusError> {
    let mut out = BTreeMap::new();
    for name in communities {
        let c = store.community(name)?;
        for (t, &n) in c.counts().iter().enumerate() {
            if n > 0 {
                *out.entry(store.types.resolve(t as u32).to_string()).or_insert(0) += n;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn config() -> CorpusConfig {
        CorpusConfig::new(
            vec![
                CommunityId::member("a"),
                CommunityId::member("b"),
                CommunityId::global("g"),
            ],
            vec![DomainSpec::new("d", &["a", "b"])],
        )
    }

    fn rec(c: &str, a: &str, body: &str) -> Result<Record, ()> {
        Ok(Record {
            community: c.into(),
            author: a.into(),
            body: body.into(),
        })
    }

    #[test]
    fn tokenizer_examples() {
        assert!(tokenize("", true).is_empty());
        assert_eq!(
            tokenize("Take the ball, cross towards the striker", true),
            ["take", "the", "ball", ",", "cross", "towards", "the", "striker"]
        );
        assert_eq!(tokenize("C++!", true), ["c", "+", "+", "!"]);
        assert_eq!(tokenize("C++!", false), ["C", "+", "+", "!"]);
        assert_eq!(tokenize("  a\t\nb  ", true), ["a", "b"]);
    }

    #[test]
    fn single_record_counts() {
        let store = ingest(vec![rec("a", "u1", "x x")], &config()).unwrap();
        let a = store.community("a").unwrap();
        let x = store.types.get("x").unwrap();
        assert_eq!(a.total_tokens(), 2);
        assert_eq!(a.count(x), 2);
        assert_eq!(a.word_author_count(x), 1);
        assert_eq!(a.author_count(), 1);
    }

    #[test]
    fn no_records_gives_empty_store() {
        let store = ingest(Vec::<Result<Record, ()>>::new(), &config()).unwrap();
        assert!(store.communities.iter().all(|c| c.total_tokens() == 0));
        assert!(store.communities.iter().all(|c| c.author_count() == 0));
    }

    #[test]
    fn author_sets_union() {
        let store = ingest(
            vec![rec("a", "u1", "w y"), rec("a", "u2", "w"), rec("a", "u1", "w")],
            &config(),
        )
        .unwrap();
        let w = store.types.get("w").unwrap();
        let a = store.community("a").unwrap();
        assert_eq!(a.word_author_count(w), 2);
        assert_eq!(a.word_authors(w).collect::<Vec<_>>().len(), 2);
    }

    #[test]
    fn anonymous_tokens_count_but_not_authors() {
        let store = ingest(vec![rec("a", "", "w w"), rec("a", "u", "z")], &config()).unwrap();
        let a = store.community("a").unwrap();
        assert_eq!(a.total_tokens(), 3);
        assert_eq!(a.author_count(), 1);
        assert_eq!(a.word_author_count(store.types.get("w").unwrap()), 0);
    }

    #[test]
    fn skipped_and_malformed_tallies() {
        let store = ingest(
            vec![rec("zzz", "u", "w"), Err(()), rec("a", "u", "   "), rec("a", "u", "w")],
            &config(),
        )
        .unwrap();
        assert_eq!(store.tally.unconfigured, 1);
        assert_eq!(store.tally.malformed, 1);
        assert_eq!(store.tally.empty, 1);
        assert_eq!(store.tally.accepted, 1);
    }

    #[test]
    fn source_names_map_onto_communities() {
        let mut cfg = config();
        cfg.communities[0].1 = vec!["LiverpoolFC".into()];
        let store = ingest(vec![rec("LiverpoolFC", "u", "w"), rec("a", "u", "w")], &cfg).unwrap();
        assert_eq!(store.community("a").unwrap().total_tokens(), 1);
        assert_eq!(store.tally.unconfigured, 1);
    }

    #[test]
    fn config_validation() {
        let mut cfg = config();
        cfg.communities.push((CommunityId::global("g2"), vec![]));
        assert_eq!(cfg.validate(), Err(CorpusError::GlobalCount(2)));
        let mut cfg = config();
        cfg.domains[0].members = vec!["a".into()];
        assert!(matches!(cfg.validate(), Err(CorpusError::DomainTooSmall(_))));
        let mut cfg = config();
        cfg.domains[0].members.push("g".into());
        assert!(matches!(cfg.validate(), Err(CorpusError::GlobalInDomain { .. })));
        let mut cfg = config();
        cfg.communities.push((CommunityId::member("a"), vec![]));
        assert!(matches!(cfg.validate(), Err(CorpusError::DuplicateCommunity(_))));
    }

    fn hundred_docs() -> CorpusStore {
        let records: Vec<_> = (0..100).map(|i| rec("a", "u", &alloc::format!("t{i}"))).collect();
        ingest(records, &config()).unwrap()
    }

    #[test]
    fn subsample_full_and_empty() {
        let store = hundred_docs();
        let full = subsample(&store, "a", 100, 1).unwrap();
        assert_eq!(full, store);
        let empty = subsample(&store, "a", 0, 1).unwrap();
        assert_eq!(empty.community("a").unwrap().documents.len(), 0);
        assert_eq!(empty.community("a").unwrap().total_tokens(), 0);
    }

    #[test]
    fn subsample_exact_and_deterministic() {
        let store = hundred_docs();
        let s1 = subsample(&store, "a", 10, 7).unwrap();
        let s2 = subsample(&store, "a", 10, 7).unwrap();
        assert_eq!(s1.community("a").unwrap().documents.len(), 10);
        assert_eq!(s1, s2);
        let s3 = subsample(&store, "a", 10, 8).unwrap();
        assert_ne!(s1, s3);
    }

    #[test]
    fn subsample_insufficient() {
        let store = hundred_docs();
        assert!(matches!(
            subsample(&store, "a", 101, 1),
            Err(CorpusError::InsufficientCorpus { .. })
        ));
    }

    fn repeated(word: &str, n: usize) -> String {
        let mut s = String::new();
        for _ in 0..n {
            s.push_str(word);
            s.push(' ');
        }
        s
    }

    #[test]
    fn vocabulary_boundary_and_intersection() {
        let recs = vec![
            rec("a", "u", &(repeated("keep", 100) + &repeated("drop", 99))),
            rec("b", "u", &(repeated("keep", 100) + &repeated("drop", 1000))),
            rec("g", "u", &(repeated("keep", 150) + &repeated("drop", 1000))),
        ];
        let store = ingest(recs, &config()).unwrap();
        let v = build_vocabulary(&store, 100).unwrap();
        assert_eq!(v.words(), ["keep"]);
        assert!(matches!(
            build_vocabulary(&store, 1000),
            Err(CorpusError::EmptyVocabulary(1000))
        ));
    }

    #[test]
    fn vocabulary_ordering() {
        let recs = vec![
            rec("a", "u", "b a c c"),
            rec("b", "u", "a b c c"),
            rec("g", "u", "b a c c"),
        ];
        let store = ingest(recs, &config()).unwrap();
        let v = build_vocabulary(&store, 1).unwrap();
        assert_eq!(v.words(), ["c", "a", "b"]);
        for (i, w) in v.words().iter().enumerate() {
            assert_eq!(v.id(w), Some(i as u32));
            assert_eq!(v.word(i as u32), w);
        }
    }
}
