//! Save and load corpus stores, embedding spaces and language models.

use std::io::Write;
use std::path::Path;

use commshift_core::corpus::{IngestTally, Lexicon};
use commshift_core::lmeval::LanguageModel;
use commshift_core::{
    CommunityCorpus, CommunityId, CommunityKind, CorpusStore, Document, DomainSpec, EmbeddingSpace, TrainingConfig,
    Vocabulary,
};

use crate::binfmt::{read_file, write_atomic, FormatError, Kind, Reader, Writer};

pub const STORE: Kind = Kind {
    magic: *b"CSHSTORE",
    version: 1,
    name: "corpus store",
};

pub const SPACE: Kind = Kind {
    magic: *b"CSHSPACE",
    version: 1,
    name: "embedding space",
};

pub const MODEL: Kind = Kind {
    magic: *b"CSHLMODL",
    version: 1,
    name: "language model",
};

const NO_AUTHOR: u32 = u32::MAX;

fn put_community(w: &mut Writer, id: &CommunityId) {
    w.str(&id.name);
    w.u32(matches!(id.kind, CommunityKind::Global) as u32);
}

fn get_community(r: &mut Reader<'_>) -> Result<CommunityId, FormatError> {
    let name = r.str("community name")?;
    Ok(match r.u32("community kind")? {
        0 => CommunityId::member(name),
        1 => CommunityId::global(name),
        k => return Err(FormatError::Invalid(format!("community kind {k}"))),
    })
}

fn put_strings(w: &mut Writer, items: &[String]) {
    w.u64(items.len() as u64);
    for s in items {
        w.str(s);
    }
}

fn get_strings(r: &mut Reader<'_>, what: &'static str) -> Result<Vec<String>, FormatError> {
    let n = r.u64(what)?;
    (0..n).map(|_| r.str(what)).collect()
}

fn put_domains(w: &mut Writer, domains: &[DomainSpec]) {
    w.u64(domains.len() as u64);
    for d in domains {
        w.str(&d.name);
        put_strings(w, &d.members);
    }
}

fn get_domains(r: &mut Reader<'_>) -> Result<Vec<DomainSpec>, FormatError> {
    let n = r.u64("domains")?;
    (0..n)
        .map(|_| {
            Ok(DomainSpec {
                name: r.str("domain name")?,
                members: get_strings(r, "domain members")?,
            })
        })
        .collect()
}

pub fn store_to_bytes(store: &CorpusStore) -> Vec<u8> {
    let mut w = Writer::new(STORE);
    put_strings(&mut w, store.types.items());
    put_strings(&mut w, store.author_names.items());
    put_domains(&mut w, &store.domains);
    let t = store.tally;
    for v in [t.accepted, t.unconfigured, t.malformed, t.empty] {
        w.u64(v);
    }
    w.u64(store.communities.len() as u64);
    for c in &store.communities {
        put_community(&mut w, &c.id);
        w.u32s(
            &c.documents
                .iter()
                .map(|d| d.author.unwrap_or(NO_AUTHOR))
                .collect::<Vec<_>>(),
        );
        w.u32s(&c.documents.iter().map(|d| d.tokens.len() as u32).collect::<Vec<_>>());
        w.u32s(
            &c.documents
                .iter()
                .flat_map(|d| d.tokens.iter().copied())
                .collect::<Vec<_>>(),
        );
    }
    w.finish()
}

pub fn store_from_bytes(bytes: &[u8]) -> Result<CorpusStore, FormatError> {
    let mut r = Reader::open(bytes, STORE)?;
    let types = Lexicon::from_items(get_strings(&mut r, "types")?);
    let author_names = Lexicon::from_items(get_strings(&mut r, "authors")?);
    let domains = get_domains(&mut r)?;
    let tally = IngestTally {
        accepted: r.u64("tally")?,
        unconfigured: r.u64("tally")?,
        malformed: r.u64("tally")?,
        empty: r.u64("tally")?,
    };
    let n = r.u64("communities")?;
    let mut communities = Vec::new();
    for _ in 0..n {
        let id = get_community(&mut r)?;
        let authors = r.u32s("document authors")?;
        let lens = r.u32s("document lengths")?;
        let tokens = r.u32s("tokens")?;
        if authors.len() != lens.len() || lens.iter().map(|&l| l as usize).sum::<usize>() != tokens.len() {
            return Err(FormatError::Invalid("document table shape".into()));
        }
        if tokens.iter().any(|&t| t as usize >= types.len()) {
            return Err(FormatError::Invalid("token id out of range".into()));
        }
        let mut pos = 0;
        let docs = authors
            .iter()
            .zip(&lens)
            .map(|(&a, &l)| {
                let d = Document {
                    author: (a != NO_AUTHOR).then_some(a),
                    tokens: tokens[pos..pos + l as usize].to_vec(),
                };
                pos += l as usize;
                d
            })
            .collect();
        communities.push(CommunityCorpus::new(id, docs));
    }
    r.finish()?;
    Ok(CorpusStore {
        types,
        author_names,
        communities,
        domains,
        tally,
    })
}

fn put_training_config(w: &mut Writer, c: &TrainingConfig) {
    for v in [c.dim, c.window, c.negatives, c.epochs] {
        w.u64(v as u64);
    }
    for v in [c.learning_rate, c.min_lr, c.l2_lambda, c.l2_main] {
        w.f64(v as f64);
    }
    w.f64(c.subsample.unwrap_or(f64::NAN));
    w.u64(c.seed);
}

fn get_training_config(r: &mut Reader<'_>) -> Result<TrainingConfig, FormatError> {
    let what = "training config";
    let dim = r.u64(what)? as usize;
    let window = r.u64(what)? as usize;
    let negatives = r.u64(what)? as usize;
    let epochs = r.u64(what)? as usize;
    let learning_rate = r.f64(what)? as _;
    let min_lr = r.f64(what)? as _;
    let l2_lambda = r.f64(what)? as _;
    let l2_main = r.f64(what)? as _;
    let sub = r.f64(what)?;
    let seed = r.u64(what)?;
    Ok(TrainingConfig {
        dim,
        window,
        negatives,
        epochs,
        learning_rate,
        min_lr,
        l2_lambda,
        l2_main,
        subsample: (!sub.is_nan()).then_some(sub),
        seed,
    })
}

pub fn space_to_bytes(space: &EmbeddingSpace) -> Vec<u8> {
    let mut w = Writer::new(SPACE);
    w.u64(space.vocab().len() as u64);
    w.u64(space.dim() as u64);
    w.u64(space.vocab().min_count());
    w.u64(space.communities().len() as u64);
    for c in space.communities() {
        put_community(&mut w, c);
    }
    put_training_config(&mut w, space.config());
    put_strings(&mut w, space.vocab().words());
    w.f32s(space.main_table());
    for d in space.deviation_tables() {
        w.f32s(d);
    }
    w.f32s(space.context_table());
    w.finish()
}

pub fn space_from_bytes(bytes: &[u8]) -> Result<EmbeddingSpace, FormatError> {
    let mut r = Reader::open(bytes, SPACE)?;
    let v = r.u64("header")? as usize;
    let dim = r.u64("header")? as usize;
    let min_count = r.u64("header")?;
    let n = r.u64("header")?;
    let communities = (0..n).map(|_| get_community(&mut r)).collect::<Result<Vec<_>, _>>()?;
    let config = get_training_config(&mut r)?;
    let words = get_strings(&mut r, "vocabulary")?;
    if words.len() != v {
        return Err(FormatError::Invalid("vocabulary size differs from header".into()));
    }
    let main = r.f32s("main table")?;
    let deviations = (0..communities.len())
        .map(|_| r.f32s("deviation table"))
        .collect::<Result<Vec<_>, _>>()?;
    let context = r.f32s("context table")?;
    r.finish()?;
    EmbeddingSpace::from_parts(
        Vocabulary::from_words(words, min_count),
        communities,
        dim,
        main,
        deviations,
        context,
        config,
    )
    .map_err(|e| FormatError::Invalid(e.to_string()))
}

pub fn model_to_bytes(lm: &LanguageModel<f32>) -> Vec<u8> {
    let mut w = Writer::new(MODEL);
    w.str(lm.community());
    w.u64(lm.vocab_size() as u64);
    w.u64(lm.hidden() as u64);
    w.u64(lm.layers() as u64);
    w.f32s(lm.embeddings());
    w.f32s(lm.params());
    w.finish()
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<LanguageModel<f32>, FormatError> {
    let mut r = Reader::open(bytes, MODEL)?;
    let community = r.str("community")?;
    let v = r.u64("header")? as usize;
    let h = r.u64("header")? as usize;
    let l = r.u64("header")? as usize;
    let emb = r.f32s("embeddings")?;
    let params = r.f32s("parameters")?;
    r.finish()?;
    LanguageModel::from_parts(&community, v, h, l, emb, params).map_err(|e| FormatError::Invalid(e.to_string()))
}

pub fn save_store(store: &CorpusStore, path: &Path) -> Result<(), FormatError> {
    write_atomic(path, &store_to_bytes(store))
}

pub fn load_store(path: &Path) -> Result<CorpusStore, FormatError> {
    store_from_bytes(&read_file(path)?)
}

pub fn save_space(space: &EmbeddingSpace, path: &Path) -> Result<(), FormatError> {
    write_atomic(path, &space_to_bytes(space))
}

pub fn load_space(path: &Path) -> Result<EmbeddingSpace, FormatError> {
    space_from_bytes(&read_file(path)?)
}

pub fn save_model(lm: &LanguageModel<f32>, path: &Path) -> Result<(), FormatError> {
    write_atomic(path, &model_to_bytes(lm))
}

pub fn load_model(path: &Path) -> Result<LanguageModel<f32>, FormatError> {
    model_from_bytes(&read_file(path)?)
}

/// Plain-text export: one block per community, a `V dim` line followed by
/// `word f1 ... fdim` lines of the composed vectors.
pub fn export_text<W: Write>(space: &EmbeddingSpace, mut out: W) -> std::io::Result<()> {
    for (c, id) in space.communities().iter().enumerate() {
        writeln!(out, "# {}", id.name)?;
        writeln!(out, "{} {}", space.vocab().len(), space.dim())?;
        let table = space.community_table(c);
        for (w, row) in space.vocab().words().iter().zip(table.chunks_exact(space.dim())) {
            write!(out, "{w}")?;
            for x in row {
                write!(out, " {x}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}
