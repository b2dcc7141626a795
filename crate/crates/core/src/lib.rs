//! Community-conditioned word embeddings and semantic-shift analysis.
//!
//! The crate is `no_std` (with `alloc`) and holds every algorithm of the
//! pipeline: corpus construction, joint skip-gram training, shift indices,
//! lexical features, hypothesis tests, recurrent language-model probes and
//! a synthetic corpus generator. File formats, the command-line tool and
//! multi-threaded training live in the `commshift` crate.
#![no_std]
// Negated comparisons reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod lexfeatures;
pub mod lmeval;
pub mod sgns;
pub mod shiftindex;
pub mod stats;
pub mod synthgen;
pub mod vectorspace;

pub use corpus::{
    build_vocabulary, ingest, subsample, tokenize, CommunityCorpus, CommunityId, CommunityKind, CorpusConfig,
    CorpusError, CorpusStore, Document, DomainSpec, Record, Vocabulary,
};
pub use vectorspace::{cosine, EmbeddingSpace, NeighborList, SpaceError, TrainingConfig};
