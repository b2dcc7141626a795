//! Similarity multisets and the domain / community shift indices built on
//! them.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use thiserror::Error;

use crate::corpus::DomainSpec;
use crate::vectorspace::{cosine, EmbeddingSpace, SpaceError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndexError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("empty similarity multiset")]
    EmptyMultiset,
    #[error("domain `{0}` needs at least two member communities")]
    DomainTooSmall(String),
    #[error("community `{community}` is not a member of domain `{domain}`")]
    NotInDomain { community: String, domain: String },
    #[error("space has no global community")]
    NoGlobal,
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("requested {requested} words but only {available} are eligible")]
    NotEnoughWords { requested: usize, available: usize },
}

/// Cosines of one word's vectors across two community sets.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMultiset {
    pub word: String,
    pub a: Vec<String>,
    pub b: Vec<String>,
    pub values: Vec<f64>,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn sims_by_index(space: &EmbeddingSpace, id: u32, a: &[usize], b: &[usize]) -> Result<Vec<f64>, SpaceError> {
    let vec_a: Vec<Vec<f32>> = a.iter().map(|&c| space.vector_by_id(id, c)).collect();
    let mut values = Vec::new();
    if a == b {
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                values.push(cosine(&vec_a[i], &vec_a[j])?);
            }
        }
        return Ok(values);
    }
    let vec_b: Vec<Vec<f32>> = b.iter().map(|&c| space.vector_by_id(id, c)).collect();
    for (i, va) in vec_a.iter().enumerate() {
        for (j, vb) in vec_b.iter().enumerate() {
            if a[i] != b[j] {
                values.push(cosine(va, vb)?);
            }
        }
    }
    Ok(values)
}

/// `{ cos(w_a, w_b) : (a, b) in A x B, a != b }`, one value per unordered
/// pair when `A == B`.
pub fn sim_multiset(
    space: &EmbeddingSpace,
    word: &str,
    a: &[&str],
    b: &[&str],
) -> Result<SimilarityMultiset, IndexError> {
    let id = space.word_id(word)?;
    let ai = a
        .iter()
        .map(|c| space.community_index(c))
        .collect::<Result<Vec<_>, _>>()?;
    let bi = b
        .iter()
        .map(|c| space.community_index(c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SimilarityMultiset {
        word: word.to_string(),
        a: a.iter().map(|s| s.to_string()).collect(),
        b: b.iter().map(|s| s.to_string()).collect(),
        values: sims_by_index(space, id, &ai, &bi)?,
    })
}

/// `[mu(S) - sigma(S)] - [mu(S') + sigma(S')]` with population sigma.
pub fn index(s: &[f64], s_prime: &[f64]) -> Result<f64, IndexError> {
    if s.is_empty() || s_prime.is_empty() {
        return Err(IndexError::EmptyMultiset);
    }
    let (m, sd) = mean_std(s);
    let (m2, sd2) = mean_std(s_prime);
    Ok((m - sd) - (m2 + sd2))
}

struct DomainIndices {
    members: Vec<usize>,
    global: usize,
}

fn resolve_domain(space: &EmbeddingSpace, domain: &DomainSpec) -> Result<DomainIndices, IndexError> {
    if domain.members.len() < 2 {
        return Err(IndexError::DomainTooSmall(domain.name.clone()));
    }
    let members = domain
        .members
        .iter()
        .map(|c| space.community_index(c))
        .collect::<Result<Vec<_>, _>>()?;
    let global = space.global_index().ok_or(IndexError::NoGlobal)?;
    Ok(DomainIndices { members, global })
}

fn dsi_by_id(space: &EmbeddingSpace, id: u32, d: &DomainIndices) -> Result<f64, IndexError> {
    let within = sims_by_index(space, id, &d.members, &d.members)?;
    let to_global = sims_by_index(space, id, &d.members, &[d.global])?;
    index(&within, &to_global)
}

fn csi_by_id(space: &EmbeddingSpace, id: u32, member: usize, d: &DomainIndices) -> Result<f64, IndexError> {
    let others: Vec<usize> = d.members.iter().copied().filter(|&c| c != member).collect();
    let rest = sims_by_index(space, id, &others, &[d.global])?;
    let own = sims_by_index(space, id, &[member], &[d.global])?;
    index(&rest, &own)
}

/// Domain shift index: `I(Sim_{D,D}, Sim_{D,{g}})`.
pub fn dsi(space: &EmbeddingSpace, word: &str, domain: &DomainSpec) -> Result<f64, IndexError> {
    let d = resolve_domain(space, domain)?;
    dsi_by_id(space, space.word_id(word)?, &d)
}

/// Community shift index: `I(Sim_{D\{c},{g}}, Sim_{{c},{g}})`.
pub fn csi(space: &EmbeddingSpace, word: &str, community: &str, domain: &DomainSpec) -> Result<f64, IndexError> {
    if !domain.contains(community) {
        return Err(IndexError::NotInDomain {
            community: community.to_string(),
            domain: domain.name.clone(),
        });
    }
    let d = resolve_domain(space, domain)?;
    let c = space.community_index(community)?;
    csi_by_id(space, space.word_id(word)?, c, &d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnStats {
    pub mean: f64,
    pub std: f64,
}

/// dsi for every vocabulary word and csi for every (word, member).
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftTable {
    pub domain: String,
    pub words: Vec<String>,
    pub members: Vec<String>,
    pub dsi: Vec<f64>,
    /// `csi[m][w]` for member `m`.
    pub csi: Vec<Vec<f64>>,
}

/// Which column of a [`ShiftTable`] a selection reads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Column {
    Dsi,
    Csi(String),
}

impl Column {
    /// Parses `dsi` or `csi_<community>`.
    pub fn parse(s: &str) -> Result<Column, IndexError> {
        if s == "dsi" {
            Ok(Column::Dsi)
        } else if let Some(c) = s.strip_prefix("csi_") {
            Ok(Column::Csi(c.to_string()))
        } else {
            Err(IndexError::UnknownColumn(s.to_string()))
        }
    }

    pub fn name(&self) -> String {
        match self {
            Column::Dsi => "dsi".to_string(),
            Column::Csi(c) => format!("csi_{c}"),
        }
    }
}

impl ShiftTable {
    pub fn column(&self, column: &Column) -> Result<&[f64], IndexError> {
        match column {
            Column::Dsi => Ok(&self.dsi),
            Column::Csi(c) => self
                .members
                .iter()
                .position(|m| m == c)
                .map(|i| self.csi[i].as_slice())
                .ok_or_else(|| IndexError::UnknownColumn(column.name())),
        }
    }

    pub fn columns(&self) -> Vec<Column> {
        core::iter::once(Column::Dsi)
            .chain(self.members.iter().map(|m| Column::Csi(m.clone())))
            .collect()
    }

    pub fn stats(&self, column: &Column) -> Result<ColumnStats, IndexError> {
        let values = self.column(column)?;
        if values.is_empty() {
            return Err(IndexError::EmptyMultiset);
        }
        let (mean, std) = mean_std(values);
        Ok(ColumnStats { mean, std })
    }

    pub fn value(&self, word: &str, column: &Column) -> Option<f64> {
        let i = self.words.iter().position(|w| w == word)?;
        self.column(column).ok().map(|c| c[i])
    }
}

pub fn shift_table(space: &EmbeddingSpace, domain: &DomainSpec) -> Result<ShiftTable, IndexError> {
    let d = resolve_domain(space, domain)?;
    let v = space.vocab().len();
    let mut dsi = Vec::with_capacity(v);
    let mut csi: Vec<Vec<f64>> = d.members.iter().map(|_| Vec::with_capacity(v)).collect();
    for id in 0..v as u32 {
        dsi.push(dsi_by_id(space, id, &d)?);
        for (m, &c) in d.members.iter().enumerate() {
            csi[m].push(csi_by_id(space, id, c, &d)?);
        }
    }
    Ok(ShiftTable {
        domain: domain.name.clone(),
        words: space.vocab().words().to_vec(),
        members: domain.members.clone(),
        dsi,
        csi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionMode {
    /// The k largest values.
    TopK(usize),
    /// The k smallest strictly positive values.
    BottomKPositive(usize),
    /// `v >= mean + 2 sd`.
    Sigma2Shift,
    /// `v < mean + 1 sd`.
    BelowSigma1NoShift,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordSetSelection {
    pub column: Column,
    pub mode: SelectionMode,
    pub words: Vec<String>,
}

/// Selects words from one column. Ties go to the lower vocabulary id.
pub fn select_words(table: &ShiftTable, column: &Column, mode: SelectionMode) -> Result<WordSetSelection, IndexError> {
    let values = table.column(column)?;
    let mut idx: Vec<usize> = (0..values.len()).collect();
    let chosen: Vec<usize> = match mode {
        SelectionMode::TopK(k) => {
            idx.sort_by(|&a, &b| {
                values[b]
                    .partial_cmp(&values[a])
                    .unwrap_or(core::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            take_k(idx, k)?
        }
        SelectionMode::BottomKPositive(k) => {
            idx.retain(|&i| values[i] > 0.0);
            idx.sort_by(|&a, &b| {
                values[a]
                    .partial_cmp(&values[b])
                    .unwrap_or(core::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            take_k(idx, k)?
        }
        SelectionMode::Sigma2Shift => {
            let s = table.stats(column)?;
            idx.into_iter().filter(|&i| values[i] >= s.mean + 2.0 * s.std).collect()
        }
        SelectionMode::BelowSigma1NoShift => {
            let s = table.stats(column)?;
            idx.into_iter().filter(|&i| values[i] < s.mean + s.std).collect()
        }
    };
    Ok(WordSetSelection {
        column: column.clone(),
        mode,
        words: chosen.into_iter().map(|i| table.words[i].clone()).collect(),
    })
}

fn take_k(mut idx: Vec<usize>, k: usize) -> Result<Vec<usize>, IndexError> {
    if idx.len() < k {
        return Err(IndexError::NotEnoughWords {
            requested: k,
            available: idx.len(),
        });
    }
    idx.truncate(k);
    Ok(idx)
}

/// Value deciles (0%, 10%, ..., 100%) of a column, by nearest rank on the
/// sorted values.
pub fn deciles(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    if sorted.is_empty() {
        return Vec::new();
    }
    (0..=10)
        .map(|q| {
            let pos = (q as f64 / 10.0 * (sorted.len() - 1) as f64).round() as usize;
            sorted[pos]
        })
        .collect()
}
