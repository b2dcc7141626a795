//! Workspace configuration and synthetic scenario files (TOML).
//!
//! ```toml
//! seed = 7
//!
//! [[community]]
//! name = "c0"
//! sources = ["c0_forum", "c0_archive"]   # optional
//!
//! [[community]]
//! name = "g"
//! global = true
//!
//! [[domain]]
//! name = "d"
//! members = ["c0", "c1"]
//!
//! [corpus]
//! min_count = 5
//! subsample = { g = 100000 }
//!
//! [training]
//! dim = 50
//! epochs = 3
//! threads = 1
//!
//! [lm]
//! epochs = 4
//! split = [0.8, 0.1, 0.1]
//!
//! [features]
//! dissemination = "inverse-rel-freq"
//!
//! [selection]
//! k = 10
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use commshift_core::lexfeatures::DisseminationVariant;
use commshift_core::lmeval::{AltAggregation, ExperimentOptions, LMConfig, ProbeMode};
use commshift_core::synthgen::{PlantedWord, ShiftLevel, ShiftScenario};
use commshift_core::{CommunityId, CorpusConfig, CorpusError, DomainSpec, TrainingConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: toml::de::Error,
    },
    #[error("{0}")]
    Corpus(#[from] CorpusError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommunitySection {
    pub name: String,
    #[serde(default)]
    pub global: bool,
    #[serde(default)]
    pub sources: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub name: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub lowercase: bool,
    pub min_count: u64,
    /// Per-community token targets for document subsampling.
    pub subsample: BTreeMap<String, u64>,
}

impl Default for CorpusSection {
    fn default() -> Self {
        CorpusSection {
            lowercase: true,
            min_count: 5,
            subsample: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f32,
    pub min_lr: f32,
    pub l2_lambda: f32,
    pub l2_main: f32,
    pub subsample: Option<f64>,
    pub threads: usize,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainingConfig::default();
        TrainingSection {
            dim: t.dim,
            window: t.window,
            negatives: t.negatives,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            min_lr: t.min_lr,
            l2_lambda: t.l2_lambda,
            l2_main: t.l2_main,
            subsample: t.subsample,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeSetting {
    Reset,
    CarryContext,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregationSetting {
    PerWordMean,
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmSection {
    pub layers: usize,
    /// Defaults to the embedding dimension of the space.
    pub hidden_size: Option<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub batch_size: usize,
    pub bptt: usize,
    pub clip_norm: f64,
    pub max_train_tokens: Option<usize>,
    pub max_valid_tokens: Option<usize>,
    /// Train, validation and test shares of each community's documents.
    pub split: [f64; 3],
    pub probe: ProbeSetting,
    pub aggregation: AggregationSetting,
    pub min_words: usize,
}

impl Default for LmSection {
    fn default() -> Self {
        let l = LMConfig::default();
        let o = ExperimentOptions::default();
        LmSection {
            layers: l.layers,
            hidden_size: None,
            epochs: l.epochs,
            learning_rate: l.learning_rate,
            dropout: l.dropout,
            batch_size: l.batch_size,
            bptt: l.bptt,
            clip_norm: l.clip_norm,
            max_train_tokens: l.max_train_tokens,
            max_valid_tokens: l.max_valid_tokens,
            split: [0.8, 0.1, 0.1],
            probe: ProbeSetting::Reset,
            aggregation: AggregationSetting::PerWordMean,
            min_words: o.min_words,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisseminationSetting {
    InverseRelFreq,
    LogFreqMinusOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    pub dissemination: DisseminationSetting,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        FeaturesSection {
            dissemination: DisseminationSetting::InverseRelFreq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSection {
    /// Size of the shift and no.shift word sets.
    pub k: usize,
}

impl Default for SelectionSection {
    fn default() -> Self {
        SelectionSection { k: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkspaceConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub community: Vec<CommunitySection>,
    #[serde(default)]
    pub domain: Vec<DomainSection>,
    #[serde(default)]
    pub corpus: CorpusSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub lm: LmSection,
    #[serde(default)]
    pub features: FeaturesSection,
    #[serde(default)]
    pub selection: SelectionSection,
}

fn default_seed() -> u64 {
    1
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.display().to_string(),
        source,
    })
}

impl WorkspaceConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: WorkspaceConfig = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: origin.to_string(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&read(path)?, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.corpus_config().validate()?;
        for name in self.corpus.subsample.keys() {
            if !self.community.iter().any(|c| &c.name == name) {
                return Err(CorpusError::UnknownCommunity(name.clone()).into());
            }
        }
        if self.training.threads == 0 {
            return Err(ConfigError::Invalid("training.threads must be >= 1".into()));
        }
        if self.selection.k == 0 {
            return Err(ConfigError::Invalid("selection.k must be >= 1".into()));
        }
        self.training_config(0)
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn corpus_config(&self) -> CorpusConfig {
        CorpusConfig {
            communities: self
                .community
                .iter()
                .map(|c| {
                    let id = if c.global {
                        CommunityId::global(&c.name)
                    } else {
                        CommunityId::member(&c.name)
                    };
                    (id, c.sources.clone())
                })
                .collect(),
            domains: self
                .domain
                .iter()
                .map(|d| DomainSpec {
                    name: d.name.clone(),
                    members: d.members.clone(),
                })
                .collect(),
            lowercase: self.corpus.lowercase,
        }
    }

    pub fn global_name(&self) -> &str {
        self.community
            .iter()
            .find(|c| c.global)
            .map(|c| c.name.as_str())
            .unwrap_or("")
    }

    pub fn domain_spec(&self, name: &str) -> Option<DomainSpec> {
        self.domain.iter().find(|d| d.name == name).map(|d| DomainSpec {
            name: d.name.clone(),
            members: d.members.clone(),
        })
    }

    pub fn training_config(&self, seed: u64) -> TrainingConfig {
        let t = &self.training;
        TrainingConfig {
            dim: t.dim,
            window: t.window,
            negatives: t.negatives,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            min_lr: t.min_lr,
            l2_lambda: t.l2_lambda,
            l2_main: t.l2_main,
            subsample: t.subsample,
            seed,
        }
    }

    pub fn lm_config(&self, dim: usize, seed: u64) -> LMConfig {
        let l = &self.lm;
        LMConfig {
            layers: l.layers,
            hidden_size: l.hidden_size.unwrap_or(dim),
            epochs: l.epochs,
            learning_rate: l.learning_rate,
            dropout: l.dropout,
            batch_size: l.batch_size,
            bptt: l.bptt,
            clip_norm: l.clip_norm,
            max_train_tokens: l.max_train_tokens,
            max_valid_tokens: l.max_valid_tokens,
            seed,
        }
    }

    pub fn experiment_options(&self) -> ExperimentOptions {
        ExperimentOptions {
            aggregation: match self.lm.aggregation {
                AggregationSetting::PerWordMean => AltAggregation::PerWordMean,
                AggregationSetting::Pooled => AltAggregation::Pooled,
            },
            mode: match self.lm.probe {
                ProbeSetting::Reset => ProbeMode::Reset,
                ProbeSetting::CarryContext => ProbeMode::CarryContext,
            },
            min_words: self.lm.min_words,
        }
    }

    pub fn dissemination(&self) -> DisseminationVariant {
        match self.features.dissemination {
            DisseminationSetting::InverseRelFreq => DisseminationVariant::InverseRelFreq,
            DisseminationSetting::LogFreqMinusOne => DisseminationVariant::LogFreqMinusOne,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedSection {
    pub word: String,
    /// Target community of a community-level shift; absent for a
    /// domain-level shift.
    #[serde(default)]
    pub community: Option<String>,
    pub alpha: f64,
    #[serde(default)]
    pub prominence: Option<f64>,
    #[serde(default)]
    pub dissemination: Option<f64>,
}

/// Scenario file for `synth`: every [`ShiftScenario`] field, all optional,
/// plus `[[planted]]` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub vocab_size: usize,
    pub communities: Vec<String>,
    pub global: String,
    pub domain: String,
    pub tokens_per_community: usize,
    pub authors_per_community: usize,
    pub topics: usize,
    pub zipf_exponent: f64,
    pub background: f64,
    pub mean_doc_len: f64,
    pub jargon_per_community: usize,
    pub jargon_count: usize,
    pub seed: u64,
    pub planted: Vec<PlantedSection>,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        let s = ShiftScenario::default();
        ScenarioFile {
            vocab_size: s.vocab_size,
            communities: s.communities,
            global: s.global,
            domain: s.domain,
            tokens_per_community: s.tokens_per_community,
            authors_per_community: s.authors_per_community,
            topics: s.topics,
            zipf_exponent: s.zipf_exponent,
            background: s.background,
            mean_doc_len: s.mean_doc_len,
            jargon_per_community: s.jargon_per_community,
            jargon_count: s.jargon_count,
            seed: s.seed,
            planted: Vec::new(),
        }
    }
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(&read(path)?).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn to_scenario(&self) -> ShiftScenario {
        ShiftScenario {
            vocab_size: self.vocab_size,
            communities: self.communities.clone(),
            global: self.global.clone(),
            domain: self.domain.clone(),
            tokens_per_community: self.tokens_per_community,
            authors_per_community: self.authors_per_community,
            topics: self.topics,
            zipf_exponent: self.zipf_exponent,
            background: self.background,
            mean_doc_len: self.mean_doc_len,
            planted: self
                .planted
                .iter()
                .map(|p| PlantedWord {
                    word: p.word.clone(),
                    level: match &p.community {
                        Some(c) => ShiftLevel::Community(c.clone()),
                        None => ShiftLevel::Domain,
                    },
                    alpha: p.alpha,
                    prominence: p.prominence,
                    dissemination: p.dissemination,
                })
                .collect(),
            jargon_per_community: self.jargon_per_community,
            jargon_count: self.jargon_count,
            seed: self.seed,
        }
    }
}
