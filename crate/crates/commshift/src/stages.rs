//! Pipeline stages. Each stage reads its inputs, writes one output and a
//! run manifest under `<workspace>/manifests`.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::time::Instant;

use commshift_core::lexfeatures::{feature_table, FeatureOptions, Scope};
use commshift_core::lmeval::{
    encode_documents, split, substitution_experiment, train_lm, ExperimentSets, LanguageModel, ProbeModel,
};
use commshift_core::shiftindex::{select_words, shift_table, Column, SelectionMode, ShiftTable};
use commshift_core::stats::feature_contrast;
use commshift_core::synthgen::generate;
use commshift_core::vectorspace::TrainingCorpus;
use commshift_core::{build_vocabulary, ingest, subsample, CorpusStore, DomainSpec, Record};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::binfmt::{write_atomic, FormatError};
use crate::config::{ScenarioFile, WorkspaceConfig};
use crate::manifest::{digest_file, manifest_dir, manifest_path, stage_seed, RunManifest};
use crate::parallel::train_parallel;
use crate::{persist, tsv};

#[derive(Debug, Error)]
pub enum StageError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl StageError {
    pub fn exit_code(&self) -> i32 {
        match self {
            StageError::Usage(_) => 1,
            StageError::Data(_) => 2,
            StageError::Internal(_) => 3,
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> StageError {
    StageError::Data(e.to_string())
}

fn internal<E: std::fmt::Display>(e: E) -> StageError {
    StageError::Internal(e.to_string())
}

pub type StageResult<T> = Result<T, StageError>;

/// JSON Lines record; unknown fields are ignored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsonRecord {
    pub community: String,
    pub author: String,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_utc: Option<i64>,
}

/// Flags shared by every stage.
#[derive(Debug, Clone)]
pub struct Context {
    pub workspace: PathBuf,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub force: bool,
}

impl Context {
    pub fn new(workspace: impl Into<PathBuf>) -> Self {
        Context {
            workspace: workspace.into(),
            config: None,
            seed: None,
            force: false,
        }
    }

    fn config(&self, stage: &str) -> StageResult<WorkspaceConfig> {
        let path = self
            .config
            .as_deref()
            .ok_or_else(|| StageError::Usage(format!("{stage} needs --config")))?;
        require(path)?;
        WorkspaceConfig::load(path).map_err(data)
    }

    fn seed(&self, cfg: &WorkspaceConfig) -> u64 {
        self.seed.unwrap_or(cfg.seed)
    }

    fn check_output(&self, out: &Path) -> StageResult<()> {
        if out.exists() && !self.force {
            return Err(StageError::Usage(format!(
                "{} exists; pass --force to overwrite",
                out.display()
            )));
        }
        Ok(())
    }

    fn finish(
        &self,
        stage: &str,
        inputs: &[&Path],
        parameters: serde_json::Value,
        out: &Path,
        start: Instant,
    ) -> StageResult<()> {
        let manifest = RunManifest {
            stage: stage.to_string(),
            inputs: inputs
                .iter()
                .map(|p| digest_file(p))
                .collect::<Result<_, _>>()
                .map_err(data)?,
            parameters,
            outputs: vec![digest_file(out).map_err(internal)?],
            wall_time_secs: start.elapsed().as_secs_f64(),
        };
        manifest
            .write(&manifest_path(&self.workspace, stage, out))
            .map_err(internal)?;
        info!("{stage}: wrote {} in {:.2}s", out.display(), manifest.wall_time_secs);
        Ok(())
    }
}

fn require(path: &Path) -> StageResult<()> {
    if !path.exists() {
        return Err(StageError::Data(format!("missing input: {}", path.display())));
    }
    Ok(())
}

fn read_text(path: &Path) -> StageResult<String> {
    require(path)?;
    fs::read_to_string(path).map_err(|e| StageError::Data(format!("{}: {e}", path.display())))
}

fn load_store(path: &Path) -> StageResult<CorpusStore> {
    require(path)?;
    persist::load_store(path).map_err(|e| StageError::Data(format!("{}: {e}", path.display())))
}

fn load_space(path: &Path) -> StageResult<commshift_core::EmbeddingSpace> {
    require(path)?;
    persist::load_space(path).map_err(|e| StageError::Data(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> StageResult<LanguageModel<f32>> {
    require(path)?;
    persist::load_model(path).map_err(|e| StageError::Data(format!("{}: {e}", path.display())))
}

fn save<E: Into<FormatError>>(r: Result<(), E>) -> StageResult<()> {
    r.map_err(|e| internal(e.into()))
}

/// Finds the manifest that produced `file` (by digest) and returns one of
/// its string parameters.
pub fn producer_param(workspace: &Path, file: &Path, key: &str) -> Option<String> {
    let digest = digest_file(file).ok()?.sha256;
    let mut entries: Vec<PathBuf> = fs::read_dir(manifest_dir(workspace))
        .ok()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    entries.iter().find_map(|p| {
        let m = RunManifest::read(p).ok()?;
        m.outputs.iter().any(|o| o.sha256 == digest).then_some(())?;
        m.parameters.get(key)?.as_str().map(str::to_string)
    })
}

pub fn synth(ctx: &Context, scenario: &Path, out: &Path) -> StageResult<()> {
    let start = Instant::now();
    ctx.check_output(out)?;
    require(scenario)?;
    let mut file = ScenarioFile::load(scenario).map_err(data)?;
    if let Some(s) = ctx.seed {
        file.seed = s;
    }
    let records = generate(&file.to_scenario()).map_err(data)?;
    let mut text = String::new();
    for r in &records {
        let j = JsonRecord {
            community: r.community.clone(),
            author: r.author.clone(),
            body: r.body.clone(),
            created_utc: None,
        };
        text.push_str(&serde_json::to_string(&j).map_err(internal)?);
        text.push('\n');
    }
    save(write_atomic(out, text.as_bytes()))?;
    let params = json!({ "scenario": file, "records": records.len() });
    ctx.finish("synth", &[scenario], params, out, start)
}

fn read_records(inputs: &[PathBuf]) -> StageResult<Vec<Result<Record, ()>>> {
    let mut records = Vec::new();
    for path in inputs {
        require(path)?;
        let f = fs::File::open(path).map_err(|e| StageError::Data(format!("{}: {e}", path.display())))?;
        for line in BufReader::new(f).lines() {
            let line = line.map_err(|e| StageError::Data(format!("{}: {e}", path.display())))?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(
                serde_json::from_str::<JsonRecord>(&line)
                    .map(|j| Record {
                        community: j.community,
                        author: j.author,
                        body: j.body,
                    })
                    .map_err(|_| ()),
            );
        }
    }
    Ok(records)
}

pub fn ingest_stage(ctx: &Context, inputs: &[PathBuf], out: &Path) -> StageResult<()> {
    let start = Instant::now();
    ctx.check_output(out)?;
    if inputs.is_empty() {
        return Err(StageError::Usage("ingest needs at least one --input".into()));
    }
    let cfg = ctx.config("ingest")?;
    let seed = ctx.seed(&cfg);
    let records = read_records(inputs)?;
    let mut store = ingest(records, &cfg.corpus_config()).map_err(data)?;
    for (community, &target) in &cfg.corpus.subsample {
        store = subsample(
            &store,
            community,
            target,
            stage_seed(seed, &format!("subsample:{community}")),
        )
        .map_err(data)?;
    }
    let t = store.tally;
    info!(
        "ingest: {} accepted, {} unconfigured, {} malformed, {} empty",
        t.accepted, t.unconfigured, t.malformed, t.empty
    );
    if t.malformed > 0 {
        warn!("ingest: skipped {} malformed records", t.malformed);
    }
    save(persist::save_store(&store, out))?;
    let inputs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let params = json!({
        "config": cfg,
        "seed": seed,
        "tally": { "accepted": t.accepted, "unconfigured": t.unconfigured, "malformed": t.malformed, "empty": t.empty },
    });
    ctx.finish("ingest", &inputs, params, out, start)
}

pub fn train(ctx: &Context, store_path: &Path, domain: Option<&str>, out: &Path) -> StageResult<()> {
    let start = Instant::now();
    ctx.check_output(out)?;
    let cfg = ctx.config("train")?;
    let seed = ctx.seed(&cfg);
    let store = load_store(store_path)?;
    let names: Vec<String> = match domain {
        Some(d) => {
            let spec = store
                .domain(d)
                .ok_or_else(|| StageError::Data(format!("unknown domain `{d}`")))?;
            let mut names = spec.members.clone();
            names.push(store.global().map_err(data)?.id.name.clone());
            names
        }
        None => store.communities.iter().map(|c| c.id.name.clone()).collect(),
    };
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let vocab = build_vocabulary(&store, cfg.corpus.min_count).map_err(data)?;
    let tc = cfg.training_config(stage_seed(seed, "train"));
    let corpus = TrainingCorpus::for_communities(&store, &vocab, &refs).map_err(data)?;
    info!(
        "train: V={} dim={} communities={:?} tokens={}",
        vocab.len(),
        tc.dim,
        names,
        corpus.total_tokens
    );
    let space = train_parallel(&corpus, &vocab, &tc, cfg.training.threads).map_err(data)?;
    save(persist::save_space(&space, out))?;
    let params = json!({
        "config": cfg,
        "seed": seed,
        "communities": names,
        "domain": domain,
    });
    ctx.finish("train", &[store_path], params, out, start)
}

fn domain_from_config(cfg: &WorkspaceConfig, name: &str) -> StageResult<DomainSpec> {
    cfg.domain_spec(name)
        .ok_or_else(|| StageError::Data(format!("domain `{name}` is not declared in the config")))
}

pub fn shift(ctx: &Context, space_path: &Path, domain: &str, out: &Path) -> StageResult<()> {
    let start = Instant::now();
    ctx.check_output(out)?;
    let cfg = ctx.config("shift")?;
    let spec = domain_from_config(&cfg, domain)?;
    let space = load_space(space_path)?;
    let table = shift_table(&space, &spec).map_err(data)?;
    save(write_atomic(out, tsv::write_shift_table(&table).as_bytes()))?;
    let params = json!({ "domain": domain, "members": spec.members });
    ctx.finish("shift", &[space_path], params, out, start)
}

fn parse_scope(store: &CorpusStore, scope: &str) -> StageResult<Scope> {
    if let Some(d) = scope.strip_prefix("domain:") {
        let spec = store
            .domain(d)
            .ok_or_else(|| StageError::Data(format!("unknown domain `{d}`")))?;
        return Ok(Scope::Domain(spec.clone()));
    }
    let spec = store
        .domains
        .iter()
        .find(|d| d.contains(scope))
        .ok_or_else(|| StageError::Data(format!("community `{scope}` belongs to no domain")))?;
    Ok(Scope::Community {
        community: scope.to_string(),
        domain: spec.clone(),
    })
}

pub fn features(ctx: &Context, store_path: &Path, scope: &str, out: &Path) -> StageResult<()> {
    let start = Instant::now();
    ctx.check_output(out)?;
    let cfg = ctx.config("features")?;
    let store = load_store(store_path)?;
    let sc = parse_scope(&store, scope)?;
    let vocab = build_vocabulary(&store, cfg.corpus.min_count).map_err(data)?;
    let options = FeatureOptions {
        dissemination: cfg.dissemination(),
    };
    let table = feature_table(&store, &vocab, &sc, options).map_err(data)?;
    save(write_atomic(out, tsv::write_features(&table).as_bytes()))?;
    let params = json!({
        "scope": scope,
        "min_count": cfg.corpus.min_count,
        "dissemination": cfg.features.dissemination,
    });
    ctx.finish("features", &[store_path], params, out, start)
}

pub fn contrast(
    ctx: &Context,
    shift_path: &Path,
    features_path: &Path,
    column: &str,
    k: Option<usize>,
    out: &Path,
) -> StageResult<()> {
    let start = Instant::now();
    ctx.check_output(out)?;
    let k = match (k, &ctx.config) {
        (Some(k), _) => k,
        (None, Some(_)) => ctx.config("contrast")?.selection.k,
        (None, None) => 10,
    };
    let col = Column::parse(column).map_err(|e| StageError::Usage(e.to_string()))?;
    let domain = producer_param(&ctx.workspace, shift_path, "domain").unwrap_or_default();
    let scope = producer_param(&ctx.workspace, features_path, "scope").unwrap_or_default();
    let table = tsv::read_shift_table(&read_text(shift_path)?, &domain)
        .map_err(|e| StageError::Data(format!("{}: {e}", shift_path.display())))?;
    let ft = tsv::read_features(&read_text(features_path)?, &scope)
        .map_err(|e| StageError::Data(format!("{}: {e}", features_path.display())))?;
    let shift_words = select_words(&table, &col, SelectionMode::TopK(k)).map_err(data)?.words;
    let noshift_words = select_words(&table, &col, SelectionMode::BottomKPositive(k))
        .map_err(data)?
        .words;
    let report = feature_contrast(&shift_words, &noshift_words, &ft).map_err(data)?;
    save(write_atomic(out, tsv::write_contrast(&report).as_bytes()))?;
    let params = json!({
        "domain": domain,
        "scope": scope,
        "column": column,
        "k": k,
        "shift_words": shift_words,
        "noshift_words": noshift_words,
    });
    ctx.finish("contrast", &[shift_path, features_path], params, out, start)
}

fn split_seed(seed: u64, community: &str) -> u64 {
    stage_seed(seed, &format!("lm-split:{community}"))
}

pub fn lm_train(ctx: &Context, store_path: &Path, space_path: &Path, community: &str, out: &Path) -> StageResult<()> {
    let start = Instant::now();
    ctx.check_output(out)?;
    let cfg = ctx.config("lm-train")?;
    let seed = ctx.seed(&cfg);
    let store = load_store(store_path)?;
    let space = load_space(space_path)?;
    let sp = split(&store, community, cfg.lm.split, split_seed(seed, community)).map_err(data)?;
    let train_docs = encode_documents(&store, community, space.vocab(), &sp.train).map_err(data)?;
    let valid_docs = encode_documents(&store, community, space.vocab(), &sp.valid).map_err(data)?;
    let lc = cfg.lm_config(space.dim(), stage_seed(seed, &format!("lm-train:{community}")));
    let trained = train_lm(&train_docs, &valid_docs, &space, community, &lc).map_err(data)?;
    for e in &trained.history {
        info!(
            "lm-train {community}: epoch {} loss {:.4} valid ppl {:.2}",
            e.epoch, e.train_loss, e.valid_perplexity
        );
    }
    save(persist::save_model(&trained.model, out))?;
    let history: Vec<_> = trained
        .history
        .iter()
        .map(|e| json!({ "epoch": e.epoch, "train_loss": e.train_loss, "valid_perplexity": e.valid_perplexity }))
        .collect();
    let params = json!({
        "community": community,
        "lm": cfg.lm,
        "seed": seed,
        "best_epoch": trained.best_epoch,
        "history": history,
    });
    ctx.finish("lm-train", &[store_path, space_path], params, out, start)
}

pub struct LmEvalArgs<'a> {
    pub models: &'a Path,
    pub shift_table: &'a Path,
    pub space: &'a Path,
    pub store: &'a Path,
    pub domain: Option<&'a str>,
    pub out: &'a Path,
}

/// Model files are looked up as `<models>/<community>.lm`. The global
/// model is required; member models are all-or-nothing and enable the
/// domain rows.
pub fn lm_eval(ctx: &Context, a: &LmEvalArgs<'_>) -> StageResult<()> {
    let start = Instant::now();
    ctx.check_output(a.out)?;
    let cfg = ctx.config("lm-eval")?;
    let seed = ctx.seed(&cfg);
    let domain = match a.domain {
        Some(d) => d.to_string(),
        None => producer_param(&ctx.workspace, a.shift_table, "domain")
            .ok_or_else(|| StageError::Usage("cannot infer the domain of the shift table; pass --domain".into()))?,
    };
    let spec = domain_from_config(&cfg, &domain)?;
    let table: ShiftTable = tsv::read_shift_table(&read_text(a.shift_table)?, &domain)
        .map_err(|e| StageError::Data(format!("{}: {e}", a.shift_table.display())))?;
    let space = load_space(a.space)?;
    let store = load_store(a.store)?;
    if !a.models.is_dir() {
        return Err(StageError::Data(format!("missing input: {}", a.models.display())));
    }
    let model_path = |c: &str| a.models.join(format!("{c}.lm"));
    let global = cfg.global_name().to_string();
    let mut inputs: Vec<PathBuf> = vec![
        a.shift_table.into(),
        a.space.into(),
        a.store.into(),
        model_path(&global),
    ];
    let g_model = load_model(&model_path(&global))?;
    let present: Vec<&String> = spec.members.iter().filter(|m| model_path(m).exists()).collect();
    let member_names: Vec<String> = if present.len() == spec.members.len() {
        spec.members.clone()
    } else if present.is_empty() {
        warn!(
            "lm-eval: no member models in {}; domain rows omitted",
            a.models.display()
        );
        Vec::new()
    } else {
        let missing = spec.members.iter().find(|m| !model_path(m).exists()).unwrap();
        return Err(StageError::Data(format!(
            "missing input: {}",
            model_path(missing).display()
        )));
    };
    let member_models = member_names
        .iter()
        .map(|m| {
            inputs.push(model_path(m));
            load_model(&model_path(m))
        })
        .collect::<StageResult<Vec<_>>>()?;
    let test_docs = |c: &str| -> StageResult<Vec<Vec<u32>>> {
        let sp = split(&store, c, cfg.lm.split, split_seed(seed, c)).map_err(data)?;
        encode_documents(&store, c, space.vocab(), &sp.test).map_err(data)
    };
    let g_test = test_docs(&global)?;
    let member_tests = member_names
        .iter()
        .map(|m| test_docs(m))
        .collect::<StageResult<Vec<_>>>()?;
    let members: Vec<ProbeModel<'_>> = member_models
        .iter()
        .zip(&member_tests)
        .map(|(model, test)| ProbeModel { model, test })
        .collect();
    let sets = ExperimentSets::from_table(&table, cfg.selection.k).map_err(data)?;
    let report = substitution_experiment(
        &space,
        &spec,
        ProbeModel {
            model: &g_model,
            test: &g_test,
        },
        &members,
        &sets,
        &cfg.experiment_options(),
    )
    .map_err(data)?;
    save(write_atomic(a.out, tsv::write_lm_report(&report).as_bytes()))?;
    let inputs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let params = json!({
        "domain": domain,
        "k": cfg.selection.k,
        "member_models": member_names,
        "probe": cfg.lm.probe,
        "aggregation": cfg.lm.aggregation,
    });
    ctx.finish("lm-eval", &inputs, params, a.out, start)
}

pub fn export(ctx: &Context, space_path: &Path, out: &Path) -> StageResult<()> {
    let start = Instant::now();
    ctx.check_output(out)?;
    let space = load_space(space_path)?;
    let mut buf = Vec::new();
    persist::export_text(&space, &mut buf).map_err(internal)?;
    save(write_atomic(out, &buf))?;
    ctx.finish("export", &[space_path], json!({}), out, start)
}

pub fn report(ctx: &Context, out: Option<&Path>) -> StageResult<PathBuf> {
    let start = Instant::now();
    let out = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ctx.workspace.join("report.tsv"));
    ctx.check_output(&out)?;
    let text = crate::report::build(&ctx.workspace)?;
    save(write_atomic(&out, text.as_bytes()))?;
    ctx.finish("report", &[], json!({}), &out, start)?;
    Ok(out)
}
