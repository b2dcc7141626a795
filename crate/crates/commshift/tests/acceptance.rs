//! Acceptance suite. Prints one PASS/FAIL line per criterion. Exits
//! non-zero on any failure when `COMMSHIFT_ACCEPTANCE_STRICT=1`.

#[path = "../../core/tests/support/mod.rs"]
mod oracles;

use std::path::Path;
use std::time::Instant;

use commshift::config::WorkspaceConfig;
use commshift::stages::{self, Context, LmEvalArgs};
use commshift_core::corpus::{build_vocabulary, ingest, CommunityId, CorpusConfig, DomainSpec, Record};
use commshift_core::lexfeatures::{feature_table, llr_bigram, prominence, BigramContingency, FeatureOptions, Scope};
use commshift_core::lmeval::{
    encode_documents, split, substitution_experiment, train_lm, ExperimentOptions, ExperimentSets, LMConfig,
    LanguageModel, ProbeModel, RowKind, SetLabel,
};
use commshift_core::sgns;
use commshift_core::shiftindex::{index, mean_std, select_words, shift_table, Column, SelectionMode, ShiftTable};
use commshift_core::stats::{
    cohens_d, feature_contrast, ttest_ind, wilcoxon_signed_rank_with, Feature, WilcoxonMethod,
};
use commshift_core::synthgen::{generate, jargon_name, word_name, PlantedWord, ShiftScenario};
use commshift_core::vectorspace::{train_space, EmbeddingSpace, TrainingConfig};
use commshift_core::{CorpusStore, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const MEMBERS: [&str; 3] = ["c0", "c1", "c2"];
const SPACE_COMMUNITIES: [&str; 4] = ["c0", "c1", "c2", "g"];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_space(rng: &mut ChaCha8Rng) -> (EmbeddingSpace, usize) {
    let members = rng.random_range(2..=4);
    let words = rng.random_range(1..=50);
    let dim = rng.random_range(1..=8);
    let mut ids: Vec<CommunityId> = (0..members).map(|i| CommunityId::member(format!("c{i}"))).collect();
    ids.push(CommunityId::global("g"));
    let n = words * dim;
    let mut table = |s: f32| -> Vec<f32> { (0..n).map(|_| rng.random_range(-s..s)).collect() };
    let main = table(1.0);
    let devs = (0..=members).map(|_| table(0.8)).collect();
    let ctx = table(1.0);
    let vocab = Vocabulary::from_words((0..words).map(|i| format!("x{i}")).collect(), 1);
    let space = EmbeddingSpace::from_parts(vocab, ids, dim, main, devs, ctx, TrainingConfig::default()).unwrap();
    (space, members)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (space, members) = random_space(&mut rng);
        let names: Vec<String> = (0..members).map(|i| format!("c{i}")).collect();
        let domain = DomainSpec {
            name: "d".into(),
            members: names,
        };
        let table = shift_table(&space, &domain).unwrap();
        let idx: Vec<usize> = (0..members).collect();
        for id in 0..space.vocab().len() as u32 {
            let v: Vec<Vec<f64>> = (0..=members)
                .map(|c| space.vector_by_id(id, c).iter().map(|&x| x as f64).collect())
                .collect();
            worst = worst.max((table.dsi[id as usize] - oracles::dsi(&v, &idx, members)).abs());
            for m in 0..members {
                worst = worst.max((table.csi[m][id as usize] - oracles::csi(&v, &idx, m, members)).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-9 && secs < 5.0,
        format!("max |diff| {worst:.2e} over 100 spaces in {secs:.2}s"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let mut draw = || -> Vec<f64> {
            let n = rng.random_range(1..60);
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
        };
        let s = draw();
        let t = draw();
        let (_, ss) = mean_std(&s);
        let (_, st) = mean_std(&t);
        worst = worst.max((index(&s, &s).unwrap() + 2.0 * ss).abs());
        worst = worst.max((index(&s, &t).unwrap() + index(&t, &s).unwrap() + 2.0 * (ss + st)).abs());
        worst = worst.max((index(&s, &t).unwrap() - oracles::generic_index(&s, &t)).abs());
    }
    outcome(
        worst <= 1e-12,
        format!("max deviation {worst:.2e} over 1000 multiset pairs"),
    )
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let s = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if s == 0.0 {
        0.0
    } else {
        d / s
    }
}

fn central_diff(f: &dyn Fn(&[f64]) -> f64, x: &[f64], eps: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += eps;
            m[i] -= eps;
            (f(&p) - f(&m)) / (2.0 * eps)
        })
        .collect()
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut sg_worst = 0.0f64;
    for _ in 0..50 {
        let dim = rng.random_range(2..=10);
        let mut r = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-0.8..0.8)).collect() };
        let main = r(dim);
        let dev = r(dim);
        let ctx = r(8 * dim);
        let targets = [(1u32, true), (0, false), (4, false), (6, false), (7, false)];
        let (l2d, l2m) = (0.2, 0.01);
        let h: Vec<f64> = main.iter().zip(&dev).map(|(a, b)| a + b).collect();
        let mut ctx_after = ctx.clone();
        let mut step = vec![0.0; dim];
        sgns::score_targets(&h, &mut ctx_after, &targets, 1.0, &mut step);
        let g_main: Vec<f64> = step.iter().zip(&main).map(|(s, m)| -s + l2m * m).collect();
        let g_dev: Vec<f64> = step.iter().zip(&dev).map(|(s, d)| -s + l2d * d).collect();
        let g_ctx: Vec<f64> = ctx_after.iter().zip(&ctx).map(|(a, b)| b - a).collect();
        let eps = 1e-6;
        let n_main = central_diff(&|x| sgns::pair_loss(x, &dev, &ctx, &targets, l2d, l2m), &main, eps);
        let n_dev = central_diff(&|x| sgns::pair_loss(&main, x, &ctx, &targets, l2d, l2m), &dev, eps);
        let n_ctx = central_diff(&|x| sgns::pair_loss(&main, &dev, x, &targets, l2d, l2m), &ctx, eps);
        sg_worst = sg_worst
            .max(rel_err(&g_main, &n_main))
            .max(rel_err(&g_dev, &n_dev))
            .max(rel_err(&g_ctx, &n_ctx));
    }
    let mut lm_worst = 0.0f64;
    for (layers, seed) in [(1usize, 5u64), (2, 6)] {
        let (v, hdim) = (7, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let emb: Vec<f64> = (0..(v + 1) * hdim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut lm = LanguageModel::<f64>::new("c", emb, v, hdim, layers, &mut rng).unwrap();
        let docs = vec![vec![0u32, 3, 5, 1, 7, 2, 2, 4, 6], vec![1, 0, 5, 5]];
        let (_, grad) = lm.loss_and_gradient(&docs);
        let eps = 1e-5;
        for (i, &analytic) in grad.iter().enumerate() {
            let orig = lm.params()[i];
            lm.params_mut()[i] = orig + eps;
            let lp = lm.loss_and_gradient(&docs).0;
            lm.params_mut()[i] = orig - eps;
            let lmn = lm.loss_and_gradient(&docs).0;
            lm.params_mut()[i] = orig;
            let numeric = (lp - lmn) / (2.0 * eps);
            let scale = analytic.abs().max(numeric.abs()).max(1e-6);
            lm_worst = lm_worst.max((analytic - numeric).abs() / scale);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        sg_worst <= 1e-4 && lm_worst <= 1e-3 && secs < 30.0,
        format!("skip-gram rel err {sg_worst:.2e}, LSTM rel err {lm_worst:.2e}, {secs:.2}s"),
    )
}

fn corpus_config() -> CorpusConfig {
    let mut ids: Vec<CommunityId> = MEMBERS.iter().map(|c| CommunityId::member(*c)).collect();
    ids.push(CommunityId::global("g"));
    CorpusConfig::new(ids, vec![DomainSpec::new("d", &MEMBERS)])
}

fn domain() -> DomainSpec {
    DomainSpec::new("d", &MEMBERS)
}

fn build_store(scenario: &ShiftScenario) -> CorpusStore {
    let records = generate(scenario).unwrap();
    ingest(records.into_iter().map(Ok::<Record, ()>), &corpus_config()).unwrap()
}

fn train_embeddings(store: &CorpusStore, seed: u64) -> (Vocabulary, EmbeddingSpace) {
    let vocab = build_vocabulary(store, 5).unwrap();
    let cfg = TrainingConfig {
        dim: 50,
        epochs: 3,
        seed,
        ..TrainingConfig::default()
    };
    let space = train_space(store, &vocab, &SPACE_COMMUNITIES, &cfg).unwrap();
    (vocab, space)
}

fn domain_words() -> Vec<PlantedWord> {
    (0..10)
        .map(|k| {
            let mut p = PlantedWord::domain(word_name(100 + 37 * k), 1.0);
            p.prominence = Some(0.9);
            p
        })
        .collect()
}

/// Planted corpus for criteria 4, 5 and 7.
fn scenario_a(seed: u64) -> ShiftScenario {
    let mut planted = domain_words();
    for k in 0..5 {
        planted.push(PlantedWord::community(word_name(120 + 41 * k), MEMBERS[k % 3], 1.0));
    }
    ShiftScenario {
        planted,
        jargon_per_community: 3,
        seed,
        ..ShiftScenario::default()
    }
}

/// Planted corpus for criterion 6: ten community-level words per member so
/// every csi top-10 set is dominated by planted words.
fn scenario_b(seed: u64) -> ShiftScenario {
    let mut planted = domain_words();
    for k in 0..30 {
        planted.push(PlantedWord::community(word_name(450 + 11 * k), MEMBERS[k % 3], 1.0));
    }
    ShiftScenario {
        planted,
        jargon_per_community: 3,
        seed,
        ..ShiftScenario::default()
    }
}

struct SeedA {
    precision: f64,
    community_ok: bool,
    community_detail: String,
    pro: Option<(f64, f64)>,
    jargon_ok: bool,
}

fn run_seed_a(seed: u64) -> SeedA {
    let scenario = scenario_a(seed);
    let store = build_store(&scenario);
    let (vocab, space) = train_embeddings(&store, seed);
    let table = shift_table(&space, &domain()).unwrap();

    let planted: Vec<&str> = scenario.planted[..10].iter().map(|p| p.word.as_str()).collect();
    let top = select_words(&table, &Column::Dsi, SelectionMode::TopK(10))
        .unwrap()
        .words;
    let precision = top.iter().filter(|w| planted.contains(&w.as_str())).count() as f64 / 10.0;

    let mut community_ok = true;
    let mut misses = Vec::new();
    for p in &scenario.planted[10..] {
        let commshift_core::synthgen::ShiftLevel::Community(target) = &p.level else {
            unreachable!()
        };
        let own = table.value(&p.word, &Column::Csi(target.clone())).unwrap();
        for other in MEMBERS.iter().filter(|c| *c != target) {
            if table.value(&p.word, &Column::Csi(other.to_string())).unwrap() >= own {
                community_ok = false;
                misses.push(p.word.clone());
            }
        }
    }

    let features = feature_table(&store, &vocab, &Scope::Domain(domain()), FeatureOptions::default()).unwrap();
    let shift = select_words(&table, &Column::Dsi, SelectionMode::TopK(10))
        .unwrap()
        .words;
    let noshift = select_words(&table, &Column::Dsi, SelectionMode::BottomKPositive(10))
        .unwrap()
        .words;
    let report = feature_contrast(&shift, &noshift, &features).unwrap();
    let pro = match report.get(Feature::Pro) {
        Some(Ok(t)) => Some((t.p_value, t.effect_size.unwrap_or(0.0))),
        _ => None,
    };

    let mut jargon_ok = true;
    for (ci, c) in MEMBERS.iter().enumerate() {
        for i in 0..scenario.jargon_per_community {
            let scope = Scope::Community {
                community: c.to_string(),
                domain: domain(),
            };
            jargon_ok &= prominence(&store, &jargon_name(ci, i), &scope).unwrap() == 1.0;
        }
    }
    SeedA {
        precision,
        community_ok,
        community_detail: if misses.is_empty() {
            "all".into()
        } else {
            format!("misses {misses:?}")
        },
        pro,
        jargon_ok,
    }
}

struct SeedB {
    pass: bool,
    detail: String,
}

fn lm_config(seed: u64) -> LMConfig {
    LMConfig {
        hidden_size: 50,
        epochs: 4,
        learning_rate: 0.01,
        max_train_tokens: Some(150_000),
        max_valid_tokens: Some(20_000),
        seed,
        ..LMConfig::default()
    }
}

fn run_seed_b(seed: u64) -> SeedB {
    let store = build_store(&scenario_b(seed));
    let (vocab, space) = train_embeddings(&store, seed);
    let table: ShiftTable = shift_table(&space, &domain()).unwrap();
    let sp = split(&store, "g", [0.8, 0.1, 0.1], seed).unwrap();
    let train = encode_documents(&store, "g", &vocab, &sp.train).unwrap();
    let valid = encode_documents(&store, "g", &vocab, &sp.valid).unwrap();
    let test = encode_documents(&store, "g", &vocab, &sp.test).unwrap();
    let lm = train_lm(&train, &valid, &space, "g", &lm_config(seed)).unwrap();
    let sets = ExperimentSets::from_table(&table, 10).unwrap();
    let report = substitution_experiment(
        &space,
        &domain(),
        ProbeModel {
            model: &lm.model,
            test: &test,
        },
        &[],
        &sets,
        &ExperimentOptions::default(),
    )
    .unwrap();
    let mut pass = true;
    let mut cells = Vec::new();
    for c in MEMBERS {
        let s = report.row(RowKind::Community, c, SetLabel::Shift).unwrap();
        let n = report.row(RowKind::Community, c, SetLabel::NoShift).unwrap();
        let sp = s.test.as_ref().map(|t| t.p_value).unwrap_or(1.0);
        let np = n.test.as_ref().map(|t| t.p_value).unwrap_or(1.0);
        pass &= s.median_a > s.median_b && sp < 0.05 && np >= 0.05;
        cells.push(format!(
            "{c}: shift {:.3}>{:.3} p={sp:.4}, no.shift p={np:.4}",
            s.median_a, s.median_b
        ));
    }
    SeedB {
        pass,
        detail: format!(
            "valid ppl {:.1}; {}",
            lm.history[lm.best_epoch - 1].valid_perplexity,
            cells.join("; ")
        ),
    }
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n1 = rng.random_range(2..25);
        let n2 = rng.random_range(2..25);
        let shift = rng.random_range(-1.5..1.5);
        let x: Vec<f64> = (0..n1).map(|_| rng.random_range(0.0..2.0)).collect();
        let y: Vec<f64> = (0..n2).map(|_| rng.random_range(0.0..2.0) + shift).collect();
        let r = ttest_ind(&x, &y).unwrap();
        let (t, p, d) = oracles::student_t(&x, &y);
        worst = worst
            .max((r.statistic - t).abs())
            .max((r.p_value - p).abs())
            .max((cohens_d(&x, &y).unwrap() - d).abs());

        let n = rng.random_range(1..=10);
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(0.0..3.0), rng.random_range(0.0..3.0)))
            .collect();
        let diffs: Vec<f64> = pairs.iter().map(|(a, b)| a - b).collect();
        let w = wilcoxon_signed_rank_with(&pairs, WilcoxonMethod::Exact).unwrap();
        let (stat, wp) = oracles::wilcoxon_exact(&diffs);
        worst = worst.max((w.statistic - stat).abs()).max((w.p_value - wp).abs());
    }
    outcome(worst <= 1e-6, format!("max |diff| {worst:.2e} over 50 cases"))
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let mut worst = 0.0f64;
    let mut cases = 0;
    while cases < 100 {
        let k: [u64; 4] = std::array::from_fn(|_| rng.random_range(0..1000));
        let total: u64 = k.iter().sum();
        if total == 0 {
            continue;
        }
        let ct = BigramContingency {
            joint: k[0],
            first: k[0] + k[1],
            second: k[0] + k[2],
            total,
        };
        worst = worst.max((llr_bigram(ct).unwrap() - oracles::llr(k[0], k[1], k[2], k[3])).abs());
        cases += 1;
    }
    let mut zero = true;
    for _ in 0..20 {
        let (a, b, c, d) = (
            rng.random_range(1..30u64),
            rng.random_range(1..30u64),
            rng.random_range(1..30u64),
            rng.random_range(1..30u64),
        );
        let ct = BigramContingency {
            joint: a * c,
            first: a * (c + d),
            second: (a + b) * c,
            total: (a + b) * (c + d),
        };
        zero &= llr_bigram(ct).unwrap() == 0.0;
    }
    outcome(
        worst <= 1e-6 && zero,
        format!("max |diff| {worst:.2e} over 100 tables; independence gives exactly 0: {zero}"),
    )
}

const PIPE_SCENARIO: &str = r#"
vocab_size = 500
tokens_per_community = 20000
authors_per_community = 40
topics = 8
jargon_per_community = 2
jargon_count = 40

[[planted]]
word = "w0050"
alpha = 1.0
prominence = 0.8

[[planted]]
word = "w0071"
community = "c1"
alpha = 1.0
"#;

const PIPE_CONFIG: &str = r#"
seed = 21
[[community]]
name = "c0"
[[community]]
name = "c1"
[[community]]
name = "c2"
[[community]]
name = "g"
global = true
[[domain]]
name = "d"
members = ["c0", "c1", "c2"]
[corpus]
min_count = 3
[training]
dim = 16
epochs = 2
[lm]
epochs = 1
learning_rate = 0.01
max_train_tokens = 5000
max_valid_tokens = 1000
[selection]
k = 8
"#;

fn pipeline_report(root: &Path) -> Vec<u8> {
    std::fs::write(root.join("scenario.toml"), PIPE_SCENARIO).unwrap();
    std::fs::write(root.join("config.toml"), PIPE_CONFIG).unwrap();
    WorkspaceConfig::load(&root.join("config.toml")).unwrap();
    let ctx = Context {
        config: Some(root.join("config.toml")),
        ..Context::new(root)
    };
    let p = |n: &str| root.join(n);
    stages::synth(&ctx, &p("scenario.toml"), &p("corpus.jsonl")).unwrap();
    stages::ingest_stage(&ctx, &[p("corpus.jsonl")], &p("store.bin")).unwrap();
    stages::train(&ctx, &p("store.bin"), None, &p("d.space")).unwrap();
    stages::shift(&ctx, &p("d.space"), "d", &p("d.shift.tsv")).unwrap();
    stages::features(&ctx, &p("store.bin"), "domain:d", &p("d.features.tsv")).unwrap();
    stages::contrast(
        &ctx,
        &p("d.shift.tsv"),
        &p("d.features.tsv"),
        "dsi",
        None,
        &p("d.contrast.tsv"),
    )
    .unwrap();
    std::fs::create_dir_all(p("models")).unwrap();
    for c in SPACE_COMMUNITIES {
        stages::lm_train(&ctx, &p("store.bin"), &p("d.space"), c, &p(&format!("models/{c}.lm"))).unwrap();
    }
    stages::lm_eval(
        &ctx,
        &LmEvalArgs {
            models: &p("models"),
            shift_table: &p("d.shift.tsv"),
            space: &p("d.space"),
            store: &p("store.bin"),
            domain: None,
            out: &p("d.lm.tsv"),
        },
    )
    .unwrap();
    let out = stages::report(&ctx, None).unwrap();
    std::fs::read(out).unwrap()
}

fn criterion_10() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = pipeline_report(a.path());
    let rb = pipeline_report(b.path());
    outcome(
        ra == rb && !ra.is_empty(),
        format!("two runs, {} byte report, identical: {}", ra.len(), ra == rb),
    )
}

type Line = (u8, &'static str, Outcome, f64);

fn record(lines: &mut Vec<Line>, id: u8, name: &'static str, o: Outcome, secs: f64, note: &str) {
    println!(
        "criterion {id:>2} {} {name}: {} ({secs:.1}s{note})",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    );
    lines.push((id, name, o, secs));
}

fn timed(lines: &mut Vec<Line>, id: u8, name: &'static str, f: &dyn Fn() -> Outcome) {
    let start = Instant::now();
    let o = f();
    record(lines, id, name, o, start.elapsed().as_secs_f64(), "");
}

fn main() {
    let mut lines: Vec<Line> = Vec::new();
    timed(&mut lines, 1, "index oracle equivalence", &criterion_1);
    timed(&mut lines, 2, "generic index algebra", &criterion_2);
    timed(&mut lines, 3, "gradient checks", &criterion_3);
    timed(&mut lines, 8, "statistics validation", &criterion_8);
    timed(&mut lines, 9, "LLR validation", &criterion_9);
    timed(&mut lines, 10, "pipeline determinism", &criterion_10);

    let start = Instant::now();
    let a: Vec<SeedA> = SEEDS
        .iter()
        .map(|&s| {
            let r = run_seed_a(s);
            eprintln!(
                "  planted corpus seed {s}: p@10 {:.1}, community csi {}, pro {:?}, jargon pro=1 {}",
                r.precision, r.community_detail, r.pro, r.jargon_ok
            );
            r
        })
        .collect();
    let secs_a = start.elapsed().as_secs_f64();
    let mean_p = a.iter().map(|r| r.precision).sum::<f64>() / a.len() as f64;
    let c4 = outcome(mean_p >= 0.8, format!("mean precision@10 {mean_p:.2} over 5 seeds"));
    let ok5 = a.iter().filter(|r| r.community_ok).count();
    let c5 = outcome(
        ok5 >= 4,
        format!("{ok5}/5 seeds with every planted csi highest in its community"),
    );
    let ok7 = a
        .iter()
        .filter(|r| r.pro.is_some_and(|(p, d)| p < 0.01 && d > 0.4))
        .count();
    let jargon = a.iter().all(|r| r.jargon_ok);
    let pros: Vec<String> = a
        .iter()
        .map(|r| match r.pro {
            Some((p, d)) => format!("p={p:.1e},d={d:.2}"),
            None => "n/a".into(),
        })
        .collect();
    let c7 = outcome(
        ok7 == a.len() && jargon,
        format!(
            "Pro contrast significant in {ok7}/5 seeds [{}]; jargon Pro = 1.0: {jargon}",
            pros.join(" ")
        ),
    );
    let share = secs_a / 3.0;
    for (id, name, o) in [
        (4u8, "planted domain shift", c4),
        (5, "planted community shift", c5),
        (7, "feature contrast direction", c7),
    ] {
        record(&mut lines, id, name, o, share, ", shared corpus");
    }

    timed(&mut lines, 6, "substitution experiment direction", &|| {
        let runs: Vec<SeedB> = SEEDS
            .iter()
            .map(|&s| {
                let r = run_seed_b(s);
                eprintln!(
                    "  substitution seed {s}: {} {}",
                    if r.pass { "ok" } else { "miss" },
                    r.detail
                );
                r
            })
            .collect();
        let ok = runs.iter().filter(|r| r.pass).count();
        outcome(
            ok >= 4,
            format!("{ok}/5 seeds with every cell in the expected direction"),
        )
    });

    lines.sort_by_key(|l| l.0);
    let failed: Vec<u8> = lines.iter().filter(|l| !l.2.pass).map(|l| l.0).collect();
    println!(
        "acceptance: {}/{} criteria pass{}",
        lines.len() - failed.len(),
        lines.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(", failing {failed:?}")
        }
    );
    if !failed.is_empty() && std::env::var("COMMSHIFT_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
