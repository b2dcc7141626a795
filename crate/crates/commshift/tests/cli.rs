use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SCENARIO: &str = r#"
vocab_size = 300
tokens_per_community = 6000
authors_per_community = 25
topics = 6
seed = 4
jargon_per_community = 2
jargon_count = 30

[[planted]]
word = "w0040"
alpha = 1.0
prominence = 0.8

[[planted]]
word = "w0061"
community = "c1"
alpha = 1.0
"#;

const CONFIG: &str = r#"
seed = 11

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
min_count = 2

[training]
dim = 12
epochs = 2

[lm]
epochs = 1
learning_rate = 0.01
batch_size = 4
bptt = 10
max_train_tokens = 2000
max_valid_tokens = 500

[selection]
k = 6
"#;

struct Ws {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Ws {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        fs::write(root.join("scenario.toml"), SCENARIO).unwrap();
        fs::write(root.join("config.toml"), CONFIG).unwrap();
        Ws { _dir: dir, root }
    }

    fn p(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_commshift"))
            .args(args)
            .arg("--workspace")
            .arg(&self.root)
            .arg("--config")
            .arg(self.p("config.toml"))
            .env_remove("COMMSHIFT_WORKSPACE")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }

    fn s(&self, name: &str) -> String {
        self.p(name).display().to_string()
    }
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn run_pipeline(ws: &Ws) {
    fs::create_dir_all(ws.p("models")).unwrap();
    ws.ok(&[
        "synth",
        "--scenario",
        &ws.s("scenario.toml"),
        "--out",
        &ws.s("corpus.jsonl"),
    ]);
    ws.ok(&["ingest", "--input", &ws.s("corpus.jsonl"), "--out", &ws.s("store.bin")]);
    ws.ok(&["train", "--store", &ws.s("store.bin"), "--out", &ws.s("d.space")]);
    ws.ok(&[
        "shift",
        "--space",
        &ws.s("d.space"),
        "--domain",
        "d",
        "--out",
        &ws.s("d.shift.tsv"),
    ]);
    ws.ok(&[
        "features",
        "--store",
        &ws.s("store.bin"),
        "--scope",
        "domain:d",
        "--out",
        &ws.s("d.features.tsv"),
    ]);
    ws.ok(&[
        "features",
        "--store",
        &ws.s("store.bin"),
        "--scope",
        "c1",
        "--out",
        &ws.s("c1.features.tsv"),
    ]);
    ws.ok(&[
        "contrast",
        "--shift-table",
        &ws.s("d.shift.tsv"),
        "--features",
        &ws.s("d.features.tsv"),
        "--column",
        "dsi",
        "--out",
        &ws.s("d.contrast.tsv"),
    ]);
    ws.ok(&[
        "contrast",
        "--shift-table",
        &ws.s("d.shift.tsv"),
        "--features",
        &ws.s("c1.features.tsv"),
        "--column",
        "csi_c1",
        "--out",
        &ws.s("c1.contrast.tsv"),
    ]);
    for c in ["g", "c0", "c1", "c2"] {
        ws.ok(&[
            "lm-train",
            "--store",
            &ws.s("store.bin"),
            "--space",
            &ws.s("d.space"),
            "--community",
            c,
            "--out",
            &ws.s(&format!("models/{c}.lm")),
        ]);
    }
    ws.ok(&[
        "lm-eval",
        "--models",
        &ws.s("models"),
        "--shift-table",
        &ws.s("d.shift.tsv"),
        "--space",
        &ws.s("d.space"),
        "--store",
        &ws.s("store.bin"),
        "--out",
        &ws.s("d.lm.tsv"),
    ]);
    ws.ok(&["report"]);
}

#[test]
fn end_to_end_pipeline() {
    let ws = Ws::new();
    run_pipeline(&ws);

    let manifests: Vec<String> = fs::read_dir(ws.p("manifests"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    for stage in [
        "synth", "ingest", "train", "shift", "features", "contrast", "lm-train", "lm-eval", "report",
    ] {
        assert!(
            manifests.iter().any(|m| m.starts_with(&format!("{stage}."))),
            "no manifest for {stage}: {manifests:?}"
        );
    }

    let report = fs::read_to_string(ws.p("report.tsv")).unwrap();
    let shift_rows: Vec<&str> = report
        .lines()
        .skip_while(|l| *l != "# shift")
        .skip(2)
        .take_while(|l| !l.is_empty())
        .collect();
    let columns: Vec<&str> = shift_rows.iter().map(|r| r.split('\t').nth(1).unwrap()).collect();
    assert_eq!(columns, ["dsi", "csi_c0", "csi_c1", "csi_c2"]);
    assert!(report.contains("d\tdomain\td\tshift\tc->g"));
    for c in ["c0", "c1", "c2"] {
        assert!(
            report.contains(&format!("d\tcommunity\t{c}\tno.shift\tg->c")),
            "{report}"
        );
    }
    assert!(report.contains("d\tdomain:d\tdsi\tpro\t"));

    let first = fs::read(ws.p("report.tsv")).unwrap();
    ws.ok(&["report", "--force"]);
    assert_eq!(first, fs::read(ws.p("report.tsv")).unwrap());

    let shift = fs::read_to_string(ws.p("d.shift.tsv")).unwrap();
    assert!(shift.starts_with("word\tdsi\tcsi_c0\tcsi_c1\tcsi_c2\n"));
    let row = shift.lines().nth(1).unwrap();
    assert!(row.split('\t').skip(1).all(|v| v.split('.').nth(1).unwrap().len() == 6));

    ws.ok(&["export", "--space", &ws.s("d.space"), "--out", &ws.s("d.vec")]);
    let vec = fs::read_to_string(ws.p("d.vec")).unwrap();
    let mut lines = vec.lines();
    assert_eq!(lines.next(), Some("# c0"));
    let dims: Vec<usize> = lines.next().unwrap().split(' ').map(|x| x.parse().unwrap()).collect();
    assert_eq!(dims[1], 12);
    assert_eq!(lines.next().unwrap().split(' ').count(), 13);
}

#[test]
fn refuses_to_overwrite_without_force() {
    let ws = Ws::new();
    ws.ok(&[
        "synth",
        "--scenario",
        &ws.s("scenario.toml"),
        "--out",
        &ws.s("corpus.jsonl"),
    ]);
    let again = ws.run(&[
        "synth",
        "--scenario",
        &ws.s("scenario.toml"),
        "--out",
        &ws.s("corpus.jsonl"),
    ]);
    assert_eq!(code(&again), 1);
    assert!(stderr(&again).contains("--force"));
    ws.ok(&[
        "synth",
        "--scenario",
        &ws.s("scenario.toml"),
        "--out",
        &ws.s("corpus.jsonl"),
        "--force",
    ]);
}

#[test]
fn synth_is_deterministic() {
    let ws = Ws::new();
    ws.ok(&["synth", "--scenario", &ws.s("scenario.toml"), "--out", &ws.s("a.jsonl")]);
    ws.ok(&["synth", "--scenario", &ws.s("scenario.toml"), "--out", &ws.s("b.jsonl")]);
    assert_eq!(fs::read(ws.p("a.jsonl")).unwrap(), fs::read(ws.p("b.jsonl")).unwrap());
    ws.ok(&[
        "synth",
        "--scenario",
        &ws.s("scenario.toml"),
        "--seed",
        "5",
        "--out",
        &ws.s("c.jsonl"),
    ]);
    assert_ne!(fs::read(ws.p("a.jsonl")).unwrap(), fs::read(ws.p("c.jsonl")).unwrap());
}

#[test]
fn usage_errors_exit_1() {
    let ws = Ws::new();
    let out = ws.run(&["frobnicate"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).to_lowercase().contains("usage"));
    assert_eq!(code(&ws.run(&["shift", "--space", "x"])), 1);
    assert_eq!(
        code(&ws.run(&[
            "contrast",
            "--shift-table",
            "a",
            "--features",
            "b",
            "--column",
            "bogus",
            "--out",
            "c"
        ])),
        1
    );
}

#[test]
fn missing_input_exits_2_and_names_path() {
    let ws = Ws::new();
    let missing = ws.s("nowhere.jsonl");
    let out = ws.run(&["ingest", "--input", &missing, "--out", &ws.s("store.bin")]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains(&missing), "{}", stderr(&out));
}

#[test]
fn empty_workspace_report_exits_2() {
    let ws = Ws::new();
    assert_eq!(code(&ws.run(&["report"])), 2);
}

#[test]
fn corrupt_store_exits_2() {
    let ws = Ws::new();
    ws.ok(&[
        "synth",
        "--scenario",
        &ws.s("scenario.toml"),
        "--out",
        &ws.s("corpus.jsonl"),
    ]);
    ws.ok(&["ingest", "--input", &ws.s("corpus.jsonl"), "--out", &ws.s("store.bin")]);
    let mut bytes = fs::read(ws.p("store.bin")).unwrap();
    let n = bytes.len();
    bytes[n / 2] ^= 0xff;
    fs::write(ws.p("store.bin"), bytes).unwrap();
    let out = ws.run(&["train", "--store", &ws.s("store.bin"), "--out", &ws.s("d.space")]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("checksum"));
}

#[test]
fn bad_config_exits_2() {
    let ws = Ws::new();
    fs::write(ws.p("config.toml"), "seed = 1\n[[community]]\nname = \"a\"\n").unwrap();
    fs::write(ws.p("in.jsonl"), "").unwrap();
    let out = ws.run(&["ingest", "--input", &ws.s("in.jsonl"), "--out", &ws.s("store.bin")]);
    assert_eq!(code(&out), 2);
}

#[test]
fn malformed_records_are_tallied() {
    let ws = Ws::new();
    let lines = [
        r#"{"community":"c0","author":"a","body":"x y z","created_utc":5,"extra":[1]}"#,
        r#"{"community":"g","author":"b","body":"x y"}"#,
        r#"{"community":"c1","author":"a"}"#,
        "not json",
        r#"{"community":"zz","author":"a","body":"x"}"#,
    ];
    fs::write(ws.p("in.jsonl"), lines.join("\n")).unwrap();
    ws.ok(&["ingest", "--input", &ws.s("in.jsonl"), "--out", &ws.s("store.bin")]);
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.p("manifests/ingest.store.bin.json")).unwrap()).unwrap();
    assert_eq!(m["parameters"]["tally"]["accepted"], 2);
    assert_eq!(m["parameters"]["tally"]["malformed"], 2);
    assert_eq!(m["parameters"]["tally"]["unconfigured"], 1);
    assert_eq!(m["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn workspace_defaults_to_environment() {
    let ws = Ws::new();
    let out = Command::new(env!("CARGO_BIN_EXE_commshift"))
        .args([
            "synth",
            "--scenario",
            &ws.s("scenario.toml"),
            "--out",
            &ws.s("corpus.jsonl"),
        ])
        .env("COMMSHIFT_WORKSPACE", &ws.root)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(Path::new(&ws.p("manifests/synth.corpus.jsonl.json")).exists());
}
