//! Consolidated summary of a workspace: shift tables, feature contrasts and
//! substitution-experiment medians. The text depends only on artifact
//! contents, never on paths or timings.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use commshift_core::shiftindex::{select_words, SelectionMode};
use log::warn;

use crate::manifest::{manifest_dir, RunManifest};
use crate::stages::{StageError, StageResult};
use crate::tsv::{self, fmt_f};

const TOP_WORDS: usize = 5;

fn manifests(workspace: &Path) -> StageResult<Vec<RunManifest>> {
    let dir = manifest_dir(workspace);
    let mut paths: Vec<PathBuf> = match fs::read_dir(&dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect(),
        Err(_) => Vec::new(),
    };
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let m = RunManifest::read(&p).map_err(|e| StageError::Data(e.to_string()))?;
        if m.stage == "report" {
            continue;
        }
        for stale in m.stale_outputs() {
            warn!("report: {stale} changed since its {} run", m.stage);
        }
        out.push(m);
    }
    if out.is_empty() {
        return Err(StageError::Data(format!(
            "empty workspace: no run manifests in {}",
            dir.display()
        )));
    }
    Ok(out)
}

fn param<'a>(m: &'a RunManifest, key: &str) -> &'a str {
    m.parameters.get(key).and_then(|v| v.as_str()).unwrap_or("")
}

fn output_text(m: &RunManifest) -> StageResult<String> {
    let path = &m.outputs[0].path;
    fs::read_to_string(path).map_err(|e| StageError::Data(format!("{path}: {e}")))
}

fn bad_table(m: &RunManifest, e: tsv::TsvError) -> StageError {
    StageError::Data(format!("{}: {e}", m.outputs[0].path))
}

pub fn build(workspace: &Path) -> StageResult<String> {
    let all = manifests(workspace)?;
    let of = |stage: &'static str| all.iter().filter(move |m| m.stage == stage);
    let mut s = String::new();

    s.push_str("# shift\ndomain\tcolumn\tlevel\twords\tmean\tstd\ttop\n");
    for m in of("shift") {
        let domain = param(m, "domain");
        let table = tsv::read_shift_table(&output_text(m)?, domain).map_err(|e| bad_table(m, e))?;
        for col in table.columns() {
            let level = if col.name() == "dsi" { "domain" } else { "community" };
            let stats = table.stats(&col).map_err(|e| StageError::Data(e.to_string()))?;
            let k = TOP_WORDS.min(table.words.len());
            let top = select_words(&table, &col, SelectionMode::TopK(k))
                .map_err(|e| StageError::Data(e.to_string()))?
                .words;
            writeln!(
                s,
                "{domain}\t{}\t{level}\t{}\t{}\t{}\t{}",
                col.name(),
                table.words.len(),
                fmt_f(stats.mean),
                fmt_f(stats.std),
                top.join(",")
            )
            .unwrap();
        }
    }

    s.push_str("\n# contrast\ndomain\tscope\tcolumn\tfeature\tt\tp\td\tstars\n");
    for m in of("contrast") {
        let (_, rows) = tsv::parse(&output_text(m)?).map_err(|e| bad_table(m, e))?;
        for r in rows {
            writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                param(m, "domain"),
                param(m, "scope"),
                param(m, "column"),
                r[0],
                r[1],
                r[2],
                r[3],
                r[4]
            )
            .unwrap();
        }
    }

    s.push_str("\n# substitution\ndomain\tlevel\trow\tset\tcell_a\tmedian_a\tcell_b\tmedian_b\tn\tp\tstars\n");
    for m in of("lm-eval") {
        let (header, rows) = tsv::parse(&output_text(m)?).map_err(|e| bad_table(m, e))?;
        if header.join("\t") != tsv::LM_HEADER {
            return Err(bad_table(m, tsv::TsvError::Header(header.join(" "))));
        }
        for r in rows {
            writeln!(
                s,
                "{}\t{}",
                param(m, "domain"),
                [&r[0], &r[1], &r[2], &r[3], &r[4], &r[5], &r[6], &r[7], &r[9], &r[10]]
                    .map(String::as_str)
                    .join("\t")
            )
            .unwrap();
        }
    }
    Ok(s)
}
