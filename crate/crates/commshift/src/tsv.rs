//! Tab-separated tables with a header row. Floats use 6 decimals.

use std::fmt::Write as _;

use commshift_core::lexfeatures::{FeatureRow, FeatureTable};
use commshift_core::lmeval::{PerplexityReport, RowKind};
use commshift_core::shiftindex::ShiftTable;
use commshift_core::stats::ContrastReport;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TsvError {
    #[error("empty table")]
    Empty,
    #[error("unexpected header: {0}")]
    Header(String),
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
}

pub fn fmt_f(x: f64) -> String {
    format!("{x:.6}")
}

fn parse_f(s: &str, line: usize) -> Result<f64, TsvError> {
    s.parse().map_err(|_| TsvError::Row {
        line,
        message: format!("`{s}` is not a number"),
    })
}

/// Header fields and data rows. Every row must have the header's width.
pub fn parse(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>), TsvError> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or(TsvError::Empty)?
        .split('\t')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        if l.is_empty() {
            continue;
        }
        let fields: Vec<String> = l.split('\t').map(str::to_string).collect();
        if fields.len() != header.len() {
            return Err(TsvError::Row {
                line: i + 2,
                message: format!("{} fields, header has {}", fields.len(), header.len()),
            });
        }
        rows.push(fields);
    }
    Ok((header, rows))
}

pub fn write_shift_table(t: &ShiftTable) -> String {
    let mut s = String::from("word\tdsi");
    for m in &t.members {
        write!(s, "\tcsi_{m}").unwrap();
    }
    s.push('\n');
    for (i, w) in t.words.iter().enumerate() {
        s.push_str(w);
        write!(s, "\t{}", fmt_f(t.dsi[i])).unwrap();
        for c in &t.csi {
            write!(s, "\t{}", fmt_f(c[i])).unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn read_shift_table(text: &str, domain: &str) -> Result<ShiftTable, TsvError> {
    let (header, rows) = parse(text)?;
    if header.len() < 2 || header[0] != "word" || header[1] != "dsi" {
        return Err(TsvError::Header(header.join(" ")));
    }
    let members = header[2..]
        .iter()
        .map(|h| {
            h.strip_prefix("csi_")
                .map(str::to_string)
                .ok_or_else(|| TsvError::Header(h.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = ShiftTable {
        domain: domain.to_string(),
        words: Vec::with_capacity(rows.len()),
        csi: vec![Vec::with_capacity(rows.len()); members.len()],
        members,
        dsi: Vec::with_capacity(rows.len()),
    };
    for (i, r) in rows.iter().enumerate() {
        t.words.push(r[0].clone());
        t.dsi.push(parse_f(&r[1], i + 2)?);
        for (m, v) in r[2..].iter().enumerate() {
            t.csi[m].push(parse_f(v, i + 2)?);
        }
    }
    Ok(t)
}

const FEATURE_HEADER: &str = "word\tfreq\tpro\tspe_raw\tspe\tdis";

pub fn write_features(t: &FeatureTable) -> String {
    let mut s = format!("{FEATURE_HEADER}\n");
    for r in &t.rows {
        writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.word,
            fmt_f(r.freq),
            fmt_f(r.pro),
            fmt_f(r.spe_raw),
            fmt_f(r.spe),
            fmt_f(r.dis)
        )
        .unwrap();
    }
    s
}

pub fn read_features(text: &str, scope: &str) -> Result<FeatureTable, TsvError> {
    let (header, rows) = parse(text)?;
    if header.join("\t") != FEATURE_HEADER {
        return Err(TsvError::Header(header.join(" ")));
    }
    let rows = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let f = |k: usize| parse_f(&r[k], i + 2);
            Ok(FeatureRow {
                word: r[0].clone(),
                freq: f(1)?,
                pro: f(2)?,
                spe_raw: f(3)?,
                spe: f(4)?,
                dis: f(5)?,
            })
        })
        .collect::<Result<_, TsvError>>()?;
    Ok(FeatureTable {
        scope: scope.to_string(),
        rows,
    })
}

pub const CONTRAST_HEADER: &str = "feature\tt\tp\td\tstars\tn_shift\tn_noshift\tnote";

/// One row per feature; `d` is the absolute Cohen's d.
pub fn write_contrast(r: &ContrastReport) -> String {
    let mut s = format!("{CONTRAST_HEADER}\n");
    let (n1, n2) = (r.shift_words.len(), r.noshift_words.len());
    for f in &r.features {
        match &f.result {
            Ok(t) => writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{n1}\t{n2}\t",
                f.feature.name(),
                fmt_f(t.statistic),
                fmt_f(t.p_value),
                fmt_f(t.effect_size.unwrap_or(f64::NAN)),
                t.stars
            ),
            Err(e) => writeln!(s, "{}\tNA\tNA\tNA\t\t{n1}\t{n2}\t{e}", f.feature.name()),
        }
        .unwrap();
    }
    s
}

pub const LM_HEADER: &str = "row_kind\trow\tset\tcell_a\tmedian_a\tcell_b\tmedian_b\tn\tw\tp\tstars\tdropped\tnote";

pub fn write_lm_report(r: &PerplexityReport) -> String {
    let mut s = format!("{LM_HEADER}\n");
    for row in &r.rows {
        let kind = match row.kind {
            RowKind::Domain => "domain",
            RowKind::Community => "community",
        };
        let (w, p, stars) = match &row.test {
            Some(t) => (fmt_f(t.statistic), fmt_f(t.p_value), t.stars.to_string()),
            None => ("NA".into(), "NA".into(), String::new()),
        };
        writeln!(
            s,
            "{kind}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{w}\t{p}\t{stars}\t{}\t{}",
            row.row,
            row.set.as_str(),
            row.cell_a,
            fmt_f(row.median_a),
            row.cell_b,
            fmt_f(row.median_b),
            row.probes.len(),
            row.dropped.join(","),
            row.note.as_deref().unwrap_or("")
        )
        .unwrap();
    }
    s
}
