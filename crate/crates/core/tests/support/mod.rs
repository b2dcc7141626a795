//! Reference implementations written directly from the textbook formulas,
//! sharing no code with the library. Also compiled into the acceptance
//! suite of the `commshift` crate.
#![allow(dead_code)]

pub fn cos(a: &[f64], b: &[f64]) -> f64 {
    let mut ab = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for i in 0..a.len() {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    ab / (aa.sqrt() * bb.sqrt())
}

fn mu_sigma(v: &[f64]) -> (f64, f64) {
    let mu = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / v.len() as f64;
    (mu, var.sqrt())
}

/// `(mu(s) - sigma(s)) - (mu(t) + sigma(t))`.
pub fn generic_index(s: &[f64], t: &[f64]) -> f64 {
    let (m1, s1) = mu_sigma(s);
    let (m2, s2) = mu_sigma(t);
    m1 - s1 - m2 - s2
}

/// `vectors[c]` is the word's vector in community `c`.
pub fn dsi(vectors: &[Vec<f64>], members: &[usize], global: usize) -> f64 {
    let mut within = Vec::new();
    for (i, &a) in members.iter().enumerate() {
        for &b in &members[i + 1..] {
            within.push(cos(&vectors[a], &vectors[b]));
        }
    }
    let to_global: Vec<f64> = members.iter().map(|&m| cos(&vectors[m], &vectors[global])).collect();
    generic_index(&within, &to_global)
}

pub fn csi(vectors: &[Vec<f64>], members: &[usize], community: usize, global: usize) -> f64 {
    let rest: Vec<f64> = members
        .iter()
        .filter(|&&m| m != community)
        .map(|&m| cos(&vectors[m], &vectors[global]))
        .collect();
    generic_index(&rest, &[cos(&vectors[community], &vectors[global])])
}

fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Dunning's G statistic in entropy form from the four cells.
pub fn llr(k11: u64, k12: u64, k21: u64, k22: u64) -> f64 {
    let k = [k11 as f64, k12 as f64, k21 as f64, k22 as f64];
    let n = k.iter().sum::<f64>();
    let r = [k[0] + k[1], k[2] + k[3]];
    let c = [k[0] + k[2], k[1] + k[3]];
    2.0 * (k.iter().map(|&x| xlnx(x)).sum::<f64>()
        - r.iter().map(|&x| xlnx(x)).sum::<f64>()
        - c.iter().map(|&x| xlnx(x)).sum::<f64>()
        + xlnx(n))
}

/// Lanczos approximation (g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, &c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

pub fn t_pdf(x: f64, df: f64) -> f64 {
    let ln_c = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    (ln_c - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp()
}

/// Two-sided p-value `1 - 2 * integral_0^|t| pdf`, by composite Simpson.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    let b = t.abs();
    let n = 20_000;
    let h = b / n as f64;
    let mut s = t_pdf(0.0, df) + t_pdf(b, df);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * t_pdf(i as f64 * h, df);
    }
    (1.0 - 2.0 * s * h / 3.0).max(0.0)
}

fn sample_var(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Student's pooled t statistic, its p-value and |d|.
pub fn student_t(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let m1 = x.iter().sum::<f64>() / n1;
    let m2 = y.iter().sum::<f64>() / n2;
    let sp2 = ((n1 - 1.0) * sample_var(x) + (n2 - 1.0) * sample_var(y)) / (n1 + n2 - 2.0);
    let t = (m1 - m2) / (sp2 * (1.0 / n1 + 1.0 / n2)).sqrt();
    (t, t_two_sided_p(t, n1 + n2 - 2.0), (m1 - m2).abs() / sp2.sqrt())
}

/// Signed-rank statistic `min(W+, W-)` and its exact two-sided p-value by
/// enumerating every sign assignment of the observed ranks.
pub fn wilcoxon_exact(diffs: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = diffs.iter().copied().filter(|x| *x != 0.0).collect();
    let n = d.len();
    let mut ranks = vec![0.0; n];
    for i in 0..n {
        let less = d.iter().filter(|x| x.abs() < d[i].abs()).count() as f64;
        let equal = d.iter().filter(|x| x.abs() == d[i].abs()).count() as f64;
        ranks[i] = less + (equal + 1.0) / 2.0;
    }
    let total: f64 = ranks.iter().sum();
    let w_plus: f64 = (0..n).filter(|&i| d[i] > 0.0).map(|i| ranks[i]).sum();
    let stat = w_plus.min(total - w_plus);
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let wp: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if wp.min(total - wp) <= stat + 1e-9 {
            hits += 1;
        }
    }
    (stat, hits as f64 / (1u64 << n) as f64)
}
