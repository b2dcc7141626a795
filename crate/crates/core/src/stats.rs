//! Two-sample t-test, Cohen's d, Wilcoxon signed-rank, and the feature
//! contrast built from them.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
#[allow(unused_imports)]
use num_traits::Float;

use thiserror::Error;

use crate::lexfeatures::FeatureTable;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("sample too small: need at least {needed}, got {got}")]
    TooSmall { needed: usize, got: usize },
    #[error("zero pooled variance")]
    ZeroVariance,
    #[error("all paired differences are zero")]
    AllZeroDifferences,
    #[error("empty group `{0}`")]
    EmptyGroup(&'static str),
    #[error("groups overlap on `{0}`")]
    OverlappingGroups(String),
    #[error("word `{0}` missing from feature table")]
    MissingWord(String),
}

/// Significance band at .05 / .01 / .001; a p-value exactly on a boundary
/// falls into the weaker band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stars {
    None,
    One,
    Two,
    Three,
}

impl Stars {
    pub fn from_p(p: f64) -> Stars {
        if p < 0.001 {
            Stars::Three
        } else if p < 0.01 {
            Stars::Two
        } else if p < 0.05 {
            Stars::One
        } else {
            Stars::None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stars::None => "",
            Stars::One => "*",
            Stars::Two => "**",
            Stars::Three => "***",
        }
    }
}

impl fmt::Display for Stars {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub effect_size: Option<f64>,
    pub n1: usize,
    pub n2: usize,
    pub stars: Stars,
}

impl TestResult {
    fn new(statistic: f64, p_value: f64, effect_size: Option<f64>, n1: usize, n2: usize) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        TestResult {
            statistic,
            p_value,
            effect_size,
            n1,
            n2,
            stars: Stars::from_p(p_value),
        }
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Continued-fraction evaluation for the regularized incomplete beta.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-15 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn beta_inc(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-sided tail probability `P(|T| >= |t|)` of Student's t.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    beta_inc(df / 2.0, 0.5, df / (df + t * t))
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TTestVariant {
    /// Pooled variance, `n1 + n2 - 2` degrees of freedom.
    #[default]
    Student,
    /// Unequal variances with Welch-Satterthwaite degrees of freedom.
    Welch,
}

fn check_sizes(x: &[f64], y: &[f64]) -> Result<(), StatsError> {
    for s in [x, y] {
        if s.len() < 2 {
            return Err(StatsError::TooSmall {
                needed: 2,
                got: s.len(),
            });
        }
    }
    Ok(())
}

fn pooled_sd(x: &[f64], y: &[f64]) -> f64 {
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    (((n1 - 1.0) * sample_var(x) + (n2 - 1.0) * sample_var(y)) / (n1 + n2 - 2.0)).sqrt()
}

/// Unpaired two-sample t-test (two-sided). The effect size field carries
/// Cohen's d.
pub fn ttest_ind(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    ttest_ind_with(x, y, TTestVariant::Student)
}

pub fn ttest_ind_with(x: &[f64], y: &[f64], variant: TTestVariant) -> Result<TestResult, StatsError> {
    check_sizes(x, y)?;
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let diff = mean(x) - mean(y);
    let (t, df) = match variant {
        TTestVariant::Student => {
            let sp = pooled_sd(x, y);
            if sp == 0.0 {
                return Err(StatsError::ZeroVariance);
            }
            (diff / (sp * (1.0 / n1 + 1.0 / n2).sqrt()), n1 + n2 - 2.0)
        }
        TTestVariant::Welch => {
            let (a, b) = (sample_var(x) / n1, sample_var(y) / n2);
            if a + b == 0.0 {
                return Err(StatsError::ZeroVariance);
            }
            let df = (a + b) * (a + b) / (a * a / (n1 - 1.0) + b * b / (n2 - 1.0));
            (diff / (a + b).sqrt(), df)
        }
    };
    let d = cohens_d(x, y)?;
    Ok(TestResult::new(t, t_two_sided_p(t, df), Some(d), x.len(), y.len()))
}

/// `|mean(x) - mean(y)|` over the pooled sample standard deviation.
pub fn cohens_d(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_sizes(x, y)?;
    let sp = pooled_sd(x, y);
    if sp == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((mean(x) - mean(y)).abs() / sp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WilcoxonMethod {
    /// Exact for at most 15 non-zero differences, normal otherwise.
    #[default]
    Auto,
    Exact,
    Normal,
}

pub const WILCOXON_EXACT_MAX: usize = 15;

/// Average ranks of the values (1-based), ties sharing the mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(core::cmp::Ordering::Equal));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Wilcoxon signed-rank test on `(a, b)` pairs, statistic `min(W+, W-)`.
pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)]) -> Result<TestResult, StatsError> {
    wilcoxon_signed_rank_with(pairs, WilcoxonMethod::Auto)
}

pub fn wilcoxon_signed_rank_with(pairs: &[(f64, f64)], method: WilcoxonMethod) -> Result<TestResult, StatsError> {
    let diffs: Vec<f64> = pairs.iter().map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Err(StatsError::AllZeroDifferences);
    }
    let n = diffs.len();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let stat = w_plus.min(total - w_plus);
    let exact = match method {
        WilcoxonMethod::Auto => n <= WILCOXON_EXACT_MAX,
        WilcoxonMethod::Exact => true,
        WilcoxonMethod::Normal => false,
    };
    let p = if exact {
        exact_signed_rank_p(&ranks, stat)
    } else {
        normal_signed_rank_p(&abs, stat)
    };
    Ok(TestResult::new(stat, p, None, n, n))
}

/// Exact null distribution by dynamic programming over doubled ranks.
fn exact_signed_rank_p(ranks: &[f64], stat: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let sum: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; sum + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=sum).rev() {
            counts[s] += counts[s - r];
        }
    }
    let target = (stat * 2.0).round() as usize;
    let hits: f64 = counts
        .iter()
        .enumerate()
        .filter(|(s, _)| (*s).min(sum - *s) <= target)
        .map(|(_, c)| c)
        .sum();
    hits / (2.0f64).powi(ranks.len() as i32)
}

/// Normal approximation with tie correction and continuity correction.
fn normal_signed_rank_p(abs_diffs: &[f64], stat: f64) -> f64 {
    let n = abs_diffs.len() as f64;
    let mu = n * (n + 1.0) / 4.0;
    let mut sorted = abs_diffs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((stat - mu).abs() - 0.5).max(0.0) / var.sqrt();
    (2.0 * normal_cdf(-z)).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    Freq,
    Pro,
    Spe,
    Dis,
}

impl Feature {
    pub const ALL: [Feature; 4] = [Feature::Freq, Feature::Pro, Feature::Spe, Feature::Dis];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Freq => "freq",
            Feature::Pro => "pro",
            Feature::Spe => "spe",
            Feature::Dis => "dis",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureContrast {
    pub feature: Feature,
    pub result: Result<TestResult, StatsError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastReport {
    pub shift_words: Vec<String>,
    pub noshift_words: Vec<String>,
    pub features: Vec<FeatureContrast>,
}

impl ContrastReport {
    pub fn get(&self, feature: Feature) -> Option<&Result<TestResult, StatsError>> {
        self.features.iter().find(|f| f.feature == feature).map(|f| &f.result)
    }
}

fn feature_values(table: &FeatureTable, words: &[String], feature: Feature) -> Result<Vec<f64>, StatsError> {
    words
        .iter()
        .map(|w| {
            let row = table.row(w).ok_or_else(|| StatsError::MissingWord(w.clone()))?;
            Ok(match feature {
                Feature::Freq => row.freq,
                Feature::Pro => row.pro,
                Feature::Spe => row.spe,
                Feature::Dis => row.dis,
            })
        })
        .collect()
}

/// t-test and Cohen's d between shift and no-shift words for each feature.
/// Per-feature failures (too few words, zero variance) are reported in
/// place.
pub fn feature_contrast(
    shift_words: &[String],
    noshift_words: &[String],
    features: &FeatureTable,
) -> Result<ContrastReport, StatsError> {
    if shift_words.is_empty() {
        return Err(StatsError::EmptyGroup("shift"));
    }
    if noshift_words.is_empty() {
        return Err(StatsError::EmptyGroup("no.shift"));
    }
    if let Some(w) = shift_words.iter().find(|w| noshift_words.contains(w)) {
        return Err(StatsError::OverlappingGroups(w.to_string()));
    }
    let mut out = Vec::new();
    for feature in Feature::ALL {
        let x = feature_values(features, shift_words, feature)?;
        let y = feature_values(features, noshift_words, feature)?;
        out.push(FeatureContrast {
            feature,
            result: ttest_ind(&x, &y),
        });
    }
    Ok(ContrastReport {
        shift_words: shift_words.to_vec(),
        noshift_words: noshift_words.to_vec(),
        features: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexfeatures::FeatureRow;

    #[test]
    fn stars_boundaries() {
        assert_eq!(Stars::from_p(0.009), Stars::Two);
        assert_eq!(Stars::from_p(0.04), Stars::One);
        assert_eq!(Stars::from_p(0.0009), Stars::Three);
        assert_eq!(Stars::from_p(0.05), Stars::None);
        assert_eq!(Stars::from_p(0.01), Stars::One);
        assert_eq!(Stars::from_p(0.001), Stars::Two);
        assert_eq!(Stars::Three.to_string(), "***");
    }

    #[test]
    fn ttest_examples() {
        let r = ttest_ind(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        let r = ttest_ind(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!((r.statistic + 3.674234614174767).abs() < 1e-12);
        assert!(matches!(
            ttest_ind(&[1.0], &[1.0, 2.0]),
            Err(StatsError::TooSmall { .. })
        ));
        assert_eq!(ttest_ind(&[1.0, 1.0], &[2.0, 2.0]), Err(StatsError::ZeroVariance));
    }

    #[test]
    fn welch_matches_student_for_equal_sizes_and_variances() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 3.0, 4.0, 5.0];
        let s = ttest_ind_with(&x, &y, TTestVariant::Student).unwrap();
        let w = ttest_ind_with(&x, &y, TTestVariant::Welch).unwrap();
        assert!((s.statistic - w.statistic).abs() < 1e-12);
        assert!((s.p_value - w.p_value).abs() < 1e-12);
    }

    #[test]
    fn cohens_d_examples() {
        assert_eq!(cohens_d(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert!((cohens_d(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap() - 3.0).abs() < 1e-12);
        let d1 = cohens_d(&[1.0, 2.5, 3.0], &[4.0, 5.0, 7.0]).unwrap();
        let d2 = cohens_d(&[2.0, 5.0, 6.0], &[8.0, 10.0, 14.0]).unwrap();
        assert!((d1 - d2).abs() < 1e-12);
    }

    #[test]
    fn wilcoxon_all_positive() {
        let pairs: Vec<(f64, f64)> = (1..=8).map(|i| (i as f64 + 0.5, 0.0)).collect();
        let r = wilcoxon_signed_rank(&pairs).unwrap();
        assert_eq!(r.statistic, 0.0);
        // Only the two extreme sign patterns reach 0.
        assert!((r.p_value - 2.0 / 256.0).abs() < 1e-15);
    }

    #[test]
    fn wilcoxon_swap_symmetry() {
        let pairs = [(1.0, 2.5), (3.0, 1.0), (2.0, 2.5), (4.0, 0.0), (5.0, 6.5), (0.2, 0.0)];
        let swapped: Vec<_> = pairs.iter().map(|&(a, b)| (b, a)).collect();
        let r1 = wilcoxon_signed_rank(&pairs).unwrap();
        let r2 = wilcoxon_signed_rank(&swapped).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn wilcoxon_zero_differences() {
        assert_eq!(
            wilcoxon_signed_rank(&[(1.0, 1.0), (2.0, 2.0)]),
            Err(StatsError::AllZeroDifferences)
        );
        let r = wilcoxon_signed_rank(&[(1.0, 1.0), (2.0, 1.0), (3.0, 1.0)]).unwrap();
        assert_eq!(r.n1, 2);
    }

    #[test]
    fn average_ranks_with_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), [3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-12);
    }

    fn table(rows: &[(&str, f64)]) -> FeatureTable {
        FeatureTable {
            scope: "d".into(),
            rows: rows
                .iter()
                .enumerate()
                .map(|(i, &(w, v))| FeatureRow {
                    word: w.into(),
                    freq: v,
                    pro: v * 0.5 + i as f64 * 0.01,
                    spe_raw: v,
                    spe: v,
                    dis: v,
                })
                .collect(),
        }
    }

    #[test]
    fn contrast_of_identical_groups() {
        let t = table(&[("a", 1.0), ("b", 2.0), ("c", 1.0), ("d", 2.0)]);
        let report = feature_contrast(&["a".into(), "b".into()], &["c".into(), "d".into()], &t).unwrap();
        let freq = report.get(Feature::Freq).unwrap().as_ref().unwrap();
        assert_eq!(freq.effect_size, Some(0.0));
        assert!((freq.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contrast_errors() {
        let t = table(&[("a", 1.0), ("b", 2.0)]);
        assert_eq!(
            feature_contrast(&["a".into()], &[], &t),
            Err(StatsError::EmptyGroup("no.shift"))
        );
        assert!(matches!(
            feature_contrast(&["a".into()], &["a".into()], &t),
            Err(StatsError::OverlappingGroups(_))
        ));
        // One shift word: per-feature error, report still produced.
        let r = feature_contrast(&["a".into()], &["b".into()], &t).unwrap();
        assert!(r.features.iter().all(|f| f.result.is_err()));
        let missing = feature_contrast(&["zz".into()], &["b".into()], &t);
        assert!(matches!(missing, Err(StatsError::MissingWord(_))));
    }
}
