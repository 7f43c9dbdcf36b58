//! Small descriptive and non-parametric statistics helpers.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator); zero for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Two-tailed p-value of a standard normal statistic.
pub fn two_tailed_p(z: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * normal.sf(z.abs())).min(1.0)
}

/// Average ranks (1-based) of `values`; ties share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedRankTest {
    /// Pairs with a non-zero difference.
    pub n: usize,
    /// Rank sum of positive differences (before − after > 0).
    pub w_plus: f64,
    pub w_minus: f64,
    /// Normal-approximation statistic; positive when values tend to drop.
    pub z: f64,
    pub p: f64,
}

/// Wilcoxon signed-rank test on paired samples, normal approximation with
/// tie-corrected variance and no continuity correction. Zero differences are
/// dropped; if nothing is left the result is z = 0, p = 1.
pub fn wilcoxon_signed_rank(before: &[f64], after: &[f64]) -> Result<SignedRankTest, StatsError> {
    if before.len() != after.len() {
        return Err(StatsError::LengthMismatch(before.len(), after.len()));
    }
    let diffs: Vec<f64> = before
        .iter()
        .zip(after)
        .map(|(b, a)| b - a)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(SignedRankTest {
            n: 0,
            w_plus: 0.0,
            w_minus: 0.0,
            z: 0.0,
            p: 1.0,
        });
    }
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&magnitudes);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;

    let nf = n as f64;
    let mut variance = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0;
    let mut sorted = magnitudes.clone();
    sorted.sort_by(f64::total_cmp);
    for group in sorted.chunk_by(|a, b| a == b) {
        let t = group.len() as f64;
        variance -= (t * t * t - t) / 48.0;
    }
    let z = if variance > 0.0 {
        (w_plus - total / 2.0) / variance.sqrt()
    } else {
        0.0
    };
    Ok(SignedRankTest {
        n,
        w_plus,
        w_minus,
        z,
        p: two_tailed_p(z),
    })
}
