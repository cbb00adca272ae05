//! Rank-based tests and multiple-comparison adjustment.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest number of nonzero differences for which the signed-rank test
/// enumerates the exact null distribution.
pub const EXACT_MAX_M: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub label: String,
    pub statistic: f64,
    pub p_raw: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_adjusted: Option<f64>,
}

/// Two values closer than this (relative) share a rank. Scores built from
/// Likert means differ in the last bits depending on summation order.
const TIE_EPS: f64 = 1e-9;

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_EPS * a.abs().max(b.abs()).max(1.0)
}

/// Mid-ranks (1-based) and the sizes of tie groups.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && tied(values[order[i]], values[order[j]]) {
            j += 1;
        }
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        ties.push(j - i);
        i = j;
    }
    (ranks, ties)
}

fn tie_term(ties: &[usize]) -> f64 {
    ties.iter().map(|&t| (t * t * t - t) as f64).sum()
}

/// Friedman test over `rows` (participants) by columns (conditions).
pub fn friedman(rows: &[Vec<f64>]) -> Result<TestResult> {
    let n = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    if n < 2 || k < 2 {
        return Err(Error::IncompleteDesign(format!("need at least 2 rows and 2 columns, got {n}x{k}")));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != k || r.iter().any(|v| !v.is_finite())) {
        return Err(Error::IncompleteDesign(format!("row {i} has missing cells")));
    }
    let mut rank_sums = vec![0.0; k];
    let mut ties_total = 0.0;
    for row in rows {
        let (ranks, ties) = midranks(row);
        for (s, r) in rank_sums.iter_mut().zip(ranks) {
            *s += r;
        }
        ties_total += tie_term(&ties);
    }
    let (nf, kf) = (n as f64, k as f64);
    let correction = 1.0 - ties_total / (nf * kf * (kf * kf - 1.0));
    let label = format!("Friedman chi2({})", k - 1);
    if correction <= 1e-12 {
        // every row fully tied
        return Ok(TestResult { label, statistic: 0.0, p_raw: 1.0, p_adjusted: None });
    }
    let ss: f64 = rank_sums.iter().map(|r| r * r).sum();
    let raw = 12.0 / (nf * kf * (kf + 1.0)) * ss - 3.0 * nf * (kf + 1.0);
    let statistic = (raw / correction).max(0.0);
    let chi2 = ChiSquared::new(kf - 1.0).map_err(|e| Error::Domain(e.to_string()))?;
    let p_raw = chi2.sf(statistic).clamp(0.0, 1.0);
    Ok(TestResult { label, statistic, p_raw, p_adjusted: None })
}

/// Two-sided Wilcoxon signed-rank test on paired samples. Zero
/// differences are dropped; the statistic is `min(W+, W-)`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::Precondition(format!("paired series differ in length: {} vs {}", a.len(), b.len())));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Precondition("paired series contain non-finite values".into()));
    }
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| !tied(*d, 0.0))
        .collect();
    let m = d.len();
    if m == 0 {
        return Err(Error::DegeneratePairs("all paired differences are zero".into()));
    }
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let (ranks, ties) = midranks(&abs);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let total = (m * (m + 1)) as f64 / 2.0;
    let w = w_plus.min(total - w_plus);
    let p_raw = if m <= EXACT_MAX_M {
        exact_p(&ranks, w)
    } else {
        normal_p(m, &ties, w)
    };
    Ok(TestResult { label: format!("Wilcoxon W (m={m})"), statistic: w, p_raw, p_adjusted: None })
}

/// Share of the 2^m sign assignments whose `min(W+, W-)` is at most `w`.
/// Mid-ranks are multiples of 1/2, so sums are counted in half-rank units.
fn exact_p(ranks: &[f64], w: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let w2 = (2.0 * w).round() as usize;
    let hits: u64 = counts
        .iter()
        .enumerate()
        .filter(|&(s, _)| s.min(total - s) <= w2)
        .map(|(_, c)| c)
        .sum();
    (hits as f64 / (1u64 << ranks.len()) as f64).min(1.0)
}

fn normal_p(m: usize, ties: &[usize], w: f64) -> f64 {
    let mf = m as f64;
    let mean = mf * (mf + 1.0) / 4.0;
    let var = mf * (mf + 1.0) * (2.0 * mf + 1.0) / 24.0 - tie_term(ties) / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::standard();
    (2.0 * normal.sf(z)).min(1.0)
}

/// Benjamini-Hochberg adjusted p-values, in input order.
pub fn fdr_adjust(p: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("p-value {bad} outside [0, 1]")));
    }
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut q = vec![0.0; m];
    let mut running = 1.0f64;
    for (pos, &i) in order.iter().enumerate().rev() {
        running = running.min(p[i] * m as f64 / (pos + 1) as f64);
        // p * m / m can round below p
        q[i] = running.min(1.0).max(p[i]);
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn friedman_hand_example() {
        let rows = vec![vec![1.0, 2.0, 3.0]; 3];
        let r = friedman(&rows).unwrap();
        assert_eq!(r.statistic, 6.0);
        assert!((r.p_raw - (-3.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn friedman_identical_columns() {
        let rows = vec![vec![2.0, 2.0, 2.0], vec![1.0, 1.0, 1.0], vec![3.5, 3.5, 3.5]];
        let r = friedman(&rows).unwrap();
        assert_eq!((r.statistic, r.p_raw), (0.0, 1.0));
    }

    #[test]
    fn friedman_missing_cells() {
        assert!(matches!(friedman(&[vec![1.0, 2.0], vec![1.0]]), Err(Error::IncompleteDesign(_))));
        assert!(matches!(friedman(&[vec![1.0, f64::NAN], vec![1.0, 2.0]]), Err(Error::IncompleteDesign(_))));
        assert!(friedman(&[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn friedman_against_reference_values() {
        // scipy.stats.friedmanchisquare on these columns
        let rows = vec![
            vec![1.0, 3.0, 2.0],
            vec![2.0, 3.0, 1.0],
            vec![1.0, 2.0, 2.0],
            vec![3.0, 3.0, 1.0],
            vec![1.0, 3.0, 2.0],
            vec![2.0, 4.0, 1.0],
        ];
        let r = friedman(&rows).unwrap();
        // ranks: R = (9.5, 17, 9.5), one tied pair in each of rows 3 and 4
        let ss = 9.5f64.powi(2) + 17.0f64.powi(2) + 9.5f64.powi(2);
        let raw = 12.0 / (6.0 * 3.0 * 4.0) * ss - 3.0 * 6.0 * 4.0;
        let corrected = raw / (1.0 - 12.0 / (6.0 * 3.0 * 8.0));
        assert!((r.statistic - corrected).abs() < 1e-12);
        assert!((r.statistic - 6.818181818181818).abs() < 1e-12);
        assert!((r.p_raw - 0.03307125148830102).abs() < 1e-10);
    }

    #[test]
    fn wilcoxon_all_positive() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = wilcoxon_signed_rank(&a, &[0.0; 5]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_raw, 2.0 / 32.0);
    }

    #[test]
    fn wilcoxon_degenerate() {
        let a = [1.0, 2.0, 3.0];
        assert!(matches!(wilcoxon_signed_rank(&a, &a), Err(Error::DegeneratePairs(_))));
        assert!(wilcoxon_signed_rank(&a, &a[..2]).is_err());
    }

    #[test]
    fn wilcoxon_reference_values() {
        // scipy.stats.wilcoxon(x, y) with method="exact" (no ties) gives 0.0390625
        let x = [1.83, 0.50, 1.62, 2.48, 1.68, 1.88, 1.55, 3.06, 1.30];
        let y = [0.878, 0.647, 0.598, 2.05, 1.06, 1.29, 1.06, 3.14, 1.29];
        let r = wilcoxon_signed_rank(&x, &y).unwrap();
        assert_eq!(r.statistic, 5.0);
        assert!((r.p_raw - 0.0390625).abs() < 1e-12);
    }

    #[test]
    fn wilcoxon_normal_approximation_close_to_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let d: Vec<f64> = (0..10).map(|i| (i + 1) as f64 * if rng.random_bool(0.4) { -1.0 } else { 1.0 }).collect();
            let (ranks, ties) = midranks(&d.iter().map(|x| x.abs()).collect::<Vec<_>>());
            let wp: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
            let w = wp.min(55.0 - wp);
            assert!((exact_p(&ranks, w) - normal_p(10, &ties, w)).abs() < 0.02);
        }
    }

    #[test]
    fn wilcoxon_large_m_uses_normal() {
        let a: Vec<f64> = (0..20).map(|i| i as f64 + if i % 3 == 0 { -2.5 } else { 1.0 }).collect();
        let b: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        // 7 negatives of 2.5 (ranks 14..20 mean 17) and 13 positives of 1 (ranks 1..13 mean 7)
        assert_eq!(r.statistic, 91.0);
        let z = ((91.0f64 - 105.0).abs() - 0.5) / (717.5 - (13f64.powi(3) - 13.0 + 7f64.powi(3) - 7.0) / 48.0).sqrt();
        assert!((r.p_raw - 2.0 * Normal::standard().sf(z)).abs() < 1e-12);
        // scipy.stats.wilcoxon(method="approx", correction=True)
        assert!((r.p_raw - 0.6006211014144658).abs() < 1e-10);
    }

    #[test]
    fn fdr_examples() {
        assert_eq!(fdr_adjust(&[0.04]).unwrap(), vec![0.04]);
        let q = fdr_adjust(&[0.01, 0.02, 0.03]).unwrap();
        for v in q {
            assert!((v - 0.03).abs() < 1e-15);
        }
        let q = fdr_adjust(&[0.5, 0.01, 0.04]).unwrap();
        assert_eq!(q, vec![0.5, 0.03, 0.06]);
        assert!(matches!(fdr_adjust(&[0.5, 1.5]), Err(Error::Domain(_))));
        assert!(fdr_adjust(&[]).unwrap().is_empty());
    }

    #[test]
    fn midranks_with_ties() {
        let (r, t) = midranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(t, vec![1, 1, 2]);
        let (r, _) = midranks(&[1.0 / 7.0 * 3.0, 3.0 / 7.0]);
        assert_eq!(r, vec![1.5, 1.5]);
    }
}
