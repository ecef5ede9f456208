use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{Metric, MetricsRow};

use super::linear::Factor;
use super::special::chisq_upper_tail;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub treatments: usize,
    pub blocks: usize,
}

/// Ranks 1..=n of `values` in ascending order, ties sharing their average rank.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // Positions i..j (0-based) share the mean of ranks i+1..=j.
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

/// Friedman rank test for a complete block design.
///
/// Within each block the `k` treatments are mid-ranked; with `n` blocks and
/// mean ranks `R̄_j`, `Q = 12n / (k(k+1)) · Σ_j (R̄_j − (k+1)/2)²`, referred to
/// a chi-square with `k − 1` degrees of freedom.
pub fn friedman_test(
    rows: &[&MetricsRow],
    metric: Metric,
    treatment: Factor,
    block: Factor,
) -> Result<FriedmanResult> {
    if treatment == block {
        return Err(Error::Config("treatment and block factor must differ".into()));
    }
    let mut cells: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut treatments = std::collections::BTreeSet::new();
    for row in rows {
        let t = treatment.level(row);
        let b = block.level(row);
        treatments.insert(t.clone());
        if cells
            .entry(b.clone())
            .or_default()
            .insert(t.clone(), metric.value(row))
            .is_some()
        {
            return Err(Error::IncompleteDesign(format!(
                "{treatment} {t:?} appears more than once in {block} {b:?}"
            )));
        }
    }
    let k = treatments.len();
    if k < 2 {
        return Err(Error::IncompleteDesign(format!(
            "need at least two treatments, found {k}"
        )));
    }
    let n = cells.len();
    let mut rank_sums = vec![0.0; k];
    for (b, values) in &cells {
        if values.len() != k {
            return Err(Error::IncompleteDesign(format!(
                "{block} {b:?} has {} of {k} treatments",
                values.len()
            )));
        }
        // BTreeMap iteration keeps treatments in the same order in every block.
        let v: Vec<f64> = values.values().copied().collect();
        for (sum, r) in rank_sums.iter_mut().zip(mid_ranks(&v)) {
            *sum += r;
        }
    }
    let kf = k as f64;
    let nf = n as f64;
    let centre = (kf + 1.0) / 2.0;
    let spread: f64 = rank_sums
        .iter()
        .map(|s| (s / nf - centre).powi(2))
        .sum();
    let statistic = 12.0 * nf / (kf * (kf + 1.0)) * spread;
    let df = k - 1;
    Ok(FriedmanResult {
        statistic,
        df,
        p_value: chisq_upper_tail(statistic, df as f64)?,
        treatments: k,
        blocks: n,
    })
}
