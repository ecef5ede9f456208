//! Individual- and population-level performance metrics.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::classifiers::{Algorithm, CauseAssignment};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// One experiment-grid cell's metric values.
///
/// `replicate` is 0 for unresampled runs, 1..=R for resampled replicates and
/// -1 for the mean over a cell's replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub train_site: String,
    pub test_site: String,
    pub algorithm: Algorithm,
    pub replicate: i64,
    pub ccc: f64,
    #[serde(rename = "csmf_acc")]
    pub csmf_accuracy: f64,
    pub top1: f64,
    pub top3: f64,
}

pub const MEAN_REPLICATE: i64 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Ccc,
    #[serde(rename = "csmf_acc")]
    CsmfAccuracy,
    Top1,
    Top3,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Ccc, Metric::CsmfAccuracy, Metric::Top1, Metric::Top3];

    pub fn token(self) -> &'static str {
        match self {
            Metric::Ccc => "ccc",
            Metric::CsmfAccuracy => "csmf_acc",
            Metric::Top1 => "top1",
            Metric::Top3 => "top3",
        }
    }

    pub fn value(self, row: &MetricsRow) -> f64 {
        match self {
            Metric::Ccc => row.ccc,
            Metric::CsmfAccuracy => row.csmf_accuracy,
            Metric::Top1 => row.top1,
            Metric::Top3 => row.top3,
        }
    }
}

impl MetricsRow {
    pub fn is_same_site(&self) -> bool {
        self.train_site == self.test_site
    }
}

pub fn write_rows<W: Write>(rows: &[MetricsRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(reader: R) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    let expected = [
        "train_site", "test_site", "algorithm", "replicate", "ccc", "csmf_acc", "top1", "top3",
    ];
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::Header(format!(
            "expected results header {}",
            expected.join(",")
        )));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn check_alignment(assignment: &CauseAssignment, truth: &Dataset) -> Result<Vec<usize>> {
    if assignment.per_death.len() != truth.len() {
        return Err(Error::Precondition(format!(
            "assignment covers {} deaths, truth has {}",
            assignment.per_death.len(),
            truth.len()
        )));
    }
    if assignment.n_causes() != truth.n_causes() {
        return Err(Error::CatalogMismatch(
            "assignment and truth differ in cause count".into(),
        ));
    }
    truth.labels()
}

fn chance_correct(recall: f64, n_causes: usize) -> f64 {
    let chance = 1.0 / n_causes as f64;
    (recall - chance) / (1.0 - chance)
}

/// Chance-corrected concordance for one cause: recall rescaled so that
/// chance (1/C) maps to 0 and perfect recall to 1.
pub fn ccc_cause(assignment: &CauseAssignment, truth: &Dataset, cause: usize) -> Result<f64> {
    let labels = check_alignment(assignment, truth)?;
    let mut total = 0usize;
    let mut correct = 0usize;
    for (d, &y) in assignment.per_death.iter().zip(&labels) {
        if y == cause {
            total += 1;
            if d.ranking[0] == cause {
                correct += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::Precondition(format!(
            "no test deaths with true cause {cause}"
        )));
    }
    Ok(chance_correct(
        correct as f64 / total as f64,
        truth.n_causes(),
    ))
}

/// Equal-weight mean of per-cause CCC over causes present in the test set.
pub fn ccc_overall(assignment: &CauseAssignment, truth: &Dataset) -> Result<f64> {
    let labels = check_alignment(assignment, truth)?;
    if labels.is_empty() {
        return Err(Error::Empty("no labeled deaths".into()));
    }
    let nc = truth.n_causes();
    let mut total = vec![0usize; nc];
    let mut correct = vec![0usize; nc];
    for (d, &y) in assignment.per_death.iter().zip(&labels) {
        total[y] += 1;
        if d.ranking[0] == y {
            correct[y] += 1;
        }
    }
    let per_cause: Vec<f64> = (0..nc)
        .filter(|&c| total[c] > 0)
        .map(|c| chance_correct(correct[c] as f64 / total[c] as f64, nc))
        .collect();
    Ok(per_cause.iter().sum::<f64>() / per_cause.len() as f64)
}

/// `1 - Σ|true - pred| / (2 (1 - min true))`, clamped to [0, 1].
pub fn csmf_accuracy(true_csmf: &[f64], pred_csmf: &[f64]) -> Result<f64> {
    if true_csmf.len() != pred_csmf.len() {
        return Err(Error::Precondition(format!(
            "CSMF vectors differ in length ({} vs {})",
            true_csmf.len(),
            pred_csmf.len()
        )));
    }
    if true_csmf.is_empty() {
        return Err(Error::Empty("empty CSMF vectors".into()));
    }
    let min_true = true_csmf.iter().copied().fold(f64::INFINITY, f64::min);
    let denom = 2.0 * (1.0 - min_true);
    if !(denom > 0.0) {
        return Err(Error::Precondition(
            "true CSMF is a point mass with minimum 1; accuracy undefined".into(),
        ));
    }
    let err: f64 = true_csmf
        .iter()
        .zip(pred_csmf)
        .map(|(t, p)| (t - p).abs())
        .sum();
    Ok((1.0 - err / denom).clamp(0.0, 1.0))
}

/// Fraction of deaths whose true cause is among their top `k` ranked causes.
pub fn topk_accuracy(assignment: &CauseAssignment, truth: &Dataset, k: usize) -> Result<f64> {
    let labels = check_alignment(assignment, truth)?;
    if k == 0 || k > truth.n_causes() {
        return Err(Error::Precondition(format!(
            "k = {k} must lie in 1..={}",
            truth.n_causes()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Empty("no labeled deaths".into()));
    }
    let hits = assignment
        .per_death
        .iter()
        .zip(&labels)
        .filter(|(d, &y)| d.ranking[..k].contains(&y))
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// The four metrics of one assignment against labeled truth. Top-3 falls back
/// to the full ranking when fewer than three causes exist.
pub fn evaluate(assignment: &CauseAssignment, truth: &Dataset) -> Result<[f64; 4]> {
    let ccc = ccc_overall(assignment, truth)?;
    let csmf = csmf_accuracy(&truth.empirical_csmf()?, &assignment.csmf_estimate)?;
    let top1 = topk_accuracy(assignment, truth, 1)?;
    let top3 = topk_accuracy(assignment, truth, 3.min(truth.n_causes()))?;
    Ok([ccc, csmf, top1, top3])
}
