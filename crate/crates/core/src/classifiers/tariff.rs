//! Tariff-style scoring: symptom weights from standardized endorsement rates,
//! and cause assignment by ranking each test score against the scores of all
//! training deaths.

use crate::data::{Dataset, SymptomValue};
use crate::error::{Error, Result};

use super::{desc, top_cause_fractions, Algorithm, CauseAssignment, DeathAssignment};

#[derive(Debug, Clone, PartialEq)]
pub struct TariffModel {
    n_causes: usize,
    n_symptoms: usize,
    /// C × S, row-major by cause.
    tariffs: Vec<f64>,
    /// Causes with at least one training death.
    retained: Vec<bool>,
    /// Per cause: sorted scores of every training death under that cause's tariffs.
    train_scores: Vec<Vec<f64>>,
}

impl TariffModel {
    pub fn tariff(&self, cause: usize, symptom: usize) -> f64 {
        self.tariffs[cause * self.n_symptoms + symptom]
    }

    pub fn n_causes(&self) -> usize {
        self.n_causes
    }

    pub fn n_symptoms(&self) -> usize {
        self.n_symptoms
    }

    pub fn is_retained(&self, cause: usize) -> bool {
        self.retained[cause]
    }

    pub fn train_score_distribution(&self, cause: usize) -> &[f64] {
        &self.train_scores[cause]
    }

    fn score(&self, cause: usize, symptoms: &[SymptomValue]) -> f64 {
        let row = &self.tariffs[cause * self.n_symptoms..(cause + 1) * self.n_symptoms];
        symptoms
            .iter()
            .zip(row)
            .filter(|(v, _)| v.is_yes())
            .map(|(_, t)| t)
            .sum()
    }
}

/// Linear-interpolation quantile of sorted data (the usual "type 7" rule).
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn round_half(x: f64) -> f64 {
    (x * 2.0).round() / 2.0
}

/// Tariffs of one symptom from its endorsement rates across causes:
/// `(rate - median) / IQR` rounded to the nearest 0.5, all zero when IQR = 0.
pub(crate) fn tariff_column(rates: &[f64]) -> Vec<f64> {
    let mut sorted = rates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = quantile_sorted(&sorted, 0.5);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    // Rates are fractions of small counts; treat sub-ulp spreads as zero.
    if iqr.abs() <= 1e-12 {
        return vec![0.0; rates.len()];
    }
    rates.iter().map(|r| round_half((r - median) / iqr)).collect()
}

pub fn tariff_fit(train: &Dataset) -> Result<TariffModel> {
    if train.is_empty() {
        return Err(Error::Empty("training set has no records".into()));
    }
    let labels = train.labels()?;
    let (nc, ns) = (train.n_causes(), train.n_symptoms());

    let mut deaths = vec![0usize; nc];
    let mut yes = vec![0usize; nc * ns];
    let mut obs = vec![0usize; nc * ns];
    for (rec, &c) in train.records().iter().zip(&labels) {
        deaths[c] += 1;
        for (s, v) in rec.symptoms.iter().enumerate() {
            match v {
                SymptomValue::Yes => {
                    yes[c * ns + s] += 1;
                    obs[c * ns + s] += 1;
                }
                SymptomValue::No => obs[c * ns + s] += 1,
                SymptomValue::Missing => {}
            }
        }
    }
    let retained: Vec<bool> = deaths.iter().map(|&n| n > 0).collect();
    let kept: Vec<usize> = (0..nc).filter(|&c| retained[c]).collect();

    let mut tariffs = vec![0.0; nc * ns];
    let mut rates = Vec::with_capacity(kept.len());
    for s in 0..ns {
        rates.clear();
        rates.extend(kept.iter().map(|&c| {
            let n = obs[c * ns + s];
            if n == 0 {
                0.0
            } else {
                yes[c * ns + s] as f64 / n as f64
            }
        }));
        for (&c, t) in kept.iter().zip(tariff_column(&rates)) {
            tariffs[c * ns + s] = t;
        }
    }

    let mut model = TariffModel {
        n_causes: nc,
        n_symptoms: ns,
        tariffs,
        retained,
        train_scores: vec![Vec::new(); nc],
    };
    for &c in &kept {
        let mut scores: Vec<f64> = train
            .records()
            .iter()
            .map(|r| model.score(c, &r.symptoms))
            .collect();
        scores.sort_by(f64::total_cmp);
        model.train_scores[c] = scores;
    }
    Ok(model)
}

/// Mid-rank fraction of `sorted` lying below `x`: ties count one half.
fn mid_rank_fraction(sorted: &[f64], x: f64) -> f64 {
    let below = sorted.partition_point(|&v| v < x);
    let at_or_below = sorted.partition_point(|&v| v <= x);
    (below as f64 + 0.5 * (at_or_below - below) as f64) / sorted.len() as f64
}

/// Scores each test death, converts scores to percentiles of the training
/// distribution per cause, and ranks causes by percentile (then raw score,
/// then index). Causes absent from training rank last with score `-inf`.
pub fn tariff_assign(model: &TariffModel, test: &Dataset) -> Result<CauseAssignment> {
    if test.n_symptoms() != model.n_symptoms || test.n_causes() != model.n_causes {
        return Err(Error::CatalogMismatch(
            "test catalog does not match tariff model".into(),
        ));
    }
    if test.is_empty() {
        return Err(Error::Empty("test set has no records".into()));
    }
    let nc = model.n_causes;
    let per_death: Vec<DeathAssignment> = test
        .records()
        .iter()
        .map(|rec| {
            let raw: Vec<f64> = (0..nc).map(|c| model.score(c, &rec.symptoms)).collect();
            let pct: Vec<f64> = (0..nc)
                .map(|c| {
                    if model.retained[c] {
                        mid_rank_fraction(&model.train_scores[c], raw[c])
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect();
            let mut ranking: Vec<usize> = (0..nc).collect();
            ranking.sort_by(|&a, &b| {
                desc(pct[a], pct[b])
                    .then(desc(raw[a], raw[b]))
                    .then(a.cmp(&b))
            });
            DeathAssignment {
                id: rec.id.clone(),
                scores: pct,
                ranking,
            }
        })
        .collect();
    let csmf_estimate = top_cause_fractions(&per_death, nc);
    Ok(CauseAssignment {
        algorithm: Algorithm::Tariff,
        per_death,
        csmf_estimate,
    })
}
