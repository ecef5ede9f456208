use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::sci::{CondProbMatrix, Provenance};

use super::{desc, top_cause_fractions, Algorithm, CauseAssignment, DeathAssignment};

/// Naive-Bayes propagation over endorsed symptoms only.
///
/// For each death, `log prior(c) + Σ_{s answered Yes} log sci(c, s)` is turned
/// into a posterior; No and Missing answers contribute nothing. An endorsed
/// symptom with `sci(c, s) = 0` eliminates cause `c`. When every cause is
/// eliminated, the posterior is spread over the causes with the fewest
/// eliminating symptoms, using the remaining factors. Rankings order causes by
/// (fewest eliminating symptoms, log-score, index), which agrees with the
/// descending-posterior order wherever the posterior is positive.
///
/// The prior must be nonnegative with a positive sum; it is normalized.
pub fn interva_assign(
    sci: &CondProbMatrix,
    prior: &[f64],
    test: &Dataset,
) -> Result<CauseAssignment> {
    let algorithm = match sci.provenance() {
        Provenance::QuantileConverted => Algorithm::InterVaQ,
        Provenance::FixedConverted => Algorithm::InterVaF,
        Provenance::RawEstimate => {
            return Err(Error::Precondition(
                "InterVA needs a level-converted matrix".into(),
            ))
        }
    };
    let nc = sci.n_causes();
    if test.n_causes() != nc || test.n_symptoms() != sci.n_symptoms() {
        return Err(Error::CatalogMismatch(
            "test catalog does not match the conditional probability matrix".into(),
        ));
    }
    if test.is_empty() {
        return Err(Error::Empty("test set has no records".into()));
    }
    let prior = normalize_prior(prior, nc)?;
    let log_prior: Vec<f64> = prior.iter().map(|p| p.ln()).collect();
    let log_sci: Vec<f64> = sci.values().iter().map(|p| p.ln()).collect();
    let ns = sci.n_symptoms();

    let mut hits = vec![0usize; nc];
    let mut logs = vec![0.0f64; nc];
    let per_death: Vec<DeathAssignment> = test
        .records()
        .iter()
        .map(|rec| {
            for c in 0..nc {
                if prior[c] == 0.0 {
                    hits[c] = usize::MAX;
                    logs[c] = f64::NEG_INFINITY;
                    continue;
                }
                hits[c] = 0;
                logs[c] = log_prior[c];
                let row = &log_sci[c * ns..(c + 1) * ns];
                for (v, &lp) in rec.symptoms.iter().zip(row) {
                    if v.is_yes() {
                        if lp == f64::NEG_INFINITY {
                            hits[c] += 1;
                        } else {
                            logs[c] += lp;
                        }
                    }
                }
            }
            let min_hits = *hits.iter().min().expect("at least one cause");
            let max_log = (0..nc)
                .filter(|&c| hits[c] == min_hits)
                .map(|c| logs[c])
                .fold(f64::NEG_INFINITY, f64::max);
            let mut scores: Vec<f64> = (0..nc)
                .map(|c| {
                    if hits[c] == min_hits {
                        (logs[c] - max_log).exp()
                    } else {
                        0.0
                    }
                })
                .collect();
            let total: f64 = scores.iter().sum();
            scores.iter_mut().for_each(|p| *p /= total);

            let mut ranking: Vec<usize> = (0..nc).collect();
            ranking.sort_by(|&a, &b| {
                hits[a]
                    .cmp(&hits[b])
                    .then(desc(logs[a], logs[b]))
                    .then(a.cmp(&b))
            });
            DeathAssignment {
                id: rec.id.clone(),
                scores,
                ranking,
            }
        })
        .collect();

    let csmf_estimate = top_cause_fractions(&per_death, nc);
    Ok(CauseAssignment {
        algorithm,
        per_death,
        csmf_estimate,
    })
}

pub(crate) fn normalize_prior(prior: &[f64], n_causes: usize) -> Result<Vec<f64>> {
    if prior.len() != n_causes {
        return Err(Error::Precondition(format!(
            "prior has {} entries, expected {n_causes}",
            prior.len()
        )));
    }
    if prior.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::Precondition(
            "prior entries must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = prior.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Precondition("prior has zero total mass".into()));
    }
    Ok(prior.iter().map(|p| p / total).collect())
}
