//! Joint Bayesian cause assignment with a Gibbs sampler.
//!
//! Model: `π ~ Dirichlet(α·1)`, `y_i | π ~ Categorical(π)`, and each observed
//! symptom of death `i` is Bernoulli with the fixed probability `p(y_i, s)`.
//! Unlike the endorsed-only propagation, both Yes and No answers inform the
//! likelihood. The sampler alternates `y | π` and `π | y`.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SymptomValue};
use crate::error::{Error, Result};
use crate::sampling::{categorical, dirichlet};
use crate::sci::{CondProbMatrix, Provenance};
use crate::seed::rng_from_seed;

use super::{rank_by_score, Algorithm, CauseAssignment, DeathAssignment};

/// Probabilities are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]` so that both
/// presence and absence likelihoods stay finite.
pub const PROB_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub dirichlet_prior: f64,
    pub seed: u64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            iterations: 4000,
            burn_in: 2000,
            dirichlet_prior: 1.0,
            seed: 0,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "need 0 <= burn_in < iterations, got burn_in = {} and iterations = {}",
                self.burn_in, self.iterations
            )));
        }
        if !(self.dirichlet_prior > 0.0) || !self.dirichlet_prior.is_finite() {
            return Err(Error::Config("dirichlet_prior must be positive".into()));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        GibbsConfig { seed, ..self }
    }
}

/// Runs the sampler and summarizes the post-burn-in draws.
///
/// The CSMF estimate is the posterior mean of `π`. Per-death scores are
/// posterior membership probabilities, estimated by averaging each death's
/// full-conditional cause probabilities over the kept sweeps (the
/// Rao-Blackwellized form of the membership frequencies).
pub fn insilico_fit(
    sci: &CondProbMatrix,
    test: &Dataset,
    config: &GibbsConfig,
) -> Result<CauseAssignment> {
    config.validate()?;
    let algorithm = match sci.provenance() {
        Provenance::QuantileConverted => Algorithm::InSilicoQ,
        Provenance::FixedConverted => Algorithm::InSilicoF,
        Provenance::RawEstimate => {
            return Err(Error::Precondition(
                "InSilicoVA needs a level-converted matrix".into(),
            ))
        }
    };
    let nc = sci.n_causes();
    let ns = sci.n_symptoms();
    if test.n_causes() != nc || test.n_symptoms() != ns {
        return Err(Error::CatalogMismatch(
            "test catalog does not match the conditional probability matrix".into(),
        ));
    }
    if test.is_empty() {
        return Err(Error::Empty("test set has no records".into()));
    }
    let n = test.len();

    let log_yes: Vec<f64> = sci
        .values()
        .iter()
        .map(|p| p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR).ln())
        .collect();
    let log_no: Vec<f64> = sci
        .values()
        .iter()
        .map(|p| (1.0 - p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)).ln())
        .collect();

    // Per-death likelihoods, scaled so each death's largest is 1.
    let mut lik = vec![0.0f64; n * nc];
    for (i, rec) in test.records().iter().enumerate() {
        let row = &mut lik[i * nc..(i + 1) * nc];
        for (c, slot) in row.iter_mut().enumerate() {
            let base = c * ns;
            *slot = rec
                .symptoms
                .iter()
                .enumerate()
                .map(|(s, v)| match v {
                    SymptomValue::Yes => log_yes[base + s],
                    SymptomValue::No => log_no[base + s],
                    SymptomValue::Missing => 0.0,
                })
                .sum();
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.iter_mut().for_each(|l| *l = (*l - max).exp());
    }

    let mut rng = rng_from_seed(config.seed);
    let mut pi = vec![1.0 / nc as f64; nc];
    let mut counts = vec![0usize; nc];
    let mut alpha = vec![0.0; nc];
    let mut weights = vec![0.0; nc];
    let mut pi_sum = vec![0.0; nc];
    let mut membership = vec![0.0; n * nc];

    for sweep in 0..config.iterations {
        let keep = sweep >= config.burn_in;
        counts.iter_mut().for_each(|k| *k = 0);
        for i in 0..n {
            let row = &lik[i * nc..(i + 1) * nc];
            let mut total = 0.0;
            for c in 0..nc {
                weights[c] = pi[c] * row[c];
                total += weights[c];
            }
            if !(total > 0.0) {
                weights.copy_from_slice(row);
                total = weights.iter().sum();
            }
            let y = categorical(&weights, total, &mut rng);
            counts[y] += 1;
            if keep {
                let acc = &mut membership[i * nc..(i + 1) * nc];
                for c in 0..nc {
                    acc[c] += weights[c] / total;
                }
            }
        }
        for c in 0..nc {
            alpha[c] = config.dirichlet_prior + counts[c] as f64;
        }
        pi = dirichlet(&alpha, &mut rng);
        if keep {
            for c in 0..nc {
                pi_sum[c] += pi[c];
            }
        }
    }

    let kept = (config.iterations - config.burn_in) as f64;
    let mut csmf_estimate: Vec<f64> = pi_sum.iter().map(|s| s / kept).collect();
    let total: f64 = csmf_estimate.iter().sum();
    csmf_estimate.iter_mut().for_each(|p| *p /= total);

    let per_death = test
        .records()
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let scores: Vec<f64> = membership[i * nc..(i + 1) * nc]
                .iter()
                .map(|m| m / kept)
                .collect();
            let ranking = rank_by_score(&scores);
            DeathAssignment {
                id: rec.id.clone(),
                scores,
                ranking,
            }
        })
        .collect();

    Ok(CauseAssignment {
        algorithm,
        per_death,
        csmf_estimate,
    })
}
