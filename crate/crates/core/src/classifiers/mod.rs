//! Cause-assignment algorithms behind a common output type.
//!
//! Every algorithm produces, for each test death, a score per cause and a full
//! ranking of the cause catalog, plus a population-level CSMF estimate.

mod insilico;
mod interva;
mod tariff;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use insilico::{insilico_fit, GibbsConfig};
pub use interva::interva_assign;
pub use tariff::{tariff_assign, tariff_fit, TariffModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "tariff")]
    Tariff,
    #[serde(rename = "interva-q")]
    InterVaQ,
    #[serde(rename = "interva-f")]
    InterVaF,
    #[serde(rename = "insilico-q")]
    InSilicoQ,
    #[serde(rename = "insilico-f")]
    InSilicoF,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Tariff,
        Algorithm::InterVaQ,
        Algorithm::InterVaF,
        Algorithm::InSilicoQ,
        Algorithm::InSilicoF,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Algorithm::Tariff => "tariff",
            Algorithm::InterVaQ => "interva-q",
            Algorithm::InterVaF => "interva-f",
            Algorithm::InSilicoQ => "insilico-q",
            Algorithm::InSilicoF => "insilico-f",
        }
    }

    /// Parses a comma-separated list of algorithm tokens.
    pub fn parse_list(s: &str) -> Result<Vec<Algorithm>> {
        let mut out = Vec::new();
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let alg: Algorithm = tok.parse()?;
            if !out.contains(&alg) {
                out.push(alg);
            }
        }
        if out.is_empty() {
            return Err(Error::Config("no algorithms given".into()));
        }
        Ok(out)
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.token() == s)
            .ok_or_else(|| Error::UnknownAlgorithm(s.to_string()))
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Scores and ranking for one test death. Higher score means more likely.
#[derive(Debug, Clone, PartialEq)]
pub struct DeathAssignment {
    pub id: String,
    pub scores: Vec<f64>,
    /// Cause indices, most likely first; a permutation of `0..C`.
    pub ranking: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CauseAssignment {
    pub algorithm: Algorithm,
    /// One entry per test death, in test-set order.
    pub per_death: Vec<DeathAssignment>,
    pub csmf_estimate: Vec<f64>,
}

impl CauseAssignment {
    pub fn n_causes(&self) -> usize {
        self.csmf_estimate.len()
    }

    pub fn top_causes(&self) -> Vec<usize> {
        self.per_death.iter().map(|d| d.ranking[0]).collect()
    }
}

/// First `k` ranked causes of every death.
pub fn top_k(assignment: &CauseAssignment, k: usize) -> Result<Vec<Vec<usize>>> {
    let c = assignment.n_causes();
    if k == 0 || k > c {
        return Err(Error::Precondition(format!(
            "k = {k} must lie in 1..={c}"
        )));
    }
    Ok(assignment
        .per_death
        .iter()
        .map(|d| d.ranking[..k].to_vec())
        .collect())
}

/// Ranks causes by descending score, breaking ties by ascending index.
pub(crate) fn rank_by_score(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| desc(scores[a], scores[b]).then(a.cmp(&b)));
    order
}

pub(crate) fn desc(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

/// Fraction of deaths whose top-ranked cause is each cause.
pub(crate) fn top_cause_fractions(per_death: &[DeathAssignment], n_causes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; n_causes];
    for d in per_death {
        counts[d.ranking[0]] += 1;
    }
    let n = per_death.len() as f64;
    counts.into_iter().map(|k| k as f64 / n).collect()
}
