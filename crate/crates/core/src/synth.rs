//! Multi-site synthetic populations with known ground truth.
//!
//! Each site perturbs a shared base matrix of symptom probabilities on the
//! logit scale, `logit p_site = logit p_base + τ z` with `z ~ N(0, 1)` per
//! entry, and draws its own CSMF. Symptoms are conditionally independent given
//! the cause. Random streams are derived per site and per purpose, so the
//! perturbation directions `z`, the CSMFs and the uniforms driving the deaths
//! are shared across values of `τ` for a fixed seed.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DeathRecord, SymptomValue};
use crate::error::{Error, Result};
use crate::sampling::dirichlet;
use crate::seed::derived_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_sites: usize,
    pub n_causes: usize,
    pub n_symptoms: usize,
    pub deaths_per_site: usize,
    /// C × S; drawn uniformly on (0.05, 0.95) when absent.
    #[serde(default)]
    pub base_condprob: Option<Vec<Vec<f64>>>,
    /// Standard deviation of the per-site logit perturbation.
    #[serde(default)]
    pub site_heterogeneity: f64,
    /// Probability that any symptom answer is masked as missing.
    #[serde(default)]
    pub missingness: f64,
    /// One CSMF per site; Dirichlet(1) draws when absent.
    #[serde(default)]
    pub site_csmfs: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(n_sites: usize, n_causes: usize, n_symptoms: usize, deaths_per_site: usize) -> Self {
        SynthConfig {
            n_sites,
            n_causes,
            n_symptoms,
            deaths_per_site,
            base_condprob: None,
            site_heterogeneity: 0.0,
            missingness: 0.0,
            site_csmfs: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_sites == 0 || self.n_causes == 0 || self.n_symptoms == 0 || self.deaths_per_site == 0 {
            return bad("site, cause, symptom and death counts must be positive".into());
        }
        if !(self.site_heterogeneity >= 0.0) || !self.site_heterogeneity.is_finite() {
            return bad("site_heterogeneity must be a nonnegative number".into());
        }
        if !(0.0..1.0).contains(&self.missingness) {
            return bad("missingness must lie in [0, 1)".into());
        }
        if let Some(base) = &self.base_condprob {
            if base.len() != self.n_causes || base.iter().any(|r| r.len() != self.n_symptoms) {
                return bad("base_condprob must be n_causes × n_symptoms".into());
            }
            if base.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
                return bad("base_condprob entries must lie in [0, 1]".into());
            }
        }
        if let Some(csmfs) = &self.site_csmfs {
            if csmfs.len() != self.n_sites {
                return bad("site_csmfs needs one vector per site".into());
            }
            for v in csmfs {
                let total: f64 = v.iter().sum();
                if v.len() != self.n_causes || v.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                    return bad("each site CSMF must be a probability vector over the causes".into());
                }
            }
        }
        Ok(())
    }

    pub fn site_names(&self) -> Vec<String> {
        let width = self.n_sites.to_string().len();
        (1..=self.n_sites).map(|i| format!("site{i:0width$}")).collect()
    }

    pub fn cause_names(&self) -> Vec<String> {
        let width = self.n_causes.to_string().len().max(2);
        (1..=self.n_causes).map(|i| format!("cause{i:0width$}")).collect()
    }

    pub fn symptom_names(&self) -> Vec<String> {
        let width = self.n_symptoms.to_string().len().max(3);
        (1..=self.n_symptoms).map(|i| format!("s{i:0width$}")).collect()
    }
}

/// The generating parameters behind a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub site_names: Vec<String>,
    pub cause_names: Vec<String>,
    pub symptom_names: Vec<String>,
    pub base_condprob: Vec<Vec<f64>>,
    /// Per site, the CSMF deaths were drawn from.
    pub site_csmfs: Vec<Vec<f64>>,
    /// Per site, the C × S symptom probabilities.
    pub site_condprobs: Vec<Vec<Vec<f64>>>,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn generate(config: &SynthConfig) -> Result<(Dataset, GroundTruth)> {
    config.validate()?;
    let (nc, ns) = (config.n_causes, config.n_symptoms);
    let sites = config.site_names();

    let base = match &config.base_condprob {
        Some(b) => b.clone(),
        None => {
            let mut rng = derived_rng(config.seed, &["base"]);
            (0..nc)
                .map(|_| (0..ns).map(|_| rng.random_range(0.05..0.95)).collect())
                .collect()
        }
    };

    let mut site_csmfs = Vec::with_capacity(sites.len());
    let mut site_condprobs = Vec::with_capacity(sites.len());
    let mut records = Vec::with_capacity(sites.len() * config.deaths_per_site);
    for (si, site) in sites.iter().enumerate() {
        let mut pert = derived_rng(config.seed, &["perturbation", site]);
        let probs: Vec<Vec<f64>> = base
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&p| {
                        let z: f64 = pert.sample(StandardNormal);
                        if config.site_heterogeneity == 0.0 {
                            p
                        } else {
                            logistic(logit(p) + config.site_heterogeneity * z)
                        }
                    })
                    .collect()
            })
            .collect();

        let csmf = match &config.site_csmfs {
            Some(v) => v[si].clone(),
            None => dirichlet(&vec![1.0; nc], &mut derived_rng(config.seed, &["csmf", site])),
        };

        let mut rng = derived_rng(config.seed, &["deaths", site]);
        for k in 0..config.deaths_per_site {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut cause = nc - 1;
            for (c, &p) in csmf.iter().enumerate() {
                acc += p;
                if u < acc {
                    cause = c;
                    break;
                }
            }
            // Guard against rounding sending u past a zero-mass tail.
            while csmf[cause] == 0.0 && cause > 0 {
                cause -= 1;
            }
            let symptoms = probs[cause]
                .iter()
                .map(|&p| {
                    let answer: f64 = rng.random();
                    let mask: f64 = rng.random();
                    if mask < config.missingness {
                        SymptomValue::Missing
                    } else if answer < p {
                        SymptomValue::Yes
                    } else {
                        SymptomValue::No
                    }
                })
                .collect();
            records.push(DeathRecord {
                id: format!("{site}-{k:06}"),
                site: site.clone(),
                cause: Some(cause),
                symptoms,
            });
        }
        site_csmfs.push(csmf);
        site_condprobs.push(probs);
    }

    let data = Dataset::new(config.symptom_names(), config.cause_names(), records)?;
    let truth = GroundTruth {
        site_names: sites,
        cause_names: config.cause_names(),
        symptom_names: config.symptom_names(),
        base_condprob: base,
        site_csmfs,
        site_condprobs,
    };
    Ok((data, truth))
}
