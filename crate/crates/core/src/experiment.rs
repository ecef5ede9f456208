//! Cross-site train/test grid with optional Dirichlet resampling of test sets.
//!
//! Design 1 (`replications = 0`) scores every (train site, test site,
//! algorithm) once on the site's own deaths. Design 2 draws, per replicate, a
//! target CSMF from a flat Dirichlet and resamples the test site to match it;
//! each cell then gets one row per replicate plus a mean row
//! (`replicate = -1`).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{
    insilico_fit, interva_assign, tariff_assign, tariff_fit, Algorithm, CauseAssignment,
    GibbsConfig, TariffModel,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricsRow, MEAN_REPLICATE};
use crate::sampling::{categorical, dirichlet};
use crate::sci::{
    convert_fixed, convert_quantile, estimate_condprob, CondProbMatrix, LevelDistance, LevelTable,
};
use crate::seed::{derive_seed, derived_rng, sha256_hex, Rng};
use rand::Rng as _;

/// Settings shared by all classifier fits in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSettings {
    pub levels: LevelTable,
    pub fixed_distance: LevelDistance,
    /// Prior CSMF for the InterVA-style algorithms; uniform when absent.
    pub interva_prior: Option<Vec<f64>>,
    /// Sampler settings; the seed is replaced per cell.
    pub gibbs: GibbsConfig,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        ClassifierSettings {
            levels: LevelTable::interva_default(),
            fixed_distance: LevelDistance::Linear,
            interva_prior: None,
            gibbs: GibbsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub algorithms: Vec<Algorithm>,
    /// 0 selects design 1 (no resampling).
    pub replications: usize,
    pub dirichlet_concentration: f64,
    pub seed: u64,
    pub include_same_site: bool,
    pub classifiers: ClassifierSettings,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            algorithms: Algorithm::ALL.to_vec(),
            replications: 0,
            dirichlet_concentration: 1.0,
            seed: 0,
            include_same_site: true,
            classifiers: ClassifierSettings::default(),
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms selected".into()));
        }
        if !(self.dirichlet_concentration > 0.0) || !self.dirichlet_concentration.is_finite() {
            return Err(Error::Config("dirichlet_concentration must be positive".into()));
        }
        let needs_gibbs = self
            .algorithms
            .iter()
            .any(|a| matches!(a, Algorithm::InSilicoQ | Algorithm::InSilicoF));
        if needs_gibbs {
            self.classifiers.gibbs.validate()?;
        }
        Ok(())
    }

    /// Number of rows `run_grid` produces for `n_sites` sites.
    pub fn expected_rows(&self, n_sites: usize) -> usize {
        let cells = if self.include_same_site {
            n_sites * n_sites
        } else {
            n_sites * n_sites.saturating_sub(1)
        };
        let per_cell = if self.replications == 0 {
            1
        } else {
            self.replications + 1
        };
        cells * self.algorithms.len() * per_cell
    }
}

/// A flat-Dirichlet draw of dimension `dim`.
pub fn sample_dirichlet(concentration: f64, dim: usize, rng: &mut Rng) -> Vec<f64> {
    if dim == 1 {
        return vec![1.0];
    }
    dirichlet(&vec![concentration; dim], rng)
}

/// Resamples `test` with replacement to the same size so that its cause mix
/// follows `target`, renormalized over the causes present in `test`.
pub fn resample_test(test: &Dataset, target: &[f64], rng: &mut Rng) -> Result<Dataset> {
    if test.is_empty() {
        return Err(Error::Empty("cannot resample an empty test set".into()));
    }
    if target.len() != test.n_causes() {
        return Err(Error::Precondition(format!(
            "target CSMF has {} entries, catalog has {}",
            target.len(),
            test.n_causes()
        )));
    }
    let labels = test.labels()?;
    let mut by_cause: Vec<Vec<usize>> = vec![Vec::new(); test.n_causes()];
    for (i, &c) in labels.iter().enumerate() {
        by_cause[c].push(i);
    }
    let weights: Vec<f64> = target
        .iter()
        .zip(&by_cause)
        .map(|(&p, rows)| if rows.is_empty() { 0.0 } else { p.max(0.0) })
        .collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Precondition(
            "target CSMF puts no mass on causes present in the test set".into(),
        ));
    }
    let records = (0..test.len())
        .map(|slot| {
            let cause = categorical(&weights, total, rng);
            let pool = &by_cause[cause];
            let src = &test.records()[pool[rng.random_range(0..pool.len())]];
            let mut rec = src.clone();
            rec.id = format!("{}~{slot}", src.id);
            rec
        })
        .collect();
    test.with_records(records)
}

/// Everything fitted on one training set, shared across test sets.
#[derive(Debug, Clone)]
pub struct TrainedModels {
    tariff: Option<TariffModel>,
    quantile: Option<CondProbMatrix>,
    fixed: Option<CondProbMatrix>,
}

impl TrainedModels {
    pub fn fit(train: &Dataset, algorithms: &[Algorithm], settings: &ClassifierSettings) -> Result<Self> {
        let wants = |a: &[Algorithm]| algorithms.iter().any(|x| a.contains(x));
        let tariff = if wants(&[Algorithm::Tariff]) {
            Some(tariff_fit(train)?)
        } else {
            None
        };
        let needs_q = wants(&[Algorithm::InterVaQ, Algorithm::InSilicoQ]);
        let needs_f = wants(&[Algorithm::InterVaF, Algorithm::InSilicoF]);
        let raw = if needs_q || needs_f {
            Some(estimate_condprob(train)?)
        } else {
            None
        };
        let quantile = match (&raw, needs_q) {
            (Some(r), true) => Some(convert_quantile(r, &settings.levels)?),
            _ => None,
        };
        let fixed = match (&raw, needs_f) {
            (Some(r), true) => Some(convert_fixed(r, &settings.levels, settings.fixed_distance)?),
            _ => None,
        };
        Ok(TrainedModels {
            tariff,
            quantile,
            fixed,
        })
    }

    pub fn assign(
        &self,
        algorithm: Algorithm,
        test: &Dataset,
        settings: &ClassifierSettings,
        gibbs_seed: u64,
    ) -> Result<CauseAssignment> {
        let missing = || Error::Precondition(format!("{algorithm} was not fitted"));
        let prior = || {
            settings
                .interva_prior
                .clone()
                .unwrap_or_else(|| vec![1.0; test.n_causes()])
        };
        match algorithm {
            Algorithm::Tariff => tariff_assign(self.tariff.as_ref().ok_or_else(missing)?, test),
            Algorithm::InterVaQ => {
                interva_assign(self.quantile.as_ref().ok_or_else(missing)?, &prior(), test)
            }
            Algorithm::InterVaF => {
                interva_assign(self.fixed.as_ref().ok_or_else(missing)?, &prior(), test)
            }
            Algorithm::InSilicoQ => insilico_fit(
                self.quantile.as_ref().ok_or_else(missing)?,
                test,
                &settings.gibbs.with_seed(gibbs_seed),
            ),
            Algorithm::InSilicoF => insilico_fit(
                self.fixed.as_ref().ok_or_else(missing)?,
                test,
                &settings.gibbs.with_seed(gibbs_seed),
            ),
        }
    }
}

fn site_label(d: &Dataset) -> String {
    d.sites().join("+")
}

fn metrics_row(
    train_site: &str,
    test_site: &str,
    algorithm: Algorithm,
    replicate: i64,
    values: [f64; 4],
) -> MetricsRow {
    MetricsRow {
        train_site: train_site.to_string(),
        test_site: test_site.to_string(),
        algorithm,
        replicate,
        ccc: values[0],
        csmf_accuracy: values[1],
        top1: values[2],
        top3: values[3],
    }
}

/// Fits `algorithm` on `train`, applies it to `test` and scores it. Site
/// labels in the row are the datasets' site labels joined with `+`.
pub fn run_cell(
    train: &Dataset,
    test: &Dataset,
    algorithm: &str,
    settings: &ClassifierSettings,
    seed: u64,
) -> Result<MetricsRow> {
    let algorithm: Algorithm = algorithm.parse()?;
    if !train.same_catalogs(test) {
        return Err(Error::CatalogMismatch(
            "train and test differ in symptom or cause catalog".into(),
        ));
    }
    let models = TrainedModels::fit(train, &[algorithm], settings)?;
    let assignment = models.assign(algorithm, test, settings, seed)?;
    let values = evaluate(&assignment, test)?;
    Ok(metrics_row(&site_label(train), &site_label(test), algorithm, 0, values))
}

/// Runs every (train site, test site) cell for every configured algorithm.
///
/// Rows are ordered by train site, test site, algorithm (config order), then
/// replicate, independent of how cells are scheduled across threads.
pub fn run_grid(data: &Dataset, config: &GridConfig) -> Result<Vec<MetricsRow>> {
    config.validate()?;
    let sites: Vec<String> = data.sites().into_iter().map(str::to_string).collect();
    let subsets: Vec<Dataset> = sites
        .iter()
        .map(|s| data.site_subset(s))
        .collect::<Result<_>>()?;
    if subsets.iter().any(Dataset::is_empty) {
        return Err(Error::Empty("a site has no deaths".into()));
    }

    let cells: Vec<(usize, usize)> = (0..sites.len())
        .flat_map(|i| (0..sites.len()).map(move |j| (i, j)))
        .filter(|(i, j)| config.include_same_site || i != j)
        .collect();
    if cells.is_empty() {
        return Err(Error::Empty(
            "grid has no cells (need at least two sites without same-site pairs)".into(),
        ));
    }

    let trained: Vec<TrainedModels> = subsets
        .par_iter()
        .map(|train| TrainedModels::fit(train, &config.algorithms, &config.classifiers))
        .collect::<Result<_>>()?;

    let blocks: Vec<Vec<MetricsRow>> = cells
        .par_iter()
        .map(|&(i, j)| run_grid_cell(&sites[i], &sites[j], &trained[i], &subsets[j], config))
        .collect::<Result<_>>()?;
    Ok(blocks.into_iter().flatten().collect())
}

fn run_grid_cell(
    train_site: &str,
    test_site: &str,
    models: &TrainedModels,
    test: &Dataset,
    config: &GridConfig,
) -> Result<Vec<MetricsRow>> {
    let score = |algorithm: Algorithm, test: &Dataset, replicate: i64| -> Result<[f64; 4]> {
        let rep = replicate.to_string();
        let gibbs_seed = derive_seed(
            config.seed,
            &["gibbs", train_site, test_site, &rep, algorithm.token()],
        );
        let assignment = models.assign(algorithm, test, &config.classifiers, gibbs_seed)?;
        evaluate(&assignment, test)
    };

    if config.replications == 0 {
        return config
            .algorithms
            .iter()
            .map(|&a| Ok(metrics_row(train_site, test_site, a, 0, score(a, test, 0)?)))
            .collect();
    }

    // values[replicate][algorithm]
    let mut values = Vec::with_capacity(config.replications);
    for rep in 1..=config.replications {
        let rep_label = rep.to_string();
        let mut rng = derived_rng(config.seed, &["resample", train_site, test_site, &rep_label]);
        let target = sample_dirichlet(config.dirichlet_concentration, test.n_causes(), &mut rng);
        let resampled = resample_test(test, &target, &mut rng)?;
        let per_alg = config
            .algorithms
            .iter()
            .map(|&a| score(a, &resampled, rep as i64))
            .collect::<Result<Vec<_>>>()?;
        values.push(per_alg);
    }

    let mut rows = Vec::with_capacity(config.algorithms.len() * (config.replications + 1));
    for (k, &a) in config.algorithms.iter().enumerate() {
        let mut sum = [0.0; 4];
        for (r, per_alg) in values.iter().enumerate() {
            rows.push(metrics_row(train_site, test_site, a, r as i64 + 1, per_alg[k]));
            for m in 0..4 {
                sum[m] += per_alg[k][m];
            }
        }
        let n = config.replications as f64;
        rows.push(metrics_row(
            train_site,
            test_site,
            a,
            MEAN_REPLICATE,
            sum.map(|s| s / n),
        ));
    }
    Ok(rows)
}

/// SHA-256 over a dataset's symptom and cause catalogs.
pub fn catalog_digest(data: &Dataset) -> String {
    let mut text = String::new();
    for s in data.symptom_names() {
        text.push_str(s);
        text.push('\n');
    }
    text.push('\u{1}');
    for c in data.cause_names() {
        text.push_str(c);
        text.push('\n');
    }
    sha256_hex(text.as_bytes())
}
