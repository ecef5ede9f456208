//! Additive factor models over grid results: treatment-coded design matrices,
//! least squares by Householder QR, and sequential (type I) ANOVA.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{Metric, MetricsRow};

use super::special::f_upper_tail;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    TrainSite,
    TestSite,
    Algorithm,
    SameSiteIndicator,
}

impl Factor {
    /// Default sequential order: training site, test site, algorithm, then the
    /// same-site adjustment.
    pub const ORDER: [Factor; 4] = [
        Factor::TrainSite,
        Factor::TestSite,
        Factor::Algorithm,
        Factor::SameSiteIndicator,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Factor::TrainSite => "train_site",
            Factor::TestSite => "test_site",
            Factor::Algorithm => "algorithm",
            Factor::SameSiteIndicator => "same_site",
        }
    }

    /// The level label of a row under this factor.
    pub fn level(self, row: &MetricsRow) -> String {
        match self {
            Factor::TrainSite => row.train_site.clone(),
            Factor::TestSite => row.test_site.clone(),
            Factor::Algorithm => row.algorithm.token().to_string(),
            Factor::SameSiteIndicator => (row.is_same_site() as u8).to_string(),
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Factor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Factor::ORDER
            .into_iter()
            .find(|f| f.token() == s)
            .ok_or_else(|| Error::Config(format!("unknown factor {s:?}")))
    }
}

/// Which additive terms enter the model, in sequential order, and whether
/// same-site rows are kept. The first level of each site or algorithm factor
/// (in sorted order) is the baseline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorSpec {
    factors: Vec<Factor>,
    include_same_site_rows: bool,
}

impl FactorSpec {
    pub fn new(factors: Vec<Factor>, include_same_site_rows: bool) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Config("factor list is empty".into()));
        }
        let unique: BTreeSet<_> = factors.iter().collect();
        if unique.len() != factors.len() {
            return Err(Error::Config("factor list has duplicates".into()));
        }
        if factors.contains(&Factor::SameSiteIndicator)
            && !(factors.contains(&Factor::TrainSite) && factors.contains(&Factor::TestSite))
        {
            return Err(Error::Config(
                "same_site indicator needs both site factors".into(),
            ));
        }
        Ok(FactorSpec {
            factors,
            include_same_site_rows,
        })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn include_same_site_rows(&self) -> bool {
        self.include_same_site_rows
    }

    /// The same rows with the first `k` factors only.
    pub fn truncated(&self, k: usize) -> FactorSpec {
        FactorSpec {
            factors: self.factors[..k].to_vec(),
            include_same_site_rows: self.include_same_site_rows,
        }
    }

    fn keeps(&self, row: &MetricsRow) -> bool {
        self.include_same_site_rows || !row.is_same_site()
    }
}

/// The four experiment presets of the variance decomposition.
///
/// 1: unresampled rows, all train/test pairs, same-site term included.
/// 2: replicate-mean rows, all pairs, same-site term included.
/// 3: unresampled rows without same-site pairs, no same-site term.
/// 4: replicate-mean rows without same-site pairs, no same-site term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Experiment {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "3")]
    Three,
    #[serde(rename = "4")]
    Four,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [
        Experiment::One,
        Experiment::Two,
        Experiment::Three,
        Experiment::Four,
    ];

    pub fn number(self) -> u8 {
        match self {
            Experiment::One => 1,
            Experiment::Two => 2,
            Experiment::Three => 3,
            Experiment::Four => 4,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Experiment::One),
            2 => Ok(Experiment::Two),
            3 => Ok(Experiment::Three),
            4 => Ok(Experiment::Four),
            _ => Err(Error::Config(format!("experiment must be 1-4, got {n}"))),
        }
    }

    /// Replicate marker of the rows this experiment uses.
    pub fn replicate(self) -> i64 {
        match self {
            Experiment::One | Experiment::Three => 0,
            Experiment::Two | Experiment::Four => crate::metrics::MEAN_REPLICATE,
        }
    }

    pub fn includes_same_site(self) -> bool {
        matches!(self, Experiment::One | Experiment::Two)
    }

    pub fn keeps(self, row: &MetricsRow) -> bool {
        row.replicate == self.replicate() && (self.includes_same_site() || !row.is_same_site())
    }

    /// Rows used by this experiment, optionally restricted to one test site.
    pub fn select<'a>(self, rows: &'a [MetricsRow], test_site: Option<&str>) -> Vec<&'a MetricsRow> {
        rows.iter()
            .filter(|r| self.keeps(r))
            .filter(|r| test_site.is_none_or(|t| r.test_site == t))
            .collect()
    }

    /// Pooled model over all test sites.
    pub fn factor_spec(self) -> FactorSpec {
        let factors = if self.includes_same_site() {
            Factor::ORDER.to_vec()
        } else {
            Factor::ORDER[..3].to_vec()
        };
        FactorSpec::new(factors, self.includes_same_site()).expect("valid preset")
    }

    /// Per-test-site model: the test-site term and the same-site term are
    /// collinear with the intercept and training site there, so only
    /// training site and algorithm remain.
    pub fn per_site_spec(self) -> FactorSpec {
        FactorSpec::new(
            vec![Factor::TrainSite, Factor::Algorithm],
            self.includes_same_site(),
        )
        .expect("valid preset")
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Column-major design matrix with named columns grouped by term.
#[derive(Debug, Clone)]
struct Design {
    n: usize,
    columns: Vec<Vec<f64>>,
    names: Vec<String>,
    /// Term of each column; `None` for the intercept.
    terms: Vec<Option<Factor>>,
}

fn build_design(rows: &[&MetricsRow], spec: &FactorSpec) -> Result<Design> {
    let n = rows.len();
    let mut design = Design {
        n,
        columns: vec![vec![1.0; n]],
        names: vec!["(intercept)".to_string()],
        terms: vec![None],
    };
    for &factor in &spec.factors {
        if factor == Factor::SameSiteIndicator {
            design
                .columns
                .push(rows.iter().map(|r| r.is_same_site() as u8 as f64).collect());
            design.names.push(factor.token().to_string());
            design.terms.push(Some(factor));
            continue;
        }
        let levels: Vec<String> = rows
            .iter()
            .map(|r| factor.level(r))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if levels.len() < 2 {
            return Err(Error::RankDeficient(format!(
                "{factor} has a single level and is collinear with the intercept"
            )));
        }
        for level in &levels[1..] {
            design.columns.push(
                rows.iter()
                    .map(|r| (factor.level(r) == *level) as u8 as f64)
                    .collect(),
            );
            design.names.push(format!("{factor}[{level}]"));
            design.terms.push(Some(factor));
        }
    }
    Ok(design)
}

/// Result of a least-squares fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub n: usize,
    pub coefficient_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub residual_ss: f64,
    pub residual_df: usize,
    /// `Qᵀy` for the model columns, in column order.
    #[serde(skip)]
    effects: Vec<f64>,
    #[serde(skip)]
    terms: Vec<Option<Factor>>,
}

impl OlsFit {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.coefficient_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.coefficients[i])
    }
}

/// Householder QR least squares. Columns whose component orthogonal to the
/// preceding columns is negligible are reported as rank deficient.
fn qr_least_squares(design: &Design, y: &[f64]) -> Result<OlsFit> {
    let n = design.n;
    let p = design.columns.len();
    let mut a = design.columns.clone();
    let mut qty = y.to_vec();
    let col_norms: Vec<f64> = a.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let mut dependent = Vec::new();

    // `r` counts accepted columns; reflector `r` acts on rows r..n.
    let mut r = 0;
    for k in 0..p {
        let norm = if r < n {
            a[k][r..].iter().map(|v| v * v).sum::<f64>().sqrt()
        } else {
            0.0
        };
        if norm <= 1e-9 * col_norms[k].max(f64::MIN_POSITIVE) {
            dependent.push(design.names[k].clone());
            continue;
        }
        let alpha = if a[k][r] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[k][r..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        let reflect = |col: &mut [f64]| {
            let dot: f64 = v.iter().zip(&col[r..]).map(|(a, b)| a * b).sum();
            let scale = 2.0 * dot / vnorm2;
            for (c, vi) in col[r..].iter_mut().zip(&v) {
                *c -= scale * vi;
            }
        };
        for col in a.iter_mut().skip(k) {
            reflect(col);
        }
        reflect(&mut qty);
        r += 1;
    }
    if !dependent.is_empty() {
        return Err(Error::RankDeficient(format!(
            "collinear columns: {}",
            dependent.join(", ")
        )));
    }

    // Back-substitution on R (upper triangle of the reflected columns).
    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = qty[i];
        for j in i + 1..p {
            s -= a[j][i] * beta[j];
        }
        beta[i] = s / a[i][i];
    }
    let residual_ss: f64 = qty[p..].iter().map(|v| v * v).sum();
    Ok(OlsFit {
        n,
        coefficient_names: design.names.clone(),
        coefficients: beta,
        residual_ss,
        residual_df: n - p,
        effects: qty[..p].to_vec(),
        terms: design.terms.clone(),
    })
}

fn response(rows: &[&MetricsRow], metric: Metric) -> Vec<f64> {
    rows.iter().map(|r| metric.value(r)).collect()
}

fn kept_rows<'a>(rows: &[&'a MetricsRow], spec: &FactorSpec) -> Vec<&'a MetricsRow> {
    rows.iter().copied().filter(|r| spec.keeps(r)).collect()
}

/// Least-squares fit of the additive model described by `spec`.
pub fn fit_ols(rows: &[&MetricsRow], metric: Metric, spec: &FactorSpec) -> Result<OlsFit> {
    let rows = kept_rows(rows, spec);
    if rows.is_empty() {
        return Err(Error::Empty("no rows to fit".into()));
    }
    let design = build_design(&rows, spec)?;
    qr_least_squares(&design, &response(&rows, metric))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorAnova {
    pub factor: Factor,
    pub df: usize,
    pub sum_sq: f64,
    pub proportion: f64,
    /// `None` when the residual sum of squares is zero.
    pub f_statistic: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaReport {
    pub metric: Metric,
    pub n_obs: usize,
    pub factors: Vec<FactorAnova>,
    pub residual_ss: f64,
    pub residual_df: usize,
    pub residual_proportion: f64,
    pub total_ss: f64,
}

impl AnovaReport {
    pub fn factor(&self, factor: Factor) -> Option<&FactorAnova> {
        self.factors.iter().find(|f| f.factor == factor)
    }

    pub fn proportion(&self, factor: Factor) -> f64 {
        self.factor(factor).map_or(0.0, |f| f.proportion)
    }
}

/// Sequential sums of squares: each term's SS is the drop in residual SS when
/// it is added after the terms before it.
pub fn anova_sequential(rows: &[&MetricsRow], metric: Metric, spec: &FactorSpec) -> Result<AnovaReport> {
    let fit = fit_ols(rows, metric, spec)?;
    if fit.residual_df == 0 {
        return Err(Error::Precondition(
            "no residual degrees of freedom left".into(),
        ));
    }
    let kept = kept_rows(rows, spec);
    let y = response(&kept, metric);
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let total_ss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();

    let mse = fit.residual_ss / fit.residual_df as f64;
    let proportion = |ss: f64| if total_ss > 0.0 { ss / total_ss } else { 0.0 };
    let mut factors = Vec::with_capacity(spec.factors.len());
    for &factor in &spec.factors {
        let (df, sum_sq) = fit
            .terms
            .iter()
            .zip(&fit.effects)
            .filter(|(t, _)| **t == Some(factor))
            .fold((0usize, 0.0f64), |(d, s), (_, e)| (d + 1, s + e * e));
        let (f_statistic, p_value) = if mse > 0.0 {
            let f = (sum_sq / df as f64) / mse;
            (Some(f), Some(f_upper_tail(f, df as f64, fit.residual_df as f64)?))
        } else {
            (None, None)
        };
        factors.push(FactorAnova {
            factor,
            df,
            sum_sq,
            proportion: proportion(sum_sq),
            f_statistic,
            p_value,
        });
    }
    Ok(AnovaReport {
        metric,
        n_obs: fit.n,
        factors,
        residual_ss: fit.residual_ss,
        residual_df: fit.residual_df,
        residual_proportion: proportion(fit.residual_ss),
        total_ss,
    })
}
