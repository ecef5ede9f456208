//! Symptom-cause information: conditional probabilities of each symptom given
//! each cause, estimated from labeled training deaths and optionally coarsened
//! onto a discrete level ladder.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SymptomValue};
use crate::error::{Error, Result};

const DEFAULT_LEVELS: &str = include_str!("../../../config/levels.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    RawEstimate,
    QuantileConverted,
    FixedConverted,
}

/// Cause × symptom matrix of P(symptom = Yes | cause), row-major by cause.
#[derive(Debug, Clone, PartialEq)]
pub struct CondProbMatrix {
    n_causes: usize,
    n_symptoms: usize,
    values: Vec<f64>,
    provenance: Provenance,
}

impl CondProbMatrix {
    pub fn new(
        n_causes: usize,
        n_symptoms: usize,
        values: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        if values.len() != n_causes * n_symptoms {
            return Err(Error::Precondition(format!(
                "expected {} entries, got {}",
                n_causes * n_symptoms,
                values.len()
            )));
        }
        for &v in &values {
            let ok = match provenance {
                Provenance::RawEstimate => v > 0.0 && v < 1.0,
                _ => (0.0..=1.0).contains(&v),
            };
            if !ok {
                return Err(Error::Precondition(format!(
                    "entry {v} out of range for {provenance:?} matrix"
                )));
            }
        }
        Ok(CondProbMatrix {
            n_causes,
            n_symptoms,
            values,
            provenance,
        })
    }

    /// Builds a matrix from per-cause rows.
    pub fn from_rows(rows: &[Vec<f64>], provenance: Provenance) -> Result<Self> {
        let n_symptoms = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_symptoms) {
            return Err(Error::Precondition("ragged probability rows".into()));
        }
        let values = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), n_symptoms, values, provenance)
    }

    pub fn n_causes(&self) -> usize {
        self.n_causes
    }

    pub fn n_symptoms(&self) -> usize {
        self.n_symptoms
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn get(&self, cause: usize, symptom: usize) -> f64 {
        self.values[cause * self.n_symptoms + symptom]
    }

    pub fn row(&self, cause: usize) -> &[f64] {
        &self.values[cause * self.n_symptoms..(cause + 1) * self.n_symptoms]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_causes).map(|c| self.row(c).to_vec()).collect()
    }

    fn map_values(&self, provenance: Provenance, f: impl Fn(f64) -> f64) -> CondProbMatrix {
        CondProbMatrix {
            n_causes: self.n_causes,
            n_symptoms: self.n_symptoms,
            values: self.values.iter().map(|&v| f(v)).collect(),
            provenance,
        }
    }
}

/// Estimates P(Yes | cause) with one pseudo-count each for Yes and No:
/// `(n_yes + 1) / (n_observed + 2)`. Missing responses are ignored.
pub fn estimate_condprob(train: &Dataset) -> Result<CondProbMatrix> {
    if train.is_empty() {
        return Err(Error::Empty("training set has no records".into()));
    }
    let labels = train.labels()?;
    let (nc, ns) = (train.n_causes(), train.n_symptoms());
    let mut yes = vec![0u32; nc * ns];
    let mut obs = vec![0u32; nc * ns];
    for (rec, &c) in train.records().iter().zip(&labels) {
        let base = c * ns;
        for (s, v) in rec.symptoms.iter().enumerate() {
            match v {
                SymptomValue::Yes => {
                    yes[base + s] += 1;
                    obs[base + s] += 1;
                }
                SymptomValue::No => obs[base + s] += 1,
                SymptomValue::Missing => {}
            }
        }
    }
    let values = yes
        .iter()
        .zip(&obs)
        .map(|(&y, &n)| (y as f64 + 1.0) / (n as f64 + 2.0))
        .collect();
    CondProbMatrix::new(nc, ns, values, Provenance::RawEstimate)
}

/// Ordered ladder of discrete levels, highest value first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTable {
    labels: Vec<String>,
    values: Vec<f64>,
    reference_proportions: Option<Vec<f64>>,
}

impl LevelTable {
    pub fn new(
        labels: Vec<String>,
        values: Vec<f64>,
        reference_proportions: Option<Vec<f64>>,
    ) -> Result<Self> {
        if labels.is_empty() || labels.len() != values.len() {
            return Err(Error::LevelTable(
                "need one value per label and at least one level".into(),
            ));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::LevelTable("level values must lie in [0, 1]".into()));
        }
        if values.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::LevelTable(
                "level values must be strictly decreasing".into(),
            ));
        }
        if let Some(p) = &reference_proportions {
            if p.len() != values.len() {
                return Err(Error::LevelTable(
                    "one reference proportion per level required".into(),
                ));
            }
            if p.iter().any(|&x| !(x >= 0.0)) {
                return Err(Error::LevelTable("proportions must be nonnegative".into()));
            }
            let total: f64 = p.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::LevelTable(format!(
                    "proportions sum to {total}, expected 1"
                )));
            }
        }
        Ok(LevelTable {
            labels,
            values,
            reference_proportions,
        })
    }

    /// Parses `label,value[,proportion]` lines; `#` starts a comment line.
    /// The proportion column must be given on every line or on none.
    pub fn parse(text: &str) -> Result<Self> {
        let mut labels = Vec::new();
        let mut values = Vec::new();
        let mut props = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |what: &str| Error::LevelTable(format!("line {}: {what}", lineno + 1));
            if cells.len() < 2 || cells.len() > 3 {
                return Err(bad("expected label,value[,proportion]"));
            }
            labels.push(cells[0].to_string());
            values.push(cells[1].parse::<f64>().map_err(|_| bad("bad value"))?);
            if let Some(p) = cells.get(2) {
                props.push(p.parse::<f64>().map_err(|_| bad("bad proportion"))?);
            }
        }
        let reference = match props.len() {
            0 => None,
            n if n == labels.len() => Some(props),
            _ => {
                return Err(Error::LevelTable(
                    "proportion column given on some lines only".into(),
                ))
            }
        };
        Self::new(labels, values, reference)
    }

    pub fn read<R: Read>(mut source: R) -> Result<Self> {
        let mut text = String::new();
        source.read_to_string(&mut text)?;
        Self::parse(&text)
    }

    /// The bundled 15-level ladder (I, A+, ..., E, N) with its placeholder
    /// reference proportions.
    pub fn interva_default() -> Self {
        Self::parse(DEFAULT_LEVELS).expect("bundled level table is valid")
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn reference_proportions(&self) -> Option<&[f64]> {
        self.reference_proportions.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Distance used to find the closest level in [`convert_fixed`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelDistance {
    #[default]
    Linear,
    Log,
}

impl FromStr for LevelDistance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(LevelDistance::Linear),
            "log" => Ok(LevelDistance::Log),
            other => Err(Error::Config(format!(
                "unknown level distance {other:?} (expected linear or log)"
            ))),
        }
    }
}

impl fmt::Display for LevelDistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LevelDistance::Linear => "linear",
            LevelDistance::Log => "log",
        })
    }
}

fn closest_level(v: f64, levels: &[f64], distance: LevelDistance) -> f64 {
    if let Some(&exact) = levels.iter().find(|&&l| l == v) {
        return exact;
    }
    let dist = |l: f64| match distance {
        LevelDistance::Linear => (v - l).abs(),
        LevelDistance::Log => {
            if l > 0.0 && v > 0.0 {
                (v.ln() - l.ln()).abs()
            } else {
                f64::INFINITY
            }
        }
    };
    // Walk from the smallest value upward so a tie keeps the smaller level.
    let mut best = *levels.last().expect("nonempty ladder");
    let mut best_d = f64::INFINITY;
    for &l in levels.iter().rev() {
        if distance == LevelDistance::Log && l == 0.0 {
            continue;
        }
        let d = dist(l);
        if d < best_d {
            best = l;
            best_d = d;
        }
    }
    if best_d.is_infinite() {
        // v == 0 under log distance with no zero level: nearest is the smallest positive level.
        return levels
            .iter()
            .rev()
            .copied()
            .find(|&l| l > 0.0)
            .unwrap_or(best);
    }
    best
}

/// Replaces every entry with the closest level value.
///
/// Accepts a raw estimate, or an already fixed-converted matrix (which is
/// returned unchanged when the ladder is the same).
pub fn convert_fixed(
    raw: &CondProbMatrix,
    levels: &LevelTable,
    distance: LevelDistance,
) -> Result<CondProbMatrix> {
    if raw.provenance == Provenance::QuantileConverted {
        return Err(Error::Precondition(
            "fixed conversion needs a raw or fixed-converted matrix".into(),
        ));
    }
    Ok(raw.map_values(Provenance::FixedConverted, |v| {
        closest_level(v, &levels.values, distance)
    }))
}

/// Assigns levels so that their frequencies across all entries match the
/// ladder's reference proportions.
///
/// Entries are ordered by value descending, then cause, then symptom; level
/// `k` receives the entries between the rounded cumulative targets `k-1` and
/// `k`.
pub fn convert_quantile(raw: &CondProbMatrix, levels: &LevelTable) -> Result<CondProbMatrix> {
    let props = levels.reference_proportions().ok_or_else(|| {
        Error::LevelTable("quantile conversion requires reference proportions".into())
    })?;
    if raw.provenance != Provenance::RawEstimate {
        return Err(Error::Precondition(
            "quantile conversion needs a raw estimate".into(),
        ));
    }
    let n = raw.values.len();
    let mut order: Vec<usize> = (0..n).collect();
    // Row-major position order equals (cause, symptom) order.
    order.sort_by(|&a, &b| raw.values[b].total_cmp(&raw.values[a]).then(a.cmp(&b)));

    let cutoffs = level_cutoffs(n, props);
    let mut values = vec![0.0; n];
    let mut start = 0;
    for (level, &end) in cutoffs.iter().enumerate() {
        for &pos in &order[start..end] {
            values[pos] = levels.values[level];
        }
        start = end;
    }
    Ok(CondProbMatrix {
        n_causes: raw.n_causes,
        n_symptoms: raw.n_symptoms,
        values,
        provenance: Provenance::QuantileConverted,
    })
}

/// Rounded cumulative entry counts per level; the last equals `n`.
pub fn level_cutoffs(n: usize, proportions: &[f64]) -> Vec<usize> {
    let mut cum = 0.0;
    let mut out = Vec::with_capacity(proportions.len());
    let mut prev = 0;
    for (k, p) in proportions.iter().enumerate() {
        cum += p;
        let end = if k + 1 == proportions.len() {
            n
        } else {
            ((cum * n as f64).round() as usize).clamp(prev, n)
        };
        out.push(end);
        prev = end;
    }
    out
}
