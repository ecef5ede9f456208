//! Death-record data model and the canonical CSV format.
//!
//! A dataset file starts with the header `id,site,cause,<symptom>...`.
//! Symptom cells hold `Y`, `N` or `.` (missing); the cause cell holds a cause
//! name or is left empty for unlabeled deaths. Cause indices are 0-based
//! positions in the dataset's cause catalog.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use crate::error::{Error, Result};

/// One symptom response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymptomValue {
    Yes,
    No,
    Missing,
}

impl SymptomValue {
    pub fn token(self) -> &'static str {
        match self {
            SymptomValue::Yes => "Y",
            SymptomValue::No => "N",
            SymptomValue::Missing => ".",
        }
    }

    pub fn is_yes(self) -> bool {
        self == SymptomValue::Yes
    }
}

impl FromStr for SymptomValue {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "Y" => Ok(SymptomValue::Yes),
            "N" => Ok(SymptomValue::No),
            "." => Ok(SymptomValue::Missing),
            _ => Err(()),
        }
    }
}

impl fmt::Display for SymptomValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeathRecord {
    pub id: String,
    pub site: String,
    /// Index into the dataset's cause catalog, `None` for unlabeled deaths.
    pub cause: Option<usize>,
    pub symptoms: Vec<SymptomValue>,
}

/// A validated collection of death records sharing one symptom and cause catalog.
///
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    symptom_names: Vec<String>,
    cause_names: Vec<String>,
    records: Vec<DeathRecord>,
    site_index: BTreeMap<String, Vec<usize>>,
}

fn check_unique(kind: &'static str, names: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(names.len());
    for name in names {
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateName {
                kind,
                name: name.clone(),
            });
        }
    }
    Ok(())
}

impl Dataset {
    pub fn new(
        symptom_names: Vec<String>,
        cause_names: Vec<String>,
        records: Vec<DeathRecord>,
    ) -> Result<Self> {
        check_unique("symptom", &symptom_names)?;
        check_unique("cause", &cause_names)?;

        let mut ids = HashSet::with_capacity(records.len());
        let mut site_index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (pos, rec) in records.iter().enumerate() {
            if !ids.insert(rec.id.as_str()) {
                return Err(Error::DuplicateId(rec.id.clone()));
            }
            if rec.symptoms.len() != symptom_names.len() {
                return Err(Error::InvalidRecord(format!(
                    "record {:?} has {} symptoms, catalog has {}",
                    rec.id,
                    rec.symptoms.len(),
                    symptom_names.len()
                )));
            }
            if let Some(c) = rec.cause {
                if c >= cause_names.len() {
                    return Err(Error::InvalidRecord(format!(
                        "record {:?} has cause index {} outside catalog of {}",
                        rec.id,
                        c,
                        cause_names.len()
                    )));
                }
            }
            site_index.entry(rec.site.clone()).or_default().push(pos);
        }

        Ok(Dataset {
            symptom_names,
            cause_names,
            records,
            site_index,
        })
    }

    pub fn symptom_names(&self) -> &[String] {
        &self.symptom_names
    }

    pub fn cause_names(&self) -> &[String] {
        &self.cause_names
    }

    pub fn records(&self) -> &[DeathRecord] {
        &self.records
    }

    pub fn site_index(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.site_index
    }

    pub fn n_symptoms(&self) -> usize {
        self.symptom_names.len()
    }

    pub fn n_causes(&self) -> usize {
        self.cause_names.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Site labels in sorted order.
    pub fn sites(&self) -> Vec<&str> {
        self.site_index.keys().map(String::as_str).collect()
    }

    /// Record count per site, in sorted site order.
    pub fn site_counts(&self) -> Vec<(String, usize)> {
        self.site_index
            .iter()
            .map(|(site, rows)| (site.clone(), rows.len()))
            .collect()
    }

    pub fn same_catalogs(&self, other: &Dataset) -> bool {
        self.symptom_names == other.symptom_names && self.cause_names == other.cause_names
    }

    /// True cause of every record, failing on the first unlabeled one.
    pub fn labels(&self) -> Result<Vec<usize>> {
        self.records
            .iter()
            .map(|r| r.cause.ok_or_else(|| Error::Unlabeled(r.id.clone())))
            .collect()
    }

    /// Builds a dataset sharing this one's catalogs from the given records.
    pub fn with_records(&self, records: Vec<DeathRecord>) -> Result<Dataset> {
        Dataset::new(
            self.symptom_names.clone(),
            self.cause_names.clone(),
            records,
        )
    }

    /// All records of one site, catalogs preserved.
    pub fn site_subset(&self, site: &str) -> Result<Dataset> {
        let rows = self
            .site_index
            .get(site)
            .ok_or_else(|| Error::UnknownSite(site.to_string()))?;
        self.with_records(rows.iter().map(|&i| self.records[i].clone()).collect())
    }

    /// Partitions by site into a (train, test) pair. Both may name the same site.
    pub fn split_by_site(&self, train_site: &str, test_site: &str) -> Result<(Dataset, Dataset)> {
        let train = self.site_subset(train_site)?;
        let test = self.site_subset(test_site)?;
        Ok((train, test))
    }

    /// Observed cause fractions over the whole catalog.
    pub fn empirical_csmf(&self) -> Result<Vec<f64>> {
        if self.records.is_empty() {
            return Err(Error::Empty("cannot compute CSMF of an empty dataset".into()));
        }
        let mut counts = vec![0usize; self.n_causes()];
        for c in self.labels()? {
            counts[c] += 1;
        }
        let n = self.records.len() as f64;
        Ok(counts.into_iter().map(|k| k as f64 / n).collect())
    }

    /// Concatenates datasets that share catalogs.
    pub fn concat(parts: &[Dataset]) -> Result<Dataset> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Empty("no datasets to combine".into()))?;
        let mut records = Vec::new();
        for part in parts {
            if !first.same_catalogs(part) {
                return Err(Error::CatalogMismatch(
                    "datasets differ in symptom or cause catalog".into(),
                ));
            }
            records.extend(part.records.iter().cloned());
        }
        first.with_records(records)
    }

    /// Writes the canonical CSV form.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_writer(writer);
        let mut header = vec!["id", "site", "cause"];
        header.extend(self.symptom_names.iter().map(String::as_str));
        w.write_record(&header)?;
        let mut row: Vec<&str> = Vec::with_capacity(header.len());
        for rec in &self.records {
            row.clear();
            row.push(&rec.id);
            row.push(&rec.site);
            row.push(rec.cause.map_or("", |c| self.cause_names[c].as_str()));
            row.extend(rec.symptoms.iter().map(|s| s.token()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Parses a dataset in the canonical CSV format.
///
/// With `cause_list` the catalog (and index order) is fixed and unknown cause
/// names are rejected; otherwise the catalog is the sorted set of non-empty
/// cause cells.
pub fn parse_dataset<R: Read>(source: R, cause_list: Option<&[String]>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(source);
    let mut rows = reader.records();

    let header = match rows.next() {
        Some(h) => h?,
        None => return Err(Error::Empty("dataset file has no header".into())),
    };
    if header.len() < 3 || &header[0] != "id" || &header[1] != "site" || &header[2] != "cause" {
        return Err(Error::Header(
            "expected header to begin with id,site,cause".into(),
        ));
    }
    let symptom_names: Vec<String> = header.iter().skip(3).map(str::to_string).collect();
    check_unique("symptom", &symptom_names)?;
    let width = header.len();

    struct RawRow {
        line: usize,
        id: String,
        site: String,
        cause: String,
        symptoms: Vec<SymptomValue>,
    }

    let mut raw = Vec::new();
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != width {
            return Err(Error::RaggedRow {
                row: line,
                expected: width,
                found: row.len(),
            });
        }
        let mut symptoms = Vec::with_capacity(width - 3);
        for (j, token) in row.iter().enumerate().skip(3) {
            let value = token.parse().map_err(|_| Error::MalformedToken {
                row: line,
                column: j + 1,
                name: symptom_names[j - 3].clone(),
                token: token.to_string(),
            })?;
            symptoms.push(value);
        }
        raw.push(RawRow {
            line,
            id: row[0].to_string(),
            site: row[1].to_string(),
            cause: row[2].to_string(),
            symptoms,
        });
    }

    let cause_names: Vec<String> = match cause_list {
        Some(list) => list.to_vec(),
        None => raw
            .iter()
            .filter(|r| !r.cause.is_empty())
            .map(|r| r.cause.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    check_unique("cause", &cause_names)?;
    let lookup: std::collections::HashMap<&str, usize> = cause_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();

    let mut records = Vec::with_capacity(raw.len());
    for r in raw {
        let cause = if r.cause.is_empty() {
            None
        } else {
            Some(
                *lookup
                    .get(r.cause.as_str())
                    .ok_or_else(|| Error::UnknownCause {
                        row: r.line,
                        cause: r.cause.clone(),
                    })?,
            )
        };
        records.push(DeathRecord {
            id: r.id,
            site: r.site,
            cause,
            symptoms: r.symptoms,
        });
    }

    Dataset::new(symptom_names, cause_names, records)
}

/// Reads a sidecar cause list: one cause name per line, blank lines ignored.
pub fn parse_cause_list<R: Read>(source: R) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for line in BufReader::new(source).lines() {
        let line = line?;
        let name = line.trim();
        if !name.is_empty() {
            names.push(name.to_string());
        }
    }
    if names.is_empty() {
        return Err(Error::Empty("cause list is empty".into()));
    }
    check_unique("cause", &names)?;
    Ok(names)
}

pub fn write_cause_list<W: Write>(names: &[String], mut writer: W) -> Result<()> {
    for name in names {
        writeln!(writer, "{name}")?;
    }
    Ok(())
}
