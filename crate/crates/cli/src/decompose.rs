use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use serde::{Deserialize, Serialize};
use vabench::metrics::{read_rows, Metric, MetricsRow};
use vabench::stats::{anova_sequential, friedman_test, AnovaReport, Experiment, Factor, FriedmanResult};

use crate::manifest::{ensure_dir, RunManifest};
use crate::{GlobalArgs, Stage, StageResult};

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    /// Grid results CSVs; design-1 and design-2 files may be combined.
    #[arg(required = true)]
    pub results: Vec<PathBuf>,
    /// Experiment 1-4, or `all` for every experiment the rows support.
    #[arg(long, default_value = "all")]
    pub experiment: String,
    /// Fit the training-site + algorithm model separately for each test site.
    #[arg(long)]
    pub per_test_site: bool,
    /// Also run Friedman tests per test site (training sites as treatments,
    /// algorithms as blocks).
    #[arg(long)]
    pub friedman: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnovaEntry {
    pub test_site: Option<String>,
    pub report: AnovaReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FriedmanEntry {
    pub test_site: String,
    pub metric: Metric,
    pub result: FriedmanResult,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: u8,
    pub per_test_site: bool,
    pub n_rows: usize,
    pub factors: Vec<Factor>,
    pub anova: Vec<AnovaEntry>,
    #[serde(default)]
    pub friedman: Vec<FriedmanEntry>,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// The JSON document `decompose` writes and `plot` reads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecomposeOutput {
    pub manifest: String,
    pub experiments: Vec<ExperimentReport>,
}

fn parse_experiments(s: &str) -> anyhow::Result<Vec<Experiment>> {
    if s == "all" {
        return Ok(Experiment::ALL.to_vec());
    }
    let n: u8 = s.parse().with_context(|| format!("bad --experiment {s:?}"))?;
    Ok(vec![Experiment::from_number(n)?])
}

fn decompose_one(
    rows: &[MetricsRow],
    exp: Experiment,
    per_test_site: bool,
    friedman: bool,
) -> anyhow::Result<ExperimentReport> {
    let selected = exp.select(rows, None);
    if selected.is_empty() {
        let hint = if exp.replicate() == 0 { 1 } else { 2 };
        bail!("experiment {exp} has no rows (run grid with --design {hint})");
    }
    let mut notes = Vec::new();
    let has_same_site = selected.iter().any(|r| r.is_same_site());
    let mut spec = if per_test_site {
        exp.per_site_spec()
    } else {
        exp.factor_spec()
    };
    if exp.includes_same_site() && !has_same_site {
        notes.push("no same-site rows present; same-site term dropped".to_string());
        if spec.factors().contains(&Factor::SameSiteIndicator) {
            spec = spec.truncated(spec.factors().len() - 1);
        }
    }
    if !exp.includes_same_site() && !rows.iter().any(MetricsRow::is_same_site) {
        notes.push("same-site rows already absent from the input".to_string());
    }

    let test_sites: BTreeSet<&str> = selected.iter().map(|r| r.test_site.as_str()).collect();
    let scopes: Vec<Option<&str>> = if per_test_site {
        test_sites.iter().map(|s| Some(*s)).collect()
    } else {
        vec![None]
    };
    let mut anova = Vec::new();
    for scope in &scopes {
        let subset = exp.select(rows, *scope);
        for metric in Metric::ALL {
            let report = anova_sequential(&subset, metric, &spec).with_context(|| {
                format!(
                    "experiment {exp}, metric {}{}",
                    metric.token(),
                    scope.map(|s| format!(", test site {s}")).unwrap_or_default()
                )
            })?;
            anova.push(AnovaEntry {
                test_site: scope.map(str::to_string),
                report,
            });
        }
    }

    let mut friedman_entries = Vec::new();
    if friedman {
        for site in &test_sites {
            let subset = exp.select(rows, Some(site));
            for metric in Metric::ALL {
                let result = friedman_test(&subset, metric, Factor::TrainSite, Factor::Algorithm)
                    .with_context(|| format!("Friedman test, experiment {exp}, test site {site}"))?;
                friedman_entries.push(FriedmanEntry {
                    test_site: site.to_string(),
                    metric,
                    result,
                });
            }
        }
    }

    Ok(ExperimentReport {
        experiment: exp.number(),
        per_test_site,
        n_rows: selected.len(),
        factors: spec.factors().to_vec(),
        anova,
        friedman: friedman_entries,
        notes,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_flat_csv(path: &PathBuf, reports: &[ExperimentReport]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record([
        "experiment", "test_site", "metric", "term", "df", "sum_sq", "proportion", "f_statistic",
        "p_value",
    ])?;
    for exp in reports {
        for entry in &exp.anova {
            let e = exp.experiment.to_string();
            let site = entry.test_site.clone().unwrap_or_default();
            let r = &entry.report;
            let metric = r.metric.token();
            for f in &r.factors {
                w.write_record([
                    e.as_str(),
                    &site,
                    metric,
                    f.factor.token(),
                    &f.df.to_string(),
                    &f.sum_sq.to_string(),
                    &f.proportion.to_string(),
                    &opt(f.f_statistic),
                    &opt(f.p_value),
                ])?;
            }
            w.write_record([
                e.as_str(),
                &site,
                metric,
                "residual",
                &r.residual_df.to_string(),
                &r.residual_ss.to_string(),
                &r.residual_proportion.to_string(),
                "",
                "",
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Training-site p-values: one row per experiment and one column per metric
/// for pooled fits; one row per (experiment, test site, metric) with the
/// ANOVA and Friedman p-values side by side for per-site fits.
fn write_pvalues(path: &PathBuf, reports: &[ExperimentReport], per_test_site: bool) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let train_p = |r: &AnovaReport| opt(r.factor(Factor::TrainSite).and_then(|f| f.p_value));
    if !per_test_site {
        let mut header = vec!["experiment".to_string()];
        header.extend(Metric::ALL.iter().map(|m| m.token().to_string()));
        w.write_record(&header)?;
        for exp in reports {
            let mut rec = vec![exp.experiment.to_string()];
            for metric in Metric::ALL {
                let p = exp
                    .anova
                    .iter()
                    .find(|e| e.report.metric == metric)
                    .map(|e| train_p(&e.report))
                    .unwrap_or_default();
                rec.push(p);
            }
            w.write_record(&rec)?;
        }
    } else {
        w.write_record(["experiment", "test_site", "metric", "anova_p", "friedman_p"])?;
        for exp in reports {
            for entry in &exp.anova {
                let site = entry.test_site.clone().unwrap_or_default();
                let metric = entry.report.metric;
                let friedman = exp
                    .friedman
                    .iter()
                    .find(|f| f.test_site == site && f.metric == metric)
                    .map(|f| f.result.p_value.to_string())
                    .unwrap_or_default();
                w.write_record([
                    exp.experiment.to_string(),
                    site,
                    metric.token().to_string(),
                    train_p(&entry.report),
                    friedman,
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn run(global: &GlobalArgs, args: &DecomposeArgs) -> StageResult<()> {
    let mut manifest = RunManifest::new("decompose", None);
    manifest.begin("load");
    let experiments = parse_experiments(&args.experiment).stage("config")?;
    let mut rows = Vec::new();
    for path in &args.results {
        let file = File::open(path)
            .with_context(|| format!("opening {}", path.display()))
            .stage("load")?;
        let part = read_rows(file)
            .with_context(|| format!("reading results {}", path.display()))
            .stage("load")?;
        manifest.input(path).stage("load")?;
        rows.extend(part);
    }

    manifest.begin("decompose");
    let mut reports = Vec::new();
    for &exp in &experiments {
        match decompose_one(&rows, exp, args.per_test_site, args.friedman) {
            Ok(r) => {
                for note in &r.notes {
                    eprintln!("decompose: experiment {exp}: {note}");
                }
                reports.push(r);
            }
            // With `all`, experiments whose rows were never produced are skipped.
            Err(e) if experiments.len() > 1 && exp.select(&rows, None).is_empty() => {
                eprintln!("decompose: skipping experiment {exp}: {e:#}");
                manifest.notes.push(format!("experiment {exp} skipped: {e:#}"));
            }
            Err(e) => return Err(e).stage("decompose"),
        }
    }
    if reports.is_empty() {
        return Err(anyhow::anyhow!("no experiment could be decomposed")).stage("decompose");
    }
    manifest.config = serde_json::json!({
        "experiments": reports.iter().map(|r| r.experiment).collect::<Vec<_>>(),
        "per_test_site": args.per_test_site,
        "friedman": args.friedman,
        "friedman_treatment": Factor::TrainSite,
        "friedman_block": Factor::Algorithm,
    });

    manifest.begin("write");
    ensure_dir(&global.out).stage("write")?;
    let stem = if args.per_test_site {
        "decompose_per_site"
    } else {
        "decompose"
    };
    let manifest_name = format!("{stem}.manifest.json");
    let output = DecomposeOutput {
        manifest: manifest_name.clone(),
        experiments: reports,
    };
    let json_path = global.out.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(&output).stage("write")? + "\n";
    fs::write(&json_path, text)
        .with_context(|| format!("writing {}", json_path.display()))
        .stage("write")?;
    manifest.output(&json_path).stage("write")?;

    let csv_path = global.out.join(format!("{stem}.csv"));
    write_flat_csv(&csv_path, &output.experiments).stage("write")?;
    manifest.output(&csv_path).stage("write")?;

    let p_name = if args.per_test_site {
        "pvalues_per_site.csv"
    } else {
        "pvalues.csv"
    };
    let p_path = global.out.join(p_name);
    write_pvalues(&p_path, &output.experiments, args.per_test_site).stage("write")?;
    manifest.output(&p_path).stage("write")?;
    manifest.write(&global.out.join(manifest_name)).stage("manifest")?;
    eprintln!(
        "decompose: {} experiment report(s) written to {}",
        output.experiments.len(),
        global.out.display()
    );
    Ok(())
}
