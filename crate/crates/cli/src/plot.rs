use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use vabench::metrics::{read_rows, Metric, MetricsRow};
use vabench::stats::Factor;

use crate::decompose::DecomposeOutput;
use crate::manifest::{ensure_dir, RunManifest};
use crate::{GlobalArgs, Stage, StageResult};

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// Results CSVs from `grid` and/or JSON reports from `decompose`.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];
const MANIFEST_NAME: &str = "plot.manifest.json";

struct Svg {
    body: String,
    width: f64,
    height: f64,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

impl Svg {
    fn new(width: f64, height: f64) -> Self {
        Svg {
            body: String::new(),
            width,
            height,
        }
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#
        );
    }

    fn frame(&mut self, x: f64, y: f64, w: f64, h: f64) {
        let _ = writeln!(
            self.body,
            r##"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="none" stroke="#999999"/>"##
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}"/>"#
        );
    }

    fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}" fill="{fill}" fill-opacity="0.8"/>"#
        );
    }

    fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="{size}" text-anchor="{anchor}">{}</text>"#,
            esc(s)
        );
    }

    fn legend(&mut self, x: f64, y: f64, entries: &[(String, &str)]) {
        let mut cx = x;
        for (label, color) in entries {
            self.rect(cx, y - 9.0, 10.0, 10.0, color);
            self.text(cx + 14.0, y, 11.0, "start", label);
            cx += 24.0 + 7.0 * label.len() as f64;
        }
    }

    fn finish(self, title: &str) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
             <!-- manifest: {MANIFEST_NAME} -->\n\
             <svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n\
             <title>{t}</title>\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n",
            w = self.width,
            h = self.height,
            t = esc(title),
            body = self.body
        )
    }
}

/// Lattice of test site (rows) × metric (columns); each panel holds one bar
/// group per training site with one bar per algorithm.
pub fn grid_svg(rows: &[MetricsRow]) -> anyhow::Result<String> {
    let replicate = if rows.iter().any(|r| r.replicate == 0) {
        0
    } else {
        vabench::metrics::MEAN_REPLICATE
    };
    let rows: Vec<&MetricsRow> = rows.iter().filter(|r| r.replicate == replicate).collect();
    if rows.is_empty() {
        bail!("results contain neither unresampled nor mean rows");
    }
    let train: Vec<&str> = rows
        .iter()
        .map(|r| r.train_site.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let test: Vec<&str> = rows
        .iter()
        .map(|r| r.test_site.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut algorithms = Vec::new();
    for r in &rows {
        if !algorithms.contains(&r.algorithm) {
            algorithms.push(r.algorithm);
        }
    }

    let (pw, ph) = (300.0, 150.0);
    let (left, top, gap) = (90.0, 70.0, 16.0);
    let width = left + Metric::ALL.len() as f64 * (pw + gap) + 20.0;
    let height = top + test.len() as f64 * (ph + gap + 18.0) + 20.0;
    let mut svg = Svg::new(width, height);
    let legend: Vec<(String, &str)> = algorithms
        .iter()
        .enumerate()
        .map(|(k, a)| (a.token().to_string(), PALETTE[k % PALETTE.len()]))
        .collect();
    svg.legend(left, 22.0, &legend);
    svg.text(left + 4.0 * (pw + gap) - gap, 22.0, 11.0, "end", "bars grouped by training site");

    for (mi, metric) in Metric::ALL.iter().enumerate() {
        let values = rows.iter().map(|r| metric.value(r));
        let lo = values.fold(0.0f64, f64::min);
        let x0 = left + mi as f64 * (pw + gap);
        svg.text(x0 + pw / 2.0, top - 10.0, 13.0, "middle", metric.token());
        let y_of = |v: f64, y0: f64| y0 + ph * (1.0 - (v - lo) / (1.0 - lo));
        for (ti, t) in test.iter().enumerate() {
            let y0 = top + ti as f64 * (ph + gap + 18.0);
            if mi == 0 {
                svg.text(left - 8.0, y0 + ph / 2.0, 12.0, "end", t);
            }
            svg.frame(x0, y0, pw, ph);
            svg.line(x0, y_of(0.0, y0), x0 + pw, y_of(0.0, y0), "#333333");
            let group_w = pw / train.len() as f64;
            let bar_w = group_w * 0.8 / algorithms.len() as f64;
            for (gi, tr) in train.iter().enumerate() {
                let gx = x0 + gi as f64 * group_w + group_w * 0.1;
                svg.text(gx + group_w * 0.4, y0 + ph + 13.0, 10.0, "middle", tr);
                for (ai, alg) in algorithms.iter().enumerate() {
                    let Some(row) = rows.iter().find(|r| {
                        r.train_site == *tr && r.test_site == *t && r.algorithm == *alg
                    }) else {
                        continue;
                    };
                    let v = metric.value(row);
                    let (ya, yb) = (y_of(v, y0), y_of(0.0, y0));
                    svg.rect(
                        gx + ai as f64 * bar_w,
                        ya.min(yb),
                        bar_w,
                        (ya - yb).abs(),
                        PALETTE[ai % PALETTE.len()],
                    );
                }
            }
        }
    }
    Ok(svg.finish("Metrics by test site (rows), metric (columns) and training site"))
}

fn term_label(f: Factor) -> &'static str {
    match f {
        Factor::TrainSite => "training site",
        Factor::TestSite => "test site",
        Factor::Algorithm => "algorithm",
        Factor::SameSiteIndicator => "same site",
    }
}

fn term_color(f: Option<Factor>) -> &'static str {
    match f {
        Some(Factor::TrainSite) => PALETTE[0],
        Some(Factor::TestSite) => PALETTE[1],
        Some(Factor::Algorithm) => PALETTE[2],
        Some(Factor::SameSiteIndicator) => PALETTE[3],
        None => "#cccccc",
    }
}

/// One panel per pooled experiment; one stacked bar per metric showing the
/// share of total variation per term and the residual.
pub fn variance_svg(report: &DecomposeOutput) -> anyhow::Result<String> {
    let pooled: Vec<_> = report.experiments.iter().filter(|e| !e.per_test_site).collect();
    if pooled.is_empty() {
        bail!("no pooled experiment reports to plot");
    }
    let (pw, ph, gap, left, top) = (240.0, 220.0, 24.0, 50.0, 60.0);
    let width = left + pooled.len() as f64 * (pw + gap) + 10.0;
    let mut svg = Svg::new(width, top + ph + 50.0);
    let mut legend: Vec<(String, &str)> = Factor::ORDER
        .iter()
        .map(|&f| (term_label(f).to_string(), term_color(Some(f))))
        .collect();
    legend.push(("residual".into(), term_color(None)));
    svg.legend(left, 20.0, &legend);
    for (pi, exp) in pooled.iter().enumerate() {
        let x0 = left + pi as f64 * (pw + gap);
        svg.text(x0 + pw / 2.0, top - 8.0, 13.0, "middle", &format!("experiment {}", exp.experiment));
        svg.frame(x0, top, pw, ph);
        if pi == 0 {
            for k in 0..=4 {
                let v = k as f64 / 4.0;
                svg.text(x0 - 6.0, top + ph * (1.0 - v) + 4.0, 10.0, "end", &format!("{v:.2}"));
            }
        }
        let bar_w = pw / Metric::ALL.len() as f64;
        for (mi, metric) in Metric::ALL.iter().enumerate() {
            let Some(entry) = exp.anova.iter().find(|e| e.report.metric == *metric) else {
                continue;
            };
            let bx = x0 + mi as f64 * bar_w + bar_w * 0.15;
            let mut acc = 0.0;
            let parts = entry
                .report
                .factors
                .iter()
                .map(|f| (Some(f.factor), f.proportion))
                .chain(std::iter::once((None, entry.report.residual_proportion)));
            for (term, p) in parts {
                let y = top + ph * (1.0 - acc - p);
                svg.rect(bx, y, bar_w * 0.7, ph * p, term_color(term));
                acc += p;
            }
            svg.text(bx + bar_w * 0.35, top + ph + 14.0, 10.0, "middle", metric.token());
        }
    }
    Ok(svg.finish("Proportion of variation by term"))
}

/// ANOVA vs Friedman p-values for the training-site effect, one point per
/// (experiment, test site, metric).
pub fn pvalue_svg(report: &DecomposeOutput) -> anyhow::Result<String> {
    let mut points = Vec::new();
    for exp in report.experiments.iter().filter(|e| e.per_test_site) {
        for entry in &exp.anova {
            let Some(site) = &entry.test_site else { continue };
            let metric = entry.report.metric;
            let anova_p = entry.report.factor(Factor::TrainSite).and_then(|f| f.p_value);
            let fr = exp.friedman.iter().find(|f| &f.test_site == site && f.metric == metric);
            if let (Some(a), Some(f)) = (anova_p, fr) {
                points.push((metric, a, f.result.p_value));
            }
        }
    }
    if points.is_empty() {
        bail!("no per-test-site reports with Friedman results to plot");
    }
    let (left, top, size) = (60.0, 40.0, 360.0);
    let mut svg = Svg::new(left + size + 30.0, top + size + 50.0);
    let legend: Vec<(String, &str)> = Metric::ALL
        .iter()
        .enumerate()
        .map(|(k, m)| (m.token().to_string(), PALETTE[k]))
        .collect();
    svg.legend(left, 20.0, &legend);
    svg.frame(left, top, size, size);
    svg.line(left, top + size, left + size, top, "#bbbbbb");
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        svg.text(left + size * v, top + size + 14.0, 10.0, "middle", &format!("{v:.2}"));
        svg.text(left - 6.0, top + size * (1.0 - v) + 4.0, 10.0, "end", &format!("{v:.2}"));
    }
    svg.text(left + size / 2.0, top + size + 34.0, 12.0, "middle", "ANOVA p-value (training site)");
    svg.text(14.0, top + size / 2.0, 12.0, "middle", "Friedman");
    for (metric, a, f) in points {
        let k = Metric::ALL.iter().position(|m| *m == metric).unwrap_or(0);
        svg.circle(left + size * a, top + size * (1.0 - f), 4.0, PALETTE[k]);
    }
    Ok(svg.finish("Training-site p-values: ANOVA vs Friedman"))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into())
}

fn write_svg(out: &Path, name: &str, text: &str, manifest: &mut RunManifest) -> anyhow::Result<()> {
    let path = out.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    manifest.output(&path)?;
    eprintln!("plot: wrote {}", path.display());
    Ok(())
}

pub fn run(global: &GlobalArgs, args: &PlotArgs) -> StageResult<()> {
    let mut manifest = RunManifest::new("plot", None);
    manifest.begin("render");
    ensure_dir(&global.out).stage("write")?;
    for input in &args.inputs {
        manifest.input(input).stage("load")?;
        let ext = input.extension().and_then(|e| e.to_str()).unwrap_or("");
        match ext {
            "csv" => {
                let file = File::open(input)
                    .with_context(|| format!("opening {}", input.display()))
                    .stage("load")?;
                let rows = read_rows(file)
                    .with_context(|| format!("{} is not a grid results file", input.display()))
                    .stage("load")?;
                let svg = grid_svg(&rows).stage("render")?;
                write_svg(&global.out, &format!("grid_{}.svg", stem(input)), &svg, &mut manifest)
                    .stage("write")?;
            }
            "json" => {
                let report: DecomposeOutput = fs::read_to_string(input)
                    .with_context(|| format!("reading {}", input.display()))
                    .and_then(|t| {
                        serde_json::from_str(&t).with_context(|| {
                            format!("{} is not a decompose report", input.display())
                        })
                    })
                    .stage("load")?;
                let mut wrote = false;
                if report.experiments.iter().any(|e| !e.per_test_site) {
                    let svg = variance_svg(&report).stage("render")?;
                    write_svg(&global.out, &format!("variance_{}.svg", stem(input)), &svg, &mut manifest)
                        .stage("write")?;
                    wrote = true;
                }
                if report.experiments.iter().any(|e| e.per_test_site && !e.friedman.is_empty()) {
                    let svg = pvalue_svg(&report).stage("render")?;
                    write_svg(&global.out, &format!("pvalues_{}.svg", stem(input)), &svg, &mut manifest)
                        .stage("write")?;
                    wrote = true;
                }
                if !wrote {
                    return Err(anyhow::anyhow!(
                        "{}: per-test-site report without Friedman results has nothing to plot",
                        input.display()
                    ))
                    .stage("render");
                }
            }
            _ => {
                return Err(anyhow::anyhow!(
                    "{}: unknown input schema (expected a results .csv or a decompose .json)",
                    input.display()
                ))
                .stage("load")
            }
        }
    }
    manifest.write(&global.out.join(MANIFEST_NAME)).stage("manifest")?;
    Ok(())
}
