use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use vabench::classifiers::{Algorithm, GibbsConfig};
use vabench::data::{parse_cause_list, parse_dataset, Dataset};
use vabench::experiment::{catalog_digest, run_grid, ClassifierSettings, GridConfig};
use vabench::metrics::write_rows;
use vabench::sci::{LevelDistance, LevelTable};

use crate::manifest::{ensure_dir, with_jobs, RunManifest};
use crate::{GlobalArgs, Stage, StageResult};

#[derive(Args, Debug)]
pub struct GridArgs {
    /// Site CSV files, or directories whose `*.csv` files are read.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Cause list, one name per line. Defaults to `causes.txt` beside the
    /// inputs when present, else the sorted causes seen in the data.
    #[arg(long)]
    pub causes: Option<PathBuf>,
    /// 1: score each site as is; 2: Dirichlet-resampled test sets.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub design: u8,
    /// Resampling replications for design 2.
    #[arg(long, default_value_t = 50)]
    pub replications: usize,
    #[arg(long, default_value_t = 1.0)]
    pub dirichlet_concentration: f64,
    /// Comma-separated algorithm tokens.
    #[arg(long, default_value = "tariff,interva-q,interva-f,insilico-q,insilico-f")]
    pub algorithms: String,
    /// Skip cells where training and test site coincide.
    #[arg(long)]
    pub no_same_site: bool,
    /// Level ladder CSV (`label,value[,proportion]`).
    #[arg(long)]
    pub levels: Option<PathBuf>,
    /// Distance used by the fixed level conversion.
    #[arg(long, default_value = "linear")]
    pub distance: LevelDistance,
    #[arg(long, default_value_t = GibbsConfig::default().iterations)]
    pub gibbs_iterations: usize,
    #[arg(long, default_value_t = GibbsConfig::default().burn_in)]
    pub gibbs_burn_in: usize,
    #[arg(long, default_value_t = GibbsConfig::default().dirichlet_prior)]
    pub gibbs_prior: f64,
    /// Results file name inside the output directory.
    #[arg(long)]
    pub name: Option<String>,
}

fn csv_files(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)
                .with_context(|| format!("listing {}", input.display()))?
                .map(|e| e.map(|e| e.path()))
                .collect::<Result<_, _>>()?;
            found.retain(|p| p.extension().is_some_and(|x| x == "csv"));
            found.sort();
            if found.is_empty() {
                bail!("no .csv files in {}", input.display());
            }
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    Ok(files)
}

fn default_cause_list(inputs: &[PathBuf]) -> Option<PathBuf> {
    inputs.iter().find_map(|p| {
        let dir = if p.is_dir() { p.as_path() } else { p.parent()? };
        let candidate = dir.join("causes.txt");
        candidate.is_file().then_some(candidate)
    })
}

fn read_cause_list(path: &Path) -> anyhow::Result<Vec<String>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(parse_cause_list(file)?)
}

pub fn load_sites(
    inputs: &[PathBuf],
    causes: Option<&Path>,
    manifest: &mut RunManifest,
) -> anyhow::Result<Dataset> {
    let files = csv_files(inputs)?;
    let cause_path = causes.map(Path::to_path_buf).or_else(|| default_cause_list(inputs));
    let cause_list = match &cause_path {
        Some(p) => {
            manifest.input(p)?;
            Some(read_cause_list(p)?)
        }
        None => None,
    };
    let mut parts = Vec::with_capacity(files.len());
    for path in &files {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let data = parse_dataset(file, cause_list.as_deref())
            .with_context(|| format!("parsing {}", path.display()))?;
        manifest.input(path)?;
        parts.push(data);
    }
    if let Some(first) = parts.first() {
        for (part, path) in parts.iter().zip(&files).skip(1) {
            if !first.same_catalogs(part) {
                bail!(
                    "{} has a different symptom or cause catalog than {} (pass --causes to share a cause list)",
                    path.display(),
                    files[0].display()
                );
            }
        }
    }
    Ok(Dataset::concat(&parts)?)
}

pub fn run(global: &GlobalArgs, args: &GridArgs) -> StageResult<()> {
    let mut manifest = RunManifest::new("grid", None);
    manifest.begin("config");
    let algorithms = Algorithm::parse_list(&args.algorithms).stage("config")?;
    let levels = match &args.levels {
        Some(p) => {
            manifest.input(p).stage("config")?;
            File::open(p)
                .with_context(|| format!("opening {}", p.display()))
                .and_then(|f| LevelTable::read(f).map_err(Into::into))
                .stage("config")?
        }
        None => LevelTable::interva_default(),
    };
    let config = GridConfig {
        algorithms,
        replications: if args.design == 1 { 0 } else { args.replications },
        dirichlet_concentration: args.dirichlet_concentration,
        seed: global.seed.unwrap_or(0),
        include_same_site: !args.no_same_site,
        classifiers: ClassifierSettings {
            levels,
            fixed_distance: args.distance,
            interva_prior: None,
            gibbs: GibbsConfig {
                iterations: args.gibbs_iterations,
                burn_in: args.gibbs_burn_in,
                dirichlet_prior: args.gibbs_prior,
                seed: 0,
            },
        },
    };
    if args.design == 2 && args.replications == 0 {
        return Err(anyhow::anyhow!("design 2 needs --replications >= 1")).stage("config");
    }
    config.validate().stage("config")?;
    manifest.seed = Some(config.seed);

    manifest.begin("load");
    let data = load_sites(&args.inputs, args.causes.as_deref(), &mut manifest).stage("load")?;
    manifest.config = serde_json::json!({
        "design": args.design,
        "grid": config,
        "sites": data.site_counts(),
        "n_symptoms": data.n_symptoms(),
        "n_causes": data.n_causes(),
        "catalog_sha256": catalog_digest(&data),
    });
    eprintln!(
        "grid: {} deaths, {} sites, {} causes, {} symptoms; {} rows expected",
        data.len(),
        data.sites().len(),
        data.n_causes(),
        data.n_symptoms(),
        config.expected_rows(data.sites().len())
    );

    manifest.begin("run");
    let rows = with_jobs(global.jobs, || run_grid(&data, &config))
        .stage("run")?
        .stage("run")?;

    manifest.begin("write");
    ensure_dir(&global.out).stage("write")?;
    let name = args
        .name
        .clone()
        .unwrap_or_else(|| format!("grid_design{}.csv", args.design));
    let path = global.out.join(&name);
    let file = File::create(&path)
        .with_context(|| format!("creating {}", path.display()))
        .stage("write")?;
    write_rows(&rows, BufWriter::new(file)).stage("write")?;
    manifest.output(&path).stage("write")?;
    let manifest_path = path.with_extension("manifest.json");
    manifest.write(&manifest_path).stage("manifest")?;
    eprintln!("grid: {} rows written to {}", rows.len(), path.display());
    Ok(())
}
