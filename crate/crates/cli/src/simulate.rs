use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use vabench::data::write_cause_list;
use vabench::synth::{generate, SynthConfig};

use crate::manifest::{ensure_dir, RunManifest};
use crate::{GlobalArgs, Stage, StageResult};

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// SynthConfig JSON file.
    #[arg(long)]
    pub config: PathBuf,
}

pub fn run(global: &GlobalArgs, args: &SimulateArgs) -> StageResult<()> {
    let mut manifest = RunManifest::new("simulate", None);
    manifest.begin("config");
    let mut config: SynthConfig = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))
        .and_then(|text| serde_json::from_str(&text).context("parsing synth config"))
        .stage("config")?;
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    config.validate().stage("config")?;
    manifest.input(&args.config).stage("config")?;
    manifest.seed = Some(config.seed);
    manifest.config = serde_json::to_value(&config).stage("config")?;

    manifest.begin("generate");
    let (data, truth) = generate(&config).stage("generate")?;

    manifest.begin("write");
    let out = &global.out;
    ensure_dir(out).stage("write")?;
    for site in data.sites() {
        let path = out.join(format!("{site}.csv"));
        let subset = data.site_subset(site).stage("write")?;
        let file = File::create(&path)
            .with_context(|| format!("creating {}", path.display()))
            .stage("write")?;
        subset.write_csv(BufWriter::new(file)).stage("write")?;
        manifest.output(&path).stage("write")?;
    }
    let causes = out.join("causes.txt");
    let file = File::create(&causes)
        .with_context(|| format!("creating {}", causes.display()))
        .stage("write")?;
    write_cause_list(data.cause_names(), BufWriter::new(file)).stage("write")?;
    manifest.output(&causes).stage("write")?;

    let truth_path = out.join("truth.json");
    let truth_json = serde_json::json!({
        "manifest": "manifest.json",
        "truth": truth,
    });
    fs::write(&truth_path, serde_json::to_string_pretty(&truth_json).stage("write")? + "\n")
        .with_context(|| format!("writing {}", truth_path.display()))
        .stage("write")?;
    manifest.output(&truth_path).stage("write")?;
    manifest.write(&out.join("manifest.json")).stage("manifest")?;
    eprintln!(
        "simulate: {} deaths over {} sites written to {}",
        data.len(),
        data.sites().len(),
        out.display()
    );
    Ok(())
}
