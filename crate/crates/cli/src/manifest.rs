use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use vabench::seed::sha256_hex;

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Record of one command invocation: enough to replay it and to check that
/// the artifacts on disk are the ones it wrote.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub toolkit: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub timings: Vec<StageTiming>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip)]
    clock: Option<(String, Instant)>,
}

pub fn digest_file(path: &Path) -> anyhow::Result<FileDigest> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

impl RunManifest {
    pub fn new(command: &'static str, seed: Option<u64>) -> Self {
        RunManifest {
            toolkit: "vabench",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config: serde_json::Value::Null,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: Vec::new(),
            notes: Vec::new(),
            clock: None,
        }
    }

    /// Starts timing `stage`, closing the previous one.
    pub fn begin(&mut self, stage: &str) {
        self.finish_stage();
        self.clock = Some((stage.to_string(), Instant::now()));
    }

    fn finish_stage(&mut self) {
        if let Some((stage, t0)) = self.clock.take() {
            self.timings.push(StageTiming {
                stage,
                seconds: t0.elapsed().as_secs_f64(),
            });
        }
    }

    pub fn input(&mut self, path: &Path) -> anyhow::Result<()> {
        self.inputs.push(digest_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> anyhow::Result<()> {
        self.outputs.push(digest_file(path)?);
        Ok(())
    }

    pub fn write(mut self, path: &Path) -> anyhow::Result<PathBuf> {
        self.finish_stage();
        let text = serde_json::to_string_pretty(&self)?;
        fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path.to_path_buf())
    }
}

pub fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Runs `f` on a pool of `jobs` threads, or on rayon's global pool.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => anyhow::bail!("--jobs must be at least 1"),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
            Ok(pool.install(f))
        }
    }
}
