//! `manifest.json`: what was run, with which configuration and seed, and what it wrote.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::failure::Failure;
use crate::Command;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub config: Option<RunConfig>,
    pub seed: Option<u64>,
    /// Generator settings when the data was synthetic.
    pub synthetic: Option<lcmicp::synthetic::GaussianSpec>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    pub timings: Timings,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
}

/// Collects artifacts written into one output directory.
pub struct OutputDir {
    root: PathBuf,
    artifacts: Vec<String>,
    started: Instant,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(root)
            .map_err(|e| Failure::data(format!("cannot create {}: {e}", root.display())))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            artifacts: Vec::new(),
            started: Instant::now(),
        })
    }

    /// Path of a new artifact; `name` must be a plain file name.
    pub fn artifact(&mut self, name: &str) -> PathBuf {
        debug_assert!(!name.contains('/') && name != MANIFEST_FILE);
        self.artifacts.push(name.to_string());
        self.root.join(name)
    }

    pub fn finish(
        self,
        command: &Command,
        config: Option<&RunConfig>,
        synthetic: Option<lcmicp::synthetic::GaussianSpec>,
    ) -> Result<(), Failure> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.clone(),
            seed: config.map(|c| c.seed),
            config: config.cloned(),
            synthetic,
            artifacts: self.artifacts,
            timings: Timings {
                total_seconds: self.started.elapsed().as_secs_f64(),
            },
        };
        let file = std::fs::File::create(self.root.join(MANIFEST_FILE))?;
        serde_json::to_writer_pretty(file, &manifest)?;
        Ok(())
    }
}

pub fn load(path: &Path) -> Result<RunManifest, Failure> {
    let file = std::fs::File::open(path)
        .map_err(|e| Failure::usage(format!("cannot open manifest {}: {e}", path.display())))?;
    serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| Failure::usage(format!("invalid manifest {}: {e}", path.display())))
}
