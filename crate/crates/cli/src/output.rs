//! Output directory bookkeeping and the run manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::scenario::Scenario;
use crate::CliError;

/// Hands out paths inside the output directory and remembers every file
/// written, so the manifest lists all outputs.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    seed: u64,
    version: &'a str,
    config_sha256: String,
    outcome: &'a str,
    outputs: &'a [String],
    scenario: &'a Scenario,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Outputs { dir: dir.to_path_buf(), files: Vec::new() })
    }

    /// Path for a data file named `name`.
    pub fn file(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    /// Path for a CSV with a JSON sidecar written by the core io helpers.
    pub fn csv_with_sidecar(&mut self, stem: &str) -> PathBuf {
        self.files.push(format!("{stem}.json"));
        self.file(&format!("{stem}.csv"))
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.file(name);
        kactree::io::write_json(&path, value)?;
        Ok(())
    }

    pub fn finish(mut self, command: &str, scenario: &Scenario, outcome: &str) -> Result<(), CliError> {
        self.files.sort();
        self.files.dedup();
        let manifest = Manifest {
            command,
            seed: scenario.seed,
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: scenario.hash()?,
            outcome,
            outputs: &self.files,
            scenario,
        };
        kactree::io::write_json(&self.dir.join("manifest.json"), &manifest)?;
        Ok(())
    }
}

/// File-name fragment for a time value: `2.5` becomes `2p5`.
pub fn time_tag(t: f64) -> String {
    format!("{t}").replace('.', "p")
}
