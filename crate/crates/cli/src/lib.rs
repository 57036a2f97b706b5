//! Command-line entry points and the HTTP session service.

use std::path::{Path, PathBuf};

use thiserror::Error;
use tgg_core::bench::BenchError;
use tgg_core::corpus::showcases;
use tgg_core::dcg::Weights;
use tgg_core::engine::{EngineError, Models};
use tgg_core::sim::Scenario;
use tgg_core::tracker::HmmSet;

pub mod cli;
pub mod repl;
pub mod service;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(CliError::io(path))
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    std::fs::write(path, contents).map_err(CliError::io(path))
}

/// The shipped models, with either table replaced from a file.
pub fn load_models(weights: Option<&Path>, hmms: Option<&Path>) -> Result<Models, CliError> {
    let mut m = Models::builtin();
    if let Some(p) = weights {
        m.weights = Weights::from_json(&read(p)?).map_err(|e| CliError::Invalid(format!("{}: {e}", p.display())))?;
    }
    if let Some(p) = hmms {
        m.hmms = HmmSet::from_json(&read(p)?).map_err(|e| CliError::Invalid(format!("{}: {e}", p.display())))?;
    }
    Ok(m)
}

/// A scenario file, or the name of a built-in showcase.
pub fn load_scenario(arg: &str) -> Result<Scenario, CliError> {
    let path = Path::new(arg);
    if path.is_file() {
        let s = Scenario::from_json(&read(path)?).map_err(|e| CliError::Invalid(format!("{arg}: {e}")))?;
        return Ok(s);
    }
    showcases()
        .into_iter()
        .find(|s| s.name == arg)
        .map(|s| s.scenario)
        .ok_or_else(|| CliError::Invalid(format!("`{arg}` is neither a scenario file nor a showcase name")))
}
