//! One module per subcommand. Each `run` does the numerical work, writes
//! its data files under the output directory, and hands back a metrics
//! object for the run report. Per-item failures (a diverged model in a
//! batch, an estimation that blew up) are counted and reported, not
//! propagated as process errors; only I/O and config problems abort.

pub mod bench;
pub mod estimate;
pub mod react_diffuse;
pub mod solve;
pub mod train_node;

use std::path::Path;

use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// What a subcommand contributes to the report. `timing` entries are merged
/// into the report's timing block, which determinism checks ignore.
pub struct CommandOutput {
    pub metrics: serde_json::Value,
    pub timing: serde_json::Value,
    pub failures: usize,
}

impl CommandOutput {
    pub fn new(metrics: serde_json::Value) -> Self {
        Self {
            metrics,
            timing: serde_json::Value::Null,
            failures: 0,
        }
    }
}
