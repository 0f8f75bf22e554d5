use std::path::{Path, PathBuf};

use cordscan::classify::ClassifyError;
use cordscan::io::IoError;
use cordscan::models::ModelError;
use cordscan::phantom::PhantomError;
use cordscan::regions::RegionError;
use cordscan::stats::StatsError;

/// Failure of a subcommand. The variant decides the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, unreadable or inconsistent inputs. Exit code 2.
    #[error("{0}")]
    Input(String),
    /// The computation ran but the data left it undefined. Exit code 1.
    #[error("{0}")]
    Degenerate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Degenerate(_) => 1,
            CliError::Input(_) => 2,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn write(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Input(format!("{}: {e}", path.display()))
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<PhantomError> for CliError {
    fn from(e: PhantomError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<RegionError> for CliError {
    fn from(e: RegionError) -> Self {
        match e {
            RegionError::EmptyRegion(_) | RegionError::NonFinite { .. } => CliError::Degenerate(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        CliError::Degenerate(e.to_string())
    }
}

impl From<ClassifyError> for CliError {
    fn from(e: ClassifyError) -> Self {
        match e {
            ClassifyError::InvalidInput(_) => CliError::Input(e.to_string()),
            _ => CliError::Degenerate(e.to_string()),
        }
    }
}

/// Fails with an input error naming the first path that does not exist.
pub fn require_files<'a>(paths: impl IntoIterator<Item = &'a PathBuf>) -> Result<(), CliError> {
    for p in paths {
        if !p.is_file() {
            return Err(CliError::input(format!("{}: file not found", p.display())));
        }
    }
    Ok(())
}
