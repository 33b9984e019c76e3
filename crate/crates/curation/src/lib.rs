//! Suite assembly: stratified sampling of certified tasks, re-verification
//! and the on-disk manifest layout.

use std::path::PathBuf;

use arena_core::{ArenaError, Difficulty, EnvKind, ParseError};
use thiserror::Error;

pub mod profile;
pub mod sample;
pub mod store;
pub mod verify;

pub use profile::{PerEnv, SuiteName, SuiteProfile, TierParams};
pub use sample::{sample_adhoc, sample_suite, sample_task, task_seed};
pub use store::{load_suite, write_suite, Suite, SuiteManifest};
pub use verify::{verify_suite, verify_task, OracleMeasure, TaskVerdict, VerificationReport};

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("invalid profile: {0}")]
    Profile(String),

    #[error("could not generate {env} task {index} ({tier} tier): {source}")]
    Generation { env: EnvKind, tier: Difficulty, index: usize, source: ArenaError },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },

    #[error("manifest error: {0}")]
    Manifest(String),
}

/// Sample a profile and write it under `dir`.
pub fn generate_suite(profile: &SuiteProfile, master_seed: u64, dir: &std::path::Path) -> Result<Suite, SuiteError> {
    let tasks = sample_suite(profile, master_seed)?;
    let manifest = SuiteManifest::new(profile, master_seed, &tasks);
    write_suite(dir, &manifest, &tasks)?;
    Ok(Suite { manifest, tasks })
}
