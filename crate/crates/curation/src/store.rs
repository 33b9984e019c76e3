use std::fs;
use std::path::{Path, PathBuf};

use arena_core::canon::{from_canonical, to_canonical};
use arena_core::rng::ALGORITHM_ID;
use arena_core::{deserialize_task, serialize_task, Difficulty, EnvKind, TaskSpec};
use serde::{Deserialize, Serialize};

use crate::profile::{PerEnv, SuiteName, SuiteProfile};
use crate::SuiteError;

pub const SUITE_FORMAT: &str = "arena-suite/1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TASKS_DIR: &str = "tasks";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub task_id: String,
    pub env_kind: EnvKind,
    pub difficulty: Difficulty,
    pub seed: u64,
    pub step_budget: usize,
    /// Path relative to the suite directory.
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub format: String,
    pub profile: SuiteName,
    pub master_seed: u64,
    pub rng: String,
    pub step_budgets: PerEnv<usize>,
    pub tasks: Vec<ManifestEntry>,
}

impl SuiteManifest {
    pub fn new(profile: &SuiteProfile, master_seed: u64, tasks: &[TaskSpec]) -> Self {
        Self {
            format: SUITE_FORMAT.to_string(),
            profile: profile.name,
            master_seed,
            rng: ALGORITHM_ID.to_string(),
            step_budgets: profile.step_budgets,
            tasks: tasks
                .iter()
                .map(|t| ManifestEntry {
                    task_id: t.task_id.clone(),
                    env_kind: t.env_kind,
                    difficulty: t.difficulty,
                    seed: t.seed,
                    step_budget: t.step_budget,
                    file: format!("{TASKS_DIR}/{}.json", t.task_id),
                })
                .collect(),
        }
    }

    pub fn to_canonical(&self) -> String {
        to_canonical(self).expect("manifests hold no floats")
    }

    pub fn count(&self, env: EnvKind, tier: Option<Difficulty>) -> usize {
        self.tasks.iter().filter(|e| e.env_kind == env && tier.is_none_or(|t| e.difficulty == t)).count()
    }

    /// Short table of task counts and budgets per environment and tier.
    pub fn describe(&self) -> String {
        let mut out = format!(
            "suite {} (master seed {}, {} tasks, rng {})\n",
            self.profile.as_str(),
            self.master_seed,
            self.tasks.len(),
            self.rng
        );
        out.push_str(&format!(
            "{:<8} {:>6} {:>6} {:>6} {:>6} {:>7}\n",
            "env", "easy", "medium", "hard", "total", "budget"
        ));
        for env in EnvKind::ALL {
            let [e, m, h] = Difficulty::ALL.map(|t| self.count(env, Some(t)));
            out.push_str(&format!(
                "{:<8} {e:>6} {m:>6} {h:>6} {:>6} {:>7}\n",
                env.as_str(),
                self.count(env, None),
                self.step_budgets.get(env)
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Suite {
    pub manifest: SuiteManifest,
    pub tasks: Vec<TaskSpec>,
}

impl Suite {
    pub fn task(&self, task_id: &str) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.task_id == task_id)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SuiteError + '_ {
    move |source| SuiteError::Io { path: path.to_path_buf(), source }
}

/// Write `manifest.json` and one canonical file per task under `dir`.
pub fn write_suite(dir: &Path, manifest: &SuiteManifest, tasks: &[TaskSpec]) -> Result<(), SuiteError> {
    let task_dir = dir.join(TASKS_DIR);
    fs::create_dir_all(&task_dir).map_err(io_err(&task_dir))?;
    for (entry, task) in manifest.tasks.iter().zip(tasks) {
        let path = dir.join(&entry.file);
        fs::write(&path, serialize_task(task)).map_err(io_err(&path))?;
    }
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, manifest.to_canonical()).map_err(io_err(&path))
}

/// Load a suite, checking that every task file agrees with its manifest entry.
pub fn load_suite(dir: &Path) -> Result<Suite, SuiteError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: SuiteManifest =
        from_canonical(&text).map_err(|source| SuiteError::Parse { path: path.clone(), source })?;
    if manifest.format != SUITE_FORMAT {
        return Err(SuiteError::Manifest(format!("unsupported suite format '{}'", manifest.format)));
    }
    let mut tasks = Vec::with_capacity(manifest.tasks.len());
    for entry in &manifest.tasks {
        let path: PathBuf = dir.join(&entry.file);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let task = deserialize_task(&text).map_err(|source| SuiteError::Parse { path: path.clone(), source })?;
        if task.task_id != entry.task_id
            || task.env_kind != entry.env_kind
            || task.seed != entry.seed
            || task.step_budget != entry.step_budget
        {
            return Err(SuiteError::Manifest(format!("{} does not match its manifest entry", entry.file)));
        }
        tasks.push(task);
    }
    Ok(Suite { manifest, tasks })
}
