//! Task metadata and its canonical file format.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canon::{from_canonical, to_canonical};
use crate::energy::EnergyConfig;
use crate::error::{ArenaError, ParseError, Result};
use crate::lights::LightTaskConfig;
use crate::repo::RepoConfig;
use crate::trading::MarketConfig;

/// Format tag written into every task file.
pub const TASK_FORMAT: &str = "arena-task/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Lights,
    Trading,
    Energy,
    Repo,
}

impl EnvKind {
    pub const ALL: [EnvKind; 4] = [EnvKind::Lights, EnvKind::Trading, EnvKind::Energy, EnvKind::Repo];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvKind::Lights => "lights",
            EnvKind::Trading => "trading",
            EnvKind::Energy => "energy",
            EnvKind::Repo => "repo",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        EnvKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown environment '{s}' (expected lights, trading, energy or repo)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];

    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Difficulty {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Difficulty::ALL
            .into_iter()
            .find(|d| d.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown tier '{s}' (expected easy, medium or hard)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum TaskPayload {
    Lights(LightTaskConfig),
    Trading(MarketConfig),
    Energy(EnergyConfig),
    Repo(RepoConfig),
}

impl TaskPayload {
    pub fn kind(&self) -> EnvKind {
        match self {
            TaskPayload::Lights(_) => EnvKind::Lights,
            TaskPayload::Trading(_) => EnvKind::Trading,
            TaskPayload::Energy(_) => EnvKind::Energy,
            TaskPayload::Repo(_) => EnvKind::Repo,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TaskPayload::Lights(c) => c.validate(),
            TaskPayload::Trading(c) => c.validate(),
            TaskPayload::Energy(c) => c.validate(),
            TaskPayload::Repo(c) => c.validate(),
        }
    }

    pub fn rules_text(&self) -> String {
        match self {
            TaskPayload::Lights(c) => c.rules_text(),
            TaskPayload::Trading(c) => c.rules_text(),
            TaskPayload::Energy(c) => c.rules_text(),
            TaskPayload::Repo(c) => c.rules_text(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub format: String,
    pub env_kind: EnvKind,
    pub task_id: String,
    pub seed: u64,
    pub step_budget: usize,
    pub difficulty: Difficulty,
    pub payload: TaskPayload,
    pub rules_text: String,
}

impl TaskSpec {
    pub fn new(
        task_id: impl Into<String>,
        seed: u64,
        step_budget: usize,
        difficulty: Difficulty,
        payload: TaskPayload,
    ) -> Self {
        let rules_text = payload.rules_text();
        Self {
            format: TASK_FORMAT.to_string(),
            env_kind: payload.kind(),
            task_id: task_id.into(),
            seed,
            step_budget,
            difficulty,
            payload,
            rules_text,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != TASK_FORMAT {
            return Err(ArenaError::config("format", format!("expected {TASK_FORMAT}, got {}", self.format)));
        }
        if self.task_id.is_empty() {
            return Err(ArenaError::config("task_id", "must not be empty"));
        }
        if self.step_budget == 0 {
            return Err(ArenaError::config("step_budget", "must be positive"));
        }
        if self.payload.kind() != self.env_kind {
            return Err(ArenaError::config(
                "payload",
                format!("env_kind is {} but the payload describes {}", self.env_kind, self.payload.kind()),
            ));
        }
        self.payload.validate()
    }
}

/// Canonical bytes of a task.
pub fn serialize_task(task: &TaskSpec) -> String {
    to_canonical(task).expect("task specs contain only finite numbers")
}

fn key_offset(text: &str, key: &str) -> usize {
    text.find(&format!("\"{key}\"")).unwrap_or(0)
}

/// Parse a task file, checking the format tag and the env/payload agreement.
pub fn deserialize_task(text: &str) -> std::result::Result<TaskSpec, ParseError> {
    let value: Value = from_canonical(text)?;
    match value.get("format").and_then(Value::as_str) {
        Some(TASK_FORMAT) => {}
        Some(other) => {
            return Err(ParseError {
                offset: key_offset(text, "format"),
                message: format!("unsupported task format '{other}', expected '{TASK_FORMAT}'"),
            })
        }
        None => return Err(ParseError { offset: 0, message: "missing field `format`".into() }),
    }
    let task: TaskSpec = from_canonical(text)?;
    if task.payload.kind() != task.env_kind {
        return Err(ParseError {
            offset: key_offset(text, "payload"),
            message: format!("env_kind is {} but the payload describes {}", task.env_kind, task.payload.kind()),
        });
    }
    Ok(task)
}
