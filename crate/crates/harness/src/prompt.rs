//! Prompt assembly: a system message with the environment description and a
//! user message with windowed history and the current state.

use arena_core::{EnvKind, TaskPayload, TaskSpec};
use serde::{Deserialize, Serialize};

const LIGHTS: (&str, &str) =
    (include_str!("../assets/prompts/lights.system.txt"), include_str!("../assets/prompts/lights.user.txt"));
const TRADING: (&str, &str) =
    (include_str!("../assets/prompts/trading.system.txt"), include_str!("../assets/prompts/trading.user.txt"));
const ENERGY: (&str, &str) =
    (include_str!("../assets/prompts/energy.system.txt"), include_str!("../assets/prompts/energy.user.txt"));
const REPO: (&str, &str) =
    (include_str!("../assets/prompts/repo.system.txt"), include_str!("../assets/prompts/repo.user.txt"));

/// Closing tags that end generation.
pub const STOP_SEQUENCES: [&str; 2] = ["</action>", "</finish>"];

pub fn templates(env: EnvKind) -> (&'static str, &'static str) {
    match env {
        EnvKind::Lights => LIGHTS,
        EnvKind::Trading => TRADING,
        EnvKind::Energy => ENERGY,
        EnvKind::Repo => REPO,
    }
}

/// Number of most recent interactions kept in the prompt; None keeps all.
pub fn default_memory_window(env: EnvKind) -> Option<usize> {
    match env {
        EnvKind::Trading => Some(50),
        EnvKind::Energy => Some(40),
        EnvKind::Lights | EnvKind::Repo => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Memory {
    #[default]
    EnvDefault,
    Unlimited,
    Last(usize),
}

impl std::str::FromStr for Memory {
    type Err = String;

    /// `default`, `unlimited` or a window size.
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "default" => Ok(Memory::EnvDefault),
            "unlimited" | "all" => Ok(Memory::Unlimited),
            n => n
                .parse()
                .map(Memory::Last)
                .map_err(|_| format!("memory must be 'default', 'unlimited' or a number, got '{s}'")),
        }
    }
}

impl Memory {
    pub fn window(self, env: EnvKind) -> Option<usize> {
        match self {
            Memory::EnvDefault => default_memory_window(env),
            Memory::Unlimited => None,
            Memory::Last(n) => Some(n),
        }
    }
}

/// One past interaction. Only the parsed action is kept, never the reasoning
/// that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub step: usize,
    pub action: String,
    pub feedback: String,
    pub state_before: String,
    pub state_after: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub system: String,
    pub user: String,
    /// History entries included in `user`.
    pub history_len: usize,
}

impl Prompt {
    pub fn messages(&self) -> Vec<ChatMessage> {
        vec![
            ChatMessage { role: "system".into(), content: self.system.clone() },
            ChatMessage { role: "user".into(), content: self.user.clone() },
        ]
    }
}

fn render_entry(env: EnvKind, e: &HistoryEntry) -> String {
    match env {
        EnvKind::Lights => format!("Action: {}, Feedback: {}, State: {}", e.action, e.feedback, e.state_after),
        EnvKind::Trading | EnvKind::Energy => {
            format!("{}\nAction: {}\nFeedback: {}", e.state_before, e.action, e.feedback)
        }
        EnvKind::Repo => format!("=== Step {} ===\n>>> Command: {}\nFeedback:{}", e.step + 1, e.action, e.feedback),
    }
}

pub fn render_history(env: EnvKind, entries: &[HistoryEntry]) -> String {
    if entries.is_empty() {
        return "(no interactions yet)".to_string();
    }
    let sep = match env {
        EnvKind::Lights => "\n",
        _ => "\n\n",
    };
    entries.iter().map(|e| render_entry(env, e)).collect::<Vec<_>>().join(sep)
}

fn fill(template: &str, vars: &[(&str, String)]) -> String {
    vars.iter().fold(template.to_string(), |acc, (k, v)| acc.replace(&format!("{{{k}}}"), v))
}

/// Build the prompt for the next step. Rules appear in the system message
/// only, and only when revealed.
pub fn build_prompt(
    task: &TaskSpec,
    rules_revealed: bool,
    history: &[HistoryEntry],
    state: &str,
    window: Option<usize>,
) -> Prompt {
    let env = task.env_kind;
    let (system, user) = templates(env);
    let from = window.map_or(0, |w| history.len().saturating_sub(w));
    let shown = &history[from..];
    let rules_block = if rules_revealed {
        format!("\n### Rules (ground truth):\n{}\n", task.rules_text.trim_end())
    } else {
        String::new()
    };
    let mut vars =
        vec![("rules_block", rules_block), ("history", render_history(env, shown)), ("state", state.to_string())];
    if let TaskPayload::Energy(c) = &task.payload {
        vars.push(("target_stability", format!("{:.2}", c.tau_stability)));
        vars.push(("target_carbon", format!("{:.2}", c.tau_carbon)));
        vars.push(("horizon", c.horizon.to_string()));
    }
    Prompt { system: fill(system, &vars), user: fill(user, &vars), history_len: shown.len() }
}
