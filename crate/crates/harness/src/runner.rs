use std::sync::Arc;
use std::time::Duration;

use arena_core::{
    create_episode, AgentAction, Difficulty, EnvKind, EpisodeStatus, EpisodeSummary, Result, TaskSpec, Trace,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentError, AgentRequest, TokenUsage};
use crate::metrics::compute_loop_ratio;
use crate::parse::parse_action_tag;
use crate::prompt::{build_prompt, HistoryEntry, Memory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub rules_revealed: bool,
    pub memory: Memory,
    /// Attempts per step after the first for transient agent failures.
    pub max_retries: usize,
    pub retry_backoff_ms: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { rules_revealed: false, memory: Memory::EnvDefault, max_retries: 3, retry_backoff_ms: 500 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRun {
    pub trace: Trace,
    pub summary: EpisodeSummary,
    /// Set when the agent could not be reached; such runs are left out of metrics.
    pub infrastructure_failure: Option<String>,
    pub usage: Option<TokenUsage>,
    pub format_errors: usize,
    /// Largest number of history entries any prompt carried.
    pub max_history_shown: usize,
}

fn history_action(action: &AgentAction) -> String {
    match action {
        AgentAction::Malformed { raw, .. } if raw.trim().is_empty() => "(no valid action)".to_string(),
        other => other.to_wire(),
    }
}

fn ask(
    agent: &mut dyn Agent,
    request: &AgentRequest<'_>,
    config: &RunConfig,
) -> std::result::Result<crate::AgentReply, AgentError> {
    let mut attempt = 0;
    loop {
        match agent.respond(request) {
            Err(AgentError::Transient(msg)) if attempt < config.max_retries => {
                attempt += 1;
                log::warn!("{}: attempt {attempt} failed ({msg}), retrying", agent.name());
                std::thread::sleep(Duration::from_millis(config.retry_backoff_ms * attempt as u64));
            }
            other => return other,
        }
    }
}

/// Play one episode: prompt, query, parse, step, until a terminal status.
pub fn run_episode(task: Arc<TaskSpec>, agent: &mut dyn Agent, config: &RunConfig) -> Result<EpisodeRun> {
    let mut episode = create_episode(Arc::clone(&task), config.rules_revealed)?;
    let window = config.memory.window(task.env_kind);
    let mut history: Vec<HistoryEntry> = Vec::new();
    let mut usage: Option<TokenUsage> = None;
    let mut format_errors = 0;
    let mut max_history_shown = 0;
    let mut infrastructure_failure = None;
    // The repo observation is the output of the last command.
    let mut repo_feedback = "No commands run yet.".to_string();
    while episode.status() == EpisodeStatus::Running {
        let state = match task.env_kind {
            EnvKind::Repo => repo_feedback.clone(),
            _ => episode.state_text(),
        };
        let prompt = build_prompt(&task, config.rules_revealed, &history, &state, window);
        max_history_shown = max_history_shown.max(prompt.history_len);
        let observation = episode.observation();
        let request =
            AgentRequest { task: &task, step: episode.step_index(), prompt: &prompt, observation: &observation };
        let reply = match ask(agent, &request, config) {
            Ok(r) => r,
            Err(e) => {
                log::error!("{} on {}: {e}; episode marked as infrastructure failure", agent.name(), task.task_id);
                infrastructure_failure = Some(e.to_string());
                break;
            }
        };
        if let Some(u) = reply.usage {
            *usage.get_or_insert_with(TokenUsage::default) += u;
        }
        let action = parse_action_tag(task.env_kind, &reply.text);
        if matches!(action, AgentAction::Malformed { .. }) {
            format_errors += 1;
        }
        let shown = history_action(&action);
        let out = episode.step(action)?;
        history.push(HistoryEntry {
            step: out.step_index,
            action: shown,
            feedback: out.feedback.clone(),
            state_before: state,
            state_after: episode.state_text(),
        });
        repo_feedback = out.feedback;
    }
    let summary = episode.summary();
    Ok(EpisodeRun {
        trace: episode.into_trace(),
        summary,
        infrastructure_failure,
        usage,
        format_errors,
        max_history_shown,
    })
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task_id: String,
    pub env_kind: EnvKind,
    pub difficulty: Difficulty,
    pub run_index: usize,
    pub agent: String,
    pub rules_revealed: bool,
    pub status: EpisodeStatus,
    pub success: bool,
    pub steps: usize,
    pub final_value: Option<f64>,
    pub profit_rate: Option<f64>,
    pub mean_stability: Option<f64>,
    pub carbon_ratio: Option<f64>,
    pub loop_ratio: Option<f64>,
    pub format_errors: usize,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
    pub infrastructure_failure: Option<String>,
}

impl RunRecord {
    pub fn from_run(task: &TaskSpec, run_index: usize, agent: &str, rules_revealed: bool, run: &EpisodeRun) -> Self {
        let s = &run.summary;
        Self {
            task_id: task.task_id.clone(),
            env_kind: task.env_kind,
            difficulty: task.difficulty,
            run_index,
            agent: agent.to_string(),
            rules_revealed,
            status: s.status,
            success: s.success,
            steps: s.steps,
            final_value: s.final_value,
            profit_rate: s.profit_rate,
            mean_stability: s.mean_stability,
            carbon_ratio: s.carbon_ratio,
            loop_ratio: compute_loop_ratio(&run.trace),
            format_errors: run.format_errors,
            prompt_tokens: run.usage.map(|u| u.prompt_tokens),
            completion_tokens: run.usage.map(|u| u.completion_tokens),
            infrastructure_failure: run.infrastructure_failure.clone(),
        }
    }
}

/// Run `k` episodes per task with up to `parallelism` episodes at once.
/// `make_agent(task, run_index)` builds a fresh agent per episode.
pub fn evaluate<F>(
    tasks: &[Arc<TaskSpec>],
    k: usize,
    config: &RunConfig,
    parallelism: usize,
    make_agent: F,
) -> Result<Vec<(RunRecord, Trace)>>
where
    F: Fn(&TaskSpec, usize) -> Box<dyn Agent> + Sync,
{
    let jobs: Vec<(usize, usize)> = (0..tasks.len()).flat_map(|t| (0..k).map(move |r| (t, r))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| arena_core::ArenaError::Capacity(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|&(t, r)| {
                let task = &tasks[t];
                let mut agent = make_agent(task, r);
                let run = run_episode(Arc::clone(task), agent.as_mut(), config)?;
                let record = RunRecord::from_run(task, r, agent.name(), config.rules_revealed, &run);
                Ok((record, run.trace))
            })
            .collect()
    })
}
