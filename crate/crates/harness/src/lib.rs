//! Evaluation harness: agent adapters, prompt assembly, action-tag parsing,
//! episode loop and benchmark metrics.

pub mod agent;
pub mod export;
pub mod metrics;
pub mod parse;
pub mod prompt;
pub mod runner;

pub use agent::{
    Agent, AgentError, AgentReply, AgentRequest, RemoteAgent, RemoteConfig, ScriptedAgent, StubAgent, TokenUsage,
};
pub use export::{load_trace, render_reports, write_runs_csv, write_summary_json};
pub use metrics::{build_reports, compute_loop_ratio, compute_metrics, MetricsReport, RunOutcome, Scores};
pub use parse::parse_action_tag;
pub use prompt::{build_prompt, default_memory_window, Memory, Prompt, STOP_SEQUENCES};
pub use runner::{evaluate, run_episode, EpisodeRun, RunConfig, RunRecord};
