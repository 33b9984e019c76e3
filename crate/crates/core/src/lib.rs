//! Environments, task format and episode engine for a suite of interactive
//! rule-discovery tasks.

pub mod action;
pub mod canon;
pub mod energy;
pub mod episode;
pub mod error;
pub mod lights;
pub mod repo;
pub mod rng;
pub mod task;
pub mod trading;

pub use action::{parse_action, AgentAction};
pub use episode::{
    create_episode, Episode, EpisodeStatus, EpisodeSummary, Observation, Snapshot, StepOutcome, Trace, TraceRecord,
};
pub use error::{ArenaError, ParseError, Result};
pub use rng::RngStream;
pub use task::{deserialize_task, serialize_task, Difficulty, EnvKind, TaskPayload, TaskSpec};
