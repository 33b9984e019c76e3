//! Scripted agents that play through the same observation interface as
//! external agents.

use arena_core::{AgentAction, EnvKind, Observation, TaskSpec};

pub mod estimate;
pub mod oracle;
pub mod random;
pub mod trading;

pub use estimate::{estimate, max_abs_error, Estimator, Loading};
pub use oracle::oracle_policy;
pub use random::RandomAgent;
pub use trading::{act_optimal, all_in_action, LearningTrader, MarketView, NoOpTrader, OptimalTrader, StrategyKind};

/// A scripted agent: one action per observation.
pub trait Policy: Send {
    fn name(&self) -> &str;
    fn act(&mut self, obs: &Observation) -> AgentAction;
}

pub const POLICY_NAMES: [&str; 9] =
    ["random", "oracle", "optimal", "noop", "conservative", "progressive", "correlation", "rolling", "ridge"];

/// Build a named policy for a task. Trading-only names fail on other envs.
pub fn make_policy(name: &str, task: &TaskSpec, seed: u64) -> Result<Box<dyn Policy>, String> {
    let trading_only = |p: Box<dyn Policy>| {
        if task.env_kind == EnvKind::Trading {
            Ok(p)
        } else {
            Err(format!("policy '{name}' only plays trading tasks"))
        }
    };
    match name {
        "random" => Ok(Box::new(RandomAgent::new(task, seed))),
        "oracle" => Ok(oracle_policy(task)),
        "optimal" => trading_only(oracle_policy(task)),
        "noop" => trading_only(Box::new(NoOpTrader)),
        other => match StrategyKind::all().into_iter().find(|k| k.name() == other) {
            Some(kind) => trading_only(Box::new(LearningTrader::new(kind))),
            None => Err(format!("unknown policy '{other}', expected one of {}", POLICY_NAMES.join(", "))),
        },
    }
}
