use std::collections::VecDeque;

use arena_core::energy::{oracle_action, EnergyConfig};
use arena_core::lights::solve_bfs;
use arena_core::repo::ground_truth_commands;
use arena_core::{AgentAction, Observation, Snapshot, TaskPayload, TaskSpec};

use crate::trading::OptimalTrader;
use crate::Policy;

/// Replays a fixed action list, then repeats the last entry.
pub struct ScriptReplay {
    name: &'static str,
    queue: VecDeque<AgentAction>,
    last: AgentAction,
}

impl ScriptReplay {
    pub fn new(name: &'static str, actions: Vec<AgentAction>) -> Self {
        let last = actions.last().cloned().unwrap_or(AgentAction::Shell { command: "pip list".into() });
        Self { name, queue: actions.into(), last }
    }
}

impl Policy for ScriptReplay {
    fn name(&self) -> &str {
        self.name
    }

    fn act(&mut self, _obs: &Observation) -> AgentAction {
        self.queue.pop_front().unwrap_or_else(|| self.last.clone())
    }
}

/// Greedy feasibility dispatcher, reading the day from the observation.
pub struct EnergyOracle {
    config: EnergyConfig,
}

impl Policy for EnergyOracle {
    fn name(&self) -> &str {
        "oracle"
    }

    fn act(&mut self, obs: &Observation) -> AgentAction {
        let day = match obs.snapshot {
            Snapshot::Energy { day, .. } => day,
            _ => 0,
        };
        AgentAction::Dispatch(oracle_action(&self.config, day.min(self.config.horizon - 1)))
    }
}

/// The certifying oracle of a task, driven as an agent.
pub fn oracle_policy(task: &TaskSpec) -> Box<dyn Policy> {
    match &task.payload {
        TaskPayload::Lights(c) => {
            let path = solve_bfs(c).ok().flatten().unwrap_or_default();
            let actions = path.into_iter().map(|i| AgentAction::Toggle { index: i as i64 }).collect();
            Box::new(ScriptReplay::new("oracle", actions))
        }
        TaskPayload::Trading(c) => Box::new(OptimalTrader::new(c.clone())),
        TaskPayload::Energy(c) => Box::new(EnergyOracle { config: c.clone() }),
        TaskPayload::Repo(c) => {
            let actions =
                ground_truth_commands(c).into_iter().map(|cmd| AgentAction::Shell { command: cmd.render() }).collect();
            Box::new(ScriptReplay::new("oracle", actions))
        }
    }
}
