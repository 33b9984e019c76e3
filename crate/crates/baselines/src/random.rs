use arena_core::energy::DispatchAction;
use arena_core::repo::python_menu;
use arena_core::trading::TradeAction;
use arena_core::{AgentAction, Observation, RngStream, TaskPayload, TaskSpec};

use crate::Policy;

/// Uniformly random valid actions, seeded for replay.
pub struct RandomAgent {
    rng: RngStream,
    menu: Menu,
}

enum Menu {
    Lights(usize),
    Trading(usize),
    Energy { thermal: f64, wind: f64, solar: f64, battery: f64 },
    Repo(Vec<String>),
}

impl RandomAgent {
    pub fn new(task: &TaskSpec, seed: u64) -> Self {
        let menu = match &task.payload {
            TaskPayload::Lights(c) => Menu::Lights(c.n_lights),
            TaskPayload::Trading(c) => Menu::Trading(c.n_stocks),
            TaskPayload::Energy(c) => Menu::Energy {
                thermal: c.capacities.thermal,
                wind: c.capacities.wind,
                solar: c.capacities.solar,
                battery: c.battery_capacity,
            },
            TaskPayload::Repo(c) => {
                let mut cmds = vec!["python run.py".to_string(), "pip list".to_string(), "repo tree".to_string()];
                cmds.extend(python_menu().iter().map(|v| format!("pip install python=={v}")));
                for p in &c.packages {
                    cmds.push(format!("pip install {}", p.name));
                    cmds.push(format!("pip uninstall {}", p.name));
                    cmds.extend(p.versions.iter().map(|v| format!("pip install {}=={v}", p.name)));
                }
                cmds.extend(c.scripts.iter().map(|s| format!("python {}", s.path)));
                Menu::Repo(cmds)
            }
        };
        Self { rng: RngStream::new(seed, &format!("random-agent/{}", task.env_kind)), menu }
    }

    pub fn next_action(&mut self) -> AgentAction {
        let rng = &mut self.rng;
        match &self.menu {
            Menu::Lights(n) => AgentAction::Toggle { index: rng.index(*n) as i64 },
            Menu::Trading(n) => {
                let mut a = TradeAction::noop();
                if rng.bernoulli(0.5) {
                    let sym = format!("S{}", rng.index(*n));
                    let qty = rng.range_inclusive(1, 5) as u64;
                    if rng.bernoulli(0.5) {
                        a.buy.insert(sym, qty);
                    } else {
                        a.sell.insert(sym, qty);
                    }
                }
                AgentAction::Trade(a)
            }
            Menu::Energy { thermal, wind, solar, battery } => AgentAction::Dispatch(DispatchAction {
                thermal: rng.uniform(0.0, *thermal).round(),
                wind: rng.uniform(0.0, *wind).round(),
                solar: rng.uniform(0.0, *solar).round(),
                battery: rng.uniform(-battery, *battery).round(),
            }),
            Menu::Repo(cmds) => AgentAction::Shell { command: cmds[rng.index(cmds.len())].clone() },
        }
    }
}

impl Policy for RandomAgent {
    fn name(&self) -> &str {
        "random"
    }

    fn act(&mut self, _obs: &Observation) -> AgentAction {
        self.next_action()
    }
}
