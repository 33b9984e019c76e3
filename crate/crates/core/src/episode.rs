//! The environment-agnostic episode engine and its trace.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::action::AgentAction;
use crate::canon::to_canonical;
use crate::energy::{self, GridState, GridVerdict};
use crate::error::{ArenaError, Result};
use crate::lights::{self, LightState};
use crate::repo::{self, RepoState, Version};
use crate::task::{EnvKind, TaskPayload, TaskSpec};
use crate::trading::{self, Portfolio, TradeAction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStatus {
    Running,
    Success,
    Failure,
    BudgetExhausted,
}

impl EpisodeStatus {
    pub fn is_terminal(self) -> bool {
        self != EpisodeStatus::Running
    }
}

/// Observable state after a step, also used as the loop-detection key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "env", rename_all = "snake_case")]
pub enum Snapshot {
    /// Bulbs in display order.
    Lights {
        bulbs: Vec<bool>,
    },
    Trading {
        day: usize,
        cash: f64,
        holdings: Vec<u64>,
        prices: Vec<f64>,
    },
    Energy {
        day: usize,
        state_of_charge: f64,
        consecutive_violations: usize,
        mean_stability: f64,
        carbon_ratio: f64,
    },
    Repo {
        installed: BTreeMap<String, Version>,
        python: Option<Version>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step_index: usize,
    pub action: AgentAction,
    pub feedback: String,
    pub snapshot: Snapshot,
    pub progressed: bool,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub task_id: String,
    pub env_kind: EnvKind,
    pub rules_revealed: bool,
    pub initial_snapshot: Snapshot,
    pub records: Vec<TraceRecord>,
    pub status: EpisodeStatus,
}

impl Trace {
    /// Snapshot before record `i`.
    pub fn state_before(&self, i: usize) -> &Snapshot {
        if i == 0 {
            &self.initial_snapshot
        } else {
            &self.records[i - 1].snapshot
        }
    }

    pub fn to_canonical(&self) -> String {
        to_canonical(self).expect("finite trace values")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub text: String,
    pub snapshot: Snapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub step_index: usize,
    pub observation: Observation,
    pub feedback: String,
    pub reward: f64,
    pub done: bool,
    pub success: bool,
    pub status: EpisodeStatus,
    pub remaining_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradingSurface {
    pub day: usize,
    pub prices: Vec<f64>,
    pub portfolio: Portfolio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "env", rename_all = "snake_case")]
pub enum Surface {
    Lights(LightState),
    Trading(TradingSurface),
    Energy(GridState),
    Repo(RepoState),
}

/// Summary numbers of a finished or running episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub task_id: String,
    pub env_kind: EnvKind,
    pub status: EpisodeStatus,
    pub success: bool,
    pub steps: usize,
    pub final_value: Option<f64>,
    pub profit_rate: Option<f64>,
    pub mean_stability: Option<f64>,
    pub carbon_ratio: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Episode {
    task: Arc<TaskSpec>,
    rules_revealed: bool,
    status: EpisodeStatus,
    surface: Surface,
    trace: Trace,
}

pub fn create_episode(task: Arc<TaskSpec>, rules_revealed: bool) -> Result<Episode> {
    Episode::new(task, rules_revealed)
}

impl Episode {
    pub fn new(task: Arc<TaskSpec>, rules_revealed: bool) -> Result<Self> {
        task.validate()?;
        let surface = match &task.payload {
            TaskPayload::Lights(c) => Surface::Lights(LightState::all_off(c.n_lights)),
            TaskPayload::Trading(c) => Surface::Trading(TradingSurface {
                day: 0,
                prices: c.initial_prices.clone(),
                portfolio: Portfolio::new(c.initial_cash, c.n_stocks),
            }),
            TaskPayload::Energy(c) => Surface::Energy(GridState::initial(c)),
            TaskPayload::Repo(_) => Surface::Repo(RepoState::default()),
        };
        let mut ep = Self {
            trace: Trace {
                task_id: task.task_id.clone(),
                env_kind: task.env_kind,
                rules_revealed,
                initial_snapshot: Snapshot::Lights { bulbs: Vec::new() },
                records: Vec::new(),
                status: EpisodeStatus::Running,
            },
            task,
            rules_revealed,
            status: EpisodeStatus::Running,
            surface,
        };
        ep.trace.initial_snapshot = ep.snapshot();
        Ok(ep)
    }

    pub fn task(&self) -> &Arc<TaskSpec> {
        &self.task
    }

    pub fn rules_revealed(&self) -> bool {
        self.rules_revealed
    }

    pub fn status(&self) -> EpisodeStatus {
        self.status
    }

    pub fn step_index(&self) -> usize {
        self.trace.records.len()
    }

    pub fn remaining_steps(&self) -> usize {
        self.task.step_budget.saturating_sub(self.step_index())
    }

    pub fn surface(&self) -> &Surface {
        &self.surface
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }

    pub fn snapshot(&self) -> Snapshot {
        match (&self.surface, &self.task.payload) {
            (Surface::Lights(s), TaskPayload::Lights(c)) => {
                Snapshot::Lights { bulbs: c.display_perm.iter().map(|&internal| s.bits[internal]).collect() }
            }
            (Surface::Trading(t), _) => Snapshot::Trading {
                day: t.day,
                cash: t.portfolio.cash,
                holdings: t.portfolio.holdings.clone(),
                prices: t.prices.clone(),
            },
            (Surface::Energy(g), _) => Snapshot::Energy {
                day: g.day,
                state_of_charge: g.state_of_charge,
                consecutive_violations: g.consecutive_violations,
                mean_stability: g.mean_stability(),
                carbon_ratio: g.carbon_ratio(),
            },
            (Surface::Repo(r), _) => Snapshot::Repo { installed: r.installed.clone(), python: r.python },
            _ => unreachable!("surface always matches the payload"),
        }
    }

    /// Current state text, never including the rules.
    pub fn state_text(&self) -> String {
        match (&self.surface, &self.task.payload) {
            (Surface::Lights(s), TaskPayload::Lights(c)) => lights::render_observation(s, c),
            (Surface::Trading(t), TaskPayload::Trading(c)) => render_trading(t, c),
            (Surface::Energy(g), TaskPayload::Energy(c)) => energy::render_observation(g, c),
            (Surface::Repo(r), _) => render_repo(r),
            _ => unreachable!("surface always matches the payload"),
        }
    }

    /// Text describing the current state. With rules revealed, the initial
    /// observation is prefixed by the rule description.
    pub fn observation(&self) -> Observation {
        let body = self.state_text();
        let text = if self.rules_revealed && self.step_index() == 0 {
            format!("Rules:\n{}\n{body}", self.task.rules_text.trim_end())
        } else {
            body
        };
        Observation { text, snapshot: self.snapshot() }
    }

    pub fn summary(&self) -> EpisodeSummary {
        let mut s = EpisodeSummary {
            task_id: self.task.task_id.clone(),
            env_kind: self.task.env_kind,
            status: self.status,
            success: self.status == EpisodeStatus::Success,
            steps: self.step_index(),
            final_value: None,
            profit_rate: None,
            mean_stability: None,
            carbon_ratio: None,
        };
        match (&self.surface, &self.task.payload) {
            (Surface::Trading(t), TaskPayload::Trading(c)) => {
                let v = trading::portfolio_value(&t.portfolio, &t.prices);
                s.final_value = Some(v);
                s.profit_rate = Some(trading::profit_rate(v, c.initial_cash));
            }
            (Surface::Energy(g), _) => {
                s.mean_stability = Some(g.mean_stability());
                s.carbon_ratio = Some(g.carbon_ratio());
            }
            _ => {}
        }
        s
    }

    /// Apply one action. Errors leave the episode untouched.
    pub fn step(&mut self, action: AgentAction) -> Result<StepOutcome> {
        if self.status.is_terminal() {
            return Err(ArenaError::State(format!(
                "episode {} has already finished with status {:?}",
                self.task.task_id, self.status
            )));
        }
        if let Some(kind) = action.env_kind() {
            if kind != self.task.env_kind {
                return Err(ArenaError::Protocol(format!(
                    "a {kind} action was sent to a {} episode",
                    self.task.env_kind
                )));
            }
        }
        let task = Arc::clone(&self.task);
        let (feedback, progressed, reward, verdict) = match (&mut self.surface, &task.payload) {
            (Surface::Lights(state), TaskPayload::Lights(cfg)) => step_lights(state, cfg, &action),
            (Surface::Trading(t), TaskPayload::Trading(cfg)) => step_trading(t, cfg, &action),
            (Surface::Energy(g), TaskPayload::Energy(cfg)) => step_energy(g, cfg, &action)?,
            (Surface::Repo(r), TaskPayload::Repo(cfg)) => step_repo(r, cfg, &action),
            _ => unreachable!("surface always matches the payload"),
        };
        let step_index = self.step_index();
        let mut status = verdict;
        if status == EpisodeStatus::Running && step_index + 1 >= task.step_budget {
            status = EpisodeStatus::BudgetExhausted;
        }
        self.status = status;
        self.trace.records.push(TraceRecord {
            step_index,
            action,
            feedback: feedback.clone(),
            snapshot: self.snapshot(),
            progressed,
            reward,
        });
        self.trace.status = status;
        Ok(StepOutcome {
            step_index,
            observation: self.observation(),
            feedback,
            reward,
            done: status.is_terminal(),
            success: status == EpisodeStatus::Success,
            status,
            remaining_steps: self.remaining_steps(),
        })
    }
}

fn format_feedback(message: &str) -> String {
    format!("Invalid action format: {message}. The step was still used.")
}

type StepResult = (String, bool, f64, EpisodeStatus);

fn step_lights(state: &mut LightState, cfg: &lights::LightTaskConfig, action: &AgentAction) -> StepResult {
    let feedback = match action {
        AgentAction::Toggle { index } => {
            let out = lights::apply_toggle(state, cfg, *index);
            let progressed = out.progressed;
            *state = out.state;
            if state.all_on() {
                return (out.feedback, progressed, 1.0, EpisodeStatus::Success);
            }
            return (out.feedback, progressed, 0.0, EpisodeStatus::Running);
        }
        AgentAction::Malformed { message, .. } => format_feedback(message),
        _ => unreachable!("kind checked by the caller"),
    };
    (feedback, false, 0.0, EpisodeStatus::Running)
}

fn render_trading(t: &TradingSurface, cfg: &trading::MarketConfig) -> String {
    let join = |items: Vec<String>| items.join(" | ");
    let prices =
        join(t.prices.iter().enumerate().map(|(i, p)| format!("S{i} {}", trading::format_price(*p))).collect());
    let holdings = join(t.portfolio.holdings.iter().enumerate().map(|(i, h)| format!("S{i} {h}")).collect());
    let value = trading::portfolio_value(&t.portfolio, &t.prices);
    let mut s = format!(
        "Day {} of {}\nPrices: {prices}\nHoldings: {holdings}\nCash: {:.2}\nTotal value: {:.2} (profit {:+.2}%)",
        t.day,
        cfg.horizon,
        t.portfolio.cash,
        value,
        100.0 * trading::profit_rate(value, cfg.initial_cash)
    );
    if let Some(z) = cfg.news_values(t.day) {
        s.push_str(&format!("\nNews for tomorrow: {}", trading::news_line(z)));
    }
    s
}

fn step_trading(t: &mut TradingSurface, cfg: &trading::MarketConfig, action: &AgentAction) -> StepResult {
    let noop = TradeAction::noop();
    let (trade, mut feedback) = match action {
        AgentAction::Trade(a) => (a, String::new()),
        AgentAction::Malformed { message, .. } => (&noop, format!("{} Holding positions. ", format_feedback(message))),
        _ => unreachable!("kind checked by the caller"),
    };
    let report = trading::step_trade(&t.portfolio, &t.prices, trade, cfg.fee_rate);
    t.portfolio = report.portfolio;
    t.prices = trading::advance_market(cfg, t.day, &t.prices).expect("episode ends at the horizon");
    t.day += 1;
    let value = trading::portfolio_value(&t.portfolio, &t.prices);
    feedback.push_str(&report.messages.join(" "));
    feedback.push_str(&format!(" Portfolio value is now {value:.2}."));
    let status = if t.day >= cfg.horizon { EpisodeStatus::Success } else { EpisodeStatus::Running };
    (feedback, report.changed, value, status)
}

fn step_energy(g: &mut GridState, cfg: &energy::EnergyConfig, action: &AgentAction) -> Result<StepResult> {
    let (dispatch, prefix) = match action {
        AgentAction::Dispatch(d) => (*d, String::new()),
        AgentAction::Malformed { message, .. } => (
            g.previous_action.unwrap_or_default(),
            format!("{} Previous dispatch repeated. ", format_feedback(message)),
        ),
        _ => unreachable!("kind checked by the caller"),
    };
    let (next, report) = energy::step_dispatch(g, cfg, &dispatch)?;
    *g = next;
    let verdict = energy::check_termination_and_success(g, cfg);
    let status = match verdict {
        GridVerdict::Running => EpisodeStatus::Running,
        GridVerdict::Success => EpisodeStatus::Success,
        GridVerdict::Blackout | GridVerdict::ThresholdsMissed => EpisodeStatus::Failure,
    };
    let mut feedback = format!("{prefix}{}", report.render());
    match verdict {
        GridVerdict::Blackout => {
            feedback.push_str(&format!(" {} consecutive violation days: the grid failed.", cfg.violation_limit))
        }
        GridVerdict::ThresholdsMissed => {
            feedback.push_str(" Horizon reached but the stability or carbon target was missed.")
        }
        GridVerdict::Success => feedback.push_str(" Horizon reached with both targets met."),
        GridVerdict::Running => {}
    }
    let progressed = matches!(action, AgentAction::Dispatch(_));
    Ok((feedback, progressed, report.stability, status))
}

fn render_repo(r: &RepoState) -> String {
    let python = r.python.map_or("not installed".to_string(), |v| v.to_string());
    format!("Python: {python}. Installed packages: {}. Commands issued: {}.", r.installed.len(), r.command_count)
}

fn step_repo(r: &mut RepoState, cfg: &repo::RepoConfig, action: &AgentAction) -> StepResult {
    match action {
        AgentAction::Shell { command } => match repo::parse_command(command) {
            Ok(cmd) => {
                let out = repo::execute_command(r, cfg, &cmd);
                *r = out.state;
                if out.success {
                    (out.feedback, out.progressed, 1.0, EpisodeStatus::Success)
                } else {
                    (out.feedback, out.progressed, 0.0, EpisodeStatus::Running)
                }
            }
            Err(msg) => {
                r.command_count += 1;
                (msg, false, 0.0, EpisodeStatus::Running)
            }
        },
        AgentAction::Malformed { message, .. } => {
            r.command_count += 1;
            (format_feedback(message), false, 0.0, EpisodeStatus::Running)
        }
        _ => unreachable!("kind checked by the caller"),
    }
}
