use arena_core::energy::{run_oracle, GridVerdict};
use arena_core::lights::solve_bfs;
use arena_core::repo::{certify_ground_truth, count_solutions};
use arena_core::trading::MIN_PRICE;
use arena_core::{Difficulty, EnvKind, TaskPayload, TaskSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// What an oracle measured while certifying one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "oracle", rename_all = "snake_case")]
pub enum OracleMeasure {
    Bfs { length: usize },
    Market { min_price: f64 },
    Dispatch { days_survived: usize, mean_stability: f64, carbon_ratio: f64 },
    Resolver { solutions: u64, ground_truth_replays: bool },
    None,
}

impl OracleMeasure {
    /// Scalar used for difficulty audits.
    pub fn difficulty_value(&self) -> Option<f64> {
        match self {
            OracleMeasure::Bfs { length } => Some(*length as f64),
            OracleMeasure::Market { min_price } => Some(*min_price),
            OracleMeasure::Dispatch { carbon_ratio, .. } => Some(*carbon_ratio),
            OracleMeasure::Resolver { solutions, .. } => Some(*solutions as f64),
            OracleMeasure::None => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskVerdict {
    pub task_id: String,
    pub env_kind: EnvKind,
    pub difficulty: Difficulty,
    pub solvable: bool,
    pub measure: OracleMeasure,
    pub problem: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub total: usize,
    pub solvable: usize,
    pub offenders: Vec<String>,
    pub tasks: Vec<TaskVerdict>,
}

impl VerificationReport {
    pub fn all_solvable(&self) -> bool {
        self.offenders.is_empty()
    }

    pub fn pass_rate(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.solvable as f64 / self.total as f64
        }
    }

    /// Median oracle difficulty value of one environment tier.
    pub fn tier_median(&self, env: EnvKind, tier: Difficulty) -> Option<f64> {
        let mut v: Vec<f64> = self
            .tasks
            .iter()
            .filter(|t| t.env_kind == env && t.difficulty == tier)
            .filter_map(|t| t.measure.difficulty_value())
            .collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
    }
}

fn verdict(task: &TaskSpec, measure: OracleMeasure, problem: Option<String>) -> TaskVerdict {
    TaskVerdict {
        task_id: task.task_id.clone(),
        env_kind: task.env_kind,
        difficulty: task.difficulty,
        solvable: problem.is_none(),
        measure,
        problem,
    }
}

/// Re-run the certifying oracle of one task.
pub fn verify_task(task: &TaskSpec) -> TaskVerdict {
    if let Err(e) = task.validate() {
        return verdict(task, OracleMeasure::None, Some(e.to_string()));
    }
    match &task.payload {
        TaskPayload::Lights(c) => match solve_bfs(c) {
            Ok(Some(path)) => {
                let problem = (path.len() < c.min_solution_length).then(|| {
                    format!("shortest solution has {} steps, below the declared {}", path.len(), c.min_solution_length)
                });
                let problem = problem.or_else(|| {
                    (path.len() > task.step_budget).then(|| "shortest solution exceeds the step budget".to_string())
                });
                verdict(task, OracleMeasure::Bfs { length: path.len() }, problem)
            }
            Ok(None) => verdict(task, OracleMeasure::None, Some("all-on state is unreachable".into())),
            Err(e) => verdict(task, OracleMeasure::None, Some(e.to_string())),
        },
        TaskPayload::Trading(c) => {
            let min_price = c.min_price();
            let problem = (min_price <= MIN_PRICE).then(|| format!("price path falls to {min_price}"));
            let problem = problem
                .or_else(|| (c.horizon > task.step_budget).then(|| "horizon exceeds the step budget".to_string()));
            verdict(task, OracleMeasure::Market { min_price }, problem)
        }
        TaskPayload::Energy(c) => {
            let run = run_oracle(c);
            let problem = (run.verdict != GridVerdict::Success)
                .then(|| format!("feasibility dispatcher ended with {:?} on day {}", run.verdict, run.days_survived));
            let problem = problem
                .or_else(|| (c.horizon > task.step_budget).then(|| "horizon exceeds the step budget".to_string()));
            let measure = OracleMeasure::Dispatch {
                days_survived: run.days_survived,
                mean_stability: run.mean_stability,
                carbon_ratio: run.carbon_ratio,
            };
            verdict(task, measure, problem)
        }
        TaskPayload::Repo(c) => match count_solutions(c) {
            Ok(solutions) => {
                let replays = certify_ground_truth(c);
                let problem = if solutions == 0 {
                    Some("no version assignment satisfies every constraint".to_string())
                } else if !replays {
                    Some("ground-truth install sequence does not reach success".to_string())
                } else {
                    None
                };
                verdict(task, OracleMeasure::Resolver { solutions, ground_truth_replays: replays }, problem)
            }
            Err(e) => verdict(task, OracleMeasure::None, Some(e.to_string())),
        },
    }
}

/// Re-run every oracle. Never fails; offenders are listed in the report.
pub fn verify_suite(tasks: &[TaskSpec]) -> VerificationReport {
    let verdicts: Vec<TaskVerdict> = tasks.par_iter().map(verify_task).collect();
    let offenders: Vec<String> = verdicts.iter().filter(|v| !v.solvable).map(|v| v.task_id.clone()).collect();
    for v in verdicts.iter().filter(|v| !v.solvable) {
        log::warn!("{} failed verification: {}", v.task_id, v.problem.as_deref().unwrap_or(""));
    }
    VerificationReport { total: verdicts.len(), solvable: verdicts.len() - offenders.len(), offenders, tasks: verdicts }
}
