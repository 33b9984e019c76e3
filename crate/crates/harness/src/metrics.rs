use std::collections::BTreeMap;

use arena_core::{EnvKind, Trace};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::runner::RunRecord;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("k must be at least 1")]
    EmptyRuns,
    #[error("task {task} has {found} runs, expected {expected}")]
    Ragged { task: usize, found: usize, expected: usize },
    #[error("trading outcome for task {task} has no profit rate")]
    MissingProfit { task: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub success: bool,
    pub profit_rate: Option<f64>,
}

impl RunOutcome {
    pub fn success(success: bool) -> Self {
        Self { success, profit_rate: None }
    }

    pub fn profit(rate: f64) -> Self {
        Self { success: true, profit_rate: Some(rate) }
    }
}

/// Avg@k and Pass@k as fractions. For trading both are profit rates: the
/// mean over all runs and the mean over tasks of the best run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub k: usize,
    pub avg_at_k: f64,
    pub pass_at_k: f64,
}

fn scores_unchecked(env: EnvKind, runs: &[Vec<RunOutcome>]) -> Result<Scores, MetricsError> {
    let k = runs.iter().map(Vec::len).max().unwrap_or(0);
    let tasks: Vec<&Vec<RunOutcome>> = runs.iter().filter(|r| !r.is_empty()).collect();
    let total: usize = tasks.iter().map(|r| r.len()).sum();
    if total == 0 {
        return Ok(Scores { k, avg_at_k: 0.0, pass_at_k: 0.0 });
    }
    if env == EnvKind::Trading {
        let mut sum = 0.0;
        let mut best_sum = 0.0;
        for (t, r) in tasks.iter().enumerate() {
            let profits: Vec<f64> = r
                .iter()
                .map(|o| o.profit_rate.ok_or(MetricsError::MissingProfit { task: t }))
                .collect::<Result<_, _>>()?;
            sum += profits.iter().sum::<f64>();
            best_sum += profits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        return Ok(Scores { k, avg_at_k: sum / total as f64, pass_at_k: best_sum / tasks.len() as f64 });
    }
    let successes = tasks.iter().flat_map(|r| r.iter()).filter(|o| o.success).count();
    let solved = tasks.iter().filter(|r| r.iter().any(|o| o.success)).count();
    Ok(Scores { k, avg_at_k: successes as f64 / total as f64, pass_at_k: solved as f64 / tasks.len() as f64 })
}

/// Scores of a tasks × runs matrix; every task must have the same run count.
pub fn compute_metrics(env: EnvKind, runs: &[Vec<RunOutcome>]) -> Result<Scores, MetricsError> {
    let k = runs.first().map_or(0, Vec::len);
    if k == 0 {
        return Err(MetricsError::EmptyRuns);
    }
    if let Some((task, r)) = runs.iter().enumerate().find(|(_, r)| r.len() != k) {
        return Err(MetricsError::Ragged { task, found: r.len(), expected: k });
    }
    scores_unchecked(env, runs)
}

fn loop_key(trace: &Trace, i: usize) -> Option<(String, String)> {
    let state = serde_json::to_string(trace.state_before(i)).ok()?;
    let action = serde_json::to_string(&trace.records[i].action).ok()?;
    Some((state, action))
}

/// Share of actions spent in runs of two or more identical consecutive
/// (state, action) pairs none of which made progress. Defined for lights and
/// repo traces; other environments return None.
pub fn compute_loop_ratio(trace: &Trace) -> Option<f64> {
    if !matches!(trace.env_kind, EnvKind::Lights | EnvKind::Repo) {
        return None;
    }
    let n = trace.records.len();
    if n == 0 {
        return Some(0.0);
    }
    let keys: Vec<Option<(String, String)>> = (0..n).map(|i| loop_key(trace, i)).collect();
    let mut looped = 0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && keys[j] == keys[i] {
            j += 1;
        }
        let run = j - i;
        if run >= 2 && trace.records[i..j].iter().all(|r| !r.progressed) {
            looped += run;
        }
        i = j;
    }
    Some(looped as f64 / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub task_id: String,
    pub runs: usize,
    pub successes: usize,
    pub best_profit_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub env_kind: EnvKind,
    pub k: usize,
    pub tasks: usize,
    pub avg_at_k: f64,
    pub pass_at_k: f64,
    pub per_task: Vec<TaskMetrics>,
    pub mean_profit_rate: Option<f64>,
    pub mean_loop_ratio: Option<f64>,
    /// Episode step counts bucketed by `STEP_BIN` (key = bin start).
    pub step_histogram: BTreeMap<usize, usize>,
    pub excluded_runs: usize,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

pub const STEP_BIN: usize = 10;

/// One report per environment present in `records`. Runs marked as
/// infrastructure failures are counted but excluded from every score.
pub fn build_reports(records: &[RunRecord]) -> Vec<MetricsReport> {
    let mut out = Vec::new();
    for env in EnvKind::ALL {
        let of_env: Vec<&RunRecord> = records.iter().filter(|r| r.env_kind == env).collect();
        if of_env.is_empty() {
            continue;
        }
        let valid: Vec<&RunRecord> = of_env.iter().copied().filter(|r| r.infrastructure_failure.is_none()).collect();
        let mut by_task: BTreeMap<&str, Vec<&RunRecord>> = BTreeMap::new();
        for r in &of_env {
            by_task.entry(r.task_id.as_str()).or_default();
        }
        for r in &valid {
            by_task.entry(r.task_id.as_str()).or_default().push(r);
        }
        let matrix: Vec<Vec<RunOutcome>> = by_task
            .values()
            .map(|rs| rs.iter().map(|r| RunOutcome { success: r.success, profit_rate: r.profit_rate }).collect())
            .collect();
        let scores = scores_unchecked(env, &matrix).unwrap_or(Scores { k: 0, avg_at_k: 0.0, pass_at_k: 0.0 });
        let per_task = by_task
            .iter()
            .map(|(id, rs)| TaskMetrics {
                task_id: id.to_string(),
                runs: rs.len(),
                successes: rs.iter().filter(|r| r.success).count(),
                best_profit_rate: rs.iter().filter_map(|r| r.profit_rate).reduce(f64::max),
            })
            .collect();
        let mean = |xs: Vec<f64>| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
        let mut step_histogram = BTreeMap::new();
        for r in &valid {
            *step_histogram.entry(r.steps / STEP_BIN * STEP_BIN).or_insert(0) += 1;
        }
        let tokens = |f: fn(&RunRecord) -> Option<u64>| {
            let xs: Vec<u64> = valid.iter().filter_map(|r| f(r)).collect();
            (!xs.is_empty()).then(|| xs.iter().sum())
        };
        out.push(MetricsReport {
            env_kind: env,
            k: scores.k,
            tasks: by_task.len(),
            avg_at_k: scores.avg_at_k,
            pass_at_k: scores.pass_at_k,
            per_task,
            mean_profit_rate: mean(valid.iter().filter_map(|r| r.profit_rate).collect()),
            mean_loop_ratio: mean(valid.iter().filter_map(|r| r.loop_ratio).collect()),
            step_histogram,
            excluded_runs: of_env.len() - valid.len(),
            prompt_tokens: tokens(|r| r.prompt_tokens),
            completion_tokens: tokens(|r| r.completion_tokens),
        });
    }
    out
}
