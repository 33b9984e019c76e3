use std::fs;
use std::path::Path;

use arena_core::canon::{from_canonical, to_canonical};
use arena_core::{ParseError, Trace};
use serde_json::Value;

use crate::metrics::MetricsReport;
use crate::runner::RunRecord;

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Encode(String),
}

/// One row per task × run.
pub fn write_runs_csv(path: &Path, records: &[RunRecord]) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "task_id",
        "env",
        "difficulty",
        "run",
        "agent",
        "rules_revealed",
        "status",
        "success",
        "steps",
        "final_value",
        "profit_rate",
        "mean_stability",
        "carbon_ratio",
        "loop_ratio",
        "format_errors",
        "prompt_tokens",
        "completion_tokens",
        "infrastructure_failure",
    ])?;
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.6}"));
    let opt_u = |x: Option<u64>| x.map_or(String::new(), |v| v.to_string());
    for r in records {
        let status = serde_json::to_value(r.status).map_err(|e| ExportError::Encode(e.to_string()))?;
        w.write_record([
            r.task_id.clone(),
            r.env_kind.to_string(),
            r.difficulty.to_string(),
            r.run_index.to_string(),
            r.agent.clone(),
            r.rules_revealed.to_string(),
            status.as_str().unwrap_or_default().to_string(),
            r.success.to_string(),
            r.steps.to_string(),
            opt(r.final_value),
            opt(r.profit_rate),
            opt(r.mean_stability),
            opt(r.carbon_ratio),
            opt(r.loop_ratio),
            r.format_errors.to_string(),
            opt_u(r.prompt_tokens),
            opt_u(r.completion_tokens),
            r.infrastructure_failure.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_json(path: &Path, reports: &[MetricsReport]) -> Result<(), ExportError> {
    fs::write(path, to_canonical(&reports).map_err(ExportError::Encode)?)?;
    Ok(())
}

/// Read a trace written either as a bare trace or as a session export.
pub fn load_trace(text: &str) -> Result<Trace, ParseError> {
    let value: Value = from_canonical(text)?;
    let inner = match value.get("trace") {
        Some(t) if t.is_object() => t.clone(),
        _ => value,
    };
    serde_json::from_value(inner).map_err(|e| ParseError { offset: 0, message: format!("not a trace: {e}") })
}

/// Human-readable score table.
pub fn render_reports(reports: &[MetricsReport]) -> String {
    let mut out = format!(
        "{:<8} {:>5} {:>3} {:>9} {:>9} {:>8} {:>8}\n",
        "env", "tasks", "k", "avg@k", "pass@k", "loop", "excluded"
    );
    for r in reports {
        let loop_ratio = r.mean_loop_ratio.map_or("-".to_string(), |v| format!("{:.3}", v));
        out.push_str(&format!(
            "{:<8} {:>5} {:>3} {:>8.2}% {:>8.2}% {:>8} {:>8}\n",
            r.env_kind.as_str(),
            r.tasks,
            r.k,
            r.avg_at_k * 100.0,
            r.pass_at_k * 100.0,
            loop_ratio,
            r.excluded_runs
        ));
    }
    out
}
