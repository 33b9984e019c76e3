//! Implementation of the `arena` subcommands, kept in a library so the
//! commands can be driven from tests.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use arena_baselines::{make_policy, POLICY_NAMES};
use arena_core::{Difficulty, EnvKind, RngStream, TaskSpec};
use arena_curation::{generate_suite, load_suite, verify_suite, Suite, SuiteName, SuiteProfile, VerificationReport};
use arena_harness::{
    build_reports, evaluate, render_reports, write_runs_csv, write_summary_json, Agent, Memory, MetricsReport,
    RemoteAgent, RemoteConfig, RunConfig, ScriptedAgent,
};
use arena_service::{AppState, ServiceConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "arena", version, about = "Generate, check and play interactive benchmark suites")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a suite, certify every task and write it to a directory.
    Generate(GenerateArgs),
    /// Re-run every task's oracle and report unsolvable tasks.
    Verify { suite: PathBuf },
    /// Print the composition of a suite.
    Describe { suite: PathBuf },
    /// Run an agent k times on every task and write metrics.
    Eval(EvalArgs),
    /// Serve sessions over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value = "lite")]
    pub profile: SuiteName,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub suite: PathBuf,
    /// A scripted policy name, or `remote` for a chat-completion endpoint.
    #[arg(long)]
    pub agent: String,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Show the ground-truth rules in the system prompt.
    #[arg(long)]
    pub rules: bool,
    /// History window: `default`, `unlimited` or a number of steps.
    #[arg(long, default_value = "default")]
    pub memory: Memory,
    #[arg(long, default_value_t = 4)]
    pub parallel: usize,
    #[arg(long)]
    pub env: Option<EnvKind>,
    #[arg(long)]
    pub tier: Option<Difficulty>,
    /// Seed for random agents.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, default_value_t = 0.6)]
    pub temperature: f64,
    /// Extra request header as `Name: value`; repeatable.
    #[arg(long = "header")]
    pub headers: Vec<String>,
    #[arg(long, default_value_t = 3)]
    pub retries: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub suite: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    #[arg(long, default_value_t = 24)]
    pub idle_timeout_hours: u64,
    #[arg(long)]
    pub trace_dir: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => {
            let (suite, report, elapsed) = generate(&args)?;
            print!("{}", suite.manifest.describe());
            println!("{}", verification_summary(&report));
            println!("wrote {} in {:.1}s", args.out.display(), elapsed.as_secs_f64());
            Ok(())
        }
        Command::Verify { suite } => {
            let report = verify(&suite)?;
            println!("{}", verification_summary(&report));
            if !report.all_solvable() {
                bail!("{} of {} tasks failed verification", report.offenders.len(), report.total);
            }
            Ok(())
        }
        Command::Describe { suite } => {
            print!("{}", load(&suite)?.manifest.describe());
            Ok(())
        }
        Command::Eval(args) => {
            let reports = eval(&args)?;
            print!("{}", render_reports(&reports));
            println!("results in {}", args.out.display());
            Ok(())
        }
        Command::Serve(args) => serve(&args),
    }
}

fn load(dir: &Path) -> Result<Suite> {
    load_suite(dir).with_context(|| format!("cannot load suite from {}", dir.display()))
}

/// Generate and verify a suite; the suite is rejected if any task fails.
pub fn generate(args: &GenerateArgs) -> Result<(Suite, VerificationReport, Duration)> {
    let start = Instant::now();
    let profile = SuiteProfile::named(args.profile);
    let suite = generate_suite(&profile, args.seed, &args.out)?;
    let report = verify_suite(&suite.tasks);
    if !report.all_solvable() {
        bail!("generated suite has unsolvable tasks: {}", report.offenders.join(", "));
    }
    Ok((suite, report, start.elapsed()))
}

pub fn verify(dir: &Path) -> Result<VerificationReport> {
    Ok(verify_suite(&load(dir)?.tasks))
}

pub fn verification_summary(report: &VerificationReport) -> String {
    let mut out = format!("{}/{} tasks solvable ({:.1}%)", report.solvable, report.total, report.pass_rate() * 100.0);
    for t in report.tasks.iter().filter(|t| !t.solvable) {
        out.push_str(&format!("\n  {}: {}", t.task_id, t.problem.as_deref().unwrap_or("unsolvable")));
    }
    out
}

fn parse_header(h: &str) -> Result<(String, String)> {
    let (k, v) = h.split_once(':').with_context(|| format!("header '{h}' is not of the form 'Name: value'"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

pub fn eval(args: &EvalArgs) -> Result<Vec<MetricsReport>> {
    if args.k == 0 {
        bail!("k must be at least 1");
    }
    let suite = load(&args.suite)?;
    let tasks: Vec<Arc<TaskSpec>> = suite
        .tasks
        .into_iter()
        .filter(|t| args.env.is_none_or(|e| e == t.env_kind) && args.tier.is_none_or(|d| d == t.difficulty))
        .map(Arc::new)
        .collect();
    if tasks.is_empty() {
        bail!("no tasks match the filters");
    }
    let remote = if args.agent == "remote" {
        let (Some(endpoint), Some(model)) = (&args.endpoint, &args.model) else {
            bail!("the remote agent needs --endpoint and --model");
        };
        let mut cfg = RemoteConfig::new(endpoint.clone(), model.clone());
        cfg.temperature = args.temperature;
        cfg.headers = args.headers.iter().map(|h| parse_header(h)).collect::<Result<_>>()?;
        Some(cfg)
    } else {
        if !POLICY_NAMES.contains(&args.agent.as_str()) {
            bail!("unknown agent '{}', expected remote or one of {}", args.agent, POLICY_NAMES.join(", "));
        }
        for t in &tasks {
            make_policy(&args.agent, t, 0).map_err(anyhow::Error::msg)?;
        }
        None
    };
    let config = RunConfig {
        rules_revealed: args.rules,
        memory: args.memory,
        max_retries: args.retries,
        ..RunConfig::default()
    };
    let factory = |task: &TaskSpec, run: usize| -> Box<dyn Agent> {
        match &remote {
            Some(cfg) => Box::new(RemoteAgent::new(cfg.clone())),
            None => {
                let seed = RngStream::derive_seed(args.seed, &format!("{}/{run}", task.task_id));
                Box::new(ScriptedAgent::new(make_policy(&args.agent, task, seed).expect("checked above")))
            }
        }
    };
    let runs = evaluate(&tasks, args.k, &config, args.parallel, factory)?;
    let traces = args.out.join("traces");
    fs::create_dir_all(&traces).with_context(|| format!("cannot create {}", traces.display()))?;
    for (record, trace) in &runs {
        let path = traces.join(format!("{}-run{}.json", record.task_id, record.run_index));
        fs::write(&path, trace.to_canonical()).with_context(|| format!("cannot write {}", path.display()))?;
    }
    let records: Vec<_> = runs.into_iter().map(|(r, _)| r).collect();
    let reports = build_reports(&records);
    write_runs_csv(&args.out.join("runs.csv"), &records)?;
    write_summary_json(&args.out.join("summary.json"), &reports)?;
    Ok(reports)
}

pub fn serve(args: &ServeArgs) -> Result<()> {
    let suite = load(&args.suite)?;
    let profile = SuiteProfile::named(suite.manifest.profile);
    let config = ServiceConfig {
        idle_timeout: Duration::from_secs(args.idle_timeout_hours * 3600),
        profile,
        trace_dir: args.trace_dir.clone(),
    };
    let state = AppState::new(suite.tasks, config);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(arena_service::serve(state, args.addr))?;
    Ok(())
}
