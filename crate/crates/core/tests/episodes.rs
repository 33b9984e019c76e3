use std::sync::Arc;

use arena_core::energy::{DispatchAction, EnergyConfig};
use arena_core::lights::LightTaskConfig;
use arena_core::repo::RepoConfig;
use arena_core::trading::{MarketConfig, TradeAction};
use arena_core::{
    create_episode, parse_action, AgentAction, ArenaError, Difficulty, EnvKind, EpisodeStatus, Snapshot, TaskPayload,
    TaskSpec,
};

fn task(payload: TaskPayload, budget: usize) -> Arc<TaskSpec> {
    Arc::new(TaskSpec::new("t-0", 1, budget, Difficulty::Easy, payload))
}

fn lights_task(budget: usize) -> Arc<TaskSpec> {
    task(TaskPayload::Lights(LightTaskConfig::tutorial()), budget)
}

#[test]
fn lights_tutorial_episode_succeeds() {
    let mut ep = create_episode(lights_task(200), false).unwrap();
    assert_eq!(ep.observation().text, "○ ○ ○");
    let mut last = None;
    for i in [1, 0, 2, 1] {
        last = Some(ep.step(AgentAction::Toggle { index: i }).unwrap());
    }
    let out = last.unwrap();
    assert!(out.done && out.success);
    assert_eq!(out.reward, 1.0);
    assert_eq!(ep.status(), EpisodeStatus::Success);
    assert_eq!(ep.trace().records.len(), 4);
    assert!(!ep.trace().records[0].progressed);
    assert!(matches!(ep.step(AgentAction::Toggle { index: 0 }), Err(ArenaError::State(_))));
}

#[test]
fn budget_boundary() {
    let mut ep = create_episode(lights_task(2), false).unwrap();
    let a = ep.step(AgentAction::Toggle { index: 1 }).unwrap();
    assert_eq!(a.status, EpisodeStatus::Running);
    assert_eq!(a.remaining_steps, 1);
    let b = ep.step(AgentAction::Toggle { index: 1 }).unwrap();
    assert_eq!(b.status, EpisodeStatus::BudgetExhausted);
    assert!(b.done && !b.success);
    assert_eq!(ep.trace().records.len(), 2);
}

#[test]
fn winning_on_last_step_is_success() {
    let mut ep = create_episode(lights_task(3), false).unwrap();
    for i in [0, 2, 1] {
        ep.step(AgentAction::Toggle { index: i }).unwrap();
    }
    assert_eq!(ep.status(), EpisodeStatus::Success);
}

#[test]
fn wrong_action_kind_is_a_protocol_error() {
    let mut ep = create_episode(lights_task(10), false).unwrap();
    let err = ep.step(AgentAction::Shell { command: "pip list".into() }).unwrap_err();
    assert!(matches!(err, ArenaError::Protocol(_)));
    assert_eq!(ep.step_index(), 0);
}

#[test]
fn malformed_action_consumes_a_step() {
    let mut ep = create_episode(lights_task(10), false).unwrap();
    let out = ep.step(parse_action(EnvKind::Lights, "flip everything")).unwrap();
    assert!(out.feedback.starts_with("Invalid action format"));
    assert_eq!(ep.step_index(), 1);
    assert!(!ep.trace().records[0].progressed);
}

#[test]
fn rules_revealed_only_changes_text() {
    let hidden = create_episode(lights_task(10), false).unwrap();
    let shown = create_episode(lights_task(10), true).unwrap();
    assert_eq!(hidden.snapshot(), shown.snapshot());
    let text = shown.observation().text;
    assert!(text.starts_with("Rules:\n"));
    assert!(text.ends_with(&hidden.observation().text));
    assert!(text.contains(&LightTaskConfig::tutorial().rules_text().trim_end().to_string()));
}

#[test]
fn malformed_payload_names_the_field() {
    let mut cfg = LightTaskConfig::tutorial();
    cfg.display_perm = vec![0, 0, 1];
    let err = create_episode(task(TaskPayload::Lights(cfg), 10), false).unwrap_err();
    assert!(matches!(err, ArenaError::Config { ref field, .. } if field == "display_perm"), "{err}");
}

#[test]
fn trading_tutorial_replay() {
    let mut ep = create_episode(task(TaskPayload::Trading(MarketConfig::tutorial()), 120), false).unwrap();
    let text = ep.observation().text;
    assert!(text.contains("Cash: 100.00"), "{text}");
    assert!(text.contains("News for tomorrow: F0 rose significantly (+0.10) | F1 rose slightly (+0.05)"), "{text}");
    let wire = [
        r#"{"buy": {"S0": 100}, "sell": {}}"#,
        r#"{"buy": {"S1": 51}, "sell": {"S0": 100}}"#,
        r#"{"buy": {}, "sell": {}}"#,
    ];
    for w in wire {
        ep.step(parse_action(EnvKind::Trading, w)).unwrap();
    }
    assert_eq!(ep.status(), EpisodeStatus::Success);
    let s = ep.summary();
    assert!((s.final_value.unwrap() - 110.415).abs() < 1e-9);
    assert!((s.profit_rate.unwrap() - 0.10415).abs() < 1e-9);
    let last = ep.trace().records.last().unwrap();
    assert!((last.reward - 110.415).abs() < 1e-9);
    assert!(!ep.observation().text.contains("News"));
}

#[test]
fn trading_malformed_holds_and_advances() {
    let mut ep = create_episode(task(TaskPayload::Trading(MarketConfig::tutorial()), 120), false).unwrap();
    let out = ep.step(parse_action(EnvKind::Trading, "buy everything")).unwrap();
    assert!(out.feedback.contains("Holding positions"));
    let Snapshot::Trading { day, cash, .. } = out.observation.snapshot else { panic!() };
    assert_eq!((day, cash), (1, 100.0));
    assert!(!ep.trace().records[0].progressed);
}

#[test]
fn energy_day_through_episode() {
    let mut ep = create_episode(task(TaskPayload::Energy(EnergyConfig::flat(0.9, 1.0, 1.1)), 120), false).unwrap();
    let out = ep
        .step(AgentAction::Dispatch(DispatchAction { thermal: 10.0, wind: 20.0, solar: 30.0, battery: -10.0 }))
        .unwrap();
    assert!(out.feedback.contains("net supply 52.0 MW"), "{}", out.feedback);
    // Cost 311 exceeds the 210 budget of a 50 MW day.
    assert!(out.feedback.contains("Budget violation"));
    assert_eq!(out.reward, 0.5);
    let Snapshot::Energy { state_of_charge, carbon_ratio, .. } = out.observation.snapshot else { panic!() };
    assert_eq!(state_of_charge, 10.0);
    assert!((carbon_ratio - 9.0 / 62.0).abs() < 1e-12);
}

#[test]
fn walkthrough_efficiencies_fail_validation() {
    let err = create_episode(task(TaskPayload::Energy(EnergyConfig::tutorial()), 120), false).unwrap_err();
    assert!(matches!(err, ArenaError::Config { ref field, .. } if field == "efficiency"));
}

#[test]
fn energy_three_zero_days_fail() {
    let mut ep = create_episode(task(TaskPayload::Energy(EnergyConfig::flat(1.0, 1.0, 1.0)), 120), false).unwrap();
    for _ in 0..3 {
        ep.step(AgentAction::Dispatch(DispatchAction::default())).unwrap();
    }
    assert_eq!(ep.status(), EpisodeStatus::Failure);
}

const REPO_TUTORIAL: [(&str, &str); 12] = [
    ("pip install python==3.10", "Successfully installed python==3.10"),
    ("python run.py", "ModuleNotFoundError: No module named 'pkg1'."),
    ("pip install pkg1==1.0", "Successfully installed pkg1==1.0"),
    ("python run.py", "ModuleNotFoundError: No module named 'pkg2'."),
    ("pip install pkg2==2.0", "Successfully installed pkg2==2.0"),
    ("python run.py", "RuntimeError: ABI mismatch detected between 'pkg1' and dependent packages."),
    ("pip install pkg2==1.2", "Successfully installed pkg2==1.2"),
    ("python run.py", "ModuleNotFoundError: No module named 'pkg3'."),
    ("pip install pkg3==0.1", "Successfully installed pkg3==0.1"),
    ("python run.py", "RuntimeError: tightly-coupled components are out of sync with 'pkg1'."),
    ("pip install pkg3==1.0", "Successfully installed pkg3==1.0"),
    ("python run.py", "Task completed! Project ran successfully!"),
];

#[test]
fn repo_tutorial_script() {
    let mut ep = create_episode(task(TaskPayload::Repo(RepoConfig::tutorial()), 120), false).unwrap();
    for (i, (cmd, expected)) in REPO_TUTORIAL.iter().enumerate() {
        let out = ep.step(AgentAction::Shell { command: cmd.to_string() }).unwrap();
        assert_eq!(out.feedback, *expected, "step {}", i + 1);
        assert_eq!(out.success, i == 11);
    }
    assert_eq!(ep.status(), EpisodeStatus::Success);
}

#[test]
fn repo_unknown_command_consumes_a_step() {
    let mut ep = create_episode(task(TaskPayload::Repo(RepoConfig::tutorial()), 120), false).unwrap();
    let out = ep.step(AgentAction::Shell { command: "ls -la".into() }).unwrap();
    assert!(out.feedback.starts_with("Unsupported command"));
    assert_eq!(ep.step_index(), 1);
}

#[test]
fn replay_produces_identical_trace_bytes() {
    let run = || {
        let mut ep = create_episode(task(TaskPayload::Trading(MarketConfig::tutorial()), 120), false).unwrap();
        for a in [TradeAction { buy: [("S1".into(), 30)].into(), sell: Default::default() }, TradeAction::noop()] {
            ep.step(AgentAction::Trade(a)).unwrap();
        }
        ep.trace().to_canonical()
    };
    assert_eq!(run(), run());
}
