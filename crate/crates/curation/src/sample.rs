use arena_core::canon::round_to;
use arena_core::energy::{generate_energy_task, EnergyParams};
use arena_core::lights::{generate_lights_task, LightsParams};
use arena_core::repo::{generate_repo_task, RepoParams};
use arena_core::trading::{generate_trading_task, TradingParams};
use arena_core::{Difficulty, EnvKind, RngStream, TaskPayload, TaskSpec};
use rayon::prelude::*;

use crate::profile::SuiteProfile;
use crate::SuiteError;

/// Seed of the `index`-th task of `env`.
pub fn task_seed(master_seed: u64, env: EnvKind, index: usize) -> u64 {
    RngStream::derive_seed(master_seed, &format!("{env}/{index}"))
}

pub fn task_id(profile: &SuiteProfile, env: EnvKind, index: usize) -> String {
    format!("{}-{env}-{index:03}", profile.name.as_str())
}

fn pick(rng: &mut RngStream, (lo, hi): (usize, usize)) -> usize {
    rng.range_inclusive(lo as i64, hi as i64) as usize
}

fn pick_tau(rng: &mut RngStream, (lo, hi): (f64, f64)) -> f64 {
    round_to(rng.uniform(lo, hi), 2)
}

fn generate_payload(
    profile: &SuiteProfile,
    env: EnvKind,
    tier: Difficulty,
    seed: u64,
) -> arena_core::Result<TaskPayload> {
    let params = profile.tier_params(tier);
    let mut rng = RngStream::new(seed, "tier-params");
    let horizon = profile.step_budgets.get(env);
    Ok(match env {
        EnvKind::Lights => {
            let n = pick(&mut rng, params.lights_n);
            TaskPayload::Lights(generate_lights_task(seed, &LightsParams::new(n, params.lights_min_len(n)))?)
        }
        EnvKind::Trading => {
            let (d, k) = params.trading_dims;
            TaskPayload::Trading(generate_trading_task(seed, &TradingParams::new(d, k, horizon))?)
        }
        EnvKind::Energy => {
            let mut p = EnergyParams::new(horizon);
            p.tau_carbon = pick_tau(&mut rng, params.energy_tau_carbon);
            p.tau_stability = pick_tau(&mut rng, params.energy_tau_stability);
            TaskPayload::Energy(generate_energy_task(seed, &p)?)
        }
        EnvKind::Repo => {
            let n = pick(&mut rng, params.repo_packages);
            TaskPayload::Repo(generate_repo_task(seed, &RepoParams::new(n))?)
        }
    })
}

/// Generate one task of a suite. Every generator certifies its output.
pub fn sample_task(
    profile: &SuiteProfile,
    master_seed: u64,
    env: EnvKind,
    index: usize,
) -> Result<TaskSpec, SuiteError> {
    let tier = profile.tier_of(index);
    let seed = task_seed(master_seed, env, index);
    let payload = generate_payload(profile, env, tier, seed).map_err(|source| SuiteError::Generation {
        env,
        tier,
        index,
        source,
    })?;
    Ok(TaskSpec::new(task_id(profile, env, index), seed, profile.step_budgets.get(env), tier, payload))
}

/// A task outside the suite layout, drawn from a tier's ranges with an
/// explicit seed. Ids look like `lite-lights-hard-s42`.
pub fn sample_adhoc(profile: &SuiteProfile, env: EnvKind, tier: Difficulty, seed: u64) -> Result<TaskSpec, SuiteError> {
    let payload = generate_payload(profile, env, tier, seed).map_err(|source| SuiteError::Generation {
        env,
        tier,
        index: 0,
        source,
    })?;
    let id = format!("{}-{env}-{tier}-s{seed}", profile.name.as_str());
    Ok(TaskSpec::new(id, seed, profile.step_budgets.get(env), tier, payload))
}

/// All tasks of a profile, ordered by environment then index.
pub fn sample_suite(profile: &SuiteProfile, master_seed: u64) -> Result<Vec<TaskSpec>, SuiteError> {
    profile.validate().map_err(SuiteError::Profile)?;
    let jobs: Vec<(EnvKind, usize)> =
        EnvKind::ALL.iter().flat_map(|&env| (0..profile.tasks_per_env).map(move |i| (env, i))).collect();
    let tasks =
        jobs.par_iter().map(|&(env, i)| sample_task(profile, master_seed, env, i)).collect::<Result<Vec<_>, _>>()?;
    log::info!("sampled {} {} tasks from master seed {master_seed}", tasks.len(), profile.name.as_str());
    Ok(tasks)
}
