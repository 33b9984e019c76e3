use arena_core::{Difficulty, EnvKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    Lite,
    Challenge,
}

impl SuiteName {
    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::Lite => "lite",
            SuiteName::Challenge => "challenge",
        }
    }
}

impl std::str::FromStr for SuiteName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lite" => Ok(SuiteName::Lite),
            "challenge" => Ok(SuiteName::Challenge),
            other => Err(format!("unknown suite profile '{other}', expected lite or challenge")),
        }
    }
}

/// Per-environment value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerEnv<T> {
    pub lights: T,
    pub trading: T,
    pub energy: T,
    pub repo: T,
}

impl<T: Copy> PerEnv<T> {
    pub fn get(&self, env: EnvKind) -> T {
        match env {
            EnvKind::Lights => self.lights,
            EnvKind::Trading => self.trading,
            EnvKind::Energy => self.energy,
            EnvKind::Repo => self.repo,
        }
    }
}

/// Sampling ranges for one difficulty tier. Ranges are inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierParams {
    pub lights_n: (usize, usize),
    /// Minimal oracle length as a multiple of the bulb count, rounded up.
    pub lights_min_len_factor: f64,
    pub trading_dims: (usize, usize),
    pub energy_tau_carbon: (f64, f64),
    pub energy_tau_stability: (f64, f64),
    pub repo_packages: (usize, usize),
}

impl TierParams {
    pub fn standard(tier: Difficulty) -> Self {
        match tier {
            Difficulty::Easy => Self {
                lights_n: (4, 6),
                lights_min_len_factor: 1.0,
                trading_dims: (2, 2),
                energy_tau_carbon: (0.84, 0.88),
                energy_tau_stability: (0.40, 0.45),
                repo_packages: (3, 4),
            },
            Difficulty::Medium => Self {
                lights_n: (7, 9),
                lights_min_len_factor: 1.0,
                trading_dims: (3, 2),
                energy_tau_carbon: (0.79, 0.83),
                energy_tau_stability: (0.48, 0.52),
                repo_packages: (5, 6),
            },
            Difficulty::Hard => Self {
                lights_n: (10, 12),
                lights_min_len_factor: 1.5,
                trading_dims: (3, 3),
                energy_tau_carbon: (0.72, 0.76),
                energy_tau_stability: (0.55, 0.60),
                repo_packages: (7, 8),
            },
        }
    }

    pub fn lights_min_len(&self, n: usize) -> usize {
        (n as f64 * self.lights_min_len_factor).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteProfile {
    pub name: SuiteName,
    pub tasks_per_env: usize,
    /// Tasks per tier in easy, medium, hard order; sums to `tasks_per_env`.
    pub tier_counts: [usize; 3],
    pub step_budgets: PerEnv<usize>,
    /// Trading and energy run to a horizon equal to their step budget.
    pub tiers: [TierParams; 3],
}

const TIERS: [Difficulty; 3] = Difficulty::ALL;

impl SuiteProfile {
    pub fn lite() -> Self {
        Self {
            name: SuiteName::Lite,
            tasks_per_env: 30,
            tier_counts: [10, 10, 10],
            step_budgets: PerEnv { lights: 200, trading: 120, energy: 120, repo: 120 },
            tiers: TIERS.map(TierParams::standard),
        }
    }

    pub fn challenge() -> Self {
        Self {
            name: SuiteName::Challenge,
            tasks_per_env: 10,
            tier_counts: [3, 3, 4],
            step_budgets: PerEnv { lights: 1000, trading: 1000, energy: 1000, repo: 1000 },
            tiers: TIERS.map(TierParams::standard),
        }
    }

    pub fn named(name: SuiteName) -> Self {
        match name {
            SuiteName::Lite => Self::lite(),
            SuiteName::Challenge => Self::challenge(),
        }
    }

    pub fn tier_params(&self, tier: Difficulty) -> &TierParams {
        &self.tiers[tier_index(tier)]
    }

    /// Tier of the `index`-th task of an environment.
    pub fn tier_of(&self, index: usize) -> Difficulty {
        let mut acc = 0;
        for (t, &c) in TIERS.iter().zip(&self.tier_counts) {
            acc += c;
            if index < acc {
                return *t;
            }
        }
        Difficulty::Hard
    }

    pub fn total_tasks(&self) -> usize {
        self.tasks_per_env * EnvKind::ALL.len()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.tier_counts.iter().sum::<usize>() != self.tasks_per_env {
            return Err(format!("tier counts {:?} do not sum to {}", self.tier_counts, self.tasks_per_env));
        }
        for env in EnvKind::ALL {
            if self.step_budgets.get(env) == 0 {
                return Err(format!("{env} step budget must be positive"));
            }
        }
        if self.step_budgets.energy < 50 {
            return Err("energy horizon must be at least 50 days".into());
        }
        for t in &self.tiers {
            if t.lights_n.0 > t.lights_n.1 || t.repo_packages.0 > t.repo_packages.1 {
                return Err("tier ranges must be ordered".into());
            }
            if t.lights_n.1 > arena_core::lights::BFS_MAX_LIGHTS {
                return Err(format!("lights tiers are limited to {} bulbs", arena_core::lights::BFS_MAX_LIGHTS));
            }
        }
        Ok(())
    }
}

pub fn tier_index(tier: Difficulty) -> usize {
    match tier {
        Difficulty::Easy => 0,
        Difficulty::Medium => 1,
        Difficulty::Hard => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lite_matches_published_counts() {
        let p = SuiteProfile::lite();
        assert_eq!(p.total_tasks(), 120);
        assert_eq!(p.step_budgets, PerEnv { lights: 200, trading: 120, energy: 120, repo: 120 });
        assert_eq!(p.tier_of(9), Difficulty::Easy);
        assert_eq!(p.tier_of(10), Difficulty::Medium);
        assert_eq!(p.tier_of(29), Difficulty::Hard);
        p.validate().unwrap();
    }

    #[test]
    fn challenge_budgets() {
        let p = SuiteProfile::challenge();
        assert_eq!(p.total_tasks(), 40);
        assert!(EnvKind::ALL.iter().all(|e| p.step_budgets.get(*e) >= 1000));
        p.validate().unwrap();
    }

    #[test]
    fn hard_lights_need_longer_solutions() {
        let t = TierParams::standard(Difficulty::Hard);
        assert_eq!(t.lights_min_len(11), 17);
        assert_eq!(TierParams::standard(Difficulty::Easy).lights_min_len(5), 5);
    }
}
