//! Turn On Lights: a latent boolean activation network behind a hidden
//! display permutation.
//!
//! Internally light `i` may only be toggled while its condition holds, and a
//! condition only reads lights with a smaller internal index. Agents address
//! lights by display index; `display_perm[d]` is the internal index shown at
//! display position `d`.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{ArenaError, Result};
use crate::rng::RngStream;

/// Exhaustive search is refused above this many lights.
pub const BFS_MAX_LIGHTS: usize = 20;

pub const LIT: &str = "●";
pub const UNLIT: &str = "○";

/// Boolean condition over internal light indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    True,
    Var(usize),
    Not(Box<Condition>),
    And(Vec<Condition>),
    Or(Vec<Condition>),
}

impl Condition {
    /// Evaluate against a bitmask of internal light states.
    pub fn eval(&self, mask: u32) -> bool {
        match self {
            Condition::True => true,
            Condition::Var(i) => mask & (1 << i) != 0,
            Condition::Not(c) => !c.eval(mask),
            Condition::And(cs) => cs.iter().all(|c| c.eval(mask)),
            Condition::Or(cs) => cs.iter().any(|c| c.eval(mask)),
        }
    }

    pub fn vars(&self, out: &mut Vec<usize>) {
        match self {
            Condition::True => {}
            Condition::Var(i) => out.push(*i),
            Condition::Not(c) => c.vars(out),
            Condition::And(cs) | Condition::Or(cs) => cs.iter().for_each(|c| c.vars(out)),
        }
    }

    pub fn literal_count(&self) -> usize {
        let mut v = Vec::new();
        self.vars(&mut v);
        v.len()
    }

    fn is_compound(&self) -> bool {
        matches!(self, Condition::And(_) | Condition::Or(_))
    }

    /// Render with `name(i)` naming internal light `i`.
    pub fn render(&self, name: &dyn Fn(usize) -> String) -> String {
        match self {
            Condition::True => "True".to_string(),
            Condition::Var(i) => name(*i),
            Condition::Not(c) => {
                let inner = c.render(name);
                if c.is_compound() {
                    format!("not ({inner})")
                } else {
                    format!("not {inner}")
                }
            }
            Condition::And(cs) | Condition::Or(cs) => {
                let sep = if matches!(self, Condition::And(_)) { " and " } else { " or " };
                cs.iter()
                    .map(|c| {
                        let s = c.render(name);
                        if c.is_compound() {
                            format!("({s})")
                        } else {
                            s
                        }
                    })
                    .collect::<Vec<_>>()
                    .join(sep)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LightRule {
    pub target: usize,
    pub condition: Condition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LightTaskConfig {
    pub n_lights: usize,
    pub rules: Vec<LightRule>,
    /// Display index → internal index.
    pub display_perm: Vec<usize>,
    /// Lower bound the generator enforced on the shortest solution.
    pub min_solution_length: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LightState {
    /// Internal indexing.
    pub bits: Vec<bool>,
}

impl LightState {
    pub fn all_off(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    pub fn from_mask(mask: u32, n: usize) -> Self {
        Self { bits: (0..n).map(|i| mask & (1 << i) != 0).collect() }
    }

    pub fn mask(&self) -> u32 {
        self.bits.iter().enumerate().fold(0, |m, (i, b)| if *b { m | (1 << i) } else { m })
    }

    pub fn all_on(&self) -> bool {
        self.bits.iter().all(|b| *b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToggleOutcome {
    pub state: LightState,
    pub feedback: String,
    pub progressed: bool,
}

pub fn toggled_feedback(display_index: usize, on: bool) -> String {
    format!("Toggled B{display_index} to {}", if on { "True" } else { "False" })
}

/// The one generic failure sentence. It names the bulb that was addressed but
/// never the condition that blocked it.
pub fn failure_feedback(display_index: usize) -> String {
    format!("B{display_index} remains inactive... remaining bulbs should be in specific mode.")
}

impl LightTaskConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.n_lights;
        if n == 0 || n > 32 {
            return Err(ArenaError::config("n_lights", format!("must be in 1..=32, got {n}")));
        }
        if self.rules.len() != n {
            return Err(ArenaError::config("rules", format!("expected {n} rules, got {}", self.rules.len())));
        }
        for (i, r) in self.rules.iter().enumerate() {
            if r.target != i {
                return Err(ArenaError::config(
                    format!("rules[{i}].target"),
                    format!("expected {i}, got {}", r.target),
                ));
            }
            let mut vars = Vec::new();
            r.condition.vars(&mut vars);
            if let Some(v) = vars.iter().find(|v| **v >= i) {
                return Err(ArenaError::config(
                    format!("rules[{i}].condition"),
                    format!("references light {v}, which is not below {i}"),
                ));
            }
        }
        if self.rules[0].condition != Condition::True {
            return Err(ArenaError::config("rules[0].condition", "light 0 must be unconditional"));
        }
        let mut seen = vec![false; n];
        if self.display_perm.len() != n {
            return Err(ArenaError::config("display_perm", "length must equal n_lights"));
        }
        for &p in &self.display_perm {
            if p >= n || seen[p] {
                return Err(ArenaError::config("display_perm", "not a permutation"));
            }
            seen[p] = true;
        }
        Ok(())
    }

    /// Internal index → display index.
    pub fn inverse_perm(&self) -> Vec<usize> {
        let mut inv = vec![0; self.n_lights];
        for (d, &i) in self.display_perm.iter().enumerate() {
            inv[i] = d;
        }
        inv
    }

    /// Ground-truth rule text in display coordinates, one line per bulb.
    pub fn rules_text(&self) -> String {
        let inv = self.inverse_perm();
        let name = |i: usize| format!("B{}", inv[i]);
        let mut text = String::from("Hidden activation rules (a bulb can be toggled only while its rule is true):\n");
        for (d, &i) in self.display_perm.iter().enumerate() {
            writeln!(text, "B{d}: {}", self.rules[i].condition.render(&name)).unwrap();
        }
        text
    }

    /// Three bulbs: B0 always, B1 needs B0, B2 needs B0 and not B1.
    pub fn tutorial() -> Self {
        Self {
            n_lights: 3,
            rules: vec![
                LightRule { target: 0, condition: Condition::True },
                LightRule { target: 1, condition: Condition::Var(0) },
                LightRule {
                    target: 2,
                    condition: Condition::And(vec![Condition::Not(Box::new(Condition::Var(1))), Condition::Var(0)]),
                },
            ],
            display_perm: vec![0, 1, 2],
            min_solution_length: 3,
        }
    }
}

/// Toggle the bulb at `display_index`. Out-of-range indices leave the state
/// untouched and yield an input-error message.
pub fn apply_toggle(state: &LightState, config: &LightTaskConfig, display_index: i64) -> ToggleOutcome {
    let n = config.n_lights;
    if display_index < 0 || display_index as usize >= n {
        return ToggleOutcome {
            state: state.clone(),
            feedback: format!("Invalid action: there is no bulb {display_index}. Valid indices are 0 to {}.", n - 1),
            progressed: false,
        };
    }
    let d = display_index as usize;
    let i = config.display_perm[d];
    if config.rules[i].condition.eval(state.mask()) {
        let mut next = state.clone();
        next.bits[i] = !next.bits[i];
        let on = next.bits[i];
        ToggleOutcome { state: next, feedback: toggled_feedback(d, on), progressed: true }
    } else {
        ToggleOutcome { state: state.clone(), feedback: failure_feedback(d), progressed: false }
    }
}

/// Bulbs in display order, lit as `●`, unlit as `○`, space separated.
pub fn render_observation(state: &LightState, config: &LightTaskConfig) -> String {
    config.display_perm.iter().map(|&i| if state.bits[i] { LIT } else { UNLIT }).collect::<Vec<_>>().join(" ")
}

/// Shortest display-index toggle sequence from all-off to all-on, if any.
/// Ties between equally short paths go to the lexicographically smallest
/// sequence of display indices.
pub fn solve_bfs(config: &LightTaskConfig) -> Result<Option<Vec<usize>>> {
    let n = config.n_lights;
    if n > BFS_MAX_LIGHTS {
        return Err(ArenaError::Capacity(format!(
            "exhaustive search supports at most {BFS_MAX_LIGHTS} lights, got {n}"
        )));
    }
    let goal: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    if goal == 0 {
        return Ok(Some(Vec::new()));
    }
    let size = 1usize << n;
    // parent[s] = (previous state, display action); u32::MAX marks unvisited.
    let mut parent: Vec<(u32, u8)> = vec![(u32::MAX, 0); size];
    parent[0] = (0, 0);
    let mut queue = VecDeque::from([0u32]);
    while let Some(s) = queue.pop_front() {
        for (d, &i) in config.display_perm.iter().enumerate() {
            if !config.rules[i].condition.eval(s) {
                continue;
            }
            let t = s ^ (1 << i);
            if parent[t as usize].0 != u32::MAX {
                continue;
            }
            parent[t as usize] = (s, d as u8);
            if t == goal {
                let mut path = Vec::new();
                let mut cur = t;
                while cur != 0 {
                    let (p, a) = parent[cur as usize];
                    path.push(a as usize);
                    cur = p;
                }
                path.reverse();
                return Ok(Some(path));
            }
            queue.push_back(t);
        }
    }
    Ok(None)
}

/// Relative weights of the binary operators and the negation probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorMix {
    pub and_weight: f64,
    pub or_weight: f64,
    pub not_prob: f64,
}

impl Default for OperatorMix {
    fn default() -> Self {
        Self { and_weight: 0.6, or_weight: 0.4, not_prob: 0.35 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightsParams {
    pub n_lights: usize,
    pub operator_mix: OperatorMix,
    /// Probability of each additional literal beyond the first (max 3).
    pub density: f64,
    pub min_solution_length: usize,
}

impl LightsParams {
    pub fn new(n_lights: usize, min_solution_length: usize) -> Self {
        Self { n_lights, operator_mix: OperatorMix::default(), density: 0.5, min_solution_length }
    }
}

pub const LIGHTS_REJECTION_BUDGET: usize = 20_000;

fn sample_condition(rng: &mut RngStream, target: usize, params: &LightsParams) -> Condition {
    if target == 0 {
        return Condition::True;
    }
    let mut k = 1;
    while k < 3 && k < target && rng.bernoulli(params.density) {
        k += 1;
    }
    let mut pool: Vec<usize> = (0..target).collect();
    rng.shuffle(&mut pool);
    let mut vars: Vec<usize> = pool[..k].to_vec();
    vars.sort_unstable();
    let lits: Vec<Condition> = vars
        .into_iter()
        .map(|v| {
            if rng.bernoulli(params.operator_mix.not_prob) {
                Condition::Not(Box::new(Condition::Var(v)))
            } else {
                Condition::Var(v)
            }
        })
        .collect();
    let mix = params.operator_mix;
    let pick_and = |rng: &mut RngStream| {
        let total = mix.and_weight + mix.or_weight;
        total <= 0.0 || rng.next_f64() * total < mix.and_weight
    };
    let mut lits = lits.into_iter();
    let first = lits.next().expect("at least one literal");
    match k {
        1 => first,
        2 => {
            let second = lits.next().unwrap();
            if pick_and(rng) {
                Condition::And(vec![first, second])
            } else {
                Condition::Or(vec![first, second])
            }
        }
        _ => {
            let second = lits.next().unwrap();
            let third = lits.next().unwrap();
            let inner_and = pick_and(rng);
            let outer_and = pick_and(rng);
            match (inner_and, outer_and) {
                (true, true) => Condition::And(vec![first, second, third]),
                (false, false) => Condition::Or(vec![first, second, third]),
                (true, false) => Condition::Or(vec![Condition::And(vec![first, second]), third]),
                (false, true) => Condition::And(vec![Condition::Or(vec![first, second]), third]),
            }
        }
    }
}

/// Sample rules and a display permutation, accepting only configurations whose
/// shortest solution exists and is at least `min_solution_length` long.
pub fn generate_lights_task(seed: u64, params: &LightsParams) -> Result<LightTaskConfig> {
    let n = params.n_lights;
    if n == 0 || n > BFS_MAX_LIGHTS {
        return Err(ArenaError::config("n_lights", format!("must be in 1..={BFS_MAX_LIGHTS}, got {n}")));
    }
    if !(0.0..=1.0).contains(&params.density) || !(0.0..=1.0).contains(&params.operator_mix.not_prob) {
        return Err(ArenaError::config("density", "probabilities must lie in [0, 1]"));
    }
    let mut rng = RngStream::new(seed, "lights");
    for _ in 0..LIGHTS_REJECTION_BUDGET {
        let rules: Vec<LightRule> =
            (0..n).map(|target| LightRule { target, condition: sample_condition(&mut rng, target, params) }).collect();
        let display_perm = rng.permutation(n);
        let config =
            LightTaskConfig { n_lights: n, rules, display_perm, min_solution_length: params.min_solution_length };
        if let Some(path) = solve_bfs(&config)? {
            if path.len() >= params.min_solution_length {
                return Ok(config);
            }
        }
    }
    Err(ArenaError::Generation(format!(
        "no lights configuration with N={n} and minimal solution length >= {} found in {} attempts; \
         lower min_solution_length or raise the negation probability",
        params.min_solution_length, LIGHTS_REJECTION_BUDGET
    )))
}
