//! Agent actions and their text wire forms.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::energy::DispatchAction;
use crate::task::EnvKind;
use crate::trading::TradeAction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentAction {
    /// Toggle the bulb at a display index (may be out of range).
    Toggle {
        index: i64,
    },
    Trade(TradeAction),
    Dispatch(DispatchAction),
    /// One shell line, interpreted by the repo environment.
    Shell {
        command: String,
    },
    /// Text that could not be read as an action. Consumes a step.
    Malformed {
        raw: String,
        message: String,
    },
}

impl AgentAction {
    pub fn env_kind(&self) -> Option<EnvKind> {
        match self {
            AgentAction::Toggle { .. } => Some(EnvKind::Lights),
            AgentAction::Trade(_) => Some(EnvKind::Trading),
            AgentAction::Dispatch(_) => Some(EnvKind::Energy),
            AgentAction::Shell { .. } => Some(EnvKind::Repo),
            AgentAction::Malformed { .. } => None,
        }
    }

    /// Text an agent would write inside its action tag.
    pub fn to_wire(&self) -> String {
        match self {
            AgentAction::Toggle { index } => index.to_string(),
            AgentAction::Trade(t) => t.to_wire(),
            AgentAction::Dispatch(d) => d.to_wire(),
            AgentAction::Shell { command } => command.clone(),
            AgentAction::Malformed { raw, .. } => raw.clone(),
        }
    }
}

fn malformed(raw: &str, message: impl Into<String>) -> AgentAction {
    AgentAction::Malformed { raw: raw.to_string(), message: message.into() }
}

fn bare_key_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"([{,]\s*)([A-Za-z_][A-Za-z0-9_]*)\s*:"#).expect("valid regex"))
}

/// Parse loosely written JSON: single quotes and unquoted keys are accepted.
fn lenient_json(text: &str) -> Option<Value> {
    let t = text.trim();
    if let Ok(v) = serde_json::from_str(t) {
        return Some(v);
    }
    let fixed = bare_key_re().replace_all(&t.replace('\'', "\""), "$1\"$2\":").into_owned();
    serde_json::from_str(&fixed).ok()
}

fn parse_trade(raw: &str) -> AgentAction {
    let Some(Value::Object(obj)) = lenient_json(raw) else {
        return malformed(raw, "expected an object like {\"buy\": {\"S0\": 10}, \"sell\": {}}");
    };
    let mut action = TradeAction::default();
    for (key, side) in obj {
        let target = match key.to_ascii_lowercase().as_str() {
            "buy" => &mut action.buy,
            "sell" => &mut action.sell,
            _ => return malformed(raw, format!("unknown key '{key}', expected buy and sell")),
        };
        let Value::Object(orders) = side else {
            return malformed(raw, format!("'{key}' must map stock symbols to share counts"));
        };
        for (sym, qty) in orders {
            let Some(q) = qty.as_f64() else {
                return malformed(raw, format!("share count for {sym} is not a number"));
            };
            if !q.is_finite() || q < 0.0 {
                return malformed(raw, format!("share count for {sym} must be a non-negative number"));
            }
            let shares = q.floor() as u64;
            *target.entry(sym.trim().to_ascii_uppercase()).or_insert(0) += shares;
        }
    }
    AgentAction::Trade(action)
}

fn parse_dispatch(raw: &str) -> AgentAction {
    let Some(Value::Object(obj)) = lenient_json(raw) else {
        return malformed(raw, "expected an object with thermal, wind, solar and battery values");
    };
    let mut vals: BTreeMap<String, f64> = BTreeMap::new();
    for (key, v) in obj {
        let k = key.to_ascii_lowercase();
        if !["thermal", "wind", "solar", "battery"].contains(&k.as_str()) {
            return malformed(raw, format!("unknown key '{key}'"));
        }
        let Some(x) = v.as_f64().filter(|x| x.is_finite()) else {
            return malformed(raw, format!("'{key}' must be a number"));
        };
        vals.insert(k, x);
    }
    let get = |k: &str| vals.get(k).copied().unwrap_or(0.0);
    AgentAction::Dispatch(DispatchAction {
        thermal: get("thermal"),
        wind: get("wind"),
        solar: get("solar"),
        battery: get("battery"),
    })
}

fn parse_toggle(raw: &str) -> AgentAction {
    let t = raw.trim();
    let t = t.strip_prefix('B').or_else(|| t.strip_prefix('b')).unwrap_or(t).trim();
    match t.parse::<i64>() {
        Ok(index) => AgentAction::Toggle { index },
        Err(_) => malformed(raw, "expected a single bulb index such as 0"),
    }
}

/// Read the text of one action region for the given environment.
pub fn parse_action(env: EnvKind, raw: &str) -> AgentAction {
    if raw.trim().is_empty() {
        return malformed(raw, "empty action");
    }
    match env {
        EnvKind::Lights => parse_toggle(raw),
        EnvKind::Trading => parse_trade(raw),
        EnvKind::Energy => parse_dispatch(raw),
        EnvKind::Repo => {
            let line = raw.trim();
            if line.lines().count() > 1 {
                malformed(raw, "issue exactly one command per step")
            } else {
                AgentAction::Shell { command: line.to_string() }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toggle_forms() {
        assert_eq!(parse_action(EnvKind::Lights, " 3 "), AgentAction::Toggle { index: 3 });
        assert_eq!(parse_action(EnvKind::Lights, "B2"), AgentAction::Toggle { index: 2 });
        assert_eq!(parse_action(EnvKind::Lights, "-1"), AgentAction::Toggle { index: -1 });
        assert!(matches!(parse_action(EnvKind::Lights, "two"), AgentAction::Malformed { .. }));
    }

    #[test]
    fn trade_forms() {
        let a = parse_action(EnvKind::Trading, "{buy: {s0: 10.7}, 'SELL': {'S1': 3}}");
        let AgentAction::Trade(t) = a else { panic!("{a:?}") };
        assert_eq!(t.buy, [("S0".to_string(), 10)].into());
        assert_eq!(t.sell, [("S1".to_string(), 3)].into());
        assert!(matches!(parse_action(EnvKind::Trading, "{\"buy\": {\"S0\": -1}}"), AgentAction::Malformed { .. }));
        assert!(matches!(parse_action(EnvKind::Trading, "buy S0"), AgentAction::Malformed { .. }));
    }

    #[test]
    fn dispatch_forms() {
        let a = parse_action(EnvKind::Energy, "{\"thermal\": 10, \"wind\": 20.5, \"solar\": 30, \"battery\": -10}");
        assert_eq!(a, AgentAction::Dispatch(DispatchAction { thermal: 10.0, wind: 20.5, solar: 30.0, battery: -10.0 }));
        assert!(matches!(parse_action(EnvKind::Energy, "{\"nuclear\": 5}"), AgentAction::Malformed { .. }));
    }

    #[test]
    fn wire_round_trip() {
        for (env, text) in [
            (EnvKind::Lights, "4"),
            (EnvKind::Trading, r#"{"buy": {"S0": 10}, "sell": {"S1": 2}}"#),
            (EnvKind::Energy, r#"{"thermal": 100, "wind": 50.5, "solar": 0, "battery": -5}"#),
            (EnvKind::Repo, "pip install pkg1==1.0"),
        ] {
            let a = parse_action(env, text);
            assert_eq!(parse_action(env, &a.to_wire()), a);
        }
    }
}
