use std::sync::OnceLock;

use arena_core::{parse_action, AgentAction, EnvKind};
use regex::Regex;

fn tag_res() -> &'static [Regex; 2] {
    static RES: OnceLock<[Regex; 2]> = OnceLock::new();
    RES.get_or_init(|| {
        [
            Regex::new(r"(?s)<action>(.*?)</action>").expect("valid regex"),
            Regex::new(r"(?s)<finish>(.*?)</finish>").expect("valid regex"),
        ]
    })
}

/// Content of the last complete action (or finish) region.
pub fn last_tag_region(text: &str) -> Option<&str> {
    tag_res()
        .iter()
        .flat_map(|re| re.captures_iter(text))
        .filter_map(|c| c.get(1).map(|m| (c.get(0).map_or(0, |g| g.start()), m.as_str())))
        .max_by_key(|(start, _)| *start)
        .map(|(_, s)| s)
}

/// Extract and parse the action of a model reply. Missing tags and bad
/// payloads become [`AgentAction::Malformed`]; the surrounding reasoning is
/// never kept.
pub fn parse_action_tag(env: EnvKind, text: &str) -> AgentAction {
    match last_tag_region(text) {
        Some(region) => parse_action(env, region),
        None => AgentAction::Malformed { raw: String::new(), message: "no <action>...</action> tag found".into() },
    }
}

/// Restore the closing tag a stop sequence removed from a completion.
pub fn close_truncated(text: &str) -> String {
    let mut out = text.to_string();
    for (open, close) in [("<action>", "</action>"), ("<finish>", "</finish>")] {
        if let Some(pos) = out.rfind(open) {
            if !out[pos..].contains(close) {
                out.push_str(close);
                break;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use arena_core::trading::TradeAction;

    #[test]
    fn lights_tag() {
        assert_eq!(parse_action_tag(EnvKind::Lights, "I think <action>3</action>"), AgentAction::Toggle { index: 3 });
    }

    #[test]
    fn trading_example_object() {
        let a =
            parse_action_tag(EnvKind::Trading, r#"<action>{"buy": {"S0": 10, "S2": 20}, "sell": {"S1": 10}}</action>"#);
        let mut t = TradeAction::noop();
        t.buy.insert("S0".into(), 10);
        t.buy.insert("S2".into(), 20);
        t.sell.insert("S1".into(), 10);
        assert_eq!(a, AgentAction::Trade(t));
    }

    #[test]
    fn last_tag_wins() {
        assert_eq!(
            parse_action_tag(EnvKind::Lights, "<action>1</action> on second thought <action>2</action>"),
            AgentAction::Toggle { index: 2 }
        );
        assert_eq!(
            parse_action_tag(EnvKind::Lights, "<action>1</action><finish>4</finish>"),
            AgentAction::Toggle { index: 4 }
        );
    }

    #[test]
    fn missing_or_bad_tags_are_format_errors() {
        assert!(matches!(parse_action_tag(EnvKind::Lights, "toggle 3"), AgentAction::Malformed { .. }));
        assert!(matches!(parse_action_tag(EnvKind::Lights, "<action>3"), AgentAction::Malformed { .. }));
        assert!(matches!(parse_action_tag(EnvKind::Energy, "<action>{oops</action>"), AgentAction::Malformed { .. }));
    }

    #[test]
    fn stop_sequence_truncation_is_repaired() {
        assert_eq!(close_truncated("think <action>pip list"), "think <action>pip list</action>");
        assert_eq!(close_truncated("<action>1</action>"), "<action>1</action>");
    }
}
