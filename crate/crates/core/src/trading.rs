//! AI Trading: a latent linear factor market with pre-generated factor and
//! noise timelines.
//!
//! Day `t` prices are `p_t`; news published on day `t` describes `z_t`, the
//! factor change that moves prices to `p_{t+1} = p_t + W z_t + eps_t`. Trades
//! on day `t` execute at `p_t`, sells before buys.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::canon::{q9, round_to};
use crate::error::{ArenaError, Result};
use crate::rng::RngStream;

/// Generated price paths must stay above this level.
pub const MIN_PRICE: f64 = 0.1;
const CASH_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketConfig {
    pub n_stocks: usize,
    pub n_factors: usize,
    /// `n_stocks × n_factors`, price units per factor unit.
    pub loading: Vec<Vec<f64>>,
    pub initial_prices: Vec<f64>,
    pub initial_cash: f64,
    /// `horizon × n_factors`.
    pub factor_timeline: Vec<Vec<f64>>,
    /// `horizon × n_stocks`.
    pub noise_timeline: Vec<Vec<f64>>,
    pub horizon: usize,
    pub sparsity: f64,
    pub sigma: f64,
    /// Proportional fee charged on every executed order; zero by default.
    #[serde(default)]
    pub fee_rate: f64,
    /// Published news values when they differ from the true factor changes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub news_timeline: Option<Vec<Vec<f64>>>,
}

impl MarketConfig {
    pub fn symbol(i: usize) -> String {
        format!("S{i}")
    }

    pub fn symbol_index(&self, symbol: &str) -> Option<usize> {
        let s = symbol.trim();
        let rest = s.strip_prefix('S').or_else(|| s.strip_prefix('s'))?;
        let i: usize = rest.parse().ok()?;
        (i < self.n_stocks).then_some(i)
    }

    pub fn validate(&self) -> Result<()> {
        let (d, k, h) = (self.n_stocks, self.n_factors, self.horizon);
        if d == 0 || k == 0 || h == 0 {
            return Err(ArenaError::config("n_stocks", "dimensions and horizon must be positive"));
        }
        if self.loading.len() != d || self.loading.iter().any(|r| r.len() != k) {
            return Err(ArenaError::config("loading", format!("expected a {d}x{k} matrix")));
        }
        if self.initial_prices.len() != d || self.initial_prices.iter().any(|p| *p <= 0.0) {
            return Err(ArenaError::config("initial_prices", "expected positive prices, one per stock"));
        }
        if self.initial_cash <= 0.0 {
            return Err(ArenaError::config("initial_cash", "must be positive"));
        }
        if self.factor_timeline.len() != h || self.factor_timeline.iter().any(|r| r.len() != k) {
            return Err(ArenaError::config("factor_timeline", format!("expected {h} rows of {k}")));
        }
        if self.noise_timeline.len() != h || self.noise_timeline.iter().any(|r| r.len() != d) {
            return Err(ArenaError::config("noise_timeline", format!("expected {h} rows of {d}")));
        }
        if let Some(news) = &self.news_timeline {
            if news.len() != h || news.iter().any(|r| r.len() != k) {
                return Err(ArenaError::config("news_timeline", format!("expected {h} rows of {k}")));
            }
        }
        if !(0.0..1.0).contains(&self.fee_rate) {
            return Err(ArenaError::config("fee_rate", "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Deterministic price change on `day`: `W z_day + eps_day`.
    pub fn price_change(&self, day: usize) -> Vec<f64> {
        let z = &self.factor_timeline[day];
        self.loading
            .iter()
            .zip(&self.noise_timeline[day])
            .map(|(row, eps)| row.iter().zip(z).map(|(w, f)| w * f).sum::<f64>() + eps)
            .collect()
    }

    /// Prices for days `0..=horizon`.
    pub fn price_path(&self) -> Vec<Vec<f64>> {
        let mut path = Vec::with_capacity(self.horizon + 1);
        let mut p = self.initial_prices.clone();
        path.push(p.clone());
        for day in 0..self.horizon {
            p = advance_market(self, day, &p).expect("day within horizon");
            path.push(p.clone());
        }
        path
    }

    pub fn min_price(&self) -> f64 {
        self.price_path().iter().flatten().fold(f64::INFINITY, |m, p| m.min(*p))
    }

    /// Factor values published as news on `day` (None after the horizon).
    pub fn news_values(&self, day: usize) -> Option<&[f64]> {
        if day >= self.horizon {
            return None;
        }
        let src = self.news_timeline.as_ref().unwrap_or(&self.factor_timeline);
        Some(&src[day])
    }

    pub fn rules_text(&self) -> String {
        let mut s = String::from(
            "Hidden market rule: tomorrow's price change of each stock equals the sum over factors of \
             loading x factor change (plus small noise). Loading matrix (rows = stocks, columns = factors):\n",
        );
        for (i, row) in self.loading.iter().enumerate() {
            let cells: Vec<String> = row.iter().enumerate().map(|(k, w)| format!("F{k}: {w:+.2}")).collect();
            s.push_str(&format!("S{i}: {}\n", cells.join(", ")));
        }
        s
    }

    /// Two stocks, two factors, three days, no noise.
    pub fn tutorial() -> Self {
        Self {
            n_stocks: 2,
            n_factors: 2,
            loading: vec![vec![0.1, 0.2], vec![-0.3, 0.4]],
            initial_prices: vec![1.0, 2.0],
            initial_cash: 100.0,
            factor_timeline: vec![vec![0.10, 0.05], vec![-0.15, 0.10], vec![0.0, 0.20]],
            noise_timeline: vec![vec![0.0, 0.0]; 3],
            horizon: 3,
            sparsity: 0.0,
            sigma: 0.0,
            fee_rate: 0.0,
            news_timeline: None,
        }
    }
}

/// `p_{t+1} = p_t + W z_t + eps_t`.
pub fn advance_market(config: &MarketConfig, day: usize, prices: &[f64]) -> Result<Vec<f64>> {
    if day >= config.horizon {
        return Err(ArenaError::State(format!("day {day} is beyond the market horizon of {} days", config.horizon)));
    }
    Ok(prices.iter().zip(config.price_change(day)).map(|(p, dp)| p + dp).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    pub cash: f64,
    pub holdings: Vec<u64>,
}

impl Portfolio {
    pub fn new(cash: f64, n_stocks: usize) -> Self {
        Self { cash, holdings: vec![0; n_stocks] }
    }
}

/// Buy and sell orders keyed by stock symbol, in whole shares.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TradeAction {
    #[serde(default)]
    pub buy: BTreeMap<String, u64>,
    #[serde(default)]
    pub sell: BTreeMap<String, u64>,
}

impl TradeAction {
    pub fn noop() -> Self {
        Self::default()
    }

    pub fn is_noop(&self) -> bool {
        self.buy.values().all(|v| *v == 0) && self.sell.values().all(|v| *v == 0)
    }

    /// Wire form: `{"buy": {"S0": 10}, "sell": {}}`.
    pub fn to_wire(&self) -> String {
        let side = |m: &BTreeMap<String, u64>| {
            let mut entries: Vec<(&String, &u64)> = m.iter().collect();
            entries.sort_by_key(|(s, _)| (s.len(), (*s).clone()));
            entries.iter().map(|(s, n)| format!("\"{s}\": {n}")).collect::<Vec<_>>().join(", ")
        };
        format!("{{\"buy\": {{{}}}, \"sell\": {{{}}}}}", side(&self.buy), side(&self.sell))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeReport {
    pub portfolio: Portfolio,
    pub messages: Vec<String>,
    pub changed: bool,
}

fn sorted_orders(
    config_n: usize,
    orders: &BTreeMap<String, u64>,
    messages: &mut Vec<String>,
    side: &str,
) -> Vec<(usize, u64)> {
    let mut out = Vec::new();
    for (sym, &n) in orders {
        let idx = sym
            .trim()
            .strip_prefix('S')
            .or_else(|| sym.trim().strip_prefix('s'))
            .and_then(|r| r.parse::<usize>().ok())
            .filter(|i| *i < config_n);
        match idx {
            Some(i) if n > 0 => out.push((i, n)),
            Some(_) => {}
            None => messages.push(format!("Ignored {side} order for unknown stock {sym}.")),
        }
    }
    out.sort_unstable();
    out
}

/// Execute sells (capped at holdings) and then buys (full quantity or skipped),
/// each side in ascending stock index, at `prices`.
pub fn step_trade(portfolio: &Portfolio, prices: &[f64], action: &TradeAction, fee_rate: f64) -> TradeReport {
    let n = portfolio.holdings.len();
    let mut p = portfolio.clone();
    let mut messages = Vec::new();
    let mut changed = false;
    for (i, req) in sorted_orders(n, &action.sell, &mut messages, "sell") {
        let sold = req.min(p.holdings[i]);
        if sold == 0 {
            messages.push(format!("Cannot sell S{i}: no shares held."));
            continue;
        }
        p.holdings[i] -= sold;
        p.cash += sold as f64 * prices[i] * (1.0 - fee_rate);
        changed = true;
        if sold < req {
            messages.push(format!("Sold {sold} shares of S{i} (requested {req}, capped at holdings)."));
        } else {
            messages.push(format!("Sold {sold} shares of S{i}."));
        }
    }
    for (i, req) in sorted_orders(n, &action.buy, &mut messages, "buy") {
        let cost = req as f64 * prices[i] * (1.0 + fee_rate);
        if cost <= p.cash + CASH_EPS {
            p.cash = (p.cash - cost).max(0.0);
            p.holdings[i] += req;
            changed = true;
            messages.push(format!("Bought {req} shares of S{i}."));
        } else {
            messages.push(format!(
                "Skipped buying {req} shares of S{i}: costs {cost:.2} but only {:.2} cash is available.",
                p.cash
            ));
        }
    }
    if messages.is_empty() {
        messages.push("No trades executed.".to_string());
    }
    TradeReport { portfolio: p, messages, changed }
}

pub fn portfolio_value(portfolio: &Portfolio, prices: &[f64]) -> f64 {
    portfolio.cash + portfolio.holdings.iter().zip(prices).map(|(h, p)| *h as f64 * p).sum::<f64>()
}

pub fn profit_rate(value: f64, initial_cash: f64) -> f64 {
    value / initial_cash - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Rose,
    Decreased,
    Stable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strength {
    Slightly,
    Significantly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsHint {
    pub factor: usize,
    /// Published value in hundredths.
    pub cents: i64,
    pub direction: Direction,
    pub strength: Option<Strength>,
}

impl fmt::Display for NewsHint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let abs = self.cents.unsigned_abs();
        let num = format!("{}.{:02}", abs / 100, abs % 100);
        match (self.direction, self.strength) {
            (Direction::Stable, _) | (_, None) => write!(f, "F{} stable ({num})", self.factor),
            (dir, Some(st)) => {
                let verb = if dir == Direction::Rose { "rose" } else { "decreased" };
                let adv = if st == Strength::Slightly { "slightly" } else { "significantly" };
                let sign = if dir == Direction::Rose { '+' } else { '-' };
                write!(f, "F{} {verb} {adv} ({sign}{num})", self.factor)
            }
        }
    }
}

/// Verbal news for a factor-change vector: zero is stable, magnitudes under
/// 0.10 are slight, larger ones significant. Values are shown to two decimals.
pub fn render_news(z: &[f64]) -> Vec<NewsHint> {
    z.iter()
        .enumerate()
        .map(|(factor, v)| {
            let cents = (v * 100.0).round() as i64;
            let direction = match cents.signum() {
                1 => Direction::Rose,
                -1 => Direction::Decreased,
                _ => Direction::Stable,
            };
            let strength = match cents.unsigned_abs() {
                0 => None,
                1..=9 => Some(Strength::Slightly),
                _ => Some(Strength::Significantly),
            };
            NewsHint { factor, cents, direction, strength }
        })
        .collect()
}

pub fn news_line(z: &[f64]) -> String {
    render_news(z).iter().map(ToString::to_string).collect::<Vec<_>>().join(" | ")
}

/// Recover factor values from a rendered news line by reading each
/// parenthesized number, keyed by factor label.
pub fn parse_news_line(line: &str) -> Option<Vec<f64>> {
    let mut values: Vec<(usize, f64)> = Vec::new();
    for part in line.split('|') {
        let part = part.trim();
        let label_start = part.find('F')?;
        let label: String = part[label_start + 1..].chars().take_while(|c| c.is_ascii_digit()).collect();
        let factor: usize = label.parse().ok()?;
        let open = part.rfind('(')?;
        let close = part.rfind(')')?;
        let v: f64 = part.get(open + 1..close)?.trim().trim_start_matches('+').parse().ok()?;
        values.push((factor, v));
    }
    values.sort_by_key(|(f, _)| *f);
    if values.iter().enumerate().any(|(i, (f, _))| i != *f) {
        return None;
    }
    Some(values.into_iter().map(|(_, v)| v).collect())
}

/// Render a price with 2 to 4 decimals, dropping trailing zeros past the
/// second.
pub fn format_price(p: f64) -> String {
    let mut s = format!("{p:.4}");
    while s.ends_with('0') && s.len() > s.find('.').map_or(0, |i| i + 3) {
        s.pop();
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradingParams {
    pub n_stocks: usize,
    pub n_factors: usize,
    pub sparsity: f64,
    pub sigma: f64,
    pub horizon: usize,
    pub initial_cash: f64,
    pub fee_rate: f64,
    /// Std of noise added to published news; zero publishes the exact factor change.
    pub news_noise: f64,
}

impl TradingParams {
    pub fn new(n_stocks: usize, n_factors: usize, horizon: usize) -> Self {
        Self {
            n_stocks,
            n_factors,
            sparsity: 0.3,
            sigma: 0.05,
            horizon,
            initial_cash: 100.0,
            fee_rate: 0.0,
            news_noise: 0.0,
        }
    }
}

pub const TRADING_REJECTION_BUDGET: usize = 2_000;

/// Sample a loading matrix and both timelines, resampling until every stored
/// price stays above [`MIN_PRICE`].
///
/// Factor changes are uniform in [-0.2, 0.2] rounded to hundredths so that
/// news reproduces them exactly; loadings are rounded to hundredths and noise
/// to thousandths.
pub fn generate_trading_task(seed: u64, params: &TradingParams) -> Result<MarketConfig> {
    let (d, k, h) = (params.n_stocks, params.n_factors, params.horizon);
    if d == 0 || k == 0 || h == 0 {
        return Err(ArenaError::config("n_stocks", "dimensions and horizon must be positive"));
    }
    if !(0.0..1.0).contains(&params.sparsity) {
        return Err(ArenaError::config("sparsity", "must lie in [0, 1)"));
    }
    if params.sigma < 0.0 || params.news_noise < 0.0 {
        return Err(ArenaError::config("sigma", "must be non-negative"));
    }
    let mut rng = RngStream::new(seed, "trading");
    for _ in 0..TRADING_REJECTION_BUDGET {
        let mut w_rng = rng.fork("loading");
        let mut loading = vec![vec![0.0; k]; d];
        for row in loading.iter_mut() {
            for cell in row.iter_mut() {
                if !w_rng.bernoulli(params.sparsity) {
                    let mag = w_rng.uniform(0.05, 0.5);
                    let sign = if w_rng.bernoulli(0.5) { 1.0 } else { -1.0 };
                    *cell = round_to(sign * mag, 2);
                }
            }
            if row.iter().all(|w| *w == 0.0) {
                let j = w_rng.index(k);
                let mag = w_rng.uniform(0.1, 0.5);
                row[j] = round_to(if w_rng.bernoulli(0.5) { mag } else { -mag }, 2);
            }
        }
        let mut p_rng = rng.fork("prices");
        let initial_prices: Vec<f64> = (0..d).map(|_| round_to(p_rng.uniform(3.0, 8.0), 2)).collect();
        let mut z_rng = rng.fork("factors");
        let factor_timeline: Vec<Vec<f64>> =
            (0..h).map(|_| (0..k).map(|_| round_to(z_rng.uniform(-0.2, 0.2), 2)).collect()).collect();
        let mut e_rng = rng.fork("noise");
        let noise_timeline: Vec<Vec<f64>> =
            (0..h).map(|_| (0..d).map(|_| round_to(e_rng.normal(0.0, params.sigma), 3)).collect()).collect();
        let news_timeline = if params.news_noise > 0.0 {
            let mut n_rng = rng.fork("news");
            Some(
                factor_timeline
                    .iter()
                    .map(|row| row.iter().map(|z| round_to(z + n_rng.normal(0.0, params.news_noise), 2)).collect())
                    .collect(),
            )
        } else {
            None
        };
        let config = MarketConfig {
            n_stocks: d,
            n_factors: k,
            loading,
            initial_prices,
            initial_cash: q9(params.initial_cash),
            factor_timeline,
            noise_timeline,
            horizon: h,
            sparsity: q9(params.sparsity),
            sigma: q9(params.sigma),
            fee_rate: q9(params.fee_rate),
            news_timeline,
        };
        if config.min_price() > MIN_PRICE {
            return Ok(config);
        }
    }
    Err(ArenaError::Generation(format!(
        "no market with positive prices found in {TRADING_REJECTION_BUDGET} attempts; \
         shorten the horizon or lower the loadings"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn tutorial_market_moves() {
        let cfg = MarketConfig::tutorial();
        let p1 = advance_market(&cfg, 0, &[1.0, 2.0]).unwrap();
        assert!(close(p1[0], 1.02) && close(p1[1], 1.99), "{p1:?}");
        let p2 = advance_market(&cfg, 1, &p1).unwrap();
        assert!(close(p2[0], 1.025) && close(p2[1], 2.075), "{p2:?}");
        assert!(advance_market(&cfg, 3, &p2).is_err());
    }

    #[test]
    fn zero_change_keeps_prices() {
        let mut cfg = MarketConfig::tutorial();
        cfg.factor_timeline[0] = vec![0.0, 0.0];
        assert_eq!(advance_market(&cfg, 0, &[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn buy_all_with_cash() {
        let p = Portfolio::new(100.0, 2);
        let a = TradeAction { buy: [("S0".into(), 100)].into(), sell: BTreeMap::new() };
        let r = step_trade(&p, &[1.0, 2.0], &a, 0.0);
        assert!(close(r.portfolio.cash, 0.0));
        assert_eq!(r.portfolio.holdings, vec![100, 0]);
    }

    #[test]
    fn sell_then_buy_frees_cash() {
        let p = Portfolio { cash: 0.0, holdings: vec![100, 0] };
        let a = TradeAction { buy: [("S1".into(), 51)].into(), sell: [("S0".into(), 100)].into() };
        let r = step_trade(&p, &[1.02, 1.99], &a, 0.0);
        assert!((r.portfolio.cash - 0.51).abs() < 1e-9);
        assert_eq!(r.portfolio.holdings, vec![0, 51]);
    }

    #[test]
    fn oversell_is_capped() {
        let p = Portfolio { cash: 0.0, holdings: vec![0, 10] };
        let a = TradeAction { buy: BTreeMap::new(), sell: [("S1".into(), 50)].into() };
        let r = step_trade(&p, &[1.0, 2.0], &a, 0.0);
        assert_eq!(r.portfolio.holdings, vec![0, 0]);
        assert!(close(r.portfolio.cash, 20.0));
        assert!(r.messages[0].contains("capped"));
    }

    #[test]
    fn unaffordable_buy_is_skipped_whole() {
        let p = Portfolio::new(10.0, 2);
        let a = TradeAction { buy: [("S0".into(), 5), ("S1".into(), 6)].into(), sell: BTreeMap::new() };
        let r = step_trade(&p, &[1.0, 2.0], &a, 0.0);
        // S0 first (cost 5), then S1 would cost 12 > 5 remaining.
        assert_eq!(r.portfolio.holdings, vec![5, 0]);
        assert!(close(r.portfolio.cash, 5.0));
    }

    #[test]
    fn news_strings() {
        assert_eq!(news_line(&[0.03]), "F0 rose slightly (+0.03)");
        assert_eq!(news_line(&[0.10]), "F0 rose significantly (+0.10)");
        assert_eq!(news_line(&[0.0]), "F0 stable (0.00)");
        assert_eq!(news_line(&[0.03, -0.10]), "F0 rose slightly (+0.03) | F1 decreased significantly (-0.10)");
    }

    #[test]
    fn news_round_trips_quantized_values() {
        let z = vec![-0.2, -0.15, -0.01, 0.0, 0.07, 0.19];
        assert_eq!(parse_news_line(&news_line(&z)).unwrap(), z);
    }

    #[test]
    fn value_and_profit() {
        let p = Portfolio { cash: 0.51, holdings: vec![0, 51] };
        let v = portfolio_value(&p, &[1.065, 2.155]);
        assert!((v - 110.415).abs() < 1e-9);
        assert!((profit_rate(v, 100.0) - 0.10415).abs() < 1e-9);
        assert_eq!(portfolio_value(&Portfolio::new(42.0, 3), &[1.0, 2.0, 3.0]), 42.0);
        assert_eq!(profit_rate(100.0, 100.0), 0.0);
    }

    #[test]
    fn generation_is_deterministic_and_positive() {
        let params = TradingParams::new(3, 2, 120);
        let a = generate_trading_task(11, &params).unwrap();
        assert_eq!(a, generate_trading_task(11, &params).unwrap());
        a.validate().unwrap();
        assert!(a.min_price() > 0.0);
    }

    #[test]
    fn zero_noise_path_is_pure_factor_driven() {
        let mut params = TradingParams::new(2, 2, 50);
        params.sigma = 0.0;
        let cfg = generate_trading_task(5, &params).unwrap();
        assert!(cfg.noise_timeline.iter().flatten().all(|e| *e == 0.0));
        let path = cfg.price_path();
        for t in 0..cfg.horizon {
            for i in 0..2 {
                let wz: f64 = (0..2).map(|k| cfg.loading[i][k] * cfg.factor_timeline[t][k]).sum();
                assert!((path[t + 1][i] - path[t][i] - wz).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn price_formatting() {
        assert_eq!(format_price(1.02), "1.02");
        assert_eq!(format_price(1.025), "1.025");
        assert_eq!(format_price(2.0), "2.00");
        assert_eq!(format_price(2.15500000001), "2.155");
    }

    #[test]
    fn wire_form() {
        let a = TradeAction { buy: [("S0".into(), 10), ("S2".into(), 20)].into(), sell: [("S1".into(), 10)].into() };
        assert_eq!(a.to_wire(), r#"{"buy": {"S0": 10, "S2": 20}, "sell": {"S1": 10}}"#);
        assert_eq!(TradeAction::noop().to_wire(), r#"{"buy": {}, "sell": {}}"#);
    }
}
