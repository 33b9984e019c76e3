//! The perfect-information trader and the five learning strategies.

use arena_core::trading::{
    advance_market, parse_news_line, portfolio_value, step_trade, MarketConfig, Portfolio, TradeAction,
};
use arena_core::{AgentAction, Observation, Snapshot};

use crate::estimate::{estimate, Estimator, Loading};
use crate::Policy;

/// What a trading agent can read from one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketView {
    pub day: usize,
    pub cash: f64,
    pub holdings: Vec<u64>,
    pub prices: Vec<f64>,
    /// Factor values parsed from the news line, absent on the last day.
    pub news: Option<Vec<f64>>,
}

impl MarketView {
    pub fn from_observation(obs: &Observation) -> Option<Self> {
        let Snapshot::Trading { day, cash, holdings, prices } = &obs.snapshot else {
            return None;
        };
        let news = obs.text.lines().find_map(|l| l.strip_prefix("News for tomorrow: ")).and_then(parse_news_line);
        Some(Self { day: *day, cash: *cash, holdings: holdings.clone(), prices: prices.clone(), news })
    }

    pub fn portfolio(&self) -> Portfolio {
        Portfolio { cash: self.cash, holdings: self.holdings.clone() }
    }
}

/// Sell every position except `target`, then spend all cash on `target`
/// (whole shares). `None` liquidates to cash.
pub fn all_in_action(portfolio: &Portfolio, prices: &[f64], target: Option<usize>) -> TradeAction {
    let mut action = TradeAction::noop();
    let mut cash = portfolio.cash;
    for (i, &h) in portfolio.holdings.iter().enumerate() {
        if h > 0 && Some(i) != target {
            action.sell.insert(format!("S{i}"), h);
            cash += h as f64 * prices[i];
        }
    }
    if let Some(i) = target {
        let p = prices[i];
        let mut n = (cash / p).floor().max(0.0) as u64;
        while n > 0 && n as f64 * p > cash {
            n -= 1;
        }
        if n > 0 {
            action.buy.insert(format!("S{i}"), n);
        }
    }
    action
}

/// Index of the largest positive score; ties go to the lowest index.
pub fn best_positive(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s > 0.0 && best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// Perfect-information choice for `day`: the all-in position (or cash) with
/// the highest realized value at tomorrow's prices. Cash wins ties, then the
/// lowest stock index.
pub fn act_optimal(config: &MarketConfig, day: usize, portfolio: &Portfolio, prices: &[f64]) -> TradeAction {
    let Ok(next) = advance_market(config, day, prices) else {
        return TradeAction::noop();
    };
    let value_of = |target: Option<usize>| {
        let action = all_in_action(portfolio, prices, target);
        let after = step_trade(portfolio, prices, &action, config.fee_rate).portfolio;
        (portfolio_value(&after, &next), action)
    };
    let (mut best_value, mut best_action) = value_of(None);
    for i in 0..config.n_stocks {
        let (v, a) = value_of(Some(i));
        if v > best_value {
            best_value = v;
            best_action = a;
        }
    }
    best_action
}

pub struct OptimalTrader {
    config: MarketConfig,
}

impl OptimalTrader {
    pub fn new(config: MarketConfig) -> Self {
        Self { config }
    }
}

impl Policy for OptimalTrader {
    fn name(&self) -> &str {
        "optimal"
    }

    fn act(&mut self, obs: &Observation) -> AgentAction {
        let Some(view) = MarketView::from_observation(obs) else {
            return AgentAction::Trade(TradeAction::noop());
        };
        AgentAction::Trade(act_optimal(&self.config, view.day, &view.portfolio(), &view.prices))
    }
}

pub struct NoOpTrader;

impl Policy for NoOpTrader {
    fn name(&self) -> &str {
        "noop"
    }

    fn act(&mut self, _obs: &Observation) -> AgentAction {
        AgentAction::Trade(TradeAction::noop())
    }
}

pub const ROLLING_WINDOW: usize = 15;
pub const DEFAULT_RIDGE_LAMBDA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrategyKind {
    /// Waits for `n_factors + 2` observed days, then full-history least squares.
    Conservative,
    /// Full-history least squares from the third day.
    Progressive,
    /// Per-pair simple regressions over the full history.
    Correlation,
    /// Least squares over the most recent `window` days.
    Rolling { window: usize },
    /// Ridge-regularized least squares over the full history.
    Ridge { lambda: f64 },
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Conservative => "conservative",
            StrategyKind::Progressive => "progressive",
            StrategyKind::Correlation => "correlation",
            StrategyKind::Rolling { .. } => "rolling",
            StrategyKind::Ridge { .. } => "ridge",
        }
    }

    pub fn all() -> [StrategyKind; 5] {
        [
            StrategyKind::Conservative,
            StrategyKind::Progressive,
            StrategyKind::Correlation,
            StrategyKind::Rolling { window: ROLLING_WINDOW },
            StrategyKind::Ridge { lambda: DEFAULT_RIDGE_LAMBDA },
        ]
    }

    /// First day (0-based) on which the strategy may trade.
    pub fn first_trading_day(self, n_factors: usize) -> usize {
        match self {
            StrategyKind::Conservative => n_factors + 2,
            _ => 2,
        }
    }

    fn estimator(self) -> Estimator {
        match self {
            StrategyKind::Correlation => Estimator::Correlation,
            StrategyKind::Ridge { lambda } => Estimator::Ridge { lambda },
            _ => Estimator::LeastSquares,
        }
    }
}

/// Learns the loading matrix from its own observation stream.
#[derive(Debug, Clone)]
pub struct LearningTrader {
    kind: StrategyKind,
    dp: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    previous: Option<(Vec<f64>, Option<Vec<f64>>)>,
    estimate: Option<Loading>,
    singular_days: usize,
    last_prediction: Option<Vec<f64>>,
}

impl LearningTrader {
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            dp: Vec::new(),
            z: Vec::new(),
            previous: None,
            estimate: None,
            singular_days: 0,
            last_prediction: None,
        }
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    pub fn estimate(&self) -> Option<&Loading> {
        self.estimate.as_ref()
    }

    /// Days on which the normal equations were singular and the trader held.
    pub fn singular_days(&self) -> usize {
        self.singular_days
    }

    /// Predicted next-day price changes behind the latest decision.
    pub fn last_prediction(&self) -> Option<&[f64]> {
        self.last_prediction.as_deref()
    }

    /// Record today's prices, pairing yesterday's news with the realized change.
    pub fn observe(&mut self, view: &MarketView) {
        if let Some((prev_prices, Some(prev_news))) = self.previous.take() {
            self.dp.push(view.prices.iter().zip(&prev_prices).map(|(a, b)| a - b).collect());
            self.z.push(prev_news);
        }
        self.previous = Some((view.prices.clone(), view.news.clone()));
    }

    fn refit(&mut self) -> Option<Loading> {
        let from = match self.kind {
            StrategyKind::Rolling { window } => self.dp.len().saturating_sub(window),
            _ => 0,
        };
        estimate(&self.dp[from..], &self.z[from..], self.kind.estimator())
    }

    pub fn decide(&mut self, view: &MarketView) -> TradeAction {
        self.observe(view);
        self.last_prediction = None;
        let Some(news) = &view.news else {
            return TradeAction::noop();
        };
        if view.day < self.kind.first_trading_day(news.len()) {
            return TradeAction::noop();
        }
        self.estimate = self.refit();
        let Some(w) = &self.estimate else {
            self.singular_days += 1;
            log::debug!("{}: singular fit on day {}, holding", self.kind.name(), view.day);
            return TradeAction::noop();
        };
        let predicted: Vec<f64> = w.iter().map(|row| row.iter().zip(news).map(|(a, b)| a * b).sum()).collect();
        let ratios: Vec<f64> = predicted.iter().zip(&view.prices).map(|(dp, p)| dp / p).collect();
        self.last_prediction = Some(predicted);
        all_in_action(&view.portfolio(), &view.prices, best_positive(&ratios))
    }
}

impl Policy for LearningTrader {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn act(&mut self, obs: &Observation) -> AgentAction {
        match MarketView::from_observation(obs) {
            Some(view) => AgentAction::Trade(self.decide(&view)),
            None => AgentAction::Trade(TradeAction::noop()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optimal_goes_all_in_on_the_best_stock() {
        let mut c = MarketConfig::tutorial();
        c.factor_timeline[0] = vec![0.2, 0.0];
        c.loading = vec![vec![0.1, 0.0], vec![-0.005, 0.0]];
        // Day-one ratios are +2% and -0.05%.
        let p = Portfolio::new(100.0, 2);
        let a = act_optimal(&c, 0, &p, &[1.0, 2.0]);
        assert_eq!(a.buy, [("S0".to_string(), 100)].into());
    }

    #[test]
    fn optimal_holds_cash_when_everything_falls() {
        let mut c = MarketConfig::tutorial();
        c.loading = vec![vec![-0.1, 0.0], vec![-0.3, 0.0]];
        let p = Portfolio { cash: 10.0, holdings: vec![5, 5] };
        let a = act_optimal(&c, 0, &p, &[1.0, 2.0]);
        assert!(a.buy.is_empty());
        assert_eq!(a.sell.len(), 2);
    }

    #[test]
    fn ties_go_to_the_lowest_index() {
        assert_eq!(best_positive(&[0.1, 0.1, 0.05]), Some(0));
        assert_eq!(best_positive(&[-0.1, 0.0]), None);
    }

    #[test]
    fn whole_shares_only() {
        let a = all_in_action(&Portfolio::new(10.0, 1), &[3.0], Some(0));
        assert_eq!(a.buy["S0"], 3);
    }
}
