//! Energy Dispatch: thermal, wind, solar and a battery serve a daily demand
//! under a cost budget. Renewable output is scaled by hidden periodic
//! efficiency curves.

use serde::{Deserialize, Serialize};

use crate::canon::{q9, round_to};
use crate::error::{ArenaError, Result};
use crate::rng::RngStream;

pub const BUDGET_RATIO: f64 = 4.2;
pub const WIND_RANGE: (f64, f64) = (0.6, 1.05);
pub const SOLAR_RANGE: (f64, f64) = (0.65, 1.1);
pub const THERMAL_RANGE: (f64, f64) = (0.9, 1.1);
pub const PERIOD_RANGE: (usize, usize) = (15, 25);
pub const SPIKE_PROB: f64 = 0.05;
pub const DEMAND_RANGE: (f64, f64) = (400.0, 900.0);
pub const DEFAULT_TAU_STABILITY: f64 = 0.5;
pub const DEFAULT_TAU_CARBON: f64 = 0.81;
/// Supply headroom the feasibility dispatcher keeps above demand.
pub const ORACLE_MARGIN: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capacities {
    pub thermal: f64,
    pub wind: f64,
    pub solar: f64,
}

impl Default for Capacities {
    fn default() -> Self {
        Self { thermal: 600.0, wind: 350.0, solar: 250.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitCosts {
    pub thermal: f64,
    pub wind: f64,
    pub solar: f64,
    pub battery: f64,
}

impl Default for UnitCosts {
    fn default() -> Self {
        Self { thermal: 3.0, wind: 5.0, solar: 6.0, battery: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Wind,
    Solar,
}

impl Source {
    pub fn clip_range(self) -> (f64, f64) {
        match self {
            Source::Wind => WIND_RANGE,
            Source::Solar => SOLAR_RANGE,
        }
    }
}

/// Components an efficiency curve was built from. Every stored value is
/// already rounded, so `values[t]` can be recomputed bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    /// Pre-noise pattern of length `period`.
    pub base: Vec<f64>,
    /// One additive offset per cycle.
    pub offsets: Vec<f64>,
    /// Per-day spike amplitude, zero on days without a spike.
    pub spikes: Vec<f64>,
    pub noise: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyCurve {
    pub source: Source,
    pub period: usize,
    pub values: Vec<f64>,
    pub record: CurveRecord,
}

impl EfficiencyCurve {
    /// `clip(base[t mod T] + offset[t / T] + spike[t] + noise[t])`.
    pub fn recompute(&self, t: usize) -> f64 {
        let (lo, hi) = self.source.clip_range();
        let r = &self.record;
        let raw = r.base[t % self.period] + r.offsets[t / self.period] + r.spikes[t] + r.noise[t];
        q9(raw.clamp(lo, hi))
    }

    /// Pattern level plus cycle offset, before spikes, noise and clipping.
    pub fn pre_noise(&self, t: usize) -> f64 {
        self.record.base[t % self.period] + self.record.offsets[t / self.period]
    }

    pub fn spike_days(&self) -> usize {
        self.record.spikes.iter().filter(|s| **s != 0.0).count()
    }
}

/// Sample one renewable efficiency curve: a piecewise-linear base pattern of
/// period `T`, repeated with a per-cycle offset, plus sparse spikes and small
/// daily noise, clipped to the source's range.
pub fn generate_efficiency_curve(seed: u64, source: Source, horizon: usize) -> Result<EfficiencyCurve> {
    let label = match source {
        Source::Wind => "efficiency/wind",
        Source::Solar => "efficiency/solar",
    };
    let mut rng = RngStream::new(seed, label);
    let period = rng.range_inclusive(PERIOD_RANGE.0 as i64, PERIOD_RANGE.1 as i64) as usize;
    sample_curve(&mut rng, source, horizon, period)
}

fn sample_curve(rng: &mut RngStream, source: Source, horizon: usize, period: usize) -> Result<EfficiencyCurve> {
    if horizon < 2 * period {
        return Err(ArenaError::config(
            "horizon",
            format!("efficiency curves need at least two cycles ({} days), got {horizon}", 2 * period),
        ));
    }
    let (lo, hi) = source.clip_range();
    let (level_lo, level_hi) = (lo + 0.1, hi - 0.05);
    let mut base = Vec::with_capacity(period);
    let mut level = rng.uniform(level_lo, level_hi);
    while base.len() < period {
        let len = rng.range_inclusive(2, 5) as usize;
        let next = rng.uniform(level_lo, level_hi);
        for j in 0..len {
            if base.len() == period {
                break;
            }
            base.push(q9(level + (next - level) * j as f64 / len as f64));
        }
        level = next;
    }
    let cycles = horizon.div_ceil(period);
    let offsets: Vec<f64> = (0..cycles).map(|_| q9(rng.uniform(-0.05, 0.05))).collect();
    let spikes: Vec<f64> = (0..horizon)
        .map(|_| {
            if rng.bernoulli(SPIKE_PROB) {
                let mag = rng.uniform(0.1, 0.25);
                q9(if rng.bernoulli(0.5) { mag } else { -mag })
            } else {
                0.0
            }
        })
        .collect();
    let noise: Vec<f64> = (0..horizon).map(|_| q9(rng.normal(0.0, 0.01))).collect();
    let mut curve =
        EfficiencyCurve { source, period, values: Vec::new(), record: CurveRecord { base, offsets, spikes, noise } };
    curve.values = (0..horizon).map(|t| curve.recompute(t)).collect();
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyConfig {
    pub horizon: usize,
    pub capacities: Capacities,
    pub battery_capacity: f64,
    #[serde(default)]
    pub initial_soc: f64,
    pub unit_costs: UnitCosts,
    pub demand: Vec<f64>,
    pub thermal_efficiency: Vec<f64>,
    pub wind: EfficiencyCurve,
    pub solar: EfficiencyCurve,
    pub tau_carbon: f64,
    pub tau_stability: f64,
    pub violation_limit: usize,
    pub ramp_scale: f64,
    pub violation_penalty: f64,
}

impl EnergyConfig {
    /// Cost ceiling for `day`, always `4.2 × demand`.
    pub fn budget(&self, day: usize) -> f64 {
        BUDGET_RATIO * self.demand[day]
    }

    pub fn budget_timeline(&self) -> Vec<f64> {
        (0..self.horizon).map(|t| self.budget(t)).collect()
    }

    pub fn efficiencies(&self, day: usize) -> (f64, f64, f64) {
        (self.thermal_efficiency[day], self.wind.values[day], self.solar.values[day])
    }

    pub fn total_capacity(&self) -> f64 {
        self.capacities.thermal + self.capacities.wind + self.capacities.solar
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.horizon;
        if h == 0 {
            return Err(ArenaError::config("horizon", "must be positive"));
        }
        for (name, len) in [
            ("demand", self.demand.len()),
            ("thermal_efficiency", self.thermal_efficiency.len()),
            ("wind", self.wind.values.len()),
            ("solar", self.solar.values.len()),
        ] {
            if len != h {
                return Err(ArenaError::config(name, format!("expected {h} days, got {len}")));
            }
        }
        for curve in [&self.wind, &self.solar] {
            let (lo, hi) = curve.source.clip_range();
            if curve.values.iter().any(|v| *v < lo || *v > hi) {
                return Err(ArenaError::config("efficiency", format!("values outside [{lo}, {hi}]")));
            }
            let r = &curve.record;
            if curve.period == 0
                || r.base.len() != curve.period
                || r.offsets.len() < h.div_ceil(curve.period)
                || r.spikes.len() != h
                || r.noise.len() != h
            {
                return Err(ArenaError::config("efficiency", "construction record has the wrong shape"));
            }
        }
        let peak = self.demand.iter().cloned().fold(0.0, f64::max);
        if self.demand.iter().any(|d| *d <= 0.0) || peak >= self.total_capacity() {
            return Err(ArenaError::config("demand", "must be positive and below total capacity"));
        }
        if !(0.0..=self.battery_capacity).contains(&self.initial_soc) {
            return Err(ArenaError::config("initial_soc", "must lie within battery capacity"));
        }
        if self.violation_limit == 0 || self.ramp_scale <= 0.0 {
            return Err(ArenaError::config("violation_limit", "limits must be positive"));
        }
        Ok(())
    }

    pub fn rules_text(&self) -> String {
        let pattern =
            |c: &EfficiencyCurve| c.record.base.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(", ");
        format!(
            "Hidden efficiency rules: actual output = rated command x efficiency.\n\
             Thermal efficiency stays close to 1.0 (between 0.9 and 1.1).\n\
             Wind efficiency repeats with a period of {} days; base pattern: [{}]. Each cycle shifts the \
             pattern by a small offset, occasional spikes occur, values stay within [0.60, 1.05].\n\
             Solar efficiency repeats with a period of {} days; base pattern: [{}]. Values stay within \
             [0.65, 1.10].\n\
             Daily budget is 4.2 x demand. Success requires surviving {} days with mean stability above \
             {:.2} and a carbon ratio below {:.2}.\n",
            self.wind.period,
            pattern(&self.wind),
            self.solar.period,
            pattern(&self.solar),
            self.horizon,
            self.tau_stability,
            self.tau_carbon,
        )
    }
}

/// Rated commands for the three generators and a signed battery flow
/// (negative charges, positive discharges).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DispatchAction {
    pub thermal: f64,
    pub wind: f64,
    pub solar: f64,
    pub battery: f64,
}

impl DispatchAction {
    pub fn to_wire(&self) -> String {
        format!(
            "{{\"thermal\": {}, \"wind\": {}, \"solar\": {}, \"battery\": {}}}",
            q9(self.thermal),
            q9(self.wind),
            q9(self.solar),
            q9(self.battery)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridState {
    pub day: usize,
    pub state_of_charge: f64,
    pub consecutive_violations: usize,
    pub cumulative_thermal_actual: f64,
    pub cumulative_renewable_actual: f64,
    pub stability_samples: Vec<f64>,
    pub previous_action: Option<DispatchAction>,
}

impl GridState {
    pub fn initial(config: &EnergyConfig) -> Self {
        Self {
            day: 0,
            state_of_charge: config.initial_soc,
            consecutive_violations: 0,
            cumulative_thermal_actual: 0.0,
            cumulative_renewable_actual: 0.0,
            stability_samples: Vec::new(),
            previous_action: None,
        }
    }

    pub fn carbon_ratio(&self) -> f64 {
        carbon_ratio(self.cumulative_thermal_actual, self.cumulative_renewable_actual)
    }

    pub fn mean_stability(&self) -> f64 {
        if self.stability_samples.is_empty() {
            1.0
        } else {
            self.stability_samples.iter().sum::<f64>() / self.stability_samples.len() as f64
        }
    }
}

pub fn carbon_ratio(thermal: f64, renewable: f64) -> f64 {
    let denom = thermal + renewable;
    if denom > 0.0 {
        thermal / denom
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyReport {
    pub day: usize,
    /// The command after clamping to capacities.
    pub applied: DispatchAction,
    pub thermal_actual: f64,
    pub wind_actual: f64,
    pub solar_actual: f64,
    pub charged: f64,
    pub discharged: f64,
    pub net_supply: f64,
    pub demand: f64,
    pub cost: f64,
    pub budget: f64,
    pub demand_violated: bool,
    pub budget_violated: bool,
    pub stability: f64,
    pub mean_stability: f64,
    pub carbon_ratio: f64,
    pub state_of_charge: f64,
    pub consecutive_violations: usize,
    pub warnings: Vec<String>,
}

impl DailyReport {
    pub fn violated(&self) -> bool {
        self.demand_violated || self.budget_violated
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "Day {} dispatched: thermal {:.1}, wind {:.1}, solar {:.1} MW actual; battery {}; \
             net supply {:.1} MW vs demand {:.1} MW; cost {:.1} vs budget {:.1}.",
            self.day + 1,
            self.thermal_actual,
            self.wind_actual,
            self.solar_actual,
            if self.charged > 0.0 {
                format!("charged {:.1} MWh", self.charged)
            } else if self.discharged > 0.0 {
                format!("discharged {:.1} MWh", self.discharged)
            } else {
                "idle".to_string()
            },
            self.net_supply,
            self.demand,
            self.cost,
            self.budget,
        );
        if self.demand_violated {
            s.push_str(&format!(" Demand violation: short by {:.1} MW.", self.demand - self.net_supply));
        }
        if self.budget_violated {
            s.push_str(&format!(" Budget violation: over by {:.1}.", self.cost - self.budget));
        }
        s.push_str(&format!(
            " Stability today {:.3}, running stability {:.3}, carbon ratio {:.3}.",
            self.stability, self.mean_stability, self.carbon_ratio
        ));
        for w in &self.warnings {
            s.push(' ');
            s.push_str(w);
        }
        s
    }
}

/// `clamp(1 - ramp / ramp_scale - penalty × violated, 0, 1)` with `ramp` the
/// L1 change of the four command components; the first day has zero ramp.
pub fn compute_stability(
    previous: Option<&DispatchAction>,
    action: &DispatchAction,
    violated: bool,
    config: &EnergyConfig,
) -> f64 {
    let ramp = previous.map_or(0.0, |p| {
        (action.thermal - p.thermal).abs()
            + (action.wind - p.wind).abs()
            + (action.solar - p.solar).abs()
            + (action.battery - p.battery).abs()
    });
    let penalty = if violated { config.violation_penalty } else { 0.0 };
    (1.0 - ramp / config.ramp_scale - penalty).clamp(0.0, 1.0)
}

fn clamp_command(value: f64, cap: f64, name: &str, warnings: &mut Vec<String>) -> f64 {
    if value.is_nan() {
        warnings.push(format!("Warning: {name} command was not a number; used 0."));
        0.0
    } else if value < 0.0 {
        warnings.push(format!("Warning: {name} command {value} below 0; clamped to 0."));
        0.0
    } else if value > cap {
        warnings.push(format!("Warning: {name} command {value} above capacity; clamped to {cap}."));
        cap
    } else {
        value
    }
}

/// Dispatch one day.
pub fn step_dispatch(
    state: &GridState,
    config: &EnergyConfig,
    action: &DispatchAction,
) -> Result<(GridState, DailyReport)> {
    let day = state.day;
    if day >= config.horizon {
        return Err(ArenaError::State(format!("day {day} is past the horizon of {} days", config.horizon)));
    }
    let mut warnings = Vec::new();
    let caps = config.capacities;
    let bcap = config.battery_capacity;
    let applied = DispatchAction {
        thermal: clamp_command(action.thermal, caps.thermal, "thermal", &mut warnings),
        wind: clamp_command(action.wind, caps.wind, "wind", &mut warnings),
        solar: clamp_command(action.solar, caps.solar, "solar", &mut warnings),
        battery: if action.battery.is_nan() {
            warnings.push("Warning: battery command was not a number; used 0.".into());
            0.0
        } else if action.battery.abs() > bcap {
            warnings.push(format!("Warning: battery command {} clamped to ±{bcap}.", action.battery));
            action.battery.clamp(-bcap, bcap)
        } else {
            action.battery
        },
    };
    let (e_th, e_w, e_s) = config.efficiencies(day);
    let thermal_actual = applied.thermal * e_th;
    let wind_actual = applied.wind * e_w;
    let solar_actual = applied.solar * e_s;
    let mut soc = state.state_of_charge;
    let (mut charged, mut discharged) = (0.0, 0.0);
    if applied.battery < 0.0 {
        charged = (-applied.battery).min(bcap - soc);
        if charged < -applied.battery {
            warnings.push(format!("Battery charge truncated to {charged} MWh at full capacity."));
        }
        soc += charged;
    } else if applied.battery > 0.0 {
        discharged = applied.battery.min(soc);
        if discharged < applied.battery {
            warnings.push(format!("Battery discharge truncated to {discharged} MWh by state of charge."));
        }
        soc -= discharged;
    }
    let soc = soc.clamp(0.0, bcap);
    let net_supply = thermal_actual + wind_actual + solar_actual - charged + discharged;
    let uc = config.unit_costs;
    let cost = applied.thermal * uc.thermal
        + applied.wind * uc.wind
        + applied.solar * uc.solar
        + (charged + discharged) * uc.battery;
    let demand = config.demand[day];
    let budget = config.budget(day);
    let demand_violated = net_supply < demand;
    let budget_violated = cost > budget;
    let violated = demand_violated || budget_violated;
    let stability = compute_stability(state.previous_action.as_ref(), &applied, violated, config);
    let mut next = state.clone();
    next.day = day + 1;
    next.state_of_charge = soc;
    next.consecutive_violations = if violated { state.consecutive_violations + 1 } else { 0 };
    next.cumulative_thermal_actual += thermal_actual;
    next.cumulative_renewable_actual += wind_actual + solar_actual;
    next.stability_samples.push(stability);
    next.previous_action = Some(applied);
    let report = DailyReport {
        day,
        applied,
        thermal_actual,
        wind_actual,
        solar_actual,
        charged,
        discharged,
        net_supply,
        demand,
        cost,
        budget,
        demand_violated,
        budget_violated,
        stability,
        mean_stability: next.mean_stability(),
        carbon_ratio: next.carbon_ratio(),
        state_of_charge: soc,
        consecutive_violations: next.consecutive_violations,
        warnings,
    };
    Ok((next, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridVerdict {
    Running,
    Success,
    /// Too many consecutive violation days.
    Blackout,
    /// Survived the horizon but missed a threshold.
    ThresholdsMissed,
}

pub fn check_termination_and_success(state: &GridState, config: &EnergyConfig) -> GridVerdict {
    if state.consecutive_violations >= config.violation_limit {
        GridVerdict::Blackout
    } else if state.day >= config.horizon {
        if state.mean_stability() > config.tau_stability && state.carbon_ratio() < config.tau_carbon {
            GridVerdict::Success
        } else {
            GridVerdict::ThresholdsMissed
        }
    } else {
        GridVerdict::Running
    }
}

pub fn render_observation(state: &GridState, config: &EnergyConfig) -> String {
    let mut s = if state.day < config.horizon {
        format!(
            "Day {} of {}. Demand today: {:.1} MW. Budget today: {:.1}.",
            state.day + 1,
            config.horizon,
            config.demand[state.day],
            config.budget(state.day)
        )
    } else {
        format!("All {} days dispatched.", config.horizon)
    };
    s.push_str(&format!(
        "\nBattery: {:.1} / {:.0} MWh. Consecutive violation days: {} (limit {}).\n\
         Running stability: {:.3} (target > {:.2}). Carbon ratio: {:.3} (target < {:.2}).",
        state.state_of_charge,
        config.battery_capacity,
        state.consecutive_violations,
        config.violation_limit,
        state.mean_stability(),
        config.tau_stability,
        state.carbon_ratio(),
        config.tau_carbon,
    ));
    s
}

/// Perfect-information dispatcher: meets demand with a small margin, spends up
/// to 98% of the budget replacing thermal with the cheaper renewable per unit
/// of actual output, and leaves the battery idle.
pub fn oracle_action(config: &EnergyConfig, day: usize) -> DispatchAction {
    let (e_th, e_w, e_s) = config.efficiencies(day);
    let caps = config.capacities;
    let uc = config.unit_costs;
    let target = config.demand[day] * (1.0 + ORACLE_MARGIN);
    let budget = 0.98 * config.budget(day);
    let th_unit = uc.thermal / e_th;
    let mut renew = [(uc.wind / e_w, e_w, caps.wind, 0usize), (uc.solar / e_s, e_s, caps.solar, 1usize)];
    renew.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Start all-thermal, then shift actual output to renewables while the
    // budget allows.
    let mut thermal_actual = target.min(caps.thermal * e_th);
    let mut remaining = target - thermal_actual;
    let mut rated = [0.0f64; 2];
    let mut cost = thermal_actual * th_unit;
    for (unit, eff, cap, idx) in renew {
        // Uncovered demand first, at full renewable cost.
        let cover = remaining.min(cap * eff);
        rated[idx] += cover / eff;
        cost += cover * unit;
        remaining -= cover;
        let room = cap * eff - cover;
        let extra_per_unit = unit - th_unit;
        let afford = if extra_per_unit > 0.0 { ((budget - cost) / extra_per_unit).max(0.0) } else { room };
        let shift = room.min(afford).min(thermal_actual);
        rated[idx] += shift / eff;
        thermal_actual -= shift;
        cost += shift * extra_per_unit;
    }
    DispatchAction { thermal: thermal_actual / e_th, wind: rated[0], solar: rated[1], battery: 0.0 }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    pub verdict: GridVerdict,
    pub days_survived: usize,
    pub mean_stability: f64,
    pub carbon_ratio: f64,
}

pub fn run_oracle(config: &EnergyConfig) -> OracleRun {
    let mut state = GridState::initial(config);
    let mut verdict = GridVerdict::Running;
    while verdict == GridVerdict::Running {
        let action = oracle_action(config, state.day);
        state = step_dispatch(&state, config, &action).expect("oracle stays within horizon").0;
        verdict = check_termination_and_success(&state, config);
    }
    OracleRun {
        verdict,
        days_survived: state.day,
        mean_stability: state.mean_stability(),
        carbon_ratio: state.carbon_ratio(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub horizon: usize,
    pub tau_carbon: f64,
    pub tau_stability: f64,
}

impl EnergyParams {
    pub fn new(horizon: usize) -> Self {
        Self { horizon, tau_carbon: DEFAULT_TAU_CARBON, tau_stability: DEFAULT_TAU_STABILITY }
    }
}

pub const ENERGY_REJECTION_BUDGET: usize = 200;

fn sample_demand(rng: &mut RngStream, horizon: usize) -> Vec<f64> {
    let (lo, hi) = DEMAND_RANGE;
    let mut d = rng.uniform(550.0, 750.0);
    let mut v = 0.0;
    (0..horizon)
        .map(|_| {
            let out = round_to(d, 1);
            v = 0.8 * v + rng.normal(0.0, 12.0);
            d += v;
            if d < lo || d > hi {
                d = d.clamp(lo, hi);
                v *= -0.5;
            }
            out
        })
        .collect()
}

/// Sample demand, efficiencies and thresholds, accepting only configurations
/// the feasibility dispatcher completes successfully.
pub fn generate_energy_task(seed: u64, params: &EnergyParams) -> Result<EnergyConfig> {
    let h = params.horizon;
    if h < 2 * PERIOD_RANGE.1 {
        return Err(ArenaError::config("horizon", format!("must be at least {} days", 2 * PERIOD_RANGE.1)));
    }
    if !(0.0..1.0).contains(&params.tau_stability) || !(0.0..=1.0).contains(&params.tau_carbon) {
        return Err(ArenaError::config("tau_carbon", "thresholds must lie in [0, 1]"));
    }
    let mut rng = RngStream::new(seed, "energy");
    for _ in 0..ENERGY_REJECTION_BUDGET {
        let mut curve_rng = rng.fork("curves");
        let wind_period = curve_rng.range_inclusive(PERIOD_RANGE.0 as i64, PERIOD_RANGE.1 as i64) as usize;
        let mut solar_period = wind_period;
        while solar_period == wind_period {
            solar_period = curve_rng.range_inclusive(PERIOD_RANGE.0 as i64, PERIOD_RANGE.1 as i64) as usize;
        }
        let wind = sample_curve(&mut curve_rng.fork("wind"), Source::Wind, h, wind_period)?;
        let solar = sample_curve(&mut curve_rng.fork("solar"), Source::Solar, h, solar_period)?;
        let mut th_rng = rng.fork("thermal");
        let thermal_efficiency: Vec<f64> =
            (0..h).map(|_| q9(th_rng.normal(1.0, 0.02).clamp(THERMAL_RANGE.0, THERMAL_RANGE.1))).collect();
        let demand = sample_demand(&mut rng.fork("demand"), h);
        let config = EnergyConfig {
            horizon: h,
            capacities: Capacities::default(),
            battery_capacity: 80.0,
            initial_soc: 0.0,
            unit_costs: UnitCosts::default(),
            demand,
            thermal_efficiency,
            wind,
            solar,
            tau_carbon: q9(params.tau_carbon),
            tau_stability: q9(params.tau_stability),
            violation_limit: 3,
            ramp_scale: 1280.0,
            violation_penalty: 0.5,
        };
        config.validate()?;
        if run_oracle(&config).verdict == GridVerdict::Success {
            return Ok(config);
        }
    }
    Err(ArenaError::Generation(format!(
        "no energy configuration the dispatcher can complete within {ENERGY_REJECTION_BUDGET} attempts; \
         loosen tau_carbon or tau_stability"
    )))
}

impl EnergyConfig {
    /// Three-day walkthrough with efficiencies (0.9, 1.1, 1.0). The wind value
    /// lies above the generated wind range, so [`EnergyConfig::validate`]
    /// rejects this config; it only serves dispatch arithmetic.
    pub fn tutorial() -> Self {
        Self::flat(0.9, 1.1, 1.0)
    }

    /// Three-day configuration with constant efficiencies.
    pub fn flat(thermal: f64, wind: f64, solar: f64) -> Self {
        let h = 3;
        let flat = |source: Source, v: f64| EfficiencyCurve {
            source,
            period: 1,
            values: vec![v; h],
            record: CurveRecord { base: vec![v], offsets: vec![0.0; h], spikes: vec![0.0; h], noise: vec![0.0; h] },
        };
        EnergyConfig {
            horizon: h,
            capacities: Capacities::default(),
            battery_capacity: 80.0,
            initial_soc: 0.0,
            unit_costs: UnitCosts::default(),
            demand: vec![50.0, 60.0, 55.0],
            thermal_efficiency: vec![thermal; h],
            wind: flat(Source::Wind, wind),
            solar: flat(Source::Solar, solar),
            tau_carbon: DEFAULT_TAU_CARBON,
            tau_stability: DEFAULT_TAU_STABILITY,
            violation_limit: 3,
            ramp_scale: 1280.0,
            violation_penalty: 0.5,
        }
    }
}
