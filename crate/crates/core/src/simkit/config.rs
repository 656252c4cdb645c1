//! Scenario configuration and its TOML schema.
//!
//! ```toml
//! seed = 7
//! n_items = 60
//! n_agents = 1000
//! n_days = 60
//! start_date = "2021-11-10"
//!
//! [prices]              # or: kind = "uniform", low = 80.0, high = 120.0
//! kind = "ar1"
//! base_log_price = 13.0
//! item_dispersion = 0.5
//! persistence = 0.5
//! volatility = 0.05
//! drift = 0.0
//!
//! [volume]
//! intercept = 3.0
//! price_slope = 0.0
//! log_price_slope = 0.0
//! item_sd = 0.3
//! day_sd = 0.0
//! noise_sd = 0.2
//!
//! [agents]              # only read by the agent-based runner
//! orders_per_item_day = 20.0
//!
//! [interventions]
//! tax_from = "2021-12-09"
//! [[interventions.sink_rounds]]
//! date = "2021-12-09"
//! items = [1, 2, 3]
//! daily_max = 2
//!
//! [[effects]]
//! kind = "did_level"
//! magnitude = 0.07
//! locus = { items = [1, 2, 3] }
//! effect_date = "2021-12-09"
//! outcome = "price"
//!
//! [[trends]]            # optional pre-trend violation
//! items = [1, 2, 3]
//! per_week = 0.01
//! outcome = "price"
//! ```

use std::collections::BTreeSet;
use std::fmt;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::exchange::TaxSchedule;
use crate::panel::ItemId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub n_items: usize,
    #[serde(default = "default_agents")]
    pub n_agents: usize,
    pub n_days: usize,
    pub start_date: NaiveDate,
    pub prices: PriceProcess,
    #[serde(default)]
    pub volume: VolumeProcess,
    #[serde(default)]
    pub agents: AgentParams,
    #[serde(default)]
    pub interventions: Interventions,
    #[serde(default)]
    pub effects: Vec<InjectedEffect>,
    #[serde(default)]
    pub trends: Vec<DivergentTrend>,
}

fn default_agents() -> usize {
    1000
}

/// Item price process. Item `i` has mean log-price
/// `base_log_price + item_dispersion * z_i` with `z_i ~ N(0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriceProcess {
    /// `log P = mu_i + drift * t + u_t`, `u_t = persistence * u_{t-1} + volatility * e_t`,
    /// started from the stationary distribution.
    Ar1 {
        base_log_price: f64,
        #[serde(default)]
        item_dispersion: f64,
        #[serde(default)]
        persistence: f64,
        #[serde(default)]
        volatility: f64,
        #[serde(default)]
        drift: f64,
    },
    /// Independent uniform prices per item-day; used for running-variable designs.
    Uniform { low: f64, high: f64 },
}

/// `log V = intercept + price_slope * P + log_price_slope * log P + item + day + noise + effects`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeProcess {
    #[serde(default)]
    pub intercept: f64,
    #[serde(default)]
    pub price_slope: f64,
    #[serde(default)]
    pub log_price_slope: f64,
    #[serde(default)]
    pub item_sd: f64,
    #[serde(default)]
    pub day_sd: f64,
    #[serde(default)]
    pub noise_sd: f64,
}

/// Order-flow conventions for the agent-based runner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentParams {
    /// Mean number of buy orders (and, separately, sell orders) per item-day.
    pub orders_per_item_day: f64,
    pub max_order_qty: u64,
    /// Half-width of the uniform log-offset of limit prices around the quote centre.
    pub quote_half_width: f64,
    pub initial_gp: u64,
    pub daily_income: u64,
    pub buy_limit: u64,
}

impl Default for AgentParams {
    fn default() -> Self {
        AgentParams {
            orders_per_item_day: 20.0,
            max_order_qty: 3,
            quote_half_width: 0.02,
            initial_gp: 5_000_000_000,
            daily_income: 50_000_000,
            buy_limit: 10_000,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interventions {
    #[serde(default)]
    pub tax_from: Option<NaiveDate>,
    #[serde(default)]
    pub tax: TaxSchedule,
    #[serde(default)]
    pub sink_rounds: Vec<SinkRound>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinkRound {
    pub date: NaiveDate,
    pub items: Vec<ItemId>,
    pub daily_max: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    RdStep,
    RkSlope,
    DidLevel,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    #[default]
    Price,
    Volume,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Price => "price",
            Outcome::Volume => "volume",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Locus {
    Cutoff(f64),
    Items(Vec<ItemId>),
}

/// A planted treatment effect, in log-points.
///
/// * `rd_step`: adds `magnitude * 1{P >= cutoff}` to log-volume.
/// * `rk_slope`: adds `magnitude * min(P, kink) / 100 / tax_scale` to
///   log-volume, i.e. `magnitude` times the (rescaled) capped 1% tax.
/// * `did_level`: adds `magnitude` to the log outcome of the listed items.
///
/// All kinds apply from `effect_date` on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectedEffect {
    pub kind: EffectKind,
    pub magnitude: f64,
    pub locus: Locus,
    pub effect_date: NaiveDate,
    #[serde(default)]
    pub outcome: Outcome,
    #[serde(default = "unit_scale")]
    pub tax_scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl InjectedEffect {
    pub fn rd_step(magnitude: f64, cutoff: f64, effect_date: NaiveDate) -> Self {
        InjectedEffect {
            kind: EffectKind::RdStep,
            magnitude,
            locus: Locus::Cutoff(cutoff),
            effect_date,
            outcome: Outcome::Volume,
            tax_scale: 1.0,
        }
    }

    pub fn rk_slope(magnitude: f64, kink: f64, tax_scale: f64, effect_date: NaiveDate) -> Self {
        InjectedEffect {
            kind: EffectKind::RkSlope,
            magnitude,
            locus: Locus::Cutoff(kink),
            effect_date,
            outcome: Outcome::Volume,
            tax_scale,
        }
    }

    pub fn did_level(
        magnitude: f64,
        items: Vec<ItemId>,
        effect_date: NaiveDate,
        outcome: Outcome,
    ) -> Self {
        InjectedEffect {
            kind: EffectKind::DidLevel,
            magnitude,
            locus: Locus::Items(items),
            effect_date,
            outcome,
            tax_scale: 1.0,
        }
    }

    /// Contribution to the log of `outcome` for `item` at `price` on `date`.
    pub fn contribution(&self, outcome: Outcome, item: ItemId, price: f64, date: NaiveDate) -> f64 {
        if date < self.effect_date {
            return 0.0;
        }
        match (self.kind, &self.locus) {
            (EffectKind::RdStep, Locus::Cutoff(c)) if outcome == Outcome::Volume => {
                if price >= *c {
                    self.magnitude
                } else {
                    0.0
                }
            }
            (EffectKind::RkSlope, Locus::Cutoff(k)) if outcome == Outcome::Volume => {
                self.magnitude * price.min(*k) / 100.0 / self.tax_scale
            }
            (EffectKind::DidLevel, Locus::Items(items)) if outcome == self.outcome => {
                if items.contains(&item) {
                    self.magnitude
                } else {
                    0.0
                }
            }
            _ => 0.0,
        }
    }
}

/// Extra linear trend in a log outcome for some items, for testing the
/// pre-trends diagnostic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergentTrend {
    pub items: Vec<ItemId>,
    pub per_week: f64,
    #[serde(default)]
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid scenario config:\n{}", .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    ConfigInvalid(Vec<FieldError>),
    #[error("cannot parse scenario config{}: {message}", .line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|span| text[..span.start.min(text.len())].matches('\n').count() + 1);
            ConfigError::Parse {
                line,
                message: e.message().to_string(),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn end_date(&self) -> NaiveDate {
        self.start_date + Days::new(self.n_days.saturating_sub(1) as u64)
    }

    pub fn date_of_day(&self, day: usize) -> NaiveDate {
        self.start_date + Days::new(day as u64)
    }

    pub fn item_ids(&self) -> impl Iterator<Item = ItemId> {
        (1..=self.n_items as u32).map(ItemId)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        let mut push = |field: &str, message: String| {
            errs.push(FieldError {
                field: field.to_string(),
                message,
            })
        };
        if self.n_days == 0 {
            push("n_days", "must be at least 1".into());
        }
        if self.n_items == 0 {
            push("n_items", "must be at least 1".into());
        }
        if self.n_agents == 0 {
            push("n_agents", "must be at least 1".into());
        }
        match &self.prices {
            PriceProcess::Ar1 {
                base_log_price,
                item_dispersion,
                persistence,
                volatility,
                drift,
            } => {
                for (name, v) in [
                    ("prices.base_log_price", base_log_price),
                    ("prices.drift", drift),
                ] {
                    if !v.is_finite() {
                        push(name, "must be finite".into());
                    }
                }
                for (name, v) in [
                    ("prices.item_dispersion", item_dispersion),
                    ("prices.volatility", volatility),
                ] {
                    if !(v.is_finite() && *v >= 0.0) {
                        push(name, "must be finite and non-negative".into());
                    }
                }
                if !(persistence.abs() < 1.0) {
                    push("prices.persistence", "must lie in (-1, 1)".into());
                }
            }
            PriceProcess::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && *low > 0.0 && low < high) {
                    push("prices", format!("uniform range [{low}, {high}] must satisfy 0 < low < high"));
                }
            }
        }
        let v = &self.volume;
        for (name, x) in [
            ("volume.intercept", v.intercept),
            ("volume.price_slope", v.price_slope),
            ("volume.log_price_slope", v.log_price_slope),
        ] {
            if !x.is_finite() {
                push(name, "must be finite".into());
            }
        }
        for (name, x) in [
            ("volume.item_sd", v.item_sd),
            ("volume.day_sd", v.day_sd),
            ("volume.noise_sd", v.noise_sd),
        ] {
            if !(x.is_finite() && x >= 0.0) {
                push(name, "must be finite and non-negative".into());
            }
        }
        let a = &self.agents;
        if !(a.orders_per_item_day.is_finite() && a.orders_per_item_day >= 0.0) {
            push("agents.orders_per_item_day", "must be finite and non-negative".into());
        }
        if a.max_order_qty == 0 {
            push("agents.max_order_qty", "must be at least 1".into());
        }
        if a.buy_limit == 0 {
            push("agents.buy_limit", "must be at least 1".into());
        }
        if !(a.quote_half_width.is_finite() && a.quote_half_width >= 0.0) {
            push("agents.quote_half_width", "must be finite and non-negative".into());
        }

        let horizon = self.start_date..=self.end_date();
        let known: BTreeSet<ItemId> = self.item_ids().collect();
        if let Some(d) = self.interventions.tax_from {
            if !horizon.contains(&d) {
                push("interventions.tax_from", format!("{d} is outside the simulation horizon"));
            }
        }
        if let Err(e) = self.interventions.tax.validate() {
            push("interventions.tax", e.to_string());
        }
        for (k, round) in self.interventions.sink_rounds.iter().enumerate() {
            let field = format!("interventions.sink_rounds[{k}]");
            if !horizon.contains(&round.date) {
                push(&format!("{field}.date"), format!("{} is outside the simulation horizon", round.date));
            }
            if round.items.is_empty() {
                push(&format!("{field}.items"), "must name at least one item".into());
            }
            if let Some(bad) = round.items.iter().find(|i| !known.contains(i)) {
                push(&format!("{field}.items"), format!("unknown item {bad}"));
            }
            if round.daily_max == 0 {
                push(&format!("{field}.daily_max"), "must be at least 1".into());
            }
        }
        for (k, effect) in self.effects.iter().enumerate() {
            let field = format!("effects[{k}]");
            if !effect.magnitude.is_finite() {
                push(&format!("{field}.magnitude"), "must be finite".into());
            }
            if !horizon.contains(&effect.effect_date) {
                push(&format!("{field}.effect_date"), format!("{} is outside the simulation horizon", effect.effect_date));
            }
            match (effect.kind, &effect.locus) {
                (EffectKind::RdStep | EffectKind::RkSlope, Locus::Cutoff(c)) => {
                    if !(c.is_finite() && *c > 0.0) {
                        push(&format!("{field}.locus"), "cutoff must be a positive price".into());
                    }
                    if effect.outcome != Outcome::Volume {
                        push(&format!("{field}.outcome"), "rd_step and rk_slope act on volume".into());
                    }
                }
                (EffectKind::DidLevel, Locus::Items(items)) => {
                    if items.is_empty() {
                        push(&format!("{field}.locus"), "treated set must be non-empty".into());
                    }
                    if let Some(bad) = items.iter().find(|i| !known.contains(i)) {
                        push(&format!("{field}.locus"), format!("unknown item {bad}"));
                    }
                }
                (kind, _) => push(
                    &format!("{field}.locus"),
                    format!("{kind:?} needs {}", if kind == EffectKind::DidLevel { "an item set" } else { "a cutoff" }),
                ),
            }
            if !(effect.tax_scale.is_finite() && effect.tax_scale > 0.0) {
                push(&format!("{field}.tax_scale"), "must be positive".into());
            }
        }
        for (k, trend) in self.trends.iter().enumerate() {
            if !trend.per_week.is_finite() {
                push(&format!("trends[{k}].per_week"), "must be finite".into());
            }
            if let Some(bad) = trend.items.iter().find(|i| !known.contains(i)) {
                push(&format!("trends[{k}].items"), format!("unknown item {bad}"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::ConfigInvalid(errs))
        }
    }
}
