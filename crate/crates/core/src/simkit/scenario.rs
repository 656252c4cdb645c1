//! Agent-based runner: zero-intelligence order flow through the exchange.
//!
//! Each item carries a latent log-price path from the configured price
//! process. Every day, buy and sell order counts are Poisson with an
//! intensity driven by the volume process; each order comes from a random
//! agent with a limit price drawn uniformly in log-space around the day's
//! quote centre. Sellers short of inventory produce the missing units
//! first (recorded as minted items); buyers short of GP are rejected. All
//! orders are day orders: whatever rests after the sink has run is
//! cancelled at the close. These are modelling conventions, not calibrated
//! behaviour.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::config::{ConfigError, Outcome, ScenarioConfig};
use super::synth::{latent_prices, normal, outcome_shift, rng_for};
use crate::exchange::{
    daily_summary, ExchangeError, Gp, ItemSpec, Market, MarketConfig, MintLedger, OrderRequest,
    PlayerId, Removal, Side, SimTime, SinkPolicy, Trade, MINUTES_PER_DAY,
};
use crate::panel::{ItemId, Panel, PanelMetadata, PanelObservation, Provenance};

/// Counts of orders the exchange refused, by reason.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionCounts {
    pub insufficient_funds: u64,
    pub buy_limit: u64,
    pub slots: u64,
    pub other: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioStats {
    pub orders_submitted: u64,
    pub rejections: RejectionCounts,
    pub final_coffer: Gp,
    pub total_gp: Gp,
    pub mint: MintLedger,
}

#[derive(Clone, Debug)]
pub struct ScenarioOutput {
    pub panel: Panel,
    pub trades: Vec<Trade>,
    pub removals: Vec<Removal>,
    pub stats: ScenarioStats,
}

struct PendingOrder {
    minute: u64,
    item: ItemId,
    side: Side,
    player: PlayerId,
    limit: Gp,
    qty: u64,
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioOutput, ConfigError> {
    config.validate()?;
    let mut rng = rng_for(config.seed);
    let latent = latent_prices(config, &mut rng);
    let vol = &config.volume;
    let params = &config.agents;
    let item_effects: Vec<f64> = (0..config.n_items).map(|_| normal(&mut rng, vol.item_sd)).collect();
    let day_effects: Vec<f64> = (0..config.n_days).map(|_| normal(&mut rng, vol.day_sd)).collect();

    let mut market = Market::new(MarketConfig::new(config.start_date));
    for (i, id) in config.item_ids().enumerate() {
        market
            .list_item(ItemSpec {
                id,
                name: format!("item-{}", id.0),
                buy_limit: params.buy_limit,
                high_level: latent.item_means[i].exp() > 100_000.0,
            })
            .expect("fresh item ids");
    }
    let players: Vec<PlayerId> = (1..=config.n_agents as u32).map(PlayerId).collect();
    for &p in &players {
        market.register_player(p).expect("fresh player ids");
        market.mint_gp(p, Gp(params.initial_gp)).expect("registered");
    }
    let sinks: Vec<SinkPolicy> = config
        .interventions
        .sink_rounds
        .iter()
        .map(|r| SinkPolicy {
            target_items: r.items.iter().copied().collect(),
            daily_max: r.daily_max,
            active_from: r.date,
        })
        .collect();

    let mut stats = RejectionCounts::default();
    let mut submitted = 0u64;
    let mut observations: Vec<PanelObservation> = Vec::new();

    for day in 0..config.n_days {
        let date = config.date_of_day(day);
        let taxed = config.interventions.tax_from.is_some_and(|d| date >= d);
        market.set_tax(taxed.then_some(config.interventions.tax));

        let mut pending = Vec::new();
        for (i, item) in config.item_ids().enumerate() {
            let base = latent.paths[i][day];
            let centre = base + outcome_shift(config, Outcome::Price, item, base.exp(), day, date);
            let price = centre.exp();
            let intensity_shift = vol.price_slope * (price - latent.item_means[i].exp())
                + vol.log_price_slope * (centre - latent.item_means[i])
                + item_effects[i]
                + day_effects[day]
                + normal(&mut rng, vol.noise_sd)
                + outcome_shift(config, Outcome::Volume, item, price, day, date);
            let lambda = params.orders_per_item_day * intensity_shift.exp();
            for side in [Side::Buy, Side::Sell] {
                let count = draw_poisson(&mut rng, lambda);
                for _ in 0..count {
                    let offset = if params.quote_half_width > 0.0 {
                        rng.random_range(-params.quote_half_width..=params.quote_half_width)
                    } else {
                        0.0
                    };
                    let limit = (centre + offset).exp().round().max(1.0);
                    pending.push(PendingOrder {
                        minute: rng.random_range(0..MINUTES_PER_DAY),
                        item,
                        side,
                        player: players[rng.random_range(0..players.len())],
                        limit: Gp(limit.min(u64::MAX as f64 / 4.0) as u64),
                        qty: rng.random_range(1..=params.max_order_qty),
                    });
                }
            }
        }
        // Stable sort keeps generation order within a minute.
        pending.sort_by_key(|o| o.minute);

        let day_start = market.trade_log().len();
        for order in pending {
            market
                .advance_to(SimTime(day as u64 * MINUTES_PER_DAY + order.minute))
                .expect("orders sorted by time");
            if order.side == Side::Sell {
                let held = market.inventory(order.player, order.item).unwrap_or(0);
                if held < order.qty {
                    market
                        .mint_items(order.player, order.item, order.qty - held)
                        .expect("listed item, registered player");
                }
            }
            submitted += 1;
            let result = market.submit_order(OrderRequest {
                player_id: order.player,
                side: order.side,
                item: order.item,
                limit_price: order.limit,
                quantity: order.qty,
            });
            match result {
                Ok(_) => {}
                Err(ExchangeError::InsufficientFunds { .. }) => stats.insufficient_funds += 1,
                Err(ExchangeError::BuyLimitExceeded { .. }) => stats.buy_limit += 1,
                Err(ExchangeError::OrderSlotsExhausted { .. }) => stats.slots += 1,
                Err(_) => stats.other += 1,
            }
        }
        market
            .advance_to(SimTime((day as u64 + 1) * MINUTES_PER_DAY - 1))
            .expect("end of day is after every order");
        for policy in &sinks {
            market.run_sink_day(policy, date);
        }
        market.cancel_all();
        observations.extend(daily_summary(&market.trade_log()[day_start..], date));
        if params.daily_income > 0 {
            for &p in &players {
                market.mint_gp(p, Gp(params.daily_income)).expect("registered");
            }
        }
    }

    let panel = Panel::new(
        observations,
        PanelMetadata {
            provenance: Provenance::Simulated,
            ground_truth: Some(config.effects.clone()),
            seed: Some(config.seed),
        },
    )
    .expect("daily summaries are unique per item-date with positive prices");

    Ok(ScenarioOutput {
        panel,
        trades: market.trade_log().to_vec(),
        removals: market.removal_log().to_vec(),
        stats: ScenarioStats {
            orders_submitted: submitted,
            rejections: stats,
            final_coffer: market.coffer().balance,
            total_gp: market.total_gp(),
            mint: market.mint_ledger().clone(),
        },
    })
}

fn draw_poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    if lambda <= 0.0 || !lambda.is_finite() {
        return 0;
    }
    let poisson = Poisson::new(lambda).expect("positive finite rate");
    poisson.sample(rng) as u64
}

/// Per-item mean log panel price, for comparing a run with its process.
pub fn mean_log_price_by_item(panel: &Panel) -> BTreeMap<ItemId, (f64, usize)> {
    let mut out = BTreeMap::new();
    for item in panel.items() {
        let series = panel.item_series(item);
        let n = series.len();
        let mean = series.iter().map(|o| o.price.ln()).sum::<f64>() / n as f64;
        out.insert(item, (mean, n));
    }
    out
}
