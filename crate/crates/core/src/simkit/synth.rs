use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{ConfigError, Outcome, PriceProcess, ScenarioConfig};
use crate::panel::{ItemId, Panel, PanelMetadata, PanelObservation, Provenance};

/// SplitMix64 finaliser. Stable across platforms and releases.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replication `rep` of a batch seeded with `seed`:
/// `splitmix64(seed ^ splitmix64(rep))`.
pub fn replication_seed(seed: u64, rep: u64) -> u64 {
    splitmix64(seed ^ splitmix64(rep))
}

pub(crate) fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn normal<R: Rng + ?Sized>(rng: &mut R, sd: f64) -> f64 {
    if sd == 0.0 {
        // Keep the stream aligned whether or not a component is switched off.
        let _: f64 = StandardNormal.sample(rng);
        0.0
    } else {
        let z: f64 = StandardNormal.sample(rng);
        sd * z
    }
}

/// Per-item latent log-price paths, shared by the direct sampler and the
/// agent-based runner. `paths[i][t]` is item `i+1` on day `t`, before effects.
pub(crate) struct LatentPrices {
    pub item_means: Vec<f64>,
    pub paths: Vec<Vec<f64>>,
}

pub(crate) fn latent_prices<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> LatentPrices {
    let n = config.n_items;
    let days = config.n_days;
    match config.prices {
        PriceProcess::Ar1 {
            base_log_price,
            item_dispersion,
            persistence,
            volatility,
            drift,
        } => {
            let item_means: Vec<f64> = (0..n)
                .map(|_| base_log_price + normal(rng, item_dispersion))
                .collect();
            let stationary_sd = volatility / (1.0 - persistence * persistence).sqrt();
            let paths = item_means
                .iter()
                .map(|mu| {
                    let mut u = normal(rng, stationary_sd);
                    (0..days)
                        .map(|t| {
                            if t > 0 {
                                u = persistence * u + normal(rng, volatility);
                            }
                            mu + drift * t as f64 + u
                        })
                        .collect()
                })
                .collect();
            LatentPrices { item_means, paths }
        }
        PriceProcess::Uniform { low, high } => {
            let mid = (0.5 * (low + high)).ln();
            let item_means = vec![mid; n];
            let paths = (0..n)
                .map(|_| {
                    (0..days)
                        .map(|_| rng.random_range(low..high).ln())
                        .collect()
                })
                .collect();
            LatentPrices { item_means, paths }
        }
    }
}

/// Sum of effect and divergent-trend contributions to `log outcome`.
pub(crate) fn outcome_shift(
    config: &ScenarioConfig,
    outcome: Outcome,
    item: ItemId,
    price: f64,
    day: usize,
    date: NaiveDate,
) -> f64 {
    let effects: f64 = config
        .effects
        .iter()
        .map(|e| e.contribution(outcome, item, price, date))
        .sum();
    let trends: f64 = config
        .trends
        .iter()
        .filter(|t| t.outcome == outcome && t.items.contains(&item))
        .map(|t| t.per_week * day as f64 / 7.0)
        .sum();
    effects + trends
}

/// Samples the panel straight from the parametric process, bypassing the
/// exchange.
///
/// Price effects shift `log P` first; volume is then drawn from the
/// volume process evaluated at the shifted price, so `rd_step` and
/// `rk_slope` act on the observed running variable.
pub fn synth_panel(config: &ScenarioConfig) -> Result<Panel, ConfigError> {
    config.validate()?;
    let mut rng = rng_for(config.seed);
    let latent = latent_prices(config, &mut rng);
    let vol = &config.volume;
    let item_effects: Vec<f64> = (0..config.n_items).map(|_| normal(&mut rng, vol.item_sd)).collect();
    let day_effects: Vec<f64> = (0..config.n_days).map(|_| normal(&mut rng, vol.day_sd)).collect();

    let mut observations = Vec::with_capacity(config.n_items * config.n_days);
    for (i, item) in config.item_ids().enumerate() {
        for day in 0..config.n_days {
            let date = config.date_of_day(day);
            let base = latent.paths[i][day];
            let base_price = base.exp();
            let log_p = base + outcome_shift(config, Outcome::Price, item, base_price, day, date);
            let price = log_p.exp();
            let log_v = vol.intercept
                + vol.price_slope * price
                + vol.log_price_slope * log_p
                + item_effects[i]
                + day_effects[day]
                + normal(&mut rng, vol.noise_sd)
                + outcome_shift(config, Outcome::Volume, item, price, day, date);
            observations.push(PanelObservation {
                item_id: item,
                date,
                price,
                volume: log_v.exp(),
            });
        }
    }
    let metadata = PanelMetadata {
        provenance: Provenance::Simulated,
        ground_truth: Some(config.effects.clone()),
        seed: Some(config.seed),
    };
    Panel::new(observations, metadata).map_err(|e| {
        ConfigError::ConfigInvalid(vec![super::config::FieldError {
            field: "volume".into(),
            message: format!("process produced an invalid observation: {e}"),
        }])
    })
}
