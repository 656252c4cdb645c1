use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::EconometricsError;
use crate::panel::{DateWindow, ItemId, Panel};

/// Pearson correlation of two items' prices over their common dates.
pub fn price_correlation(
    panel: &Panel,
    item_i: ItemId,
    item_k: ItemId,
    window: Option<DateWindow>,
) -> Result<f64, EconometricsError> {
    let a = panel.price_map(item_i, window);
    let b = panel.price_map(item_k, window);
    correlation_of_maps(&a, &b, item_i, item_k)
}

fn correlation_of_maps(
    a: &BTreeMap<NaiveDate, f64>,
    b: &BTreeMap<NaiveDate, f64>,
    item_i: ItemId,
    item_k: ItemId,
) -> Result<f64, EconometricsError> {
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .filter_map(|(d, x)| b.get(d).map(|y| (*x, *y)))
        .collect();
    if pairs.len() < 3 {
        return Err(EconometricsError::InsufficientOverlap {
            item_a: item_i,
            item_b: item_k,
            common: pairs.len(),
        });
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 {
        return Err(EconometricsError::DegenerateSeries(item_i));
    }
    if syy <= 0.0 {
        return Err(EconometricsError::DegenerateSeries(item_k));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSetConfig {
    /// Universe is items whose mean price over the window exceeds this.
    pub price_floor: f64,
    pub sinked: BTreeSet<ItemId>,
    /// Candidates need `|rho| < threshold` against every sinked item.
    pub correlation_threshold: f64,
    pub window: Option<DateWindow>,
    pub intervention_date: Option<NaiveDate>,
}

impl ControlSetConfig {
    pub fn new(sinked: BTreeSet<ItemId>) -> Self {
        ControlSetConfig {
            price_floor: 100_000.0,
            sinked,
            correlation_threshold: 0.1,
            window: None,
            intervention_date: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum ExclusionReason {
    Correlated { with: ItemId, rho: f64 },
    InsufficientOverlap { with: ItemId, common: usize },
    DegenerateSeries { item: ItemId },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlExclusion {
    pub item: ItemId,
    #[serde(flatten)]
    pub reason: ExclusionReason,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSet {
    pub items: BTreeSet<ItemId>,
    /// Universe size, sinked items included.
    pub universe_size: usize,
    pub excluded: Vec<ControlExclusion>,
}

/// Items in the high-price universe, outside the sink, whose price
/// correlation with every sinked item is below the threshold in absolute
/// value. Candidates whose correlation cannot be computed against some
/// sinked item are excluded and listed with the reason.
pub fn build_control_set(
    panel: &Panel,
    config: &ControlSetConfig,
) -> Result<ControlSet, EconometricsError> {
    let t = config.correlation_threshold;
    if !(t > 0.0 && t < 1.0) {
        return Err(EconometricsError::InvalidSpec(format!(
            "correlation threshold must lie in (0, 1), got {t}"
        )));
    }
    if let (Some(w), Some(d)) = (config.window, config.intervention_date) {
        if w.end >= d {
            return Err(EconometricsError::InvalidSpec(format!(
                "correlation window must end before the intervention ({} >= {d})",
                w.end
            )));
        }
    }
    let maps: BTreeMap<ItemId, BTreeMap<NaiveDate, f64>> = panel
        .items()
        .into_iter()
        .map(|i| (i, panel.price_map(i, config.window)))
        .filter(|(_, m)| !m.is_empty())
        .collect();
    let universe: BTreeSet<ItemId> = maps
        .iter()
        .filter(|(_, m)| m.values().sum::<f64>() / m.len() as f64 > config.price_floor)
        .map(|(i, _)| *i)
        .collect();
    if let Some(outside) = config.sinked.iter().find(|k| !universe.contains(k)) {
        return Err(EconometricsError::SinkOutsideUniverse(*outside));
    }

    let mut items = BTreeSet::new();
    let mut excluded = Vec::new();
    for &i in universe.difference(&config.sinked) {
        let mut reason = None;
        for &k in &config.sinked {
            match correlation_of_maps(&maps[&i], &maps[&k], i, k) {
                Ok(rho) if rho.abs() < t => continue,
                Ok(rho) => reason = Some(ExclusionReason::Correlated { with: k, rho }),
                Err(EconometricsError::InsufficientOverlap { common, .. }) => {
                    reason = Some(ExclusionReason::InsufficientOverlap { with: k, common })
                }
                Err(EconometricsError::DegenerateSeries(item)) => {
                    reason = Some(ExclusionReason::DegenerateSeries { item })
                }
                Err(e) => return Err(e),
            }
            break;
        }
        match reason {
            None => {
                items.insert(i);
            }
            Some(reason) => excluded.push(ControlExclusion { item: i, reason }),
        }
    }
    if items.is_empty() {
        return Err(EconometricsError::EmptyControlSet {
            threshold: t,
            candidates: universe.len() - config.sinked.len(),
        });
    }
    Ok(ControlSet {
        items,
        universe_size: universe.len(),
        excluded,
    })
}
