//! Long-format daily (item, date, price, volume) panels.
//!
//! Every estimator in [`crate::econometrics`] consumes a [`Panel`]; the
//! exchange and the synthetic generators produce them, and the ingest
//! loaders read them from disk.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::simkit::InjectedEffect;

/// Tradeable item identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub u32);

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One item-day.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelObservation {
    pub item_id: ItemId,
    pub date: NaiveDate,
    pub price: f64,
    pub volume: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Simulated,
    Ingested,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelMetadata {
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<Vec<InjectedEffect>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for PanelMetadata {
    fn default() -> Self {
        PanelMetadata {
            provenance: Provenance::Ingested,
            ground_truth: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PanelError {
    #[error("duplicate observation for item {item} on {date}")]
    DuplicateKey { item: ItemId, date: NaiveDate },
    #[error("non-positive price {price} for item {item} on {date}")]
    NonPositivePrice {
        item: ItemId,
        date: NaiveDate,
        price: f64,
    },
    #[error("invalid volume {volume} for item {item} on {date}")]
    InvalidVolume {
        item: ItemId,
        date: NaiveDate,
        volume: f64,
    },
}

/// A validated panel, sorted by `(item_id, date)`.
///
/// At most one observation exists per `(item, date)`. Prices are strictly
/// positive and finite; volumes are finite and non-negative.
#[derive(Clone, Debug, PartialEq)]
pub struct Panel {
    observations: Vec<PanelObservation>,
    pub metadata: PanelMetadata,
}

impl Panel {
    pub fn new(
        mut observations: Vec<PanelObservation>,
        metadata: PanelMetadata,
    ) -> Result<Self, PanelError> {
        for obs in &observations {
            obs.validate()?;
        }
        observations.sort_by_key(|o| (o.item_id, o.date));
        for pair in observations.windows(2) {
            if pair[0].item_id == pair[1].item_id && pair[0].date == pair[1].date {
                return Err(PanelError::DuplicateKey {
                    item: pair[0].item_id,
                    date: pair[0].date,
                });
            }
        }
        Ok(Panel {
            observations,
            metadata,
        })
    }

    pub fn observations(&self) -> &[PanelObservation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn items(&self) -> BTreeSet<ItemId> {
        self.observations.iter().map(|o| o.item_id).collect()
    }

    pub fn dates(&self) -> BTreeSet<NaiveDate> {
        self.observations.iter().map(|o| o.date).collect()
    }

    /// Observations of one item, in date order.
    pub fn item_series(&self, item: ItemId) -> &[PanelObservation] {
        let start = self.observations.partition_point(|o| o.item_id < item);
        let end = self.observations.partition_point(|o| o.item_id <= item);
        &self.observations[start..end]
    }

    /// Per-item price series keyed by date, restricted to `window` when given.
    pub fn price_map(
        &self,
        item: ItemId,
        window: Option<DateWindow>,
    ) -> BTreeMap<NaiveDate, f64> {
        self.item_series(item)
            .iter()
            .filter(|o| window.is_none_or(|w| w.contains(o.date)))
            .map(|o| (o.date, o.price))
            .collect()
    }

    pub fn get(&self, item: ItemId, date: NaiveDate) -> Option<&PanelObservation> {
        let series = self.item_series(item);
        series
            .binary_search_by_key(&date, |o| o.date)
            .ok()
            .map(|i| &series[i])
    }

    pub fn filter<F>(&self, mut keep: F) -> Panel
    where
        F: FnMut(&PanelObservation) -> bool,
    {
        Panel {
            observations: self.observations.iter().copied().filter(|o| keep(o)).collect(),
            metadata: self.metadata.clone(),
        }
    }
}

impl PanelObservation {
    pub fn validate(&self) -> Result<(), PanelError> {
        if !(self.price.is_finite() && self.price > 0.0) {
            return Err(PanelError::NonPositivePrice {
                item: self.item_id,
                date: self.date,
                price: self.price,
            });
        }
        if !(self.volume.is_finite() && self.volume >= 0.0) {
            return Err(PanelError::InvalidVolume {
                item: self.item_id,
                date: self.date,
                volume: self.volume,
            });
        }
        Ok(())
    }
}

/// Inclusive date range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        DateWindow { start, end }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }
}
