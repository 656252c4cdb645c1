use std::collections::BTreeMap;

use chrono::NaiveDate;

use super::Trade;
use crate::panel::{ItemId, PanelObservation};

/// Per-item volume-weighted mean execution price and total quantity for
/// `date`. Items without trades that day are omitted.
pub fn daily_summary(trades: &[Trade], date: NaiveDate) -> Vec<PanelObservation> {
    let mut acc: BTreeMap<ItemId, (u128, u64)> = BTreeMap::new();
    for t in trades.iter().filter(|t| t.timestamp.date == date) {
        let entry = acc.entry(t.item).or_default();
        entry.0 += u128::from(t.execution_price.0) * u128::from(t.quantity);
        entry.1 += t.quantity;
    }
    acc.into_iter()
        .filter(|(_, (_, qty))| *qty > 0)
        .map(|(item, (value, qty))| PanelObservation {
            item_id: item,
            date,
            price: value as f64 / qty as f64,
            volume: qty as f64,
        })
        .collect()
}
