use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{Gp, Market, PlayerId};
use crate::panel::ItemId;

/// Coffer-funded buy-and-delete program for a set of items.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SinkPolicy {
    pub target_items: BTreeSet<ItemId>,
    /// Units removed per item per day, at most.
    pub daily_max: u64,
    pub active_from: NaiveDate,
}

impl SinkPolicy {
    pub fn is_active(&self, date: NaiveDate) -> bool {
        date >= self.active_from && !self.target_items.is_empty() && self.daily_max > 0
    }
}

/// Units bought off the book by the sink and destroyed. `price_paid` is per unit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Removal {
    pub date: NaiveDate,
    pub item_id: ItemId,
    pub qty: u64,
    pub price_paid: Gp,
    pub seller_id: PlayerId,
}

/// Buys targeted items at the best resting ask until the daily maximum, the
/// coffer, or the book runs out. Sink purchases pay no tax and are kept out
/// of the trade log; they appear only in the removal log.
pub(super) fn run_sink_day(market: &mut Market, policy: &SinkPolicy, date: NaiveDate) -> Vec<Removal> {
    let mut removals = Vec::new();
    if !policy.is_active(date) {
        return removals;
    }
    for &item in &policy.target_items {
        let mut removed_today: u64 = market
            .removals
            .iter()
            .filter(|r| r.date == date && r.item_id == item)
            .map(|r| r.qty)
            .sum();
        while removed_today < policy.daily_max {
            let Some(ask) = market.book.item(item).and_then(|b| b.best_ask()).cloned() else {
                break;
            };
            let price = ask.limit_price;
            let affordable = market.coffer.balance.0 / price.0;
            if affordable == 0 {
                break;
            }
            let qty = ask
                .remaining
                .min(policy.daily_max - removed_today)
                .min(affordable);
            let cost = price.times(qty);

            market.coffer.balance = market.coffer.balance - cost;
            let seller = market
                .accounts
                .get_mut(&ask.player_id)
                .expect("resting orders belong to registered players");
            seller.gp = seller.gp + cost;
            if market.book.fill_resting(ask.order_id, qty) {
                seller.open_orders.remove(&ask.order_id);
            }
            *market.mint.items_removed.entry(item).or_default() += qty;

            let removal = Removal {
                date,
                item_id: item,
                qty,
                price_paid: price,
                seller_id: ask.player_id,
            };
            market.removals.push(removal.clone());
            removals.push(removal);
            removed_today += qty;
        }
    }
    removals
}
