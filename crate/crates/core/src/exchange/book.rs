use std::cmp::Reverse;
use std::collections::BTreeMap;

use super::{Gp, Order, OrderId, Side};
use crate::panel::ItemId;

type BidKey = (Reverse<Gp>, u64);
type AskKey = (Gp, u64);

/// Resting orders for one item. Bids iterate best (highest) first, asks
/// best (lowest) first; ties fall back to arrival sequence.
#[derive(Clone, Debug, Default)]
pub struct ItemBook {
    bids: BTreeMap<BidKey, Order>,
    asks: BTreeMap<AskKey, Order>,
}

impl ItemBook {
    pub fn best_bid(&self) -> Option<&Order> {
        self.bids.values().next()
    }

    pub fn best_ask(&self) -> Option<&Order> {
        self.asks.values().next()
    }

    pub fn bids(&self) -> impl Iterator<Item = &Order> {
        self.bids.values()
    }

    pub fn asks(&self) -> impl Iterator<Item = &Order> {
        self.asks.values()
    }

    pub fn is_crossed(&self) -> bool {
        matches!((self.best_bid(), self.best_ask()), (Some(b), Some(a)) if b.limit_price >= a.limit_price)
    }
}

#[derive(Clone, Debug, Default)]
pub struct OrderBook {
    items: BTreeMap<ItemId, ItemBook>,
    index: BTreeMap<OrderId, (ItemId, Side, Gp, u64)>,
}

impl OrderBook {
    pub(super) fn ensure_item(&mut self, item: ItemId) {
        self.items.entry(item).or_default();
    }

    pub fn item(&self, item: ItemId) -> Option<&ItemBook> {
        self.items.get(&item)
    }

    pub fn items(&self) -> impl Iterator<Item = (&ItemId, &ItemBook)> {
        self.items.iter()
    }

    pub fn order(&self, id: OrderId) -> Option<&Order> {
        let (item, side, price, seq) = *self.index.get(&id)?;
        let book = self.items.get(&item)?;
        match side {
            Side::Buy => book.bids.get(&(Reverse(price), seq)),
            Side::Sell => book.asks.get(&(price, seq)),
        }
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Ids of every resting order, ascending.
    pub fn order_ids(&self) -> Vec<OrderId> {
        self.index.keys().copied().collect()
    }

    pub(super) fn rest(&mut self, order: Order) {
        let book = self.items.entry(order.item).or_default();
        self.index.insert(
            order.order_id,
            (order.item, order.side, order.limit_price, order.arrival_seq),
        );
        match order.side {
            Side::Buy => book
                .bids
                .insert((Reverse(order.limit_price), order.arrival_seq), order),
            Side::Sell => book.asks.insert((order.limit_price, order.arrival_seq), order),
        };
    }

    /// Best resting order on the opposite side that crosses `taker`.
    pub(super) fn best_crossing(&self, taker: &Order) -> Option<Order> {
        let book = self.items.get(&taker.item)?;
        match taker.side {
            Side::Buy => book
                .best_ask()
                .filter(|ask| ask.limit_price <= taker.limit_price)
                .cloned(),
            Side::Sell => book
                .best_bid()
                .filter(|bid| bid.limit_price >= taker.limit_price)
                .cloned(),
        }
    }

    /// Reduces a resting order by `qty`. Returns true when it is used up and removed.
    pub(super) fn fill_resting(&mut self, id: OrderId, qty: u64) -> bool {
        let (item, side, price, seq) = *self.index.get(&id).expect("resting order indexed");
        let book = self.items.get_mut(&item).expect("item book exists");
        let order = match side {
            Side::Buy => book.bids.get_mut(&(Reverse(price), seq)),
            Side::Sell => book.asks.get_mut(&(price, seq)),
        }
        .expect("index and book agree");
        order.remaining -= qty;
        if order.remaining == 0 {
            self.remove(id);
            true
        } else {
            false
        }
    }

    pub(super) fn remove(&mut self, id: OrderId) -> Option<Order> {
        let (item, side, price, seq) = self.index.remove(&id)?;
        let book = self.items.get_mut(&item)?;
        match side {
            Side::Buy => book.bids.remove(&(Reverse(price), seq)),
            Side::Sell => book.asks.remove(&(price, seq)),
        }
    }

    /// GP held behind resting buys.
    pub fn escrowed_gp(&self) -> Gp {
        Gp(self
            .items
            .values()
            .flat_map(|b| b.bids.values())
            .map(|o| o.limit_price.times(o.remaining).0)
            .sum())
    }

    /// Units of `item` held behind resting sells.
    pub fn escrowed_items(&self, item: ItemId) -> u64 {
        self.items
            .get(&item)
            .map_or(0, |b| b.asks.values().map(|o| o.remaining).sum())
    }

    /// True when no item has a resting bid at or above its resting ask.
    pub fn is_uncrossed(&self) -> bool {
        self.items.values().all(|b| !b.is_crossed())
    }
}
