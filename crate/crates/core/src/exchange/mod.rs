//! Deterministic order-matching exchange with a seller-side transaction tax
//! and a coffer-funded item sink.
//!
//! A [`Market`] owns every account, the per-item order books, the coffer and
//! the trade/removal logs. Orders match by price then arrival. A buyer that
//! crosses a cheaper resting sell pays the resting price and is refunded the
//! difference to its limit; a seller that crosses a richer resting buy
//! receives the resting buy price. Tax is deducted from the seller's
//! proceeds, per unit, and credited to the coffer.
//!
//! GP placed behind a resting buy (and items behind a resting sell) stay in
//! escrow on the order, so `free balances + escrow + coffer` is the total
//! money supply at all times.

mod book;
mod export;
mod sink;
mod summary;
mod tax;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::ops::{Add, Sub};

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

pub use book::{ItemBook, OrderBook};
pub use export::{read_removal_log_csv, read_trade_log_csv, write_removal_log_csv, write_trade_log_csv};
pub use sink::{Removal, SinkPolicy};
pub use summary::daily_summary;
pub use tax::{apply_tax, TaxSchedule, TaxScheduleError};

use crate::panel::ItemId;

/// Amount of gold pieces. Integral and never negative.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Gp(pub u64);

impl Add for Gp {
    type Output = Gp;
    fn add(self, rhs: Gp) -> Gp {
        Gp(self.0.checked_add(rhs.0).expect("GP overflow"))
    }
}

impl Sub for Gp {
    type Output = Gp;
    fn sub(self, rhs: Gp) -> Gp {
        Gp(self.0.checked_sub(rhs.0).expect("GP underflow"))
    }
}

impl Gp {
    pub fn times(self, qty: u64) -> Gp {
        Gp(self.0.checked_mul(qty).expect("GP overflow"))
    }
}

impl fmt::Display for Gp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} GP", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(pub u32);

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrderId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

/// Simulated wall clock in minutes since the market's start date at 00:00.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(pub u64);

pub const MINUTES_PER_DAY: u64 = 24 * 60;

impl SimTime {
    pub fn start_of_day(day: u64) -> SimTime {
        SimTime(day * MINUTES_PER_DAY)
    }

    pub fn day_index(self) -> u64 {
        self.0 / MINUTES_PER_DAY
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemSpec {
    pub id: ItemId,
    pub name: String,
    /// Units a player may buy per rolling window.
    pub buy_limit: u64,
    /// Average price above 100,000 GP.
    pub high_level: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Order {
    pub order_id: OrderId,
    pub player_id: PlayerId,
    pub side: Side,
    pub item: ItemId,
    pub limit_price: Gp,
    pub quantity: u64,
    pub remaining: u64,
    pub arrival_seq: u64,
}

/// What a player asks the exchange to do; the market assigns id and sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OrderRequest {
    pub player_id: PlayerId,
    pub side: Side,
    pub item: ItemId,
    pub limit_price: Gp,
    pub quantity: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TradeStamp {
    pub date: NaiveDate,
    pub seq: u64,
}

/// One fill. `buyer_refund` and `tax_paid` are totals over `quantity` units.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trade {
    pub item: ItemId,
    pub quantity: u64,
    pub execution_price: Gp,
    pub buyer_id: PlayerId,
    pub seller_id: PlayerId,
    pub buyer_refund: Gp,
    pub tax_paid: Gp,
    pub timestamp: TradeStamp,
}

impl Trade {
    pub fn gross(&self) -> Gp {
        self.execution_price.times(self.quantity)
    }

    pub fn seller_net(&self) -> Gp {
        self.gross() - self.tax_paid
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coffer {
    pub balance: Gp,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExchangeError {
    #[error("player {player} needs {needed} but holds {available}")]
    InsufficientFunds {
        player: PlayerId,
        needed: Gp,
        available: Gp,
    },
    #[error("player {player} holds {available} of item {item}, order needs {needed}")]
    InsufficientInventory {
        player: PlayerId,
        item: ItemId,
        needed: u64,
        available: u64,
    },
    #[error("buy limit for item {item} exceeded: {remaining} units left in window (resets at minute {resets_at:?})")]
    BuyLimitExceeded {
        item: ItemId,
        remaining: u64,
        resets_at: Option<SimTime>,
    },
    #[error("player {player} already has {open} open orders")]
    OrderSlotsExhausted { player: PlayerId, open: usize },
    #[error("unknown player {0}")]
    UnknownPlayer(PlayerId),
    #[error("unknown item {0}")]
    UnknownItem(ItemId),
    #[error("item {0} already listed")]
    DuplicateItem(ItemId),
    #[error("player {0} already registered")]
    DuplicatePlayer(PlayerId),
    #[error("unknown order {0:?}")]
    UnknownOrder(OrderId),
    #[error("invalid order: {0}")]
    InvalidOrder(&'static str),
    #[error("invalid item spec: {0}")]
    InvalidItem(&'static str),
    #[error("clock cannot move backwards from minute {now:?} to {requested:?}")]
    ClockRegression { now: SimTime, requested: SimTime },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarketConfig {
    pub start_date: NaiveDate,
    pub max_open_orders: usize,
    pub buy_limit_window_minutes: u64,
}

impl MarketConfig {
    pub fn new(start_date: NaiveDate) -> Self {
        MarketConfig {
            start_date,
            max_open_orders: 8,
            buy_limit_window_minutes: 4 * 60,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Account {
    gp: Gp,
    inventory: BTreeMap<ItemId, u64>,
    open_orders: BTreeSet<OrderId>,
    purchases: BTreeMap<ItemId, VecDeque<(SimTime, u64)>>,
}

/// Result of a successful submission.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Submission {
    pub order_id: OrderId,
    pub trades: Vec<Trade>,
    /// Units left resting in the book.
    pub resting: u64,
}

/// Cumulative external flows, used to reconcile conservation checks.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MintLedger {
    pub gp_minted: Gp,
    pub items_minted: BTreeMap<ItemId, u64>,
    pub items_removed: BTreeMap<ItemId, u64>,
}

/// A single exchange instance. All mutation goes through `&mut self`;
/// clone it for a read-only snapshot.
#[derive(Clone, Debug)]
pub struct Market {
    config: MarketConfig,
    items: BTreeMap<ItemId, ItemSpec>,
    accounts: BTreeMap<PlayerId, Account>,
    book: OrderBook,
    tax: Option<TaxSchedule>,
    coffer: Coffer,
    now: SimTime,
    next_order_id: u64,
    next_arrival: u64,
    next_trade_seq: u64,
    trades: Vec<Trade>,
    removals: Vec<Removal>,
    mint: MintLedger,
}

impl Market {
    pub fn new(config: MarketConfig) -> Self {
        Market {
            config,
            items: BTreeMap::new(),
            accounts: BTreeMap::new(),
            book: OrderBook::default(),
            tax: None,
            coffer: Coffer::default(),
            now: SimTime(0),
            next_order_id: 1,
            next_arrival: 0,
            next_trade_seq: 0,
            trades: Vec::new(),
            removals: Vec::new(),
            mint: MintLedger::default(),
        }
    }

    pub fn config(&self) -> &MarketConfig {
        &self.config
    }

    pub fn list_item(&mut self, spec: ItemSpec) -> Result<(), ExchangeError> {
        if spec.buy_limit == 0 {
            return Err(ExchangeError::InvalidItem("buy limit must be at least 1"));
        }
        if self.items.contains_key(&spec.id) {
            return Err(ExchangeError::DuplicateItem(spec.id));
        }
        self.book.ensure_item(spec.id);
        self.items.insert(spec.id, spec);
        Ok(())
    }

    pub fn item(&self, id: ItemId) -> Option<&ItemSpec> {
        self.items.get(&id)
    }

    pub fn items(&self) -> impl Iterator<Item = &ItemSpec> {
        self.items.values()
    }

    pub fn register_player(&mut self, player: PlayerId) -> Result<(), ExchangeError> {
        if self.accounts.contains_key(&player) {
            return Err(ExchangeError::DuplicatePlayer(player));
        }
        self.accounts.insert(player, Account::default());
        Ok(())
    }

    pub fn players(&self) -> impl Iterator<Item = PlayerId> + '_ {
        self.accounts.keys().copied()
    }

    /// External GP income (monster drops, quest rewards). Recorded in the mint ledger.
    pub fn mint_gp(&mut self, player: PlayerId, amount: Gp) -> Result<(), ExchangeError> {
        let account = self
            .accounts
            .get_mut(&player)
            .ok_or(ExchangeError::UnknownPlayer(player))?;
        account.gp = account.gp + amount;
        self.mint.gp_minted = self.mint.gp_minted + amount;
        Ok(())
    }

    /// External item production (gathering, drops). Recorded in the mint ledger.
    pub fn mint_items(
        &mut self,
        player: PlayerId,
        item: ItemId,
        qty: u64,
    ) -> Result<(), ExchangeError> {
        if !self.items.contains_key(&item) {
            return Err(ExchangeError::UnknownItem(item));
        }
        let account = self
            .accounts
            .get_mut(&player)
            .ok_or(ExchangeError::UnknownPlayer(player))?;
        *account.inventory.entry(item).or_default() += qty;
        *self.mint.items_minted.entry(item).or_default() += qty;
        Ok(())
    }

    pub fn set_tax(&mut self, tax: Option<TaxSchedule>) {
        self.tax = tax;
    }

    pub fn tax(&self) -> Option<&TaxSchedule> {
        self.tax.as_ref()
    }

    pub fn coffer(&self) -> Coffer {
        self.coffer
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn date_of(&self, time: SimTime) -> NaiveDate {
        self.config.start_date + Days::new(time.day_index())
    }

    pub fn today(&self) -> NaiveDate {
        self.date_of(self.now)
    }

    pub fn advance_to(&mut self, time: SimTime) -> Result<(), ExchangeError> {
        if time < self.now {
            return Err(ExchangeError::ClockRegression {
                now: self.now,
                requested: time,
            });
        }
        self.now = time;
        Ok(())
    }

    pub fn book(&self) -> &OrderBook {
        &self.book
    }

    pub fn trade_log(&self) -> &[Trade] {
        &self.trades
    }

    pub fn removal_log(&self) -> &[Removal] {
        &self.removals
    }

    pub fn mint_ledger(&self) -> &MintLedger {
        &self.mint
    }

    pub fn gp_balance(&self, player: PlayerId) -> Option<Gp> {
        self.accounts.get(&player).map(|a| a.gp)
    }

    pub fn inventory(&self, player: PlayerId, item: ItemId) -> Option<u64> {
        self.accounts
            .get(&player)
            .map(|a| a.inventory.get(&item).copied().unwrap_or(0))
    }

    pub fn open_order_count(&self, player: PlayerId) -> usize {
        self.accounts.get(&player).map_or(0, |a| a.open_orders.len())
    }

    /// Free balances + GP escrowed behind resting buys + coffer.
    pub fn total_gp(&self) -> Gp {
        let free: u64 = self.accounts.values().map(|a| a.gp.0).sum();
        Gp(free) + self.book.escrowed_gp() + self.coffer.balance
    }

    /// Units of `item` in inventories plus units resting behind sells.
    pub fn total_items(&self, item: ItemId) -> u64 {
        let held: u64 = self
            .accounts
            .values()
            .map(|a| a.inventory.get(&item).copied().unwrap_or(0))
            .sum();
        held + self.book.escrowed_items(item)
    }

    /// Units of `item` the player bought within the current window.
    pub fn purchased_in_window(&self, player: PlayerId, item: ItemId) -> u64 {
        self.accounts
            .get(&player)
            .and_then(|a| a.purchases.get(&item))
            .map_or(0, |q| {
                q.iter()
                    .filter(|(t, _)| self.in_window(*t))
                    .map(|(_, n)| n)
                    .sum()
            })
    }

    fn in_window(&self, t: SimTime) -> bool {
        t.0 + self.config.buy_limit_window_minutes > self.now.0
    }

    /// Validates and matches an order, resting any unfilled remainder.
    pub fn submit_order(&mut self, request: OrderRequest) -> Result<Submission, ExchangeError> {
        self.check_request(&request)?;

        let order_id = OrderId(self.next_order_id);
        self.next_order_id += 1;
        let arrival_seq = self.next_arrival;
        self.next_arrival += 1;
        let mut order = Order {
            order_id,
            player_id: request.player_id,
            side: request.side,
            item: request.item,
            limit_price: request.limit_price,
            quantity: request.quantity,
            remaining: request.quantity,
            arrival_seq,
        };

        // Escrow the whole order up front.
        let account = self.accounts.get_mut(&request.player_id).expect("checked");
        match request.side {
            Side::Buy => {
                account.gp = account.gp - request.limit_price.times(request.quantity);
            }
            Side::Sell => {
                let held = account.inventory.get_mut(&request.item).expect("checked");
                *held -= request.quantity;
            }
        }

        let trades = self.match_incoming(&mut order);

        let resting = order.remaining;
        if resting > 0 {
            let account = self.accounts.get_mut(&order.player_id).expect("checked");
            account.open_orders.insert(order_id);
            self.book.rest(order);
        }
        Ok(Submission {
            order_id,
            trades,
            resting,
        })
    }

    fn check_request(&self, request: &OrderRequest) -> Result<(), ExchangeError> {
        if request.quantity == 0 {
            return Err(ExchangeError::InvalidOrder("quantity must be positive"));
        }
        if request.limit_price.0 == 0 {
            return Err(ExchangeError::InvalidOrder("limit price must be at least 1 GP"));
        }
        let spec = self
            .items
            .get(&request.item)
            .ok_or(ExchangeError::UnknownItem(request.item))?;
        let account = self
            .accounts
            .get(&request.player_id)
            .ok_or(ExchangeError::UnknownPlayer(request.player_id))?;
        if account.open_orders.len() >= self.config.max_open_orders {
            return Err(ExchangeError::OrderSlotsExhausted {
                player: request.player_id,
                open: account.open_orders.len(),
            });
        }
        match request.side {
            Side::Buy => {
                let needed = request
                    .limit_price
                    .0
                    .checked_mul(request.quantity)
                    .map(Gp)
                    .ok_or(ExchangeError::InvalidOrder("order value overflows"))?;
                if account.gp < needed {
                    return Err(ExchangeError::InsufficientFunds {
                        player: request.player_id,
                        needed,
                        available: account.gp,
                    });
                }
                // Units already bought in the window plus units still working
                // on open buys count against the limit.
                let (bought, earliest) = account
                    .purchases
                    .get(&request.item)
                    .map(|q| {
                        q.iter().filter(|(t, _)| self.in_window(*t)).fold(
                            (0u64, None::<SimTime>),
                            |(n, first), (t, k)| (n + k, Some(first.map_or(*t, |f| f.min(*t)))),
                        )
                    })
                    .unwrap_or((0, None));
                let working: u64 = account
                    .open_orders
                    .iter()
                    .filter_map(|id| self.book.order(*id))
                    .filter(|o| o.side == Side::Buy && o.item == request.item)
                    .map(|o| o.remaining)
                    .sum();
                let committed = bought + working;
                if committed + request.quantity > spec.buy_limit {
                    return Err(ExchangeError::BuyLimitExceeded {
                        item: request.item,
                        remaining: spec.buy_limit.saturating_sub(committed),
                        resets_at: earliest
                            .map(|t| SimTime(t.0 + self.config.buy_limit_window_minutes)),
                    });
                }
            }
            Side::Sell => {
                let available = account.inventory.get(&request.item).copied().unwrap_or(0);
                if available < request.quantity {
                    return Err(ExchangeError::InsufficientInventory {
                        player: request.player_id,
                        item: request.item,
                        needed: request.quantity,
                        available,
                    });
                }
            }
        }
        Ok(())
    }

    fn match_incoming(&mut self, taker: &mut Order) -> Vec<Trade> {
        let mut fills = Vec::new();
        while taker.remaining > 0 {
            let Some(maker) = self.book.best_crossing(taker) else {
                break;
            };
            let qty = taker.remaining.min(maker.remaining);
            let price = maker.limit_price;
            let (buy, sell) = match taker.side {
                Side::Buy => (&*taker, &maker),
                Side::Sell => (&maker, &*taker),
            };
            let trade = self.settle(buy, sell, price, qty);
            taker.remaining -= qty;
            if self.book.fill_resting(maker.order_id, qty) {
                let account = self.accounts.get_mut(&maker.player_id).expect("maker exists");
                account.open_orders.remove(&maker.order_id);
            }
            fills.push(trade);
        }
        fills
    }

    /// Moves GP and items for one fill of `qty` units at `price`.
    fn settle(&mut self, buy: &Order, sell: &Order, price: Gp, qty: u64) -> Trade {
        let refund_per_unit = buy.limit_price - price;
        let tax_per_unit = self.tax.map_or(Gp(0), |t| t.apply(price));
        let gross = price.times(qty);
        let tax_paid = tax_per_unit.times(qty);
        let buyer_refund = refund_per_unit.times(qty);

        let buyer = self.accounts.get_mut(&buy.player_id).expect("buyer exists");
        buyer.gp = buyer.gp + buyer_refund;
        *buyer.inventory.entry(buy.item).or_default() += qty;
        buyer
            .purchases
            .entry(buy.item)
            .or_default()
            .push_back((self.now, qty));
        let window = self.config.buy_limit_window_minutes;
        let now = self.now;
        if let Some(q) = buyer.purchases.get_mut(&buy.item) {
            while q.front().is_some_and(|(t, _)| t.0 + window <= now.0) {
                q.pop_front();
            }
        }

        let seller = self.accounts.get_mut(&sell.player_id).expect("seller exists");
        seller.gp = seller.gp + (gross - tax_paid);
        self.coffer.balance = self.coffer.balance + tax_paid;

        let trade = Trade {
            item: buy.item,
            quantity: qty,
            execution_price: price,
            buyer_id: buy.player_id,
            seller_id: sell.player_id,
            buyer_refund,
            tax_paid,
            timestamp: TradeStamp {
                date: self.date_of(self.now),
                seq: self.next_trade_seq,
            },
        };
        self.next_trade_seq += 1;
        self.trades.push(trade.clone());
        trade
    }

    /// Withdraws a resting order, returning escrowed GP or items.
    pub fn cancel_order(&mut self, order_id: OrderId) -> Result<Order, ExchangeError> {
        let order = self
            .book
            .remove(order_id)
            .ok_or(ExchangeError::UnknownOrder(order_id))?;
        let account = self
            .accounts
            .get_mut(&order.player_id)
            .expect("resting orders belong to registered players");
        account.open_orders.remove(&order_id);
        match order.side {
            Side::Buy => account.gp = account.gp + order.limit_price.times(order.remaining),
            Side::Sell => *account.inventory.entry(order.item).or_default() += order.remaining,
        }
        Ok(order)
    }

    /// Cancels every resting order, in order-id order.
    pub fn cancel_all(&mut self) -> usize {
        let ids = self.book.order_ids();
        let n = ids.len();
        for id in ids {
            self.cancel_order(id).expect("listed ids are resting");
        }
        n
    }

    pub fn run_sink_day(&mut self, policy: &SinkPolicy, date: NaiveDate) -> Vec<Removal> {
        sink::run_sink_day(self, policy, date)
    }
}
