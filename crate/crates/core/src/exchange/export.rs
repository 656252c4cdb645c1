//! Flat-file trade and removal logs.
//!
//! Trade log header: `date,seq,item_id,qty,price,buyer_id,seller_id,refund,tax`.
//! Removal log header: `date,item_id,qty,price_paid`. Dates are ISO-8601,
//! everything else is an integer. `refund` and `tax` are totals for the row;
//! `price_paid` is per unit.

use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{Gp, PlayerId, Removal, Trade, TradeStamp};
use crate::panel::ItemId;

#[derive(Serialize, Deserialize)]
struct TradeRow {
    date: NaiveDate,
    seq: u64,
    item_id: u32,
    qty: u64,
    price: u64,
    buyer_id: u32,
    seller_id: u32,
    refund: u64,
    tax: u64,
}

#[derive(Serialize, Deserialize)]
struct RemovalRow {
    date: NaiveDate,
    item_id: u32,
    qty: u64,
    price_paid: u64,
}

pub fn write_trade_log_csv<W: Write>(trades: &[Trade], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for t in trades {
        w.serialize(TradeRow {
            date: t.timestamp.date,
            seq: t.timestamp.seq,
            item_id: t.item.0,
            qty: t.quantity,
            price: t.execution_price.0,
            buyer_id: t.buyer_id.0,
            seller_id: t.seller_id.0,
            refund: t.buyer_refund.0,
            tax: t.tax_paid.0,
        })?;
    }
    if trades.is_empty() {
        w.write_record(["date", "seq", "item_id", "qty", "price", "buyer_id", "seller_id", "refund", "tax"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trade_log_csv<R: Read>(input: R) -> Result<Vec<Trade>, csv::Error> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize::<TradeRow>()
        .map(|row| {
            row.map(|row| Trade {
                item: ItemId(row.item_id),
                quantity: row.qty,
                execution_price: Gp(row.price),
                buyer_id: PlayerId(row.buyer_id),
                seller_id: PlayerId(row.seller_id),
                buyer_refund: Gp(row.refund),
                tax_paid: Gp(row.tax),
                timestamp: TradeStamp {
                    date: row.date,
                    seq: row.seq,
                },
            })
        })
        .collect()
}

/// Writes the removal log. The seller id is not part of the file format.
pub fn write_removal_log_csv<W: Write>(removals: &[Removal], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in removals {
        w.serialize(RemovalRow {
            date: r.date,
            item_id: r.item_id.0,
            qty: r.qty,
            price_paid: r.price_paid.0,
        })?;
    }
    if removals.is_empty() {
        w.write_record(["date", "item_id", "qty", "price_paid"])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `(date, item, qty, per-unit price)` rows back.
pub fn read_removal_log_csv<R: Read>(input: R) -> Result<Vec<(NaiveDate, ItemId, u64, Gp)>, csv::Error> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize::<RemovalRow>()
        .map(|row| row.map(|row| (row.date, ItemId(row.item_id), row.qty, Gp(row.price_paid))))
        .collect()
}
