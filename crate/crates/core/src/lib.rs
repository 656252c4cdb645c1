//! Laboratory for an order-matched virtual-item exchange under a
//! transaction tax and a tax-funded item sink, plus the estimators used to
//! measure what those interventions did.
//!
//! - [`exchange`]: the matching engine, tax schedule, coffer and sink.
//! - [`simkit`]: scenario configs, agent-based and parametric panel
//!   generators with injected effects, Monte-Carlo replication.
//! - [`econometrics`]: price index, control sets, local polynomial RD/RK,
//!   DiD, pre-trends and structural-break tests.
//! - [`ingest`]: HTTP price client with a disk cache, panel CSV and GP
//!   price loaders.
//! - [`panel`]: the item-day panel shared by all of the above.

pub mod econometrics;
pub mod exchange;
pub mod ingest;
pub mod panel;
pub mod simkit;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/exchange.md")]
    mod exchange {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/price-index.md")]
    mod price_index {}
    #[doc = include_str!("../../../book/src/discontinuity.md")]
    mod discontinuity {}
    #[doc = include_str!("../../../book/src/did.md")]
    mod did {}
    #[doc = include_str!("../../../book/src/breaks.md")]
    mod breaks {}
    #[doc = include_str!("../../../book/src/ingest.md")]
    mod ingest {}
    #[doc = include_str!("../../../book/src/montecarlo.md")]
    mod montecarlo {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
