//! Turning external market data into [`Panel`](crate::panel::Panel)s: an
//! HTTP client for the exchange's price time-series endpoint with an
//! on-disk cache, the canonical panel CSV format, and loaders for official
//! and illicit GP price series.

mod api;
mod gp_prices;
mod panel_csv;

use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

use crate::panel::ItemId;

pub use api::{fetch_panel, DEFAULT_BASE_URL, parse_timeseries, ApiClient, ApiConfig, FetchManifest, TimeStep};
pub use gp_prices::{
    load_gp_prices, read_gp_prices_csv, summarize_gp_prices, GpPriceData, GpPricePoint,
    GpPriceSummary, GpSource, PremiumPoint, SourceSummary,
};
pub use panel_csv::{
    load_panel_csv, read_panel_csv, sidecar_path, write_panel_csv, write_panel_csv_to,
    PANEL_HEADER,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("invalid API configuration: {0}")]
    InvalidConfig(String),
    #[error("HTTP {status} from {url}{}", .retry_after.map(|s| format!(" (retry after {s}s)")).unwrap_or_default())]
    HttpError {
        status: u16,
        url: String,
        retry_after: Option<u64>,
    },
    #[error("request to {url} failed: {message}")]
    Transport { url: String, message: String },
    #[error("cannot parse response at `{path}`: {message}")]
    ParseError { path: String, message: String },
    #[error("unknown item {0}")]
    UnknownItem(ItemId),
    #[error("{}: row {row}: {message}", .file.display())]
    SchemaError {
        file: PathBuf,
        row: usize,
        message: String,
    },
    #[error("{}: row {row} repeats key ({key}) first seen on row {first_row}", .file.display())]
    DuplicateKey {
        file: PathBuf,
        row: usize,
        first_row: usize,
        key: String,
    },
    #[error("{}: row {row}: price must be positive, got {price}", .file.display())]
    NonPositivePrice { file: PathBuf, row: usize, price: f64 },
    #[error("no observations in {0}")]
    EmptySeries(String),
    #[error("{}: {message}", .path.display())]
    Io { path: PathBuf, message: String },
}

impl IngestError {
    pub fn kind(&self) -> &'static str {
        match self {
            IngestError::InvalidConfig(_) => "InvalidConfig",
            IngestError::HttpError { .. } => "HttpError",
            IngestError::Transport { .. } => "Transport",
            IngestError::ParseError { .. } => "ParseError",
            IngestError::UnknownItem(_) => "UnknownItem",
            IngestError::SchemaError { .. } => "SchemaError",
            IngestError::DuplicateKey { .. } => "DuplicateKey",
            IngestError::NonPositivePrice { .. } => "NonPositivePrice",
            IngestError::EmptySeries(_) => "EmptySeries",
            IngestError::Io { .. } => "Io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, e: impl std::fmt::Display) -> Self {
        IngestError::Io {
            path: path.into(),
            message: e.to_string(),
        }
    }
}

pub(crate) fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}
