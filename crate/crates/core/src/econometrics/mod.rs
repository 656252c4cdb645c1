//! Estimators for intervention effects on panel data: the volume-weighted
//! price index, correlation-screened control groups, local polynomial
//! regression, sharp RD, RK, two-group DiD with item fixed effects,
//! pre-trend diagnostics and structural-break tests.
//!
//! Every estimator is a pure function of a [`Panel`](crate::panel::Panel)
//! and a spec value, and every result serializes to JSON.

mod breaks;
mod correlation;
mod did;
mod discontinuity;
mod index;
mod linalg;
mod local_poly;
mod pretrends;

use chrono::NaiveDate;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::panel::ItemId;

pub use breaks::{break_test, BreakMode, BreakStatistic, BreakTestResult, MIN_BREAK_SERIES};
pub use correlation::{
    build_control_set, price_correlation, ControlExclusion, ControlSet, ControlSetConfig,
    ExclusionReason,
};
pub use did::{did_estimate, did_estimate_dummies, did_plot_data, DidEstimate, DidPlotPoint, DidSpec, SeKind};
pub use discontinuity::{
    binned_means, rd_estimate, rd_plot_data, rk_estimate, rk_plot_data, running_points, Bin,
    DiscontinuityPlot, RdEstimate, RdSpec, RkEstimate, RkSpec,
};
pub use index::{price_index, week_of, week_start, IndexPoint, PriceIndexSeries};
pub use local_poly::{local_poly_fit, FitSide, Kernel, LocalPolyFit, WeightedPoint};
pub use pretrends::{pretrends_test, weekly_group_means, PretrendResult, PretrendSpec, WeeklyGroupMean};

pub use crate::simkit::Outcome;

/// Two-sided 97.5% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EconometricsError {
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("insufficient support on the {side:?} side: {found} points with positive weight, need {needed}")]
    InsufficientSupport { side: FitSide, found: usize, needed: usize },
    #[error("item group is empty or has no observations")]
    EmptyGroup,
    #[error("week {week} (starting {week_start}) has zero total volume")]
    ZeroVolumeWeek { week: i64, week_start: NaiveDate },
    #[error("items {item_a} and {item_b} share only {common} dated observations (need 3)")]
    InsufficientOverlap { item_a: ItemId, item_b: ItemId, common: usize },
    #[error("price series of item {0} has zero variance")]
    DegenerateSeries(ItemId),
    #[error("sinked item {0} is not in the price-floor universe")]
    SinkOutsideUniverse(ItemId),
    #[error("no control candidate passes |rho| < {threshold} ({candidates} candidates); threshold too strict")]
    EmptyControlSet { threshold: f64, candidates: usize },
    #[error("treated and control groups overlap in item {0}")]
    GroupsOverlap(ItemId),
    #[error("{group} group has {found} items with usable observations, need at least {needed}")]
    TooFewItems { group: &'static str, found: usize, needed: usize },
    #[error("no observations before the implementation date {0}")]
    NoPrePeriod(NaiveDate),
    #[error("no observations on or after the implementation date {0}")]
    NoPostPeriod(NaiveDate),
    #[error("pre-period window spans {weeks} weeks, need at least 3")]
    WindowTooShort { weeks: i64 },
    #[error("series has {found} observations, need at least {needed}")]
    SeriesTooShort { found: usize, needed: usize },
    #[error("break date {date} is outside the testable range {first}..={last}")]
    DateOutOfRange { date: NaiveDate, first: NaiveDate, last: NaiveDate },
}

impl EconometricsError {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            EconometricsError::RankDeficient => "RankDeficient",
            EconometricsError::InvalidSpec(_) => "InvalidSpec",
            EconometricsError::InsufficientSupport { .. } => "InsufficientSupport",
            EconometricsError::EmptyGroup => "EmptyGroup",
            EconometricsError::ZeroVolumeWeek { .. } => "ZeroVolumeWeek",
            EconometricsError::InsufficientOverlap { .. } => "InsufficientOverlap",
            EconometricsError::DegenerateSeries(_) => "DegenerateSeries",
            EconometricsError::SinkOutsideUniverse(_) => "SinkOutsideUniverse",
            EconometricsError::EmptyControlSet { .. } => "EmptyControlSet",
            EconometricsError::GroupsOverlap(_) => "GroupsOverlap",
            EconometricsError::TooFewItems { .. } => "TooFewItems",
            EconometricsError::NoPrePeriod(_) => "NoPrePeriod",
            EconometricsError::NoPostPeriod(_) => "NoPostPeriod",
            EconometricsError::WindowTooShort { .. } => "WindowTooShort",
            EconometricsError::SeriesTooShort { .. } => "SeriesTooShort",
            EconometricsError::DateOutOfRange { .. } => "DateOutOfRange",
        }
    }
}

fn std_normal() -> Normal {
    Normal::standard()
}

/// 95% normal interval around `estimate`.
pub(crate) fn normal_ci(estimate: f64, se: f64) -> (f64, f64) {
    (estimate - Z_95 * se, estimate + Z_95 * se)
}

/// Two-sided normal p-value of `estimate / se`. A zero SE gives 1 for a
/// zero estimate and 0 otherwise.
pub(crate) fn two_sided_p(estimate: f64, se: f64) -> f64 {
    if !(se > 0.0) {
        return if estimate == 0.0 { 1.0 } else { 0.0 };
    }
    let z = (estimate / se).abs();
    (2.0 * std_normal().sf(z)).clamp(0.0, 1.0)
}
