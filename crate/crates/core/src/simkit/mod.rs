//! Scenario generation with known data-generating processes.
//!
//! Two generators share one configuration: [`run_scenario`] pushes
//! zero-intelligence order flow through the [`crate::exchange`] engine,
//! while [`synth_panel`] samples the panel straight from the parametric
//! process for fast Monte-Carlo work. [`replicate`] runs an analysis over
//! many independently seeded panels.

mod config;
mod replicate;
mod scenario;
mod synth;

pub use config::{
    AgentParams, ConfigError, DivergentTrend, EffectKind, FieldError, InjectedEffect, Interventions,
    Locus, Outcome, PriceProcess, ScenarioConfig, SinkRound, VolumeProcess,
};
pub use replicate::{replicate, replicate_scenarios, CoverageSummary, IntervalDraw, Replication};
pub use scenario::{
    mean_log_price_by_item, run_scenario, RejectionCounts, ScenarioOutput, ScenarioStats,
};
pub use synth::{replication_seed, splitmix64, synth_panel};

#[cfg(test)]
mod tests;
