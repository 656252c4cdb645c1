use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ConfigError, FieldError, ScenarioConfig};
use super::scenario::{run_scenario, ScenarioOutput};
use super::synth::{replication_seed, synth_panel};
use crate::panel::Panel;

/// Outcome of one Monte-Carlo replication.
#[derive(Clone, Debug, PartialEq)]
pub struct Replication<T, E> {
    pub rep: usize,
    pub seed: u64,
    pub result: Result<T, E>,
}

fn check_reps(n_reps: usize) -> Result<(), ConfigError> {
    if n_reps == 0 {
        return Err(ConfigError::ConfigInvalid(vec![FieldError {
            field: "n_reps".into(),
            message: "must be at least 1".into(),
        }]));
    }
    Ok(())
}

fn rep_config(config: &ScenarioConfig, rep: usize) -> ScenarioConfig {
    let mut cfg = config.clone();
    cfg.seed = replication_seed(config.seed, rep as u64);
    cfg
}

/// Runs `analysis` on `n_reps` directly sampled panels, in parallel.
///
/// Replication `r` uses seed [`replication_seed`]`(config.seed, r)`, so
/// results do not depend on thread count and adding replications leaves
/// earlier ones untouched. Analysis errors are kept per replication.
pub fn replicate<T, E, F>(
    config: &ScenarioConfig,
    n_reps: usize,
    analysis: F,
) -> Result<Vec<Replication<T, E>>, ConfigError>
where
    F: Fn(&Panel) -> Result<T, E> + Sync,
    T: Send,
    E: Send,
{
    check_reps(n_reps)?;
    config.validate()?;
    Ok((0..n_reps)
        .into_par_iter()
        .map(|rep| {
            let cfg = rep_config(config, rep);
            let panel = synth_panel(&cfg).expect("validated config");
            Replication {
                rep,
                seed: cfg.seed,
                result: analysis(&panel),
            }
        })
        .collect())
}

/// Like [`replicate`] but each replication runs the agent-based scenario.
pub fn replicate_scenarios<T, E, F>(
    config: &ScenarioConfig,
    n_reps: usize,
    analysis: F,
) -> Result<Vec<Replication<T, E>>, ConfigError>
where
    F: Fn(&ScenarioOutput) -> Result<T, E> + Sync,
    T: Send,
    E: Send,
{
    check_reps(n_reps)?;
    config.validate()?;
    Ok((0..n_reps)
        .into_par_iter()
        .map(|rep| {
            let cfg = rep_config(config, rep);
            let out = run_scenario(&cfg).expect("validated config");
            Replication {
                rep,
                seed: cfg.seed,
                result: analysis(&out),
            }
        })
        .collect())
}

/// Interval estimate reported by one replication.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalDraw {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Coverage and rejection frequencies over a batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub truth: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    /// Share of intervals containing `truth`.
    pub coverage: f64,
    /// Share of intervals excluding zero.
    pub rejection_rate: f64,
    pub mean_estimate: f64,
    pub sd_estimate: f64,
}

impl CoverageSummary {
    /// Failed replications are counted but excluded from the rates.
    pub fn from_replications<E>(truth: f64, reps: &[Replication<IntervalDraw, E>]) -> Self {
        let draws: Vec<IntervalDraw> = reps
            .iter()
            .filter_map(|r| r.result.as_ref().ok().copied())
            .collect();
        let n = draws.len();
        let nf = n.max(1) as f64;
        let covered = draws
            .iter()
            .filter(|d| d.ci_low <= truth && truth <= d.ci_high)
            .count();
        let rejected = draws
            .iter()
            .filter(|d| d.ci_low > 0.0 || d.ci_high < 0.0)
            .count();
        let mean = draws.iter().map(|d| d.estimate).sum::<f64>() / nf;
        let var = if n > 1 {
            draws.iter().map(|d| (d.estimate - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        CoverageSummary {
            truth,
            n_ok: n,
            n_failed: reps.len() - n,
            coverage: covered as f64 / nf,
            rejection_rate: rejected as f64 / nf,
            mean_estimate: mean,
            sd_estimate: var.sqrt(),
        }
    }
}
