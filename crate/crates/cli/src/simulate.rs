use std::path::PathBuf;

use clap::{Args, ValueEnum};
use gelab::exchange::{write_removal_log_csv, write_trade_log_csv};
use gelab::ingest::write_panel_csv;
use gelab::simkit::{run_scenario, synth_panel, ScenarioConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bundle::{sha256_hex, Bundle, Manifest};
use crate::error::{Category, CliError};
use crate::Ctx;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Order flow through the exchange (trade and removal logs included).
    #[default]
    Agent,
    /// Panel sampled directly from the parametric process.
    Synth,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scenario config (TOML).
    #[arg(required_unless_present = "from_manifest")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Engine::Agent)]
    pub engine: Engine,
    /// Re-run the scenario recorded in an earlier bundle's manifest.
    #[arg(long, conflicts_with = "config")]
    pub from_manifest: Option<PathBuf>,
}

pub fn load_config(path: &std::path::Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::config("MissingConfig", format!("cannot read config {}: {e}", path.display()))
    })?;
    ScenarioConfig::from_toml_str(&text).map_err(|e| {
        let mut err = CliError::from(e);
        err.message = format!("{}: {}", path.display(), err.message);
        err
    })
}

pub fn run(ctx: &Ctx, args: &SimulateArgs) -> Result<(), CliError> {
    let mut bundle = Bundle::create(&ctx.out)?;
    let (mut config, engine, expected) = match (&args.from_manifest, &args.config) {
        (Some(path), _) => {
            let manifest = Manifest::load(path)?;
            if manifest.command != "simulate" {
                return Err(CliError::config(
                    "ManifestMismatch",
                    format!("{} records a `{}` run, not `simulate`", path.display(), manifest.command),
                ));
            }
            let toml = manifest.config_toml.clone().ok_or_else(|| {
                CliError::config("ManifestMismatch", format!("{} carries no scenario config", path.display()))
            })?;
            if manifest.config_sha256.as_deref() != Some(sha256_hex(toml.as_bytes()).as_str()) {
                return Err(CliError::config(
                    "ManifestMismatch",
                    format!("{}: config checksum does not match its config", path.display()),
                ));
            }
            let engine: Engine = serde_json::from_value(manifest.args["engine"].clone())
                .map_err(|e| CliError::config("ManifestParse", format!("{}: engine: {e}", path.display())))?;
            bundle.input(path)?;
            (ScenarioConfig::from_toml_str(&toml)?, engine, Some(manifest))
        }
        (None, Some(path)) => {
            let config = load_config(path)?;
            bundle.input(path)?;
            (config, args.engine, None)
        }
        (None, None) => unreachable!("clap requires a config or a manifest"),
    };
    if let Some(seed) = ctx.seed {
        config.seed = seed;
        config.validate()?;
    }

    let resolved = config.to_toml_string();
    bundle.write("config.toml", &resolved)?;
    let panel_path = bundle.path("panel.csv");
    match engine {
        Engine::Agent => {
            let out = run_scenario(&config)?;
            write_panel_csv(&out.panel, &panel_path)?;
            let mut trades = Vec::new();
            write_trade_log_csv(&out.trades, &mut trades).map_err(|e| CliError::io(&bundle.path("trades.csv"), e))?;
            bundle.write("trades.csv", trades)?;
            let mut removals = Vec::new();
            write_removal_log_csv(&out.removals, &mut removals)
                .map_err(|e| CliError::io(&bundle.path("removals.csv"), e))?;
            bundle.write("removals.csv", removals)?;
            bundle.write_json("stats.json", &out.stats)?;
            ctx.say(format!(
                "simulated {} item-days, {} trades, {} sink removals",
                out.panel.len(),
                out.trades.len(),
                out.removals.len()
            ));
        }
        Engine::Synth => {
            let panel = synth_panel(&config)?;
            write_panel_csv(&panel, &panel_path)?;
            ctx.say(format!("sampled {} item-days", panel.len()));
        }
    }
    bundle.record("panel.csv")?;
    bundle.record("panel.meta.json")?;
    let manifest = bundle.finish("simulate", json!({ "engine": engine }), Some(config.seed), Some(resolved))?;

    if let Some(expected) = expected {
        if expected.seed == manifest.seed && expected.artifacts != manifest.artifacts {
            return Err(CliError {
                category: Category::Analysis,
                kind: "ReproductionMismatch".into(),
                message: "re-run artifacts differ from the recorded checksums".into(),
            });
        }
        ctx.say(format!("reproduced {} artifacts", manifest.artifacts.len()));
    }
    ctx.say(format!("wrote {}", ctx.out.display()));
    Ok(())
}
