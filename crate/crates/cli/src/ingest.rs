use std::path::PathBuf;

use chrono::NaiveDate;
use clap::Subcommand;
use gelab::ingest::{
    fetch_panel, load_gp_prices, load_panel_csv, write_panel_csv, ApiClient, ApiConfig, TimeStep,
    DEFAULT_BASE_URL,
};
use gelab::panel::{DateWindow, ItemId};
use serde_json::json;

use crate::bundle::Bundle;
use crate::error::CliError;
use crate::items::resolve_items;
use crate::Ctx;

#[derive(Subcommand, Debug)]
pub enum IngestCommand {
    /// Fetch daily price time series from the exchange's price API.
    Api {
        /// Item ids, comma separated.
        #[arg(long)]
        items: Option<String>,
        #[arg(long)]
        items_file: Option<PathBuf>,
        #[arg(long, default_value = "24h")]
        step: TimeStep,
        #[arg(long, requires = "end")]
        start: Option<NaiveDate>,
        #[arg(long, requires = "start")]
        end: Option<NaiveDate>,
        #[arg(long, env = "GELAB_BASE_URL", default_value = DEFAULT_BASE_URL)]
        base_url: String,
        /// Response cache directory; requests are not cached without one.
        #[arg(long, env = "GELAB_CACHE_DIR")]
        cache_dir: Option<PathBuf>,
        /// Sent with every request; include contact details.
        #[arg(long, default_value = concat!("gelab/", env!("CARGO_PKG_VERSION"), " (research data collection)"))]
        user_agent: String,
        /// Minimum gap between requests.
        #[arg(long, default_value_t = 1000)]
        min_interval_ms: u64,
    },
    /// Validate a panel CSV and rewrite it in canonical form.
    Csv {
        #[arg(long)]
        input: PathBuf,
    },
    /// Load official and illicit GP price files and summarise them.
    Gp {
        #[arg(long)]
        official: Option<PathBuf>,
        #[arg(long)]
        sellers: Option<PathBuf>,
    },
}

pub fn run(ctx: &Ctx, cmd: &IngestCommand) -> Result<(), CliError> {
    let mut bundle = Bundle::create(&ctx.out)?;
    let (name, args) = match cmd {
        IngestCommand::Api {
            items,
            items_file,
            step,
            start,
            end,
            base_url,
            cache_dir,
            user_agent,
            min_interval_ms,
        } => {
            let items: Vec<ItemId> = resolve_items(items.as_deref(), items_file.as_deref())?
                .ok_or_else(|| CliError::config("MissingItems", "pass --items or --items-file"))?
                .into_iter()
                .collect();
            let range = match (start, end) {
                (Some(s), Some(e)) => Some(DateWindow::new(*s, *e)),
                _ => None,
            };
            let mut config = ApiConfig::new(base_url.clone(), user_agent.clone());
            config.cache_dir = cache_dir.clone();
            config.min_interval_ms = *min_interval_ms;
            let mut client = ApiClient::new(config)?;
            let (panel, fetch) = fetch_panel(&mut client, &items, *step, range)?;
            write_panel_csv(&panel, &bundle.path("panel.csv"))?;
            bundle.record("panel.csv")?;
            bundle.record("panel.meta.json")?;
            bundle.write_json("fetch_manifest.json", &fetch)?;
            ctx.say(format!(
                "{} rows from {} items ({} requests, {} cache hits)",
                fetch.observations,
                items.len(),
                fetch.requests_made,
                fetch.cache_hits
            ));
            (
                "ingest api",
                json!({ "base_url": base_url, "step": step, "items": items, "start": start, "end": end }),
            )
        }
        IngestCommand::Csv { input } => {
            let panel = load_panel_csv(input)?;
            bundle.input(input)?;
            write_panel_csv(&panel, &bundle.path("panel.csv"))?;
            bundle.record("panel.csv")?;
            bundle.record("panel.meta.json")?;
            ctx.say(format!("{} rows, {} items", panel.len(), panel.items().len()));
            ("ingest csv", json!({}))
        }
        IngestCommand::Gp { official, sellers } => {
            if official.is_none() && sellers.is_none() {
                return Err(CliError::config("MissingInput", "pass --official and/or --sellers"));
            }
            for p in [official, sellers].into_iter().flatten() {
                bundle.input(p)?;
            }
            let data = load_gp_prices(official.as_deref(), sellers.as_deref())?;
            bundle.write_json("gp_summary.json", &data.summary)?;
            bundle.write_csv("gp_prices.csv", |w| {
                w.write_record(["date", "source", "usd_per_million"])?;
                for p in &data.points {
                    w.write_record([p.date.to_string(), p.source.to_string(), p.usd_per_million_gp.to_string()])?;
                }
                Ok(())
            })?;
            bundle.write_csv("gp_premium.csv", |w| {
                w.write_record(["date", "official", "illicit_mean", "premium"])?;
                for p in &data.summary.premium {
                    w.write_record([
                        p.date.to_string(),
                        p.official.to_string(),
                        p.illicit_mean.to_string(),
                        p.premium.to_string(),
                    ])?;
                }
                Ok(())
            })?;
            for s in &data.summary.per_source {
                ctx.say(format!("{}: n = {}, mean = {:.4}", s.source, s.n, s.mean));
            }
            ("ingest gp", json!({}))
        }
    };
    bundle.finish(name, args, None, None)?;
    Ok(())
}
