//! Client for the price time-series endpoint
//! (`GET {base}/timeseries?timestep=24h&id={item}`), which answers
//!
//! ```json
//! {"data": [{"timestamp": 1638316800, "avgHighPrice": 105, "avgLowPrice": 100,
//!            "highPriceVolume": 20, "lowPriceVolume": 30}], "itemId": 4151}
//! ```
//!
//! The canonical panel price is `avgLowPrice` (the instant-sell price, the
//! side the tax is levied on) and the canonical volume is
//! `highPriceVolume + lowPriceVolume`. Records without a sell price are
//! skipped; days absent from the response stay absent.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::thread::sleep;
use std::time::{Duration, Instant};

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::IngestError;
use crate::panel::{DateWindow, ItemId, Panel, PanelMetadata, PanelObservation, Provenance};

pub const DEFAULT_BASE_URL: &str = "https://prices.runescape.wiki/api/v1/osrs";

/// Longest server-requested back-off we are willing to sleep through.
const MAX_RETRY_AFTER_SECS: u64 = 60;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TimeStep {
    #[serde(rename = "5m")]
    FiveMinutes,
    #[serde(rename = "1h")]
    OneHour,
    #[serde(rename = "6h")]
    SixHours,
    #[default]
    #[serde(rename = "24h")]
    Daily,
}

impl TimeStep {
    pub fn as_str(self) -> &'static str {
        match self {
            TimeStep::FiveMinutes => "5m",
            TimeStep::OneHour => "1h",
            TimeStep::SixHours => "6h",
            TimeStep::Daily => "24h",
        }
    }
}

impl std::str::FromStr for TimeStep {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "5m" => Ok(TimeStep::FiveMinutes),
            "1h" => Ok(TimeStep::OneHour),
            "6h" => Ok(TimeStep::SixHours),
            "24h" | "daily" => Ok(TimeStep::Daily),
            other => Err(format!("unknown time step `{other}` (use 5m, 1h, 6h or 24h)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiConfig {
    pub base_url: String,
    /// Sent on every request. The endpoint's operators ask for a
    /// descriptive agent with contact details.
    pub user_agent: String,
    /// Minimum gap between the starts of two requests.
    pub min_interval_ms: u64,
    pub cache_dir: Option<PathBuf>,
    /// Retries after a 429/503 carrying `Retry-After`.
    pub max_retries: u32,
    pub timeout_secs: u64,
}

impl ApiConfig {
    pub fn new(base_url: impl Into<String>, user_agent: impl Into<String>) -> Self {
        ApiConfig {
            base_url: base_url.into(),
            user_agent: user_agent.into(),
            min_interval_ms: 1000,
            cache_dir: None,
            max_retries: 2,
            timeout_secs: 30,
        }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.user_agent.trim().is_empty() {
            return Err(IngestError::InvalidConfig("user agent must not be empty".into()));
        }
        if self.min_interval_ms < 100 {
            return Err(IngestError::InvalidConfig(format!(
                "request interval must be at least 100 ms, got {}",
                self.min_interval_ms
            )));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(IngestError::InvalidConfig(format!("base URL `{}` is not http(s)", self.base_url)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct CacheEntry {
    item: ItemId,
    step: TimeStep,
    start: Option<NaiveDate>,
    end: Option<NaiveDate>,
    url: String,
    file: String,
    bytes: usize,
}

/// Sequential, rate-limited, caching client. One client owns the rate limit.
pub struct ApiClient {
    config: ApiConfig,
    agent: ureq::Agent,
    sent_at: Vec<Instant>,
    cache_hits: u64,
}

impl ApiClient {
    pub fn new(config: ApiConfig) -> Result<Self, IngestError> {
        config.validate()?;
        if let Some(dir) = &config.cache_dir {
            std::fs::create_dir_all(dir).map_err(|e| IngestError::io(dir, e))?;
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build()
            .into();
        Ok(ApiClient {
            config,
            agent,
            sent_at: Vec::new(),
            cache_hits: 0,
        })
    }

    pub fn config(&self) -> &ApiConfig {
        &self.config
    }

    /// Network requests sent so far, retries included.
    pub fn requests_made(&self) -> u64 {
        self.sent_at.len() as u64
    }

    /// Send time of every network request, in order.
    pub fn request_times(&self) -> &[Instant] {
        &self.sent_at
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache_hits
    }

    fn url(&self, item: ItemId, step: TimeStep) -> String {
        format!(
            "{}/timeseries?timestep={}&id={}",
            self.config.base_url.trim_end_matches('/'),
            step.as_str(),
            item
        )
    }

    fn cache_key(item: ItemId, step: TimeStep, range: Option<DateWindow>) -> String {
        let (s, e) = match range {
            Some(w) => (w.start.to_string(), w.end.to_string()),
            None => ("all".into(), "all".into()),
        };
        format!("{}_{}_{}_{}", item, step.as_str(), s, e)
    }

    /// Daily observations for `item`, restricted to `range` when given.
    pub fn fetch_timeseries(
        &mut self,
        item: ItemId,
        step: TimeStep,
        range: Option<DateWindow>,
    ) -> Result<Vec<PanelObservation>, IngestError> {
        let key = Self::cache_key(item, step, range);
        let cached = self
            .config
            .cache_dir
            .as_ref()
            .map(|d| d.join(format!("{key}.json")))
            .filter(|p| p.exists());
        let body = if let Some(path) = cached {
            self.cache_hits += 1;
            std::fs::read_to_string(&path).map_err(|e| IngestError::io(&path, e))?
        } else {
            let url = self.url(item, step);
            let body = self.get(&url, item)?;
            // Only well-formed payloads are cached.
            parse_timeseries(&body, item)?;
            if let Some(dir) = self.config.cache_dir.clone() {
                self.store(&dir, &key, &body, CacheEntry {
                    item,
                    step,
                    start: range.map(|w| w.start),
                    end: range.map(|w| w.end),
                    url,
                    file: format!("{key}.json"),
                    bytes: body.len(),
                })?;
            }
            body
        };
        let mut obs = parse_timeseries(&body, item)?;
        if let Some(w) = range {
            obs.retain(|o| w.contains(o.date));
        }
        Ok(obs)
    }

    fn store(&self, dir: &Path, key: &str, body: &str, entry: CacheEntry) -> Result<(), IngestError> {
        let file = dir.join(&entry.file);
        std::fs::write(&file, body).map_err(|e| IngestError::io(&file, e))?;
        let manifest_path = dir.join("manifest.json");
        let mut manifest: BTreeMap<String, CacheEntry> = std::fs::read_to_string(&manifest_path)
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .unwrap_or_default();
        manifest.insert(key.to_string(), entry);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(&manifest_path, text + "\n").map_err(|e| IngestError::io(&manifest_path, e))
    }

    fn wait_for_slot(&mut self) {
        let floor = Duration::from_millis(self.config.min_interval_ms);
        if let Some(last) = self.sent_at.last() {
            let elapsed = last.elapsed();
            if elapsed < floor {
                sleep(floor - elapsed);
            }
        }
        self.sent_at.push(Instant::now());
    }

    fn get(&mut self, url: &str, item: ItemId) -> Result<String, IngestError> {
        let mut attempt = 0;
        loop {
            self.wait_for_slot();
            let mut response = self
                .agent
                .get(url)
                .header("User-Agent", &self.config.user_agent)
                .call()
                .map_err(|e| IngestError::Transport {
                    url: url.to_string(),
                    message: e.to_string(),
                })?;
            let status = response.status().as_u16();
            match status {
                200 => {
                    return response.body_mut().read_to_string().map_err(|e| IngestError::Transport {
                        url: url.to_string(),
                        message: e.to_string(),
                    })
                }
                404 => return Err(IngestError::UnknownItem(item)),
                _ => {
                    let retry_after = response
                        .headers()
                        .get("retry-after")
                        .and_then(|v| v.to_str().ok())
                        .and_then(|v| v.trim().parse::<u64>().ok());
                    let retryable = matches!(status, 429 | 503);
                    match retry_after {
                        Some(secs) if retryable && attempt < self.config.max_retries && secs <= MAX_RETRY_AFTER_SECS => {
                            attempt += 1;
                            sleep(Duration::from_secs(secs));
                        }
                        _ => {
                            return Err(IngestError::HttpError {
                                status,
                                url: url.to_string(),
                                retry_after,
                            })
                        }
                    }
                }
            }
        }
    }
}

fn parse_err(path: impl Into<String>, message: impl Into<String>) -> IngestError {
    IngestError::ParseError {
        path: path.into(),
        message: message.into(),
    }
}

fn optional_number(rec: &Value, path: &str, field: &str) -> Result<Option<f64>, IngestError> {
    match rec.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Number(n)) => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            if x.is_finite() && x >= 0.0 {
                Ok(Some(x))
            } else {
                Err(parse_err(format!("{path}.{field}"), format!("expected a non-negative number, got {n}")))
            }
        }
        Some(other) => Err(parse_err(format!("{path}.{field}"), format!("expected a number, got {other}"))),
    }
}

/// Parses a time-series payload into one observation per UTC date. With
/// sub-daily steps, records on the same date are combined: volumes add
/// and the price is volume-weighted (a plain mean on zero-volume days).
pub fn parse_timeseries(body: &str, item: ItemId) -> Result<Vec<PanelObservation>, IngestError> {
    let root: Value = serde_json::from_str(body).map_err(|e| parse_err("$", e.to_string()))?;
    if root.get("error").is_some() {
        return Err(IngestError::UnknownItem(item));
    }
    if let Some(id) = root.get("itemId") {
        if id.as_u64() != Some(item.0 as u64) {
            return Err(parse_err("itemId", format!("expected {item}, got {id}")));
        }
    }
    let data = root
        .get("data")
        .ok_or_else(|| parse_err("data", "missing"))?
        .as_array()
        .ok_or_else(|| parse_err("data", "expected an array"))?;

    // date -> (sum p*v, sum v, sum p, count)
    let mut days: BTreeMap<NaiveDate, (f64, f64, f64, usize)> = BTreeMap::new();
    for (i, rec) in data.iter().enumerate() {
        let path = format!("data[{i}]");
        if !rec.is_object() {
            return Err(parse_err(path, "expected an object"));
        }
        let ts = rec
            .get("timestamp")
            .and_then(Value::as_i64)
            .ok_or_else(|| parse_err(format!("{path}.timestamp"), "expected an integer unix time"))?;
        let date = DateTime::from_timestamp(ts, 0)
            .ok_or_else(|| parse_err(format!("{path}.timestamp"), format!("{ts} is out of range")))?
            .date_naive();
        let Some(price) = optional_number(rec, &path, "avgLowPrice")? else {
            continue;
        };
        if price <= 0.0 {
            return Err(parse_err(format!("{path}.avgLowPrice"), "price must be positive"));
        }
        let high = optional_number(rec, &path, "highPriceVolume")?.unwrap_or(0.0);
        let low = optional_number(rec, &path, "lowPriceVolume")?.unwrap_or(0.0);
        optional_number(rec, &path, "avgHighPrice")?;
        let v = high + low;
        let e = days.entry(date).or_default();
        e.0 += price * v;
        e.1 += v;
        e.2 += price;
        e.3 += 1;
    }
    Ok(days
        .into_iter()
        .map(|(date, (pv, v, p, n))| PanelObservation {
            item_id: item,
            date,
            price: if v > 0.0 { pv / v } else { p / n as f64 },
            volume: v,
        })
        .collect())
}

/// Record of an ingest run, written next to the panel.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchManifest {
    pub base_url: String,
    pub step: TimeStep,
    pub items: Vec<ItemId>,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    pub requests_made: u64,
    pub cache_hits: u64,
    pub observations: usize,
}

/// Fetches every item and assembles one panel.
pub fn fetch_panel(
    client: &mut ApiClient,
    items: &[ItemId],
    step: TimeStep,
    range: Option<DateWindow>,
) -> Result<(Panel, FetchManifest), IngestError> {
    let (req0, hit0) = (client.requests_made(), client.cache_hits());
    let mut obs = Vec::new();
    for &item in items {
        obs.extend(client.fetch_timeseries(item, step, range)?);
    }
    let panel = Panel::new(
        obs,
        PanelMetadata {
            provenance: Provenance::Ingested,
            ground_truth: None,
            seed: None,
        },
    )
    .map_err(|e| parse_err("data", e.to_string()))?;
    let manifest = FetchManifest {
        base_url: client.config().base_url.clone(),
        step,
        items: items.to_vec(),
        start: range.map(|w| w.start),
        end: range.map(|w| w.end),
        requests_made: client.requests_made() - req0,
        cache_hits: client.cache_hits() - hit0,
        observations: panel.len(),
    };
    Ok((panel, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_daily_record() {
        let body = r#"{"data":[{"timestamp":1638316800,"avgHighPrice":105,"avgLowPrice":100,"highPriceVolume":20,"lowPriceVolume":30}],"itemId":4151}"#;
        let obs = parse_timeseries(body, ItemId(4151)).unwrap();
        assert_eq!(obs.len(), 1);
        assert_eq!(obs[0].date, NaiveDate::from_ymd_opt(2021, 12, 1).unwrap());
        assert_eq!(obs[0].price, 100.0);
        assert_eq!(obs[0].volume, 50.0);
    }

    #[test]
    fn null_price_skipped_and_errors_have_paths() {
        let body = r#"{"data":[{"timestamp":0,"avgLowPrice":null,"highPriceVolume":1,"lowPriceVolume":0}]}"#;
        assert!(parse_timeseries(body, ItemId(1)).unwrap().is_empty());
        let body = r#"{"data":[{"timestamp":0,"avgLowPrice":5},{"timestamp":"x","avgLowPrice":5}]}"#;
        match parse_timeseries(body, ItemId(1)) {
            Err(IngestError::ParseError { path, .. }) => assert_eq!(path, "data[1].timestamp"),
            other => panic!("{other:?}"),
        }
        let body = r#"{"data":[{"timestamp":0,"avgLowPrice":5,"lowPriceVolume":-2}]}"#;
        match parse_timeseries(body, ItemId(1)) {
            Err(IngestError::ParseError { path, .. }) => assert_eq!(path, "data[0].lowPriceVolume"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_timeseries(r#"{"error":"bad id"}"#, ItemId(9)),
            Err(IngestError::UnknownItem(ItemId(9)))
        ));
        assert!(matches!(parse_timeseries("[", ItemId(9)), Err(IngestError::ParseError { .. })));
    }

    #[test]
    fn config_validation() {
        let mut c = ApiConfig::new("http://x", "gelab test");
        c.validate().unwrap();
        c.min_interval_ms = 99;
        assert!(c.validate().is_err());
        c.min_interval_ms = 100;
        c.user_agent = " ".into();
        assert!(c.validate().is_err());
    }

    #[test]
    fn sub_daily_records_combine() {
        let body = r#"{"data":[
            {"timestamp":1638316800,"avgLowPrice":100,"highPriceVolume":1,"lowPriceVolume":0},
            {"timestamp":1638338400,"avgLowPrice":200,"highPriceVolume":0,"lowPriceVolume":3}]}"#;
        let obs = parse_timeseries(body, ItemId(1)).unwrap();
        assert_eq!(obs.len(), 1);
        assert_eq!(obs[0].price, 175.0);
        assert_eq!(obs[0].volume, 4.0);
    }
}
