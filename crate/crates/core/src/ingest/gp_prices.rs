//! Official and illicit US-dollar prices of in-game gold.
//!
//! Both files use the header `date,source,usd_per_million`. The official
//! file's rows must have source `official`; the sellers file names each
//! seller. The risk premium on a date is the official price minus the
//! mean illicit price across sellers quoting that date.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{parse_date, IngestError};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub enum GpSource {
    Official,
    Seller(String),
}

impl From<String> for GpSource {
    fn from(s: String) -> Self {
        if s.eq_ignore_ascii_case("official") {
            GpSource::Official
        } else {
            GpSource::Seller(s)
        }
    }
}

impl From<GpSource> for String {
    fn from(s: GpSource) -> String {
        s.to_string()
    }
}

impl fmt::Display for GpSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GpSource::Official => f.write_str("official"),
            GpSource::Seller(name) => f.write_str(name),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpPricePoint {
    pub date: NaiveDate,
    pub source: GpSource,
    pub usd_per_million_gp: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceSummary {
    pub source: GpSource,
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PremiumPoint {
    pub date: NaiveDate,
    pub official: f64,
    pub illicit_mean: f64,
    pub premium: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpPriceSummary {
    pub per_source: Vec<SourceSummary>,
    pub official_mean: Option<f64>,
    /// Mean over all illicit quotes.
    pub illicit_mean: Option<f64>,
    /// False when either side is missing, in which case `premium` is empty.
    pub premium_defined: bool,
    pub premium: Vec<PremiumPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpPriceData {
    pub points: Vec<GpPricePoint>,
    pub summary: GpPriceSummary,
}

impl GpPriceData {
    pub fn official_series(&self) -> Vec<(NaiveDate, f64)> {
        official_series(&self.points)
    }

    /// Mean illicit price per date.
    pub fn illicit_series(&self) -> Vec<(NaiveDate, f64)> {
        illicit_series(&self.points)
    }
}

fn official_series(points: &[GpPricePoint]) -> Vec<(NaiveDate, f64)> {
    points
        .iter()
        .filter(|p| p.source == GpSource::Official)
        .map(|p| (p.date, p.usd_per_million_gp))
        .collect()
}

fn illicit_series(points: &[GpPricePoint]) -> Vec<(NaiveDate, f64)> {
    let mut by_date: BTreeMap<NaiveDate, (f64, usize)> = BTreeMap::new();
    for p in points.iter().filter(|p| p.source != GpSource::Official) {
        let e = by_date.entry(p.date).or_default();
        e.0 += p.usd_per_million_gp;
        e.1 += 1;
    }
    by_date.into_iter().map(|(d, (s, n))| (d, s / n as f64)).collect()
}

/// Parses one price file. `require_official` selects which sources the
/// file may contain. Row numbers count the header as row 1.
pub fn read_gp_prices_csv<R: Read>(
    input: R,
    file: &Path,
    require_official: bool,
) -> Result<Vec<GpPricePoint>, IngestError> {
    let schema = |row: usize, message: String| IngestError::SchemaError {
        file: file.to_path_buf(),
        row,
        message,
    };
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers().map_err(|e| schema(1, e.to_string()))?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != ["date", "source", "usd_per_million"] {
        return Err(schema(1, format!("expected header `date,source,usd_per_million`, found `{}`", names.join(","))));
    }
    let mut out = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 2;
        let record = record.map_err(|e| schema(row, e.to_string()))?;
        let field = |j: usize| record.get(j).map(str::trim).unwrap_or("");
        let date = parse_date(field(0)).ok_or_else(|| schema(row, format!("date: `{}` is not YYYY-MM-DD", field(0))))?;
        if field(1).is_empty() {
            return Err(schema(row, "source: empty".into()));
        }
        let source = GpSource::from(field(1).to_string());
        if require_official != (source == GpSource::Official) {
            let expected = if require_official { "`official`" } else { "a seller name" };
            return Err(schema(row, format!("source: expected {expected}, found `{}`", field(1))));
        }
        let price: f64 = field(2)
            .parse()
            .map_err(|_| schema(row, format!("usd_per_million: `{}` is not a number", field(2))))?;
        if !(price.is_finite() && price > 0.0) {
            return Err(IngestError::NonPositivePrice {
                file: file.to_path_buf(),
                row,
                price,
            });
        }
        out.push(GpPricePoint {
            date,
            source,
            usd_per_million_gp: price,
        });
    }
    Ok(out)
}

pub fn summarize_gp_prices(points: &[GpPricePoint]) -> GpPriceSummary {
    let mut by_source: BTreeMap<&GpSource, Vec<f64>> = BTreeMap::new();
    for p in points {
        by_source.entry(&p.source).or_default().push(p.usd_per_million_gp);
    }
    let per_source: Vec<SourceSummary> = by_source
        .iter()
        .map(|(source, v)| SourceSummary {
            source: (*source).clone(),
            n: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
        .collect();
    let mean_of = |official: bool| {
        let v: Vec<f64> = points
            .iter()
            .filter(|p| (p.source == GpSource::Official) == official)
            .map(|p| p.usd_per_million_gp)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let official_mean = mean_of(true);
    let illicit_mean = mean_of(false);

    let official: BTreeMap<NaiveDate, f64> = official_series(points).into_iter().collect();
    let premium: Vec<PremiumPoint> = illicit_series(points)
        .into_iter()
        .filter_map(|(date, illicit)| {
            official.get(&date).map(|&o| PremiumPoint {
                date,
                official: o,
                illicit_mean: illicit,
                premium: o - illicit,
            })
        })
        .collect();
    GpPriceSummary {
        per_source,
        official_mean,
        illicit_mean,
        premium_defined: official_mean.is_some() && illicit_mean.is_some(),
        premium,
    }
}

/// Loads either or both files, rejecting repeated `(date, source)` pairs.
pub fn load_gp_prices(official_path: Option<&Path>, sellers_path: Option<&Path>) -> Result<GpPriceData, IngestError> {
    let mut points = Vec::new();
    let mut seen: HashMap<(NaiveDate, GpSource), (usize, &Path)> = HashMap::new();
    for (path, official) in [(official_path, true), (sellers_path, false)] {
        let Some(path) = path else { continue };
        let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
        let rows = read_gp_prices_csv(file, path, official)?;
        for (k, p) in rows.into_iter().enumerate() {
            let row = k + 2;
            if let Some((first_row, _)) = seen.insert((p.date, p.source.clone()), (row, path)) {
                return Err(IngestError::DuplicateKey {
                    file: path.to_path_buf(),
                    row,
                    first_row,
                    key: format!("{}, {}", p.date, p.source),
                });
            }
            points.push(p);
        }
    }
    if points.is_empty() {
        return Err(IngestError::EmptySeries("GP price files".into()));
    }
    points.sort_by(|a, b| (a.date, &a.source).cmp(&(b.date, &b.source)));
    let summary = summarize_gp_prices(&points);
    Ok(GpPriceData { points, summary })
}
