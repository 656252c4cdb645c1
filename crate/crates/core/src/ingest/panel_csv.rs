//! Canonical panel CSV (`item_id,date,price,volume`) with a JSON sidecar
//! holding the panel metadata.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::{parse_date, IngestError};
use crate::panel::{ItemId, Panel, PanelMetadata, PanelObservation};

pub const PANEL_HEADER: [&str; 4] = ["item_id", "date", "price", "volume"];

/// `panel.csv` -> `panel.meta.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Writes rows in panel order. Floats use the shortest representation
/// that reads back to the same value.
pub fn write_panel_csv_to<W: Write>(panel: &Panel, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PANEL_HEADER)?;
    for o in panel.observations() {
        w.write_record([
            o.item_id.0.to_string(),
            o.date.to_string(),
            o.price.to_string(),
            o.volume.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the CSV and its metadata sidecar.
pub fn write_panel_csv(panel: &Panel, path: &Path) -> Result<(), IngestError> {
    let file = File::create(path).map_err(|e| IngestError::io(path, e))?;
    write_panel_csv_to(panel, file).map_err(|e| IngestError::io(path, e))?;
    let meta = sidecar_path(path);
    let json = serde_json::to_string_pretty(&panel.metadata).expect("metadata serializes");
    std::fs::write(&meta, json + "\n").map_err(|e| IngestError::io(&meta, e))?;
    Ok(())
}

/// Parses panel rows. `file` only labels errors. Row numbers count the
/// header as row 1.
pub fn read_panel_csv<R: Read>(input: R, file: &Path, metadata: PanelMetadata) -> Result<Panel, IngestError> {
    let schema = |row: usize, message: String| IngestError::SchemaError {
        file: file.to_path_buf(),
        row,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader.headers().map_err(|e| schema(1, e.to_string()))?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != PANEL_HEADER {
        return Err(schema(1, format!("expected header `{}`, found `{}`", PANEL_HEADER.join(","), names.join(","))));
    }
    let mut seen: HashMap<(ItemId, chrono::NaiveDate), usize> = HashMap::new();
    let mut observations = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 2;
        let record = record.map_err(|e| schema(row, e.to_string()))?;
        let field = |j: usize| record.get(j).map(str::trim).unwrap_or("");
        let item_id = field(0)
            .parse::<u32>()
            .map(ItemId)
            .map_err(|_| schema(row, format!("item_id: `{}` is not an item id", field(0))))?;
        let date = parse_date(field(1)).ok_or_else(|| schema(row, format!("date: `{}` is not YYYY-MM-DD", field(1))))?;
        let price = field(2)
            .parse::<f64>()
            .map_err(|_| schema(row, format!("price: `{}` is not a number", field(2))))?;
        let volume = field(3)
            .parse::<f64>()
            .map_err(|_| schema(row, format!("volume: `{}` is not a number", field(3))))?;
        if !(price.is_finite() && price > 0.0) {
            return Err(IngestError::NonPositivePrice {
                file: file.to_path_buf(),
                row,
                price,
            });
        }
        if !(volume.is_finite() && volume >= 0.0) {
            return Err(schema(row, format!("volume: {volume} must be finite and non-negative")));
        }
        if let Some(first_row) = seen.insert((item_id, date), row) {
            return Err(IngestError::DuplicateKey {
                file: file.to_path_buf(),
                row,
                first_row,
                key: format!("item {item_id}, {date}"),
            });
        }
        observations.push(PanelObservation {
            item_id,
            date,
            price,
            volume,
        });
    }
    Panel::new(observations, metadata).map_err(|e| schema(0, e.to_string()))
}

/// Reads a panel CSV and, when present, its metadata sidecar.
pub fn load_panel_csv(path: &Path) -> Result<Panel, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    let meta_path = sidecar_path(path);
    let metadata = if meta_path.exists() {
        let text = std::fs::read_to_string(&meta_path).map_err(|e| IngestError::io(&meta_path, e))?;
        serde_json::from_str(&text).map_err(|e| IngestError::ParseError {
            path: meta_path.display().to_string(),
            message: e.to_string(),
        })?
    } else {
        PanelMetadata::default()
    };
    read_panel_csv(file, path, metadata)
}
