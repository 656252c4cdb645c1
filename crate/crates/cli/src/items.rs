use std::collections::BTreeSet;
use std::path::Path;

use gelab::panel::ItemId;

use crate::error::CliError;

/// Parses item ids separated by commas or whitespace; `#` starts a comment.
pub fn parse_item_list(text: &str, origin: &str) -> Result<BTreeSet<ItemId>, CliError> {
    let mut items = BTreeSet::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            let id = tok.parse::<u32>().map_err(|_| {
                CliError::config("InvalidItemList", format!("{origin}: line {}: `{tok}` is not an item id", n + 1))
            })?;
            items.insert(ItemId(id));
        }
    }
    Ok(items)
}

pub fn read_item_file(path: &Path) -> Result<BTreeSet<ItemId>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("MissingItemFile", format!("{}: {e}", path.display())))?;
    parse_item_list(&text, &path.display().to_string())
}

/// Items from an inline list and/or a file.
pub fn resolve_items(inline: Option<&str>, file: Option<&Path>) -> Result<Option<BTreeSet<ItemId>>, CliError> {
    let mut out: Option<BTreeSet<ItemId>> = None;
    if let Some(text) = inline {
        out.get_or_insert_with(BTreeSet::new).extend(parse_item_list(text, "item list")?);
    }
    if let Some(path) = file {
        out.get_or_insert_with(BTreeSet::new).extend(read_item_file(path)?);
    }
    Ok(out)
}
