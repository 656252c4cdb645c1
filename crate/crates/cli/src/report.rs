use std::fmt::Write as _;
use std::fs;

use crate::bundle::{Manifest, MANIFEST_FILE};
use crate::error::CliError;
use crate::Ctx;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Writes `index.html` listing the bundle's artifacts, with figures inline.
pub fn run(ctx: &Ctx) -> Result<(), CliError> {
    let dir = &ctx.out;
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest = if manifest_path.exists() {
        Some(Manifest::load(&manifest_path)?)
    } else {
        None
    };
    let mut names: Vec<String> = match &manifest {
        Some(m) => m.artifacts.iter().map(|a| a.name.clone()).collect(),
        None => {
            let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
            let mut v: Vec<String> = entries
                .filter_map(|e| e.ok())
                .filter(|e| e.path().is_file())
                .filter_map(|e| e.file_name().into_string().ok())
                .filter(|n| n != "index.html")
                .collect();
            v.sort();
            v
        }
    };
    names.dedup();

    let mut html = String::from("<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>gelab report</title></head><body>\n");
    match &manifest {
        Some(m) => {
            let _ = writeln!(
                html,
                "<h1>{}</h1>\n<p>{} {}{}</p>",
                escape(&m.command),
                escape(&m.tool),
                escape(&m.version),
                m.seed.map(|s| format!(", seed {s}")).unwrap_or_default()
            );
        }
        None => html.push_str("<h1>gelab bundle</h1>\n"),
    }
    html.push_str("<table>\n<tr><th>artifact</th><th>bytes</th><th>sha256</th></tr>\n");
    for name in &names {
        let rec = manifest.as_ref().and_then(|m| m.artifacts.iter().find(|a| &a.name == name));
        let bytes = match rec {
            Some(r) => r.bytes,
            None => fs::metadata(dir.join(name)).map(|m| m.len()).unwrap_or(0),
        };
        let _ = writeln!(
            html,
            "<tr><td><a href=\"{0}\">{0}</a></td><td>{1}</td><td><code>{2}</code></td></tr>",
            escape(name),
            bytes,
            rec.map(|r| r.sha256.as_str()).unwrap_or("")
        );
    }
    html.push_str("</table>\n");
    for name in names.iter().filter(|n| n.ends_with(".svg")) {
        let _ = writeln!(html, "<h2>{0}</h2>\n<img src=\"{0}\" alt=\"{0}\">", escape(name));
    }
    html.push_str("</body></html>\n");
    let path = dir.join("index.html");
    fs::write(&path, html).map_err(|e| CliError::io(&path, e))?;
    ctx.say(format!("wrote {} ({} artifacts)", path.display(), names.len()));
    Ok(())
}
