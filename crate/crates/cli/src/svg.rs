//! Minimal SVG charts. Every plotted point is a `<circle class="pt">`
//! carrying its data coordinates in `data-series`, `data-x` and `data-y`
//! (plus `data-lo`/`data-hi` for error bars), so tests compare what was
//! plotted rather than raw bytes.

use std::fmt::Write as _;

use chrono::NaiveDate;

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#7f7f7f"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Style {
    Line,
    Dashed,
    Points,
}

#[derive(Clone, Debug)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub bar: Option<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub style: Style,
    pub points: Vec<Point>,
}

impl Series {
    pub fn new(name: &str, style: Style, xy: impl IntoIterator<Item = (f64, f64)>) -> Series {
        Series {
            name: name.into(),
            style,
            points: xy.into_iter().map(|(x, y)| Point { x, y, bar: None }).collect(),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// x values are days since 1970-01-01; ticks are printed as dates.
    pub date_axis: bool,
    pub series: Vec<Series>,
    pub vlines: Vec<f64>,
    pub hlines: Vec<f64>,
}

pub fn date_x(d: NaiveDate) -> f64 {
    (d - NaiveDate::from_ymd_opt(1970, 1, 1).unwrap()).num_days() as f64
}

fn fmt_tick(v: f64, date_axis: bool) -> String {
    if date_axis {
        let d = NaiveDate::from_ymd_opt(1970, 1, 1).unwrap() + chrono::Days::new(v.round().max(0.0) as u64);
        return d.format("%Y-%m-%d").to_string();
    }
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e6).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        return (lo - 0.5 * lo.abs().max(1.0), hi + 0.5 * hi.abs().max(1.0));
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

impl Chart {
    pub fn render(&self) -> String {
        let (x0, x1) = range(
            self.series
                .iter()
                .flat_map(|s| s.points.iter().map(|p| p.x))
                .chain(self.vlines.iter().copied()),
        );
        let (y0, y1) = range(
            self.series
                .iter()
                .flat_map(|s| {
                    s.points
                        .iter()
                        .flat_map(|p| [Some(p.y), p.bar.map(|b| b.0), p.bar.map(|b| b.1)])
                })
                .flatten()
                .chain(self.hlines.iter().copied()),
        );
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
        );
        for k in 0..=4 {
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            let _ = writeln!(
                s,
                r#"<text class="tick" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                sx(fx),
                TOP + ph + 16.0,
                fmt_tick(fx, self.date_axis)
            );
            let _ = writeln!(
                s,
                r#"<text class="tick" x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                sy(fy) + 4.0,
                fmt_tick(fy, false)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            H - 16.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        for &v in &self.vlines {
            let _ = writeln!(
                s,
                r##"<line class="vline" data-x="{v}" x1="{0:.2}" x2="{0:.2}" y1="{TOP}" y2="{1:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
                sx(v),
                TOP + ph
            );
        }
        for &v in &self.hlines {
            let _ = writeln!(
                s,
                r##"<line class="hline" data-y="{v}" x1="{LEFT}" x2="{0:.2}" y1="{1:.2}" y2="{1:.2}" stroke="#888" stroke-dasharray="2 3"/>"##,
                LEFT + pw,
                sy(v)
            );
        }
        for (k, series) in self.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let name = escape(&series.name);
            let _ = writeln!(s, r#"<g class="series" data-series="{name}">"#);
            if series.style != Style::Points {
                let pts: Vec<String> = series
                    .points
                    .iter()
                    .filter(|p| p.x.is_finite() && p.y.is_finite())
                    .map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.y)))
                    .collect();
                let dash = if series.style == Style::Dashed { r#" stroke-dasharray="6 4""# } else { "" };
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
                    pts.join(" ")
                );
            }
            let r = if series.style == Style::Points { 3.0 } else { 1.5 };
            for p in series.points.iter().filter(|p| p.x.is_finite() && p.y.is_finite()) {
                if let Some((lo, hi)) = p.bar {
                    let _ = writeln!(
                        s,
                        r#"<line class="bar" x1="{0:.2}" x2="{0:.2}" y1="{1:.2}" y2="{2:.2}" stroke="{color}"/>"#,
                        sx(p.x),
                        sy(lo),
                        sy(hi)
                    );
                }
                let bar = p
                    .bar
                    .map(|(lo, hi)| format!(r#" data-lo="{lo}" data-hi="{hi}""#))
                    .unwrap_or_default();
                let _ = writeln!(
                    s,
                    r#"<circle class="pt" data-series="{name}" data-x="{}" data-y="{}"{bar} cx="{:.2}" cy="{:.2}" r="{r}" fill="{color}"/>"#,
                    p.x,
                    p.y,
                    sx(p.x),
                    sy(p.y)
                );
            }
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" fill="{color}">{name}</text>"#,
                LEFT + 8.0,
                TOP + 14.0 + 14.0 * k as f64
            );
            let _ = writeln!(s, "</g>");
        }
        s.push_str("</svg>\n");
        s
    }
}
