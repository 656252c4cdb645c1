use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use clap::{Args, Subcommand, ValueEnum};
use gelab::econometrics::{
    break_test, build_control_set, did_estimate, did_plot_data, pretrends_test, price_index, rd_estimate,
    rd_plot_data, rk_estimate, rk_plot_data, BreakMode, BreakTestResult, ControlSetConfig, DidSpec,
    DiscontinuityPlot, Kernel, Outcome, PretrendSpec, RdSpec, RkSpec, SeKind, WeeklyGroupMean,
};
use gelab::ingest::{load_gp_prices, load_panel_csv, sidecar_path};
use gelab::panel::{DateWindow, ItemId, Panel};
use serde_json::json;

use crate::bundle::Bundle;
use crate::error::CliError;
use crate::items::resolve_items;
use crate::svg::{date_x, Chart, Point, Series, Style};
use crate::Ctx;

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum KernelArg {
    Triangular,
    Epanechnikov,
    Uniform,
}

impl From<KernelArg> for Kernel {
    fn from(k: KernelArg) -> Kernel {
        match k {
            KernelArg::Triangular => Kernel::Triangular,
            KernelArg::Epanechnikov => Kernel::Epanechnikov,
            KernelArg::Uniform => Kernel::Uniform,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum OutcomeArg {
    Price,
    Volume,
}

impl From<OutcomeArg> for Outcome {
    fn from(o: OutcomeArg) -> Outcome {
        match o {
            OutcomeArg::Price => Outcome::Price,
            OutcomeArg::Volume => Outcome::Volume,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SeArg {
    Hc1,
    Cluster,
}

#[derive(Args, Debug)]
pub struct PanelArg {
    /// Panel CSV (`item_id,date,price,volume`).
    #[arg(long)]
    pub panel: PathBuf,
}

#[derive(Args, Debug)]
pub struct WindowArgs {
    /// First date of the estimation window.
    #[arg(long)]
    pub window_start: Option<NaiveDate>,
    /// Last date of the estimation window.
    #[arg(long)]
    pub window_end: Option<NaiveDate>,
}

impl WindowArgs {
    fn resolve(&self, panel: &Panel) -> Option<DateWindow> {
        if self.window_start.is_none() && self.window_end.is_none() {
            return None;
        }
        let dates = panel.dates();
        let first = dates.first().copied().unwrap_or(NaiveDate::MIN);
        let last = dates.last().copied().unwrap_or(NaiveDate::MAX);
        Some(DateWindow::new(self.window_start.unwrap_or(first), self.window_end.unwrap_or(last)))
    }
}

#[derive(Args, Debug)]
pub struct GroupArgs {
    /// Treated (sinked) items, comma separated.
    #[arg(long)]
    pub treated: Option<String>,
    /// File listing treated items.
    #[arg(long)]
    pub treated_file: Option<PathBuf>,
    /// Control items, comma separated.
    #[arg(long)]
    pub control: Option<String>,
    /// File listing control items.
    #[arg(long)]
    pub control_file: Option<PathBuf>,
    /// Build the control group from pre-period price correlations.
    #[arg(long)]
    pub auto_control: bool,
    #[arg(long, default_value_t = 0.1)]
    pub corr_threshold: f64,
    /// Universe: items whose mean price exceeds this.
    #[arg(long, default_value_t = 1e5)]
    pub price_floor: f64,
    /// Start of the correlation window (default: estimation window start).
    #[arg(long)]
    pub corr_start: Option<NaiveDate>,
    /// End of the correlation window (default: day before the intervention).
    #[arg(long)]
    pub corr_end: Option<NaiveDate>,
}

#[derive(Subcommand, Debug)]
pub enum Design {
    /// Base-100 volume-weighted price index of an item group.
    Index {
        #[command(flatten)]
        panel: PanelArg,
        /// Items in the group, comma separated.
        #[arg(long)]
        items: Option<String>,
        #[arg(long)]
        items_file: Option<PathBuf>,
        /// Items of a comparison group drawn on the same chart.
        #[arg(long)]
        compare: Option<String>,
        #[arg(long)]
        compare_file: Option<PathBuf>,
        #[arg(long, default_value = "2021-12-08")]
        base_date: NaiveDate,
    },
    /// Sharp regression discontinuity in log volume at the tax threshold.
    Rd {
        #[command(flatten)]
        panel: PanelArg,
        #[arg(long, default_value_t = 100.0)]
        cutoff: f64,
        #[arg(long, default_value_t = 20.0)]
        bandwidth: f64,
        #[arg(long, default_value_t = 1)]
        order: usize,
        #[arg(long, value_enum, default_value_t = KernelArg::Triangular)]
        kernel: KernelArg,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
    /// Regression kink in log volume at the tax cap.
    Rk {
        #[command(flatten)]
        panel: PanelArg,
        #[arg(long, default_value_t = 5e8)]
        kink: f64,
        /// Only prices above this enter the fit.
        #[arg(long, default_value_t = 1e8)]
        restriction: f64,
        /// Right edge of the fit (default: mirror of the restriction).
        #[arg(long)]
        upper_restriction: Option<f64>,
        #[arg(long, default_value_t = 1)]
        order: usize,
        #[arg(long, value_enum, default_value_t = KernelArg::Triangular)]
        kernel: KernelArg,
        #[arg(long, default_value_t = 0.01)]
        tax_rate: f64,
        /// GP per unit of the tax regressor.
        #[arg(long, default_value_t = 1.0)]
        tax_scale: f64,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
    /// Difference-in-differences of sinked against control items.
    Did {
        #[command(flatten)]
        panel: PanelArg,
        #[command(flatten)]
        groups: GroupArgs,
        #[arg(long, default_value = "2021-12-09")]
        implementation_date: NaiveDate,
        #[arg(long, default_value = "2021-11-09")]
        window_start: NaiveDate,
        #[arg(long, default_value = "2022-01-01")]
        window_end: NaiveDate,
        #[arg(long, value_enum, default_value_t = OutcomeArg::Price)]
        outcome: OutcomeArg,
        #[arg(long, value_enum, default_value_t = SeArg::Hc1)]
        se: SeArg,
    },
    /// Test for differential pre-intervention trends.
    Pretrends {
        #[command(flatten)]
        panel: PanelArg,
        #[command(flatten)]
        groups: GroupArgs,
        #[arg(long, default_value = "2021-12-09")]
        intervention_date: NaiveDate,
        #[arg(long, default_value = "2021-11-09")]
        window_start: NaiveDate,
        /// Last pre-period date (default: day before the intervention).
        #[arg(long)]
        window_end: Option<NaiveDate>,
        #[arg(long, value_enum, default_value_t = OutcomeArg::Price)]
        outcome: OutcomeArg,
    },
    /// Structural-break test on GP price series or a dated series.
    Breaks {
        /// Official GP price CSV.
        #[arg(long)]
        gp_official: Option<PathBuf>,
        /// Illicit seller GP price CSV.
        #[arg(long)]
        gp_sellers: Option<PathBuf>,
        /// A `date,value` CSV instead of GP prices.
        #[arg(long, conflicts_with_all = ["gp_official", "gp_sellers"])]
        series: Option<PathBuf>,
        /// Known break date; scans the interior of the sample when absent.
        #[arg(long)]
        date: Option<NaiveDate>,
        #[arg(long, default_value_t = 0.05)]
        level: f64,
    },
}

fn load_panel(bundle: &mut Bundle, path: &Path) -> Result<Panel, CliError> {
    let panel = load_panel_csv(path)?;
    bundle.input(path)?;
    let meta = sidecar_path(path);
    if meta.exists() {
        bundle.input(&meta)?;
    }
    Ok(panel)
}

fn day_before(d: NaiveDate) -> NaiveDate {
    d - Days::new(1)
}

/// Treated and control groups, plus the control-set record when built
/// automatically.
fn resolve_groups(
    panel: &Panel,
    groups: &GroupArgs,
    default_corr: DateWindow,
    intervention: NaiveDate,
    bundle: &mut Bundle,
) -> Result<(BTreeSet<ItemId>, BTreeSet<ItemId>), CliError> {
    let treated = resolve_items(groups.treated.as_deref(), groups.treated_file.as_deref())?
        .ok_or_else(|| CliError::config("MissingGroup", "pass --treated or --treated-file"))?;
    let explicit = resolve_items(groups.control.as_deref(), groups.control_file.as_deref())?;
    let control = match (explicit, groups.auto_control) {
        (Some(_), true) => {
            return Err(CliError::config(
                "ConflictingGroups",
                "--auto-control cannot be combined with --control/--control-file",
            ))
        }
        (Some(c), false) => c,
        (None, true) => {
            let window = DateWindow::new(
                groups.corr_start.unwrap_or(default_corr.start),
                groups.corr_end.unwrap_or(default_corr.end),
            );
            let config = ControlSetConfig {
                price_floor: groups.price_floor,
                sinked: treated.clone(),
                correlation_threshold: groups.corr_threshold,
                window: Some(window),
                intervention_date: Some(intervention),
            };
            let set = build_control_set(panel, &config)?;
            bundle.write_json("controls.json", &set)?;
            set.items
        }
        (None, false) => {
            return Err(CliError::config(
                "MissingGroup",
                "pass --control, --control-file or --auto-control",
            ))
        }
    };
    Ok((treated, control))
}

fn write_weekly_csv(bundle: &mut Bundle, name: &str, weekly: &[WeeklyGroupMean], cf: Option<&[Option<f64>]>) -> Result<(), CliError> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    bundle.write_csv(name, |w| {
        let mut header = vec![
            "week", "week_start", "treated_mean", "treated_se", "n_treated", "control_mean", "control_se", "n_control",
        ];
        if cf.is_some() {
            header.push("counterfactual");
        }
        w.write_record(&header)?;
        for (k, m) in weekly.iter().enumerate() {
            let mut row = vec![
                m.week.to_string(),
                m.week_start.to_string(),
                opt(m.treated_mean),
                opt(m.treated_se),
                m.n_treated.to_string(),
                opt(m.control_mean),
                opt(m.control_se),
                m.n_control.to_string(),
            ];
            if let Some(cf) = cf {
                row.push(opt(cf[k]));
            }
            w.write_record(&row)?;
        }
        Ok(())
    })
}

fn group_series(name: &str, weekly: &[WeeklyGroupMean], treated: bool) -> Series {
    Series {
        name: name.into(),
        style: Style::Line,
        points: weekly
            .iter()
            .filter_map(|m| {
                let (mean, se) = if treated {
                    (m.treated_mean, m.treated_se)
                } else {
                    (m.control_mean, m.control_se)
                };
                mean.map(|y| Point {
                    x: date_x(m.week_start),
                    y,
                    bar: se.map(|s| (y - 1.96 * s, y + 1.96 * s)),
                })
            })
            .collect(),
    }
}

fn discontinuity_chart(plot: &DiscontinuityPlot, title: &str, x_label: &str) -> Chart {
    Chart {
        title: title.into(),
        x_label: x_label.into(),
        y_label: "log volume".into(),
        series: vec![
            Series::new("bin means", Style::Points, plot.bins.iter().map(|b| (b.x_mid, b.mean_y))),
            Series::new("fit below", Style::Line, plot.left_curve.iter().copied()),
            Series::new("fit above", Style::Line, plot.right_curve.iter().copied()),
        ],
        vlines: vec![plot.threshold],
        ..Chart::default()
    }
}

fn write_bins_csv(bundle: &mut Bundle, name: &str, plot: &DiscontinuityPlot) -> Result<(), CliError> {
    bundle.write_csv(name, |w| {
        w.write_record(["kind", "x", "y", "n"])?;
        for b in &plot.bins {
            w.write_record(["bin".to_string(), b.x_mid.to_string(), b.mean_y.to_string(), b.n.to_string()])?;
        }
        for (kind, curve) in [("fit_below", &plot.left_curve), ("fit_above", &plot.right_curve)] {
            for (x, y) in curve {
                w.write_record([kind.to_string(), x.to_string(), y.to_string(), String::new()])?;
            }
        }
        Ok(())
    })
}

fn estimate_row<W: std::io::Write>(
    w: &mut csv::Writer<W>,
    names: &[&str],
    values: &[String],
) -> Result<(), csv::Error> {
    w.write_record(names)?;
    w.write_record(values)
}

/// `date,value` series with an optional header.
fn read_series_csv(path: &Path) -> Result<Vec<(NaiveDate, f64)>, CliError> {
    let schema = |row: usize, msg: String| CliError {
        category: crate::error::Category::Ingest,
        kind: "SchemaError".into(),
        message: format!("{}: row {row}: {msg}", path.display()),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| schema(row, e.to_string()))?;
        let d = rec.get(0).unwrap_or("").trim();
        let v = rec.get(1).unwrap_or("").trim();
        match (d.parse::<NaiveDate>(), v.parse::<f64>()) {
            (Ok(d), Ok(v)) => out.push((d, v)),
            _ if row == 1 => continue,
            _ => return Err(schema(row, format!("expected `date,value`, found `{d},{v}`"))),
        }
    }
    Ok(out)
}

fn series_chart(title: &str, series: &[(&str, &[(NaiveDate, f64)])], vline: Option<NaiveDate>) -> Chart {
    Chart {
        title: title.into(),
        x_label: "date".into(),
        y_label: "USD per million GP".into(),
        date_axis: true,
        series: series
            .iter()
            .map(|(name, s)| Series::new(name, Style::Line, s.iter().map(|(d, v)| (date_x(*d), *v))))
            .collect(),
        vlines: vline.map(date_x).into_iter().collect(),
        ..Chart::default()
    }
}

fn write_break(bundle: &mut Bundle, stem: &str, result: &BreakTestResult) -> Result<(), CliError> {
    bundle.write_json(&format!("{stem}.json"), result)?;
    Ok(())
}

pub fn run(ctx: &Ctx, design: &Design) -> Result<(), CliError> {
    let mut bundle = Bundle::create(&ctx.out)?;
    let (name, args) = match design {
        Design::Index {
            panel,
            items,
            items_file,
            compare,
            compare_file,
            base_date,
        } => {
            let p = load_panel(&mut bundle, &panel.panel)?;
            let group = resolve_items(items.as_deref(), items_file.as_deref())?
                .unwrap_or_else(|| p.items());
            let series = price_index(&p, &group, *base_date)?;
            bundle.write_json("index.json", &series)?;
            let mut chart_series = vec![Series::new(
                "group",
                Style::Line,
                series.points.iter().map(|pt| (date_x(pt.week_start), pt.index)),
            )];
            let comparison = match resolve_items(compare.as_deref(), compare_file.as_deref())? {
                Some(c) => {
                    let s = price_index(&p, &c, *base_date)?;
                    bundle.write_json("index_compare.json", &s)?;
                    chart_series.push(Series::new(
                        "comparison",
                        Style::Line,
                        s.points.iter().map(|pt| (date_x(pt.week_start), pt.index)),
                    ));
                    Some(s)
                }
                None => None,
            };
            bundle.write_csv("index.csv", |w| {
                w.write_record(["group", "week", "week_start", "mean_price", "total_volume", "index"])?;
                for (label, s) in std::iter::once(("group", &series)).chain(comparison.iter().map(|s| ("comparison", s))) {
                    for pt in &s.points {
                        w.write_record([
                            label.to_string(),
                            pt.week.to_string(),
                            pt.week_start.to_string(),
                            pt.mean_price.to_string(),
                            pt.total_volume.to_string(),
                            pt.index.to_string(),
                        ])?;
                    }
                }
                Ok(())
            })?;
            let chart = Chart {
                title: "Price index (base week = 100)".into(),
                x_label: "week".into(),
                y_label: "index".into(),
                date_axis: true,
                series: chart_series,
                vlines: vec![date_x(*base_date)],
                hlines: vec![100.0],
            };
            bundle.write("index.svg", chart.render())?;
            ctx.say(format!("index over {} items, {} weeks", group.len(), series.points.len()));
            ("index", json!({ "base_date": base_date, "items": group }))
        }
        Design::Rd {
            panel,
            cutoff,
            bandwidth,
            order,
            kernel,
            window,
            bins,
        } => {
            let p = load_panel(&mut bundle, &panel.panel)?;
            let spec = RdSpec {
                cutoff: *cutoff,
                bandwidth: *bandwidth,
                order: *order,
                kernel: (*kernel).into(),
                window: window.resolve(&p),
            };
            let est = rd_estimate(&p, &spec)?;
            bundle.write_json("rd.json", &est)?;
            bundle.write_csv("rd.csv", |w| {
                estimate_row(
                    w,
                    &["beta", "se", "ci_low", "ci_high", "p_value", "n_left", "n_right"],
                    &[
                        est.beta.to_string(),
                        est.se.to_string(),
                        est.ci_low.to_string(),
                        est.ci_high.to_string(),
                        est.p_value.to_string(),
                        est.n_left.to_string(),
                        est.n_right.to_string(),
                    ],
                )
            })?;
            let plot = rd_plot_data(&p, &est, *bins);
            write_bins_csv(&mut bundle, "rd_bins.csv", &plot)?;
            let chart = discontinuity_chart(&plot, "Regression discontinuity at the tax threshold", "price (GP)");
            bundle.write("rd.svg", chart.render())?;
            ctx.say(format!("RD beta = {:.6} (se {:.6})", est.beta, est.se));
            ("rd", serde_json::to_value(&spec).unwrap())
        }
        Design::Rk {
            panel,
            kink,
            restriction,
            upper_restriction,
            order,
            kernel,
            tax_rate,
            tax_scale,
            window,
            bins,
        } => {
            let p = load_panel(&mut bundle, &panel.panel)?;
            let spec = RkSpec {
                kink: *kink,
                lower_restriction: *restriction,
                upper_restriction: *upper_restriction,
                order: *order,
                kernel: (*kernel).into(),
                window: window.resolve(&p),
                tax_rate: *tax_rate,
                tax_scale: *tax_scale,
            };
            let est = rk_estimate(&p, &spec)?;
            bundle.write_json("rk.json", &est)?;
            bundle.write_csv("rk.csv", |w| {
                estimate_row(
                    w,
                    &["delta", "se", "ci_low", "ci_high", "p_value", "slope_below", "slope_above", "n_left", "n_right"],
                    &[
                        est.delta.to_string(),
                        est.se.to_string(),
                        est.ci_low.to_string(),
                        est.ci_high.to_string(),
                        est.p_value.to_string(),
                        est.slope_below.to_string(),
                        est.slope_above.to_string(),
                        est.n_left.to_string(),
                        est.n_right.to_string(),
                    ],
                )
            })?;
            let plot = rk_plot_data(&p, &est, *bins);
            write_bins_csv(&mut bundle, "rk_bins.csv", &plot)?;
            let chart = discontinuity_chart(&plot, "Regression kink at the tax cap", "price (GP)");
            bundle.write("rk.svg", chart.render())?;
            ctx.say(format!("RK delta = {:.6} (se {:.6})", est.delta, est.se));
            ("rk", serde_json::to_value(&spec).unwrap())
        }
        Design::Did {
            panel,
            groups,
            implementation_date,
            window_start,
            window_end,
            outcome,
            se,
        } => {
            let p = load_panel(&mut bundle, &panel.panel)?;
            let window = DateWindow::new(*window_start, *window_end);
            let corr = DateWindow::new(*window_start, day_before(*implementation_date));
            let (treated, control) = resolve_groups(&p, groups, corr, *implementation_date, &mut bundle)?;
            let spec = DidSpec {
                treated,
                control,
                implementation_date: *implementation_date,
                window,
                outcome: (*outcome).into(),
                se_kind: match se {
                    SeArg::Hc1 => SeKind::Hc1,
                    SeArg::Cluster => SeKind::ClusterItem,
                },
            };
            let est = did_estimate(&p, &spec)?;
            bundle.write_json("did.json", &est)?;
            bundle.write_csv("did.csv", |w| {
                estimate_row(
                    w,
                    &["outcome", "theta", "se", "ci_low", "ci_high", "p_value", "phi", "n_obs", "n_treated", "n_control"],
                    &[
                        est.spec.outcome.to_string(),
                        est.theta.to_string(),
                        est.se.to_string(),
                        est.ci_low.to_string(),
                        est.ci_high.to_string(),
                        est.p_value.to_string(),
                        est.phi.to_string(),
                        est.n_obs.to_string(),
                        est.n_treated.to_string(),
                        est.n_control.to_string(),
                    ],
                )
            })?;
            let plot = did_plot_data(&p, &spec)?;
            let weekly: Vec<WeeklyGroupMean> = plot.iter().map(|pt| pt.means.clone()).collect();
            let cf: Vec<Option<f64>> = plot.iter().map(|pt| pt.counterfactual).collect();
            write_weekly_csv(&mut bundle, "did_weekly.csv", &weekly, Some(&cf))?;
            let chart = Chart {
                title: format!("Difference-in-differences: log {}", spec.outcome),
                x_label: "week".into(),
                y_label: format!("mean log {}", spec.outcome),
                date_axis: true,
                series: vec![
                    group_series("treated", &weekly, true),
                    group_series("control", &weekly, false),
                    Series::new(
                        "counterfactual",
                        Style::Dashed,
                        plot.iter()
                            .filter_map(|pt| pt.counterfactual.map(|c| (date_x(pt.means.week_start), c))),
                    ),
                ],
                vlines: vec![date_x(*implementation_date)],
                ..Chart::default()
            };
            bundle.write("did.svg", chart.render())?;
            ctx.say(format!(
                "DiD theta = {:.6} (se {:.6}), {} treated, {} control",
                est.theta, est.se, est.n_treated, est.n_control
            ));
            ("did", serde_json::to_value(&spec).unwrap())
        }
        Design::Pretrends {
            panel,
            groups,
            intervention_date,
            window_start,
            window_end,
            outcome,
        } => {
            let p = load_panel(&mut bundle, &panel.panel)?;
            let window = DateWindow::new(*window_start, window_end.unwrap_or(day_before(*intervention_date)));
            let (treated, control) = resolve_groups(&p, groups, window, *intervention_date, &mut bundle)?;
            let spec = PretrendSpec {
                treated,
                control,
                window,
                intervention_date: *intervention_date,
                outcome: (*outcome).into(),
            };
            let res = pretrends_test(&p, &spec)?;
            bundle.write_json("pretrends.json", &res)?;
            bundle.write_csv("pretrends.csv", |w| {
                estimate_row(
                    w,
                    &["slope_treated", "slope_control", "difference", "se", "p_value", "n_obs"],
                    &[
                        res.slope_treated.to_string(),
                        res.slope_control.to_string(),
                        res.difference.to_string(),
                        res.se.to_string(),
                        res.p_value.to_string(),
                        res.n_obs.to_string(),
                    ],
                )
            })?;
            write_weekly_csv(&mut bundle, "pretrends_weekly.csv", &res.weekly, None)?;
            let chart = Chart {
                title: format!("Pre-period weekly means: log {}", spec.outcome),
                x_label: "week".into(),
                y_label: format!("mean log {}", spec.outcome),
                date_axis: true,
                series: vec![
                    group_series("treated", &res.weekly, true),
                    group_series("control", &res.weekly, false),
                ],
                ..Chart::default()
            };
            bundle.write("pretrends.svg", chart.render())?;
            ctx.say(format!("trend difference = {:.6} per week (p = {:.4})", res.difference, res.p_value));
            ("pretrends", serde_json::to_value(&spec).unwrap())
        }
        Design::Breaks {
            gp_official,
            gp_sellers,
            series,
            date,
            level,
        } => {
            let mode = date.map_or(BreakMode::Scan, BreakMode::Known);
            let mut summary = Vec::new();
            if let Some(path) = series {
                bundle.input(path)?;
                let s = read_series_csv(path)?;
                let id = path.file_stem().and_then(|x| x.to_str()).unwrap_or("series");
                let res = break_test(id, &s, mode, *level)?;
                write_break(&mut bundle, "breaks", &res)?;
                bundle.write("breaks.svg", series_chart("Series", &[(id, &s)], *date).render())?;
                summary.push(res);
            } else {
                if gp_official.is_none() && gp_sellers.is_none() {
                    return Err(CliError::config("MissingInput", "pass --gp-official, --gp-sellers or --series"));
                }
                for p in [gp_official, gp_sellers].into_iter().flatten() {
                    bundle.input(p)?;
                }
                let data = load_gp_prices(gp_official.as_deref(), gp_sellers.as_deref())?;
                bundle.write_json("gp_summary.json", &data.summary)?;
                let official = data.official_series();
                let illicit = data.illicit_series();
                let mut drawn: Vec<(&str, &[(NaiveDate, f64)])> = Vec::new();
                if gp_official.is_some() {
                    let res = break_test("official", &official, mode, *level)?;
                    write_break(&mut bundle, "breaks_official", &res)?;
                    summary.push(res);
                    drawn.push(("official", &official));
                }
                if gp_sellers.is_some() {
                    let res = break_test("illicit", &illicit, mode, *level)?;
                    write_break(&mut bundle, "breaks_illicit", &res)?;
                    summary.push(res);
                    drawn.push(("illicit mean", &illicit));
                }
                bundle.write("breaks.svg", series_chart("GP prices", &drawn, *date).render())?;
            }
            bundle.write_csv("breaks.csv", |w| {
                w.write_record(["series", "n", "mean_shift_p", "variance_ratio_p", "p_value", "break_detected"])?;
                for r in &summary {
                    w.write_record([
                        r.series_id.clone(),
                        r.n.to_string(),
                        r.mean_shift.p_value.to_string(),
                        r.variance_ratio.p_value.to_string(),
                        r.p_value.to_string(),
                        r.break_detected.to_string(),
                    ])?;
                }
                Ok(())
            })?;
            for r in &summary {
                ctx.say(format!("{}: p = {:.4}, break: {}", r.series_id, r.p_value, r.break_detected));
            }
            ("breaks", json!({ "mode": mode, "level": level }))
        }
    };
    bundle.finish(&format!("analyze {name}"), args, None, None)?;
    Ok(())
}
