mod common;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, Days, NaiveDate};
use gelab::econometrics::*;
use gelab::panel::{DateWindow, ItemId, Panel, PanelMetadata, PanelObservation};
use gelab::simkit::{
    synth_panel, DivergentTrend, InjectedEffect, PriceProcess, ScenarioConfig, VolumeProcess,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use common::oracles::{brute_force_controls, dense_local_poly, pearson};

fn d(y: i32, m: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, day).unwrap()
}

fn z(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn panel_of(obs: Vec<PanelObservation>) -> Panel {
    Panel::new(obs, PanelMetadata::default()).unwrap()
}

fn map_panel(panel: &Panel, f: impl Fn(&PanelObservation) -> PanelObservation) -> Panel {
    Panel::new(panel.observations().iter().map(f).collect(), panel.metadata.clone()).unwrap()
}

// ---------------------------------------------------------------- local poly

#[test]
fn local_poly_matches_dense_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let kernels = [Kernel::Triangular, Kernel::Epanechnikov, Kernel::Uniform];
    let sides = [FitSide::Left, FitSide::Right, FitSide::Both];
    let mut worst: f64 = 0.0;
    for fit_no in 0..1000 {
        let order = 1 + fit_no % 3;
        let kernel = kernels[fit_no % 3];
        let side = sides[(fit_no / 3) % 3];
        let c = rng.random_range(-50.0..500.0);
        let h = rng.random_range(0.5..50.0);
        let n = rng.random_range(40..200);
        // Coefficients in standardised units are kept away from zero so
        // that a relative comparison is meaningful.
        let beta: Vec<f64> = (0..=order)
            .map(|_| rng.random_range(0.5..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.random_range(-1.2..1.2);
            let y = beta.iter().enumerate().map(|(j, b)| b * u.powi(j as i32)).sum::<f64>() + 0.05 * z(&mut rng);
            xs.push(c + u * h);
            ys.push(y);
        }
        let points: Vec<WeightedPoint> = xs.iter().zip(&ys).map(|(&x, &y)| WeightedPoint::new(x, y)).collect();
        let fit = local_poly_fit(&points, c, h, order, kernel, side).unwrap();
        let oracle = dense_local_poly(&xs, &ys, c, h, order, kernel, side).unwrap();
        for (a, b) in fit.coefficients.iter().zip(&oracle) {
            let rel = (a - b).abs() / b.abs();
            worst = worst.max(rel);
            assert!(rel <= 1e-8, "fit {fit_no}: {a} vs {b}");
        }
    }
    eprintln!("worst relative difference {worst:e}");
}

#[test]
fn local_linear_bias_shrinks_with_bandwidth() {
    // Quadratic truth, order-1 fit at the boundary: the intercept error
    // is O(h^2) and matches the dense solve at every bandwidth.
    let xs: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.01).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 1.0 + 0.5 * x + 0.3 * x * x).collect();
    let points: Vec<WeightedPoint> = xs.iter().zip(&ys).map(|(&x, &y)| WeightedPoint::new(x, y)).collect();
    let mut last = f64::INFINITY;
    for h in [8.0, 4.0, 2.0, 1.0, 0.5] {
        let fit = local_poly_fit(&points, 0.0, h, 1, Kernel::Triangular, FitSide::Right).unwrap();
        let oracle = dense_local_poly(&xs, &ys, 0.0, h, 1, Kernel::Triangular, FitSide::Right).unwrap();
        assert!((fit.intercept() - oracle[0]).abs() <= 1e-10 * oracle[0].abs());
        let err = (fit.intercept() - 1.0).abs();
        assert!(err < last, "h={h}: {err} !< {last}");
        last = err;
    }
    assert!(last < 0.01);
}

// ---------------------------------------------------------------- index

fn two_item_fixture() -> Panel {
    let w0 = d(2021, 12, 8);
    let w1 = d(2021, 12, 15);
    let o = |item, date, price, volume| PanelObservation {
        item_id: ItemId(item),
        date,
        price,
        volume,
    };
    panel_of(vec![
        o(1, w0, 100.0, 10.0),
        o(2, w0, 200.0, 10.0),
        o(1, w1, 110.0, 10.0),
        o(2, w1, 220.0, 10.0),
    ])
}

#[test]
fn index_hand_fixture() {
    let group: BTreeSet<ItemId> = [ItemId(1), ItemId(2)].into();
    let s = price_index(&two_item_fixture(), &group, d(2021, 12, 8)).unwrap();
    assert_eq!(s.at_week(0).unwrap().index, 100.0);
    // (110*10 + 220*10) / 20 = 165 against 150 in the base week.
    assert!((s.at_week(1).unwrap().index - 110.0).abs() < 1e-12);
}

#[test]
fn index_invariant_to_price_and_volume_scale() {
    let cfg = ar1_config(30, 70, 5);
    let panel = synth_panel(&cfg).unwrap();
    let group: BTreeSet<ItemId> = (1..=30).map(ItemId).collect();
    let base = d(2021, 10, 22);
    let reference = price_index(&panel, &group, base).unwrap();
    for (pc, vc) in [(3.0, 1.0), (1.0, 7.5), (0.01, 1e-3)] {
        let scaled = map_panel(&panel, |o| PanelObservation {
            price: o.price * pc,
            volume: o.volume * vc,
            ..*o
        });
        let s = price_index(&scaled, &group, base).unwrap();
        for (a, b) in s.points.iter().zip(&reference.points) {
            assert!((a.index - b.index).abs() <= 1e-12 * b.index, "{} vs {}", a.index, b.index);
        }
    }
}

#[test]
fn flat_panel_index_is_100() {
    let obs = (0..28)
        .flat_map(|t| {
            (1..=3).map(move |i| PanelObservation {
                item_id: ItemId(i),
                date: d(2021, 11, 1) + Days::new(t),
                price: 50.0 * i as f64,
                volume: 4.0,
            })
        })
        .collect();
    let group: BTreeSet<ItemId> = (1..=3).map(ItemId).collect();
    let s = price_index(&panel_of(obs), &group, d(2021, 11, 8)).unwrap();
    assert!(s.points.iter().all(|p| (p.index - 100.0).abs() < 1e-12));
}

// ---------------------------------------------------------------- correlation

fn series_panel(series: &BTreeMap<u32, Vec<f64>>, start: NaiveDate) -> Panel {
    panel_of(
        series
            .iter()
            .flat_map(|(&item, v)| {
                v.iter().enumerate().map(move |(t, &p)| PanelObservation {
                    item_id: ItemId(item),
                    date: start + Days::new(t as u64),
                    price: p,
                    volume: 1.0,
                })
            })
            .collect(),
    )
}

#[test]
fn ar1_factor_correlation_matches_analytic_value() {
    // x = a f + e1, y = b f + e2, f AR(1) with persistence phi and unit
    // innovations, e1/e2 white noise with sd s1/s2.
    let (phi, a, b, s1, s2) = (0.8f64, 1.0, 0.6, 1.5, 1.0);
    let var_f = 1.0 / (1.0 - phi * phi);
    let rho = a * b * var_f / ((a * a * var_f + s1 * s1) * (b * b * var_f + s2 * s2)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut f = z(&mut rng) * var_f.sqrt();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for _ in 0..10_000 {
        f = phi * f + z(&mut rng);
        x.push(1_000.0 + 10.0 * (a * f + s1 * z(&mut rng)));
        y.push(5_000.0 + 30.0 * (b * f + s2 * z(&mut rng)));
    }
    let panel = series_panel(&BTreeMap::from([(1, x), (2, y)]), d(1995, 1, 1));
    let est = price_correlation(&panel, ItemId(1), ItemId(2), None).unwrap();
    assert!((est - rho).abs() < 0.05, "{est} vs {rho}");
    assert_eq!(est, price_correlation(&panel, ItemId(2), ItemId(1), None).unwrap());
    assert_eq!(price_correlation(&panel, ItemId(1), ItemId(1), None).unwrap(), 1.0);
}

#[test]
fn negated_series_correlates_at_minus_one() {
    let x: Vec<f64> = (0..50).map(|t| 100.0 + (t as f64 * 0.7).sin() * 10.0).collect();
    let y: Vec<f64> = x.iter().map(|v| 300.0 - v).collect();
    let panel = series_panel(&BTreeMap::from([(1, x), (2, y)]), d(2021, 1, 1));
    assert!((price_correlation(&panel, ItemId(1), ItemId(2), None).unwrap() + 1.0).abs() < 1e-12);
}

/// Twenty items: three sinked, loadings on two factors that range from
/// none to heavy, plus two items priced under the floor.
fn planted_universe(seed: u64) -> Panel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let days = 400;
    let f1: Vec<f64> = (0..days).map(|_| z(&mut rng)).collect();
    let f2: Vec<f64> = (0..days).map(|_| z(&mut rng)).collect();
    let mut series = BTreeMap::new();
    for item in 1..=20u32 {
        let (l1, l2) = match item {
            1 => (1.0, 0.0),
            2 => (0.0, 1.0),
            3 => (0.7, 0.7),
            4..=8 => (0.0, 0.0),
            9..=12 => (0.05 * (item - 8) as f64, 0.0),
            13..=16 => (0.0, 0.15 * (item - 12) as f64),
            _ => (rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)),
        };
        let level = if item == 19 || item == 20 { 5e4 } else { 2e6 };
        let v = (0..days)
            .map(|t| level * (0.05 * (l1 * f1[t] + l2 * f2[t] + 0.5 * z(&mut rng))).exp())
            .collect();
        series.insert(item, v);
    }
    series_panel(&series, d(2021, 6, 1))
}

#[test]
fn control_set_matches_brute_force() {
    let sinked: BTreeSet<ItemId> = [ItemId(1), ItemId(2), ItemId(3)].into();
    let mut nonempty = 0;
    for seed in 0..25 {
        let panel = planted_universe(seed);
        let mut cfg = ControlSetConfig::new(sinked.clone());
        cfg.price_floor = 1e5;
        let want = brute_force_controls(&panel, &sinked, 1e5, 0.1);
        let got = match build_control_set(&panel, &cfg) {
            Err(EconometricsError::EmptyControlSet { .. }) if want.is_empty() => continue,
            other => other.unwrap(),
        };
        nonempty += 1;
        assert_eq!(got.items, want, "seed {seed}");
        assert_eq!(got.universe_size, 18);
        assert!(got.items.is_disjoint(&sinked));
        for e in &got.excluded {
            if let ExclusionReason::Correlated { with, rho } = e.reason {
                let ours = pearson(&price_map(&panel, e.item), &price_map(&panel, with)).unwrap();
                assert!((ours - rho).abs() < 1e-12);
            }
        }
    }
    assert!(nonempty >= 20);
}

fn price_map(panel: &Panel, item: ItemId) -> BTreeMap<NaiveDate, f64> {
    panel.item_series(item).iter().map(|o| (o.date, o.price)).collect()
}

// ---------------------------------------------------------------- RD / RK

fn rd_config(seed: u64, step: f64, noise: f64) -> ScenarioConfig {
    let mut cfg = ar1_config(60, 40, seed);
    cfg.prices = PriceProcess::Uniform { low: 70.0, high: 130.0 };
    cfg.volume = VolumeProcess {
        intercept: 5.0,
        price_slope: -0.001,
        noise_sd: noise,
        ..Default::default()
    };
    cfg.effects = vec![InjectedEffect::rd_step(step, 100.0, cfg.start_date)];
    cfg
}

#[test]
fn rd_invariances() {
    let panel = synth_panel(&rd_config(4, -0.069, 0.3)).unwrap();
    let spec = RdSpec::default();
    let base = rd_estimate(&panel, &spec).unwrap();

    // Adding a constant to log-volume.
    let scaled = map_panel(&panel, |o| PanelObservation {
        volume: o.volume * 3.7,
        ..*o
    });
    let est = rd_estimate(&scaled, &spec).unwrap();
    assert!((est.beta - base.beta).abs() < 1e-10);
    assert!((est.se - base.se).abs() < 1e-10);

    // Shifting running variable and cutoff together.
    let shifted = map_panel(&panel, |o| PanelObservation {
        price: o.price + 250.0,
        ..*o
    });
    let est = rd_estimate(&shifted, &RdSpec { cutoff: 350.0, ..spec.clone() }).unwrap();
    assert!((est.beta - base.beta).abs() < 1e-9, "{} vs {}", est.beta, base.beta);
    assert_eq!((est.n_left, est.n_right), (base.n_left, base.n_right));

    // Purity.
    assert_eq!(rd_estimate(&panel, &spec).unwrap(), base);
}

#[test]
fn rd_zero_volume_days_are_dropped_and_counted() {
    let panel = synth_panel(&rd_config(5, 0.0, 0.2)).unwrap();
    let holed = map_panel(&panel, |o| {
        let zero = (o.date.ordinal() + o.item_id.0) % 11 == 0 && (o.price - 100.0).abs() < 20.0;
        PanelObservation {
            volume: if zero { 0.0 } else { o.volume },
            ..*o
        }
    });
    let expected = holed
        .observations()
        .iter()
        .filter(|o| o.volume == 0.0)
        .count();
    let est = rd_estimate(&holed, &RdSpec::default()).unwrap();
    assert_eq!(est.dropped_zero_volume, expected);
    assert!(expected > 0);
}

#[test]
fn rk_without_kink_is_zero() {
    let mut cfg = ar1_config(40, 50, 8);
    cfg.prices = PriceProcess::Uniform { low: 1e8, high: 9e8 };
    cfg.volume = VolumeProcess {
        intercept: 4.0,
        price_slope: -2e-9,
        ..Default::default()
    };
    let panel = synth_panel(&cfg).unwrap();
    let est = rk_estimate(&panel, &RkSpec { tax_scale: 5e6, ..RkSpec::default() }).unwrap();
    assert!(est.delta.abs() < 1e-8, "{}", est.delta);
    assert!((est.slope_below + 2e-9).abs() < 1e-15);
}

// ---------------------------------------------------------------- DiD

fn ar1_config(n_items: usize, n_days: usize, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        seed,
        n_items,
        n_agents: 10,
        n_days,
        start_date: d(2021, 10, 1),
        prices: PriceProcess::Ar1 {
            base_log_price: 15.0,
            item_dispersion: 1.0,
            persistence: 0.5,
            volatility: 0.05,
            drift: 0.0,
        },
        volume: VolumeProcess {
            intercept: 3.0,
            item_sd: 0.5,
            day_sd: 0.1,
            noise_sd: 0.3,
            ..Default::default()
        },
        agents: Default::default(),
        interventions: Default::default(),
        effects: vec![],
        trends: vec![],
    }
}

fn did_setup(seed: u64, theta: f64, outcome: Outcome) -> (Panel, DidSpec) {
    let mut cfg = ar1_config(30, 60, seed);
    let treated: Vec<ItemId> = (1..=12).map(ItemId).collect();
    let when = d(2021, 11, 1);
    cfg.effects = vec![InjectedEffect::did_level(theta, treated.clone(), when, outcome)];
    let spec = DidSpec {
        treated: treated.into_iter().collect(),
        control: (13..=30).map(ItemId).collect(),
        implementation_date: when,
        window: DateWindow::new(cfg.start_date, cfg.end_date()),
        outcome,
        se_kind: SeKind::Hc1,
    };
    (synth_panel(&cfg).unwrap(), spec)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-300)
}

#[test]
fn did_within_equals_dummy_regression() {
    for (seed, outcome) in [(1, Outcome::Price), (2, Outcome::Volume), (3, Outcome::Price)] {
        let (panel, mut spec) = did_setup(seed, 0.07, outcome);
        for se_kind in [SeKind::Hc1, SeKind::ClusterItem] {
            spec.se_kind = se_kind;
            let a = did_estimate(&panel, &spec).unwrap();
            let b = did_estimate_dummies(&panel, &spec).unwrap();
            assert!(close(a.theta, b.theta, 1e-8), "{} vs {}", a.theta, b.theta);
            assert!(close(a.phi, b.phi, 1e-8));
            assert!(close(a.se, b.se, 1e-8), "{se_kind:?}: {} vs {}", a.se, b.se);
            assert!(close(a.phi_se, b.phi_se, 1e-8));
            assert_eq!(a.n_obs, b.n_obs);
        }
    }
}

#[test]
fn did_invariant_to_item_and_post_constants() {
    let (panel, spec) = did_setup(9, 0.07, Outcome::Price);
    let base = did_estimate(&panel, &spec).unwrap();
    let when = spec.implementation_date;
    let shifted = map_panel(&panel, |o| PanelObservation {
        price: o.price * (0.3 * o.item_id.0 as f64).exp() * if o.date >= when { 1.25 } else { 1.0 },
        ..*o
    });
    let est = did_estimate(&shifted, &spec).unwrap();
    assert!((est.theta - base.theta).abs() < 1e-10);
    assert!((est.se - base.se).abs() < 1e-10);
    assert!((est.phi - base.phi - 1.25f64.ln()).abs() < 1e-10);
}

#[test]
fn did_plot_counterfactual_tracks_control() {
    let (panel, spec) = did_setup(4, 0.07, Outcome::Price);
    let plot = did_plot_data(&panel, &spec).unwrap();
    let pre: Vec<&DidPlotPoint> = plot.iter().filter(|p| p.means.week < 0).collect();
    let gap = pre
        .iter()
        .map(|p| p.means.treated_mean.unwrap() - p.means.control_mean.unwrap())
        .sum::<f64>()
        / pre.len() as f64;
    for p in &plot {
        let cf = p.counterfactual.unwrap();
        assert!((cf - p.means.control_mean.unwrap() - gap).abs() < 1e-12);
    }
}

// ---------------------------------------------------------------- pre-trends

fn pretrend_setup(seed: u64, divergence: f64) -> (Panel, PretrendSpec) {
    let mut cfg = ar1_config(240, 56, seed);
    if let PriceProcess::Ar1 { persistence, volatility, .. } = &mut cfg.prices {
        *persistence = 0.0;
        *volatility = 0.05;
    }
    let treated: Vec<ItemId> = (1..=120).map(ItemId).collect();
    if divergence != 0.0 {
        cfg.trends.push(DivergentTrend {
            items: treated.clone(),
            per_week: divergence,
            outcome: Outcome::Price,
        });
    }
    let spec = PretrendSpec {
        treated: treated.into_iter().collect(),
        control: (121..=240).map(ItemId).collect(),
        window: DateWindow::new(cfg.start_date, cfg.end_date()),
        intervention_date: cfg.end_date() + Days::new(1),
        outcome: Outcome::Price,
    };
    (synth_panel(&cfg).unwrap(), spec)
}

#[test]
fn identical_groups_have_no_trend_difference() {
    let (panel, _) = pretrend_setup(1, 0.0);
    // Control items are copies of the treated ones under new ids.
    let mut obs: Vec<PanelObservation> = panel.observations().iter().filter(|o| o.item_id.0 <= 20).copied().collect();
    let copies: Vec<PanelObservation> = obs
        .iter()
        .map(|o| PanelObservation {
            item_id: ItemId(o.item_id.0 + 1000),
            ..*o
        })
        .collect();
    obs.extend(copies);
    let spec = PretrendSpec {
        treated: (1..=20).map(ItemId).collect(),
        control: (1001..=1020).map(ItemId).collect(),
        window: DateWindow::new(d(2021, 10, 1), d(2021, 11, 25)),
        intervention_date: d(2021, 11, 26),
        outcome: Outcome::Price,
    };
    let r = pretrends_test(&panel_of(obs), &spec).unwrap();
    assert!(r.difference.abs() < 1e-12);
}

#[test]
fn pretrends_power_and_size() {
    let reps = 100;
    let rejections = |divergence: f64| {
        (0..reps)
            .filter(|&s| {
                let (panel, spec) = pretrend_setup(1_000 + s, divergence);
                pretrends_test(&panel, &spec).unwrap().p_value < 0.05
            })
            .count() as f64
            / reps as f64
    };
    let power = rejections(0.01);
    let size = rejections(0.0);
    eprintln!("pre-trend power {power}, size {size}");
    assert!(power >= 0.9, "power {power}");
    assert!(size <= 0.10, "size {size}");
}

// ---------------------------------------------------------------- breaks

fn dated(values: &[f64]) -> Vec<(NaiveDate, f64)> {
    values
        .iter()
        .enumerate()
        .map(|(t, &v)| (d(2021, 9, 1) + Days::new(t as u64), v))
        .collect()
}

#[test]
fn planted_shift_is_detected() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for mode in [BreakMode::Known(d(2021, 9, 1) + Days::new(60)), BreakMode::Scan] {
        let values: Vec<f64> = (0..120)
            .map(|t| 4.0 + z(&mut rng) * 0.1 + if t >= 60 { 0.5 } else { 0.0 })
            .collect();
        let r = break_test("planted", &dated(&values), mode, 0.05).unwrap();
        assert!(r.p_value < 0.01, "{mode:?}: p {}", r.p_value);
        assert!(r.break_detected);
        if mode == BreakMode::Scan {
            let found = (r.mean_shift.date - d(2021, 9, 1)).num_days();
            assert!((58..=62).contains(&found), "break located at day {found}");
        }
    }
}

#[test]
fn iid_null_rejection_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let reps = 500;
    let mut rejected = [0usize; 2];
    for _ in 0..reps {
        let values: Vec<f64> = (0..100).map(|_| z(&mut rng)).collect();
        let series = dated(&values);
        for (k, mode) in [BreakMode::Known(d(2021, 9, 1) + Days::new(50)), BreakMode::Scan].into_iter().enumerate() {
            if break_test("null", &series, mode, 0.05).unwrap().break_detected {
                rejected[k] += 1;
            }
        }
    }
    let rates = rejected.map(|r| r as f64 / reps as f64);
    eprintln!("null rejection: known {} scan {}", rates[0], rates[1]);
    assert!(rates[0] <= 0.07 && rates[1] <= 0.07, "{rates:?}");
}

#[test]
fn gp_fixture_has_no_break() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let data = gelab::ingest::load_gp_prices(Some(&dir.join("gp_official.csv")), Some(&dir.join("gp_sellers.csv"))).unwrap();
    let tax_date = d(2021, 12, 9);
    for (id, series) in [("official", data.official_series()), ("illicit", data.illicit_series())] {
        for mode in [BreakMode::Known(tax_date), BreakMode::Scan] {
            let r = break_test(id, &series, mode, 0.05).unwrap();
            assert!(!r.break_detected, "{id} {mode:?}: p {}", r.p_value);
        }
    }
}
