use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::did::outcome_value;
use super::index::{week_of, week_start};
use super::linalg::wls;
use super::{two_sided_p, EconometricsError, Outcome};
use crate::panel::{DateWindow, ItemId, Panel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeeklyGroupMean {
    /// Weeks relative to the anchor date; negative before it.
    pub week: i64,
    pub week_start: NaiveDate,
    pub treated_mean: Option<f64>,
    pub treated_se: Option<f64>,
    pub n_treated: usize,
    pub control_mean: Option<f64>,
    pub control_se: Option<f64>,
    pub n_control: usize,
}

fn mean_se(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let se = (v.len() > 1).then(|| {
        let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    });
    (Some(m), se)
}

/// Mean log outcome per group in 7-day bins anchored at `anchor`, over
/// item-days inside `window` with a positive outcome.
pub fn weekly_group_means(
    panel: &Panel,
    treated: &BTreeSet<ItemId>,
    control: &BTreeSet<ItemId>,
    window: DateWindow,
    outcome: Outcome,
    anchor: NaiveDate,
) -> Result<Vec<WeeklyGroupMean>, EconometricsError> {
    if let Some(i) = treated.intersection(control).next() {
        return Err(EconometricsError::GroupsOverlap(*i));
    }
    let mut bins: BTreeMap<i64, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (group, is_treated) in [(treated, true), (control, false)] {
        for &item in group {
            for obs in panel.item_series(item).iter().filter(|o| window.contains(o.date)) {
                let v = outcome_value(obs, outcome);
                if v > 0.0 {
                    let e = bins.entry(week_of(obs.date, anchor)).or_default();
                    if is_treated { &mut e.0 } else { &mut e.1 }.push(v.ln());
                }
            }
        }
    }
    if bins.is_empty() {
        return Err(EconometricsError::EmptyGroup);
    }
    Ok(bins
        .into_iter()
        .map(|(week, (t, c))| {
            let (treated_mean, treated_se) = mean_se(&t);
            let (control_mean, control_se) = mean_se(&c);
            WeeklyGroupMean {
                week,
                week_start: week_start(week, anchor),
                treated_mean,
                treated_se,
                n_treated: t.len(),
                control_mean,
                control_se,
                n_control: c.len(),
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrendSpec {
    pub treated: BTreeSet<ItemId>,
    pub control: BTreeSet<ItemId>,
    /// Pre-intervention window; must end before the intervention.
    pub window: DateWindow,
    pub intervention_date: NaiveDate,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrendResult {
    /// Per-week trend of the log outcome in each group.
    pub slope_control: f64,
    pub slope_treated: f64,
    /// `slope_treated - slope_control`.
    pub difference: f64,
    pub se: f64,
    pub p_value: f64,
    pub n_obs: usize,
    pub weekly: Vec<WeeklyGroupMean>,
    pub spec: PretrendSpec,
}

/// Fits `log Y_it = zeta_i + a * t + b * t * Treated_i` on the pre-window,
/// with `t` in weeks, and tests `b = 0` with an HC1 standard error.
pub fn pretrends_test(panel: &Panel, spec: &PretrendSpec) -> Result<PretrendResult, EconometricsError> {
    let w = spec.window;
    if w.end >= spec.intervention_date || w.start > w.end {
        return Err(EconometricsError::InvalidSpec(format!(
            "pre-window {}..={} must end before the intervention {}",
            w.start, w.end, spec.intervention_date
        )));
    }
    let weeks = week_of(w.end, w.start) + 1;
    if weeks < 3 {
        return Err(EconometricsError::WindowTooShort { weeks });
    }
    let weekly = weekly_group_means(
        panel,
        &spec.treated,
        &spec.control,
        w,
        spec.outcome,
        spec.intervention_date,
    )?;

    // (item, t, treated, y)
    let mut rows = Vec::new();
    for (group, tr) in [(&spec.treated, 1.0), (&spec.control, 0.0)] {
        for &item in group {
            for obs in panel.item_series(item).iter().filter(|o| w.contains(o.date)) {
                let v = outcome_value(obs, spec.outcome);
                if v > 0.0 {
                    let t = (obs.date - w.start).num_days() as f64 / 7.0;
                    rows.push((item, t, tr, v.ln()));
                }
            }
        }
    }
    for (name, tr) in [("treated", 1.0), ("control", 0.0)] {
        let found = rows.iter().filter(|r| r.2 == tr).map(|r| r.0).collect::<BTreeSet<_>>().len();
        if found == 0 {
            return Err(EconometricsError::TooFewItems { group: name, found, needed: 1 });
        }
    }
    let mut sums: BTreeMap<ItemId, (f64, f64, f64)> = BTreeMap::new();
    for r in &rows {
        let e = sums.entry(r.0).or_default();
        e.0 += r.1;
        e.1 += r.3;
        e.2 += 1.0;
    }
    let n = rows.len();
    let x = DMatrix::from_fn(n, 2, |i, j| {
        let (item, t, tr, _) = rows[i];
        let s = sums[&item];
        let td = t - s.0 / s.2;
        if j == 0 { td } else { td * tr }
    });
    let y = DVector::from_iterator(n, rows.iter().map(|r| r.3 - sums[&r.0].1 / sums[&r.0].2));
    let wts = DVector::from_element(n, 1.0);
    let fit = wls(&x, &y, &wts)?;
    let cov = fit.hc1(&x, &wts, sums.len());
    let difference = fit.coef[1];
    let se = cov[(1, 1)].sqrt();
    Ok(PretrendResult {
        slope_control: fit.coef[0],
        slope_treated: fit.coef[0] + fit.coef[1],
        difference,
        se,
        p_value: two_sided_p(difference, se),
        n_obs: n,
        weekly,
        spec: spec.clone(),
    })
}
