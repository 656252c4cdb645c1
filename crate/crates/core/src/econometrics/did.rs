//! Two-group difference-in-differences with item fixed effects:
//!
//! `log Y_it = zeta_i + phi * Post_t + theta * Post_t * Treated_i + e_it`.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linalg::wls;
use super::pretrends::{weekly_group_means, WeeklyGroupMean};
use super::{normal_ci, two_sided_p, EconometricsError, Outcome};
use crate::panel::{DateWindow, ItemId, Panel, PanelObservation};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeKind {
    #[default]
    Hc1,
    /// Cluster-robust (CR1) by item.
    ClusterItem,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DidSpec {
    pub treated: BTreeSet<ItemId>,
    pub control: BTreeSet<ItemId>,
    /// First post-period date.
    pub implementation_date: NaiveDate,
    pub window: DateWindow,
    pub outcome: Outcome,
    #[serde(default)]
    pub se_kind: SeKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DidEstimate {
    pub theta: f64,
    pub phi: f64,
    pub se: f64,
    pub phi_se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    /// Rows entering the regression.
    pub n_obs: usize,
    pub n_treated: usize,
    pub n_control: usize,
    /// Mean of the outcome in levels over the rows used.
    pub outcome_mean: f64,
    /// Rows in the window dropped for a non-positive outcome.
    pub dropped_nonpositive: usize,
    pub spec: DidSpec,
}

pub(crate) fn outcome_value(obs: &PanelObservation, outcome: Outcome) -> f64 {
    match outcome {
        Outcome::Price => obs.price,
        Outcome::Volume => obs.volume,
    }
}

struct Row {
    item: ItemId,
    post: f64,
    treated: f64,
    y: f64,
    level: f64,
}

fn collect_rows(panel: &Panel, spec: &DidSpec) -> Result<(Vec<Row>, usize), EconometricsError> {
    if let Some(i) = spec.treated.intersection(&spec.control).next() {
        return Err(EconometricsError::GroupsOverlap(*i));
    }
    let d = spec.implementation_date;
    if !spec.window.contains(d) || spec.window.start == d {
        return Err(EconometricsError::InvalidSpec(format!(
            "window {}..={} must contain the implementation date {d} with at least one pre-period day",
            spec.window.start, spec.window.end
        )));
    }
    let mut rows = Vec::new();
    let mut dropped = 0;
    for (group, treated) in [(&spec.treated, 1.0), (&spec.control, 0.0)] {
        for &item in group {
            for obs in panel.item_series(item).iter().filter(|o| spec.window.contains(o.date)) {
                let level = outcome_value(obs, spec.outcome);
                if level > 0.0 {
                    rows.push(Row {
                        item,
                        post: if obs.date >= d { 1.0 } else { 0.0 },
                        treated,
                        y: level.ln(),
                        level,
                    });
                } else {
                    dropped += 1;
                }
            }
        }
    }
    for (name, t) in [("treated", 1.0), ("control", 0.0)] {
        let found = rows
            .iter()
            .filter(|r| r.treated == t)
            .map(|r| r.item)
            .collect::<BTreeSet<_>>()
            .len();
        if found < 2 {
            return Err(EconometricsError::TooFewItems { group: name, found, needed: 2 });
        }
    }
    if !rows.iter().any(|r| r.post == 0.0) {
        return Err(EconometricsError::NoPrePeriod(d));
    }
    if !rows.iter().any(|r| r.post == 1.0) {
        return Err(EconometricsError::NoPostPeriod(d));
    }
    Ok((rows, dropped))
}

fn finish(
    rows: &[Row],
    dropped: usize,
    spec: &DidSpec,
    coef: (f64, f64),
    cov: &DMatrix<f64>,
    phi_idx: usize,
    theta_idx: usize,
) -> DidEstimate {
    let (phi, theta) = coef;
    let se = cov[(theta_idx, theta_idx)].sqrt();
    let (ci_low, ci_high) = normal_ci(theta, se);
    let count = |t: f64| {
        rows.iter()
            .filter(|r| r.treated == t)
            .map(|r| r.item)
            .collect::<BTreeSet<_>>()
            .len()
    };
    DidEstimate {
        theta,
        phi,
        se,
        phi_se: cov[(phi_idx, phi_idx)].sqrt(),
        ci_low,
        ci_high,
        p_value: two_sided_p(theta, se),
        n_obs: rows.len(),
        n_treated: count(1.0),
        n_control: count(0.0),
        outcome_mean: rows.iter().map(|r| r.level).sum::<f64>() / rows.len() as f64,
        dropped_nonpositive: dropped,
        spec: spec.clone(),
    }
}

fn group_labels(rows: &[Row]) -> Vec<u64> {
    rows.iter().map(|r| r.item.0 as u64).collect()
}

/// Within (item-demeaned) estimator. HC1 counts the absorbed item means
/// in its degrees-of-freedom correction; CR1 does not, since the fixed
/// effects are nested in the clusters.
pub fn did_estimate(panel: &Panel, spec: &DidSpec) -> Result<DidEstimate, EconometricsError> {
    let (rows, dropped) = collect_rows(panel, spec)?;
    let mut sums: BTreeMap<ItemId, (f64, f64, f64, f64)> = BTreeMap::new();
    for r in &rows {
        let e = sums.entry(r.item).or_default();
        e.0 += r.y;
        e.1 += r.post;
        e.2 += r.post * r.treated;
        e.3 += 1.0;
    }
    let n = rows.len();
    let x = DMatrix::from_fn(n, 2, |i, j| {
        let r = &rows[i];
        let s = sums[&r.item];
        match j {
            0 => r.post - s.1 / s.3,
            _ => r.post * r.treated - s.2 / s.3,
        }
    });
    let y = DVector::from_iterator(
        n,
        rows.iter().map(|r| {
            let s = sums[&r.item];
            r.y - s.0 / s.3
        }),
    );
    let w = DVector::from_element(n, 1.0);
    let fit = wls(&x, &y, &w)?;
    let cov = match spec.se_kind {
        SeKind::Hc1 => fit.hc1(&x, &w, sums.len()),
        SeKind::ClusterItem => fit.cr1(&x, &w, &group_labels(&rows), 0),
    };
    Ok(finish(&rows, dropped, spec, (fit.coef[0], fit.coef[1]), &cov, 0, 1))
}

/// Same model with one dummy column per item. Slower; kept as a check on
/// the within route.
pub fn did_estimate_dummies(panel: &Panel, spec: &DidSpec) -> Result<DidEstimate, EconometricsError> {
    let (rows, dropped) = collect_rows(panel, spec)?;
    let items: BTreeMap<ItemId, usize> = rows
        .iter()
        .map(|r| r.item)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(j, i)| (i, j))
        .collect();
    let m = items.len();
    let n = rows.len();
    let x = DMatrix::from_fn(n, m + 2, |i, j| {
        let r = &rows[i];
        if j < m {
            if items[&r.item] == j { 1.0 } else { 0.0 }
        } else if j == m {
            r.post
        } else {
            r.post * r.treated
        }
    });
    let y = DVector::from_iterator(n, rows.iter().map(|r| r.y));
    let w = DVector::from_element(n, 1.0);
    let fit = wls(&x, &y, &w)?;
    let cov = match spec.se_kind {
        SeKind::Hc1 => fit.hc1(&x, &w, 0),
        SeKind::ClusterItem => {
            // Match the within route: fixed effects do not enter the CR1 dof.
            let raw = fit.cr1(&x, &w, &group_labels(&rows), 0);
            let nf = n as f64;
            raw * ((nf - (m + 2) as f64) / (nf - 2.0))
        }
    };
    Ok(finish(&rows, dropped, spec, (fit.coef[m], fit.coef[m + 1]), &cov, m, m + 1))
}

/// Weekly log-outcome means for the counterfactual-trend chart. The
/// counterfactual shifts the control path by the pre-period gap between
/// the groups.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DidPlotPoint {
    #[serde(flatten)]
    pub means: WeeklyGroupMean,
    pub counterfactual: Option<f64>,
}

pub fn did_plot_data(panel: &Panel, spec: &DidSpec) -> Result<Vec<DidPlotPoint>, EconometricsError> {
    let weekly = weekly_group_means(
        panel,
        &spec.treated,
        &spec.control,
        spec.window,
        spec.outcome,
        spec.implementation_date,
    )?;
    let pre: Vec<&WeeklyGroupMean> = weekly
        .iter()
        .filter(|w| w.week < 0 && w.treated_mean.is_some() && w.control_mean.is_some())
        .collect();
    let gap = if pre.is_empty() {
        None
    } else {
        Some(
            pre.iter()
                .map(|w| w.treated_mean.unwrap() - w.control_mean.unwrap())
                .sum::<f64>()
                / pre.len() as f64,
        )
    };
    Ok(weekly
        .into_iter()
        .map(|means| {
            let counterfactual = match (gap, means.control_mean) {
                (Some(g), Some(c)) => Some(c + g),
                _ => None,
            };
            DidPlotPoint { means, counterfactual }
        })
        .collect())
}
