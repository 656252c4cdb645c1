use std::collections::{BTreeMap, BTreeSet};

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use super::EconometricsError;
use crate::panel::{ItemId, Panel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexPoint {
    /// Whole weeks from the base date; negative before it.
    pub week: i64,
    pub week_start: NaiveDate,
    /// Volume-weighted mean price over the group's item-days in the week.
    pub mean_price: f64,
    pub total_volume: f64,
    /// `100 * mean_price / mean_price(base week)`.
    pub index: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceIndexSeries {
    pub group: Vec<ItemId>,
    pub base_date: NaiveDate,
    pub points: Vec<IndexPoint>,
}

impl PriceIndexSeries {
    pub fn at_week(&self, week: i64) -> Option<&IndexPoint> {
        self.points.iter().find(|p| p.week == week)
    }
}

/// Week number of `date` in 7-day bins anchored at `base`.
pub fn week_of(date: NaiveDate, base: NaiveDate) -> i64 {
    (date - base).num_days().div_euclid(7)
}

pub fn week_start(week: i64, base: NaiveDate) -> NaiveDate {
    let days = week * 7;
    if days >= 0 {
        base + Days::new(days as u64)
    } else {
        base - Days::new(days.unsigned_abs())
    }
}

/// Base-100 volume-weighted price index for `group`, relative to the week
/// starting at `base_date`.
///
/// Weekly item prices are themselves volume-weighted over days, so the
/// group mean reduces to `sum(P * V) / sum(V)` over every item-day in the
/// week. Every week between the first and last observed week must carry
/// positive volume.
pub fn price_index(
    panel: &Panel,
    group: &BTreeSet<ItemId>,
    base_date: NaiveDate,
) -> Result<PriceIndexSeries, EconometricsError> {
    if group.is_empty() {
        return Err(EconometricsError::EmptyGroup);
    }
    let mut weeks: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
    for item in group {
        for obs in panel.item_series(*item) {
            let entry = weeks.entry(week_of(obs.date, base_date)).or_default();
            entry.0 += obs.price * obs.volume;
            entry.1 += obs.volume;
        }
    }
    let (Some(&first), Some(&last)) = (weeks.keys().next(), weeks.keys().next_back()) else {
        return Err(EconometricsError::EmptyGroup);
    };
    let first = first.min(0);
    let last = last.max(0);
    let mut means = Vec::new();
    for week in first..=last {
        match weeks.get(&week) {
            Some(&(value, volume)) if volume > 0.0 => means.push((week, value / volume, volume)),
            _ => {
                return Err(EconometricsError::ZeroVolumeWeek {
                    week,
                    week_start: week_start(week, base_date),
                })
            }
        }
    }
    let base_mean = means
        .iter()
        .find(|(w, _, _)| *w == 0)
        .map(|(_, m, _)| *m)
        .expect("base week is inside the checked range");
    let points = means
        .into_iter()
        .map(|(week, mean_price, total_volume)| IndexPoint {
            week,
            week_start: week_start(week, base_date),
            mean_price,
            total_volume,
            index: if week == 0 {
                100.0
            } else {
                100.0 * (mean_price / base_mean)
            },
        })
        .collect();
    Ok(PriceIndexSeries {
        group: group.iter().copied().collect(),
        base_date,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{PanelMetadata, PanelObservation};

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn obs(item: u32, date: NaiveDate, price: f64, volume: f64) -> PanelObservation {
        PanelObservation {
            item_id: ItemId(item),
            date,
            price,
            volume,
        }
    }

    fn two_item_fixture() -> Panel {
        let base = d(2021, 12, 8);
        let next = d(2021, 12, 15);
        Panel::new(
            vec![
                obs(1, base, 100.0, 10.0),
                obs(2, base, 200.0, 10.0),
                obs(1, next, 110.0, 10.0),
                obs(2, next, 220.0, 10.0),
            ],
            PanelMetadata::default(),
        )
        .unwrap()
    }

    #[test]
    fn hand_computed_fixture() {
        let group = [ItemId(1), ItemId(2)].into_iter().collect();
        let series = price_index(&two_item_fixture(), &group, d(2021, 12, 8)).unwrap();
        assert_eq!(series.at_week(0).unwrap().index, 100.0);
        assert_eq!(series.at_week(0).unwrap().mean_price, 150.0);
        assert!((series.at_week(1).unwrap().index - 110.0).abs() < 1e-12);
    }

    #[test]
    fn negative_weeks_bin_backwards() {
        let base = d(2021, 12, 8);
        assert_eq!(week_of(base, base), 0);
        assert_eq!(week_of(d(2021, 12, 14), base), 0);
        assert_eq!(week_of(d(2021, 12, 7), base), -1);
        assert_eq!(week_of(d(2021, 12, 1), base), -1);
        assert_eq!(week_of(d(2021, 11, 30), base), -2);
        assert_eq!(week_start(-1, base), d(2021, 12, 1));
    }

    #[test]
    fn gap_week_is_an_error() {
        let base = d(2021, 12, 8);
        let panel = Panel::new(
            vec![obs(1, base, 100.0, 1.0), obs(1, d(2021, 12, 22), 100.0, 1.0)],
            PanelMetadata::default(),
        )
        .unwrap();
        let group = [ItemId(1)].into_iter().collect();
        let err = price_index(&panel, &group, base).unwrap_err();
        assert!(matches!(err, EconometricsError::ZeroVolumeWeek { week: 1, .. }));
    }

    #[test]
    fn missing_group() {
        let panel = two_item_fixture();
        assert!(matches!(
            price_index(&panel, &BTreeSet::new(), d(2021, 12, 8)),
            Err(EconometricsError::EmptyGroup)
        ));
        let absent = [ItemId(9)].into_iter().collect();
        assert!(matches!(
            price_index(&panel, &absent, d(2021, 12, 8)),
            Err(EconometricsError::EmptyGroup)
        ));
    }
}
