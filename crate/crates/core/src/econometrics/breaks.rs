//! Structural-break tests for a single dated series.
//!
//! Known-date mode runs a Chow F test for a mean shift and a two-sided
//! variance-ratio F test at the given date. Scan mode runs both at every
//! candidate date in the interior 70% of the sample and takes the
//! smallest p-value of each, Bonferroni-adjusted by the number of
//! candidates. In both modes the two component tests are combined by
//! Bonferroni, so the overall p-value is `min(1, 2 * min(p_mean, p_var))`.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::EconometricsError;

pub const MIN_BREAK_SERIES: usize = 20;

/// Share of the sample trimmed from each end in scan mode.
const SCAN_TRIM: f64 = 0.15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "date")]
pub enum BreakMode {
    Known(NaiveDate),
    Scan,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakStatistic {
    pub statistic: f64,
    /// Adjusted for the scan in scan mode.
    pub p_value: f64,
    /// Candidate date where the statistic was attained.
    pub date: NaiveDate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakTestResult {
    pub series_id: String,
    pub mode: BreakMode,
    pub n: usize,
    pub candidates: usize,
    pub mean_shift: BreakStatistic,
    pub variance_ratio: BreakStatistic,
    pub p_value: f64,
    pub level: f64,
    pub break_detected: bool,
}

#[derive(Clone, Copy)]
struct Split {
    chow_f: f64,
    chow_p: f64,
    var_f: f64,
    var_p: f64,
}

/// Sum of squared deviations, with round-off-sized results (relative to
/// `scale`, the largest magnitude in the series) flushed to zero so that
/// a series constant up to summation order counts as constant.
fn sum_sq_dev(v: &[f64], scale: f64) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
    let floor = v.len() as f64 * (64.0 * f64::EPSILON * scale).powi(2);
    if ss <= floor { 0.0 } else { ss }
}

/// Tests a break between `values[..k]` and `values[k..]`. Both parts must
/// hold at least two points.
fn split_test(values: &[f64], k: usize) -> Split {
    let n = values.len();
    let (a, b) = values.split_at(k);
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ssr_r = sum_sq_dev(values, scale);
    let ssr_a = sum_sq_dev(a, scale);
    let ssr_b = sum_sq_dev(b, scale);
    let ssr_u = ssr_a + ssr_b;
    let dof = (n - 2) as f64;
    let (chow_f, chow_p) = if ssr_u > 0.0 {
        let f = ((ssr_r - ssr_u).max(0.0)) / (ssr_u / dof);
        (f, FisherSnedecor::new(1.0, dof).unwrap().sf(f))
    } else if ssr_r > 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        (0.0, 1.0)
    };
    let (d1, d2) = ((a.len() - 1) as f64, (b.len() - 1) as f64);
    let (var_f, var_p) = match (ssr_a > 0.0, ssr_b > 0.0) {
        (true, true) => {
            let f = (ssr_a / d1) / (ssr_b / d2);
            let dist = FisherSnedecor::new(d1, d2).unwrap();
            (f, (2.0 * dist.cdf(f).min(dist.sf(f))).min(1.0))
        }
        (false, false) => (1.0, 1.0),
        (true, false) => (f64::INFINITY, 0.0),
        (false, true) => (0.0, 0.0),
    };
    Split { chow_f, chow_p, var_f, var_p }
}

/// Runs the break test on `series` (sorted by date internally) and flags a
/// break when the combined p-value is below `level`.
pub fn break_test(
    series_id: &str,
    series: &[(NaiveDate, f64)],
    mode: BreakMode,
    level: f64,
) -> Result<BreakTestResult, EconometricsError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(EconometricsError::InvalidSpec(format!("level must lie in (0, 1), got {level}")));
    }
    let n = series.len();
    if n < MIN_BREAK_SERIES {
        return Err(EconometricsError::SeriesTooShort { found: n, needed: MIN_BREAK_SERIES });
    }
    if let Some((d, _)) = series.iter().find(|(_, v)| !v.is_finite()) {
        return Err(EconometricsError::InvalidSpec(format!("non-finite value on {d}")));
    }
    let mut sorted = series.to_vec();
    sorted.sort_by_key(|p| p.0);
    let dates: Vec<NaiveDate> = sorted.iter().map(|p| p.0).collect();
    let values: Vec<f64> = sorted.iter().map(|p| p.1).collect();

    let candidates: Vec<usize> = match mode {
        BreakMode::Known(date) => {
            let k = dates.partition_point(|d| *d < date);
            if k < 2 || n - k < 2 {
                return Err(EconometricsError::DateOutOfRange {
                    date,
                    first: dates[2],
                    last: dates[n - 2],
                });
            }
            vec![k]
        }
        BreakMode::Scan => {
            let lo = ((n as f64 * SCAN_TRIM).ceil() as usize).max(2);
            let hi = ((n as f64 * (1.0 - SCAN_TRIM)).floor() as usize).min(n - 2);
            (lo..=hi).collect()
        }
    };
    let m = candidates.len() as f64;
    let mut mean_best: Option<(usize, Split)> = None;
    let mut var_best: Option<(usize, Split)> = None;
    for &k in &candidates {
        let s = split_test(&values, k);
        if mean_best.as_ref().is_none_or(|(_, b)| s.chow_p < b.chow_p) {
            mean_best = Some((k, s));
        }
        if var_best.as_ref().is_none_or(|(_, b)| s.var_p < b.var_p) {
            var_best = Some((k, s));
        }
    }
    let (mk, ms) = mean_best.expect("at least one candidate");
    let (vk, vs) = var_best.expect("at least one candidate");
    let mean_shift = BreakStatistic {
        statistic: ms.chow_f,
        p_value: (m * ms.chow_p).min(1.0),
        date: dates[mk],
    };
    let variance_ratio = BreakStatistic {
        statistic: vs.var_f,
        p_value: (m * vs.var_p).min(1.0),
        date: dates[vk],
    };
    let p_value = (2.0 * mean_shift.p_value.min(variance_ratio.p_value)).min(1.0);
    Ok(BreakTestResult {
        series_id: series_id.to_string(),
        mode,
        n,
        candidates: candidates.len(),
        mean_shift,
        variance_ratio,
        p_value,
        level,
        break_detected: p_value < level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Days;

    fn dated(values: &[f64]) -> Vec<(NaiveDate, f64)> {
        let start = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        values
            .iter()
            .enumerate()
            .map(|(i, v)| (start + Days::new(i as u64), *v))
            .collect()
    }

    #[test]
    fn too_short_and_out_of_range() {
        let s = dated(&[1.0; 10]);
        assert!(matches!(
            break_test("x", &s, BreakMode::Scan, 0.05),
            Err(EconometricsError::SeriesTooShort { found: 10, .. })
        ));
        let s = dated(&(0..30).map(|i| i as f64).collect::<Vec<_>>());
        let early = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        assert!(matches!(
            break_test("x", &s, BreakMode::Known(early), 0.05),
            Err(EconometricsError::DateOutOfRange { .. })
        ));
    }

    #[test]
    fn chow_matches_two_sample_t_squared() {
        // With a single split, Chow F equals the pooled two-sample t squared.
        let v: Vec<f64> = (0..24).map(|i| ((i * 37 % 11) as f64) + if i >= 12 { 2.0 } else { 0.0 }).collect();
        let s = dated(&v);
        let r = break_test("x", &s, BreakMode::Known(s[12].0), 0.05).unwrap();
        let (a, b) = v.split_at(12);
        let ma = a.iter().sum::<f64>() / 12.0;
        let mb = b.iter().sum::<f64>() / 12.0;
        let sp = (sum_sq_dev(a, 0.0) + sum_sq_dev(b, 0.0)) / 22.0;
        let t = (mb - ma) / (sp * (1.0 / 12.0 + 1.0 / 12.0)).sqrt();
        assert!((r.mean_shift.statistic - t * t).abs() < 1e-9);
    }

    #[test]
    fn constant_series_has_no_break() {
        let s = dated(&[3.0; 25]);
        let r = break_test("flat", &s, BreakMode::Scan, 0.05).unwrap();
        assert!(!r.break_detected);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn round_off_is_not_a_break() {
        // Means of the same quotes summed in different orders.
        let quotes = [0.45, 0.47, 0.48, 0.49, 0.5, 0.51, 0.565];
        let v: Vec<f64> = (0..40)
            .map(|k| {
                let mut q = quotes;
                q.rotate_left(k % 7);
                q.iter().sum::<f64>() / 7.0
            })
            .collect();
        let r = break_test("rotated", &dated(&v), BreakMode::Scan, 0.05).unwrap();
        assert!(!r.break_detected, "p {}", r.p_value);
    }
}
