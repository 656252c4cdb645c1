//! Sharp regression discontinuity at the tax threshold and regression kink
//! at the tax cap, both on log trading volume with the item-day sale price
//! as running variable.

use serde::{Deserialize, Serialize};

use super::local_poly::{local_poly_fit, FitSide, Kernel, LocalPolyFit, WeightedPoint};
use super::{normal_ci, two_sided_p, EconometricsError};
use crate::panel::{DateWindow, Panel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdSpec {
    pub cutoff: f64,
    pub bandwidth: f64,
    pub order: usize,
    pub kernel: Kernel,
    pub window: Option<DateWindow>,
}

impl Default for RdSpec {
    fn default() -> Self {
        RdSpec {
            cutoff: 100.0,
            bandwidth: 20.0,
            order: 1,
            kernel: Kernel::Triangular,
            window: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdEstimate {
    /// Jump in log-volume at the cutoff (right limit minus left limit).
    pub beta: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    pub n_left: usize,
    pub n_right: usize,
    /// Rows in range dropped because volume was zero.
    pub dropped_zero_volume: usize,
    pub left_fit: LocalPolyFit,
    pub right_fit: LocalPolyFit,
    pub spec: RdSpec,
}

/// `(price, log volume)` for rows in the date window with `lo <= price <= hi`.
pub fn running_points(panel: &Panel, window: Option<DateWindow>, lo: f64, hi: f64) -> (Vec<WeightedPoint>, usize) {
    let mut dropped = 0;
    let points = panel
        .observations()
        .iter()
        .filter(|o| window.is_none_or(|w| w.contains(o.date)))
        .filter(|o| o.price >= lo && o.price <= hi)
        .filter_map(|o| {
            if o.volume > 0.0 {
                Some(WeightedPoint::new(o.price, o.volume.ln()))
            } else {
                dropped += 1;
                None
            }
        })
        .collect();
    (points, dropped)
}

fn check_order(order: usize) -> Result<(), EconometricsError> {
    if order == 0 || order > 4 {
        return Err(EconometricsError::InvalidSpec(format!(
            "polynomial order must be between 1 and 4, got {order}"
        )));
    }
    Ok(())
}

pub fn rd_estimate(panel: &Panel, spec: &RdSpec) -> Result<RdEstimate, EconometricsError> {
    check_order(spec.order)?;
    if !(spec.bandwidth.is_finite() && spec.bandwidth > 0.0) {
        return Err(EconometricsError::InvalidSpec("bandwidth must be positive".into()));
    }
    let c = spec.cutoff;
    let h = spec.bandwidth;
    let (points, dropped) = running_points(panel, spec.window, c - h, c + h);
    let left = local_poly_fit(&points, c, h, spec.order, spec.kernel, FitSide::Left)?;
    let right = local_poly_fit(&points, c, h, spec.order, spec.kernel, FitSide::Right)?;
    let beta = right.intercept() - left.intercept();
    let se = (right.variance(0) + left.variance(0)).sqrt();
    let (ci_low, ci_high) = normal_ci(beta, se);
    Ok(RdEstimate {
        beta,
        se,
        ci_low,
        ci_high,
        p_value: two_sided_p(beta, se),
        n_left: left.n_effective,
        n_right: right.n_effective,
        dropped_zero_volume: dropped,
        left_fit: left,
        right_fit: right,
        spec: spec.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RkSpec {
    pub kink: f64,
    /// Only prices strictly above this enter; also sets the left bandwidth.
    pub lower_restriction: f64,
    /// Right edge of the fit; defaults to the mirror image of the lower restriction.
    pub upper_restriction: Option<f64>,
    pub order: usize,
    pub kernel: Kernel,
    pub window: Option<DateWindow>,
    /// Slope of tax in price below the kink (zero above).
    pub tax_rate: f64,
    /// GP per unit of the tax regressor; 1.0 measures tax in GP.
    pub tax_scale: f64,
}

impl Default for RkSpec {
    fn default() -> Self {
        RkSpec {
            kink: 5e8,
            lower_restriction: 1e8,
            upper_restriction: None,
            order: 1,
            kernel: Kernel::Triangular,
            window: None,
            tax_rate: 0.01,
            tax_scale: 1.0,
        }
    }
}

impl RkSpec {
    pub fn upper(&self) -> f64 {
        self.upper_restriction
            .unwrap_or(2.0 * self.kink - self.lower_restriction)
    }

    /// Drop in the slope of the tax regressor at the kink.
    pub fn first_stage_kink(&self) -> f64 {
        self.tax_rate / self.tax_scale
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RkEstimate {
    /// `(slope_below - slope_above) / first_stage_kink`.
    pub delta: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    pub slope_below: f64,
    pub slope_above: f64,
    pub n_left: usize,
    pub n_right: usize,
    pub dropped_zero_volume: usize,
    pub left_fit: LocalPolyFit,
    pub right_fit: LocalPolyFit,
    pub spec: RkSpec,
}

pub fn rk_estimate(panel: &Panel, spec: &RkSpec) -> Result<RkEstimate, EconometricsError> {
    check_order(spec.order)?;
    let k = spec.kink;
    let upper = spec.upper();
    if !(spec.lower_restriction < k && k < upper) {
        return Err(EconometricsError::InvalidSpec(format!(
            "need lower restriction < kink < upper ({} < {k} < {upper})",
            spec.lower_restriction
        )));
    }
    if !(spec.tax_rate > 0.0 && spec.tax_scale > 0.0) {
        return Err(EconometricsError::InvalidSpec("tax rate and scale must be positive".into()));
    }
    let (mut points, dropped) = running_points(panel, spec.window, spec.lower_restriction, upper);
    points.retain(|p| p.x > spec.lower_restriction);
    let left = local_poly_fit(&points, k, k - spec.lower_restriction, spec.order, spec.kernel, FitSide::Left)?;
    let right = local_poly_fit(&points, k, upper - k, spec.order, spec.kernel, FitSide::Right)?;
    let scale = spec.first_stage_kink();
    let slope_below = left.slope();
    let slope_above = right.slope();
    let delta = (slope_below - slope_above) / scale;
    let se = (left.variance(1) + right.variance(1)).sqrt() / scale;
    let (ci_low, ci_high) = normal_ci(delta, se);
    Ok(RkEstimate {
        delta,
        se,
        ci_low,
        ci_high,
        p_value: two_sided_p(delta, se),
        slope_below,
        slope_above,
        n_left: left.n_effective,
        n_right: right.n_effective,
        dropped_zero_volume: dropped,
        left_fit: left,
        right_fit: right,
        spec: spec.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub x_mid: f64,
    pub mean_y: f64,
    pub n: usize,
}

/// Binned scatter plus the two fitted curves, for discontinuity and kink plots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscontinuityPlot {
    pub threshold: f64,
    pub bins: Vec<Bin>,
    pub left_curve: Vec<(f64, f64)>,
    pub right_curve: Vec<(f64, f64)>,
}

/// Mean of `y` in `n_bins` equal-width bins on `[lo, threshold)` and on
/// `[threshold, hi]` each. Empty bins are skipped.
pub fn binned_means(points: &[WeightedPoint], threshold: f64, lo: f64, hi: f64, n_bins: usize) -> Vec<Bin> {
    let n_bins = n_bins.max(1);
    let mut out = Vec::new();
    for (a, b) in [(lo, threshold), (threshold, hi)] {
        let width = (b - a) / n_bins as f64;
        let mut sums = vec![(0.0, 0usize); n_bins];
        for p in points.iter().filter(|p| p.x >= a && (p.x < b || (b == hi && p.x <= b))) {
            let j = (((p.x - a) / width) as usize).min(n_bins - 1);
            sums[j].0 += p.y;
            sums[j].1 += 1;
        }
        for (j, (s, n)) in sums.into_iter().enumerate() {
            if n > 0 {
                out.push(Bin {
                    x_mid: a + (j as f64 + 0.5) * width,
                    mean_y: s / n as f64,
                    n,
                });
            }
        }
    }
    out
}

fn curve(fit: &LocalPolyFit, a: f64, b: f64, steps: usize) -> Vec<(f64, f64)> {
    (0..=steps)
        .map(|i| {
            let x = a + (b - a) * i as f64 / steps as f64;
            (x, fit.predict(x))
        })
        .collect()
}

pub fn rd_plot_data(panel: &Panel, est: &RdEstimate, n_bins: usize) -> DiscontinuityPlot {
    let s = &est.spec;
    let (lo, hi) = (s.cutoff - s.bandwidth, s.cutoff + s.bandwidth);
    let (points, _) = running_points(panel, s.window, lo, hi);
    DiscontinuityPlot {
        threshold: s.cutoff,
        bins: binned_means(&points, s.cutoff, lo, hi, n_bins),
        left_curve: curve(&est.left_fit, lo, s.cutoff, 20),
        right_curve: curve(&est.right_fit, s.cutoff, hi, 20),
    }
}

pub fn rk_plot_data(panel: &Panel, est: &RkEstimate, n_bins: usize) -> DiscontinuityPlot {
    let s = &est.spec;
    let (lo, hi) = (s.lower_restriction, s.upper());
    let (points, _) = running_points(panel, s.window, lo, hi);
    DiscontinuityPlot {
        threshold: s.kink,
        bins: binned_means(&points, s.kink, lo, hi, n_bins),
        left_curve: curve(&est.left_fit, lo, s.kink, 20),
        right_curve: curve(&est.right_fit, s.kink, hi, 20),
    }
}
