//! Reference implementations used as test oracles. They share no code
//! with the library: plain loops, normal equations, Gaussian elimination.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use gelab::econometrics::{FitSide, Kernel};
use gelab::panel::{ItemId, Panel};

fn kernel_weight(kernel: Kernel, u: f64) -> f64 {
    let a = u.abs();
    if a > 1.0 {
        return 0.0;
    }
    match kernel {
        Kernel::Triangular => 1.0 - a,
        Kernel::Epanechnikov => 0.75 * (1.0 - a * a),
        Kernel::Uniform => 0.5,
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Weighted least squares of `y` on `(x - c)^j`, `j = 0..=order`, via the
/// normal equations in the standardised variable `(x - c) / h`.
pub fn dense_local_poly(
    xs: &[f64],
    ys: &[f64],
    c: f64,
    h: f64,
    order: usize,
    kernel: Kernel,
    side: FitSide,
) -> Option<Vec<f64>> {
    let k = order + 1;
    let mut xtwx = vec![vec![0.0; k]; k];
    let mut xtwy = vec![0.0; k];
    for (&x, &y) in xs.iter().zip(ys) {
        let keep = match side {
            FitSide::Left => x < c,
            FitSide::Right => x >= c,
            FitSide::Both => true,
        };
        if !keep {
            continue;
        }
        let u = (x - c) / h;
        let w = kernel_weight(kernel, u);
        if w <= 0.0 {
            continue;
        }
        let powers: Vec<f64> = (0..k).map(|j| u.powi(j as i32)).collect();
        for a in 0..k {
            xtwy[a] += w * powers[a] * y;
            for b in 0..k {
                xtwx[a][b] += w * powers[a] * powers[b];
            }
        }
    }
    let beta = gauss_solve(xtwx, xtwy)?;
    Some(beta.iter().enumerate().map(|(j, b)| b / h.powi(j as i32)).collect())
}

/// Two-pass Pearson correlation over dates present in both maps.
pub fn pearson(a: &BTreeMap<NaiveDate, f64>, b: &BTreeMap<NaiveDate, f64>) -> Option<f64> {
    let common: Vec<(f64, f64)> = a.iter().filter_map(|(d, x)| b.get(d).map(|y| (*x, *y))).collect();
    if common.len() < 3 {
        return None;
    }
    let n = common.len() as f64;
    let mx = common.iter().map(|p| p.0).sum::<f64>() / n;
    let my = common.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = common.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = common.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let vy: f64 = common.iter().map(|(_, y)| (y - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

/// The control rule evaluated exhaustively: every universe item outside
/// the sink whose price correlation with every sinked item is defined and
/// below `threshold` in absolute value.
pub fn brute_force_controls(panel: &Panel, sinked: &BTreeSet<ItemId>, floor: f64, threshold: f64) -> BTreeSet<ItemId> {
    let series: BTreeMap<ItemId, BTreeMap<NaiveDate, f64>> = panel
        .items()
        .into_iter()
        .map(|i| (i, panel.item_series(i).iter().map(|o| (o.date, o.price)).collect()))
        .collect();
    let universe: Vec<ItemId> = series
        .iter()
        .filter(|(_, s)| s.values().sum::<f64>() / s.len() as f64 > floor)
        .map(|(i, _)| *i)
        .collect();
    universe
        .into_iter()
        .filter(|i| !sinked.contains(i))
        .filter(|i| {
            sinked
                .iter()
                .all(|k| pearson(&series[i], &series[k]).is_some_and(|r| r.abs() < threshold))
        })
        .collect()
}
