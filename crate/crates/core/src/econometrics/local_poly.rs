use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linalg::wls;
use super::EconometricsError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    #[default]
    Triangular,
    Epanechnikov,
    Uniform,
}

impl Kernel {
    /// Weight at standardised distance `u = (x - c) / h`; zero outside `|u| <= 1`.
    pub fn weight(self, u: f64) -> f64 {
        let a = u.abs();
        if a > 1.0 {
            return 0.0;
        }
        match self {
            Kernel::Triangular => 1.0 - a,
            Kernel::Epanechnikov => 0.75 * (1.0 - a * a),
            Kernel::Uniform => 0.5,
        }
    }
}

/// Which observations enter a one-sided fit: `Left` keeps `x < center`,
/// `Right` keeps `x >= center`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitSide {
    Left,
    Right,
    Both,
}

impl FitSide {
    pub fn admits(self, x: f64, center: f64) -> bool {
        match self {
            FitSide::Left => x < center,
            FitSide::Right => x >= center,
            FitSide::Both => true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedPoint {
    pub x: f64,
    pub y: f64,
    /// Observation weight, multiplied into the kernel weight.
    pub weight: f64,
}

impl WeightedPoint {
    pub fn new(x: f64, y: f64) -> Self {
        WeightedPoint { x, y, weight: 1.0 }
    }
}

/// Coefficients of `y ~ sum_j b_j (x - center)^j`, so `b_0` is the fitted
/// value at `center` and `b_1` the slope there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalPolyFit {
    pub center: f64,
    pub bandwidth: f64,
    pub coefficients: Vec<f64>,
    /// HC1 covariance of `coefficients`.
    pub covariance: Vec<Vec<f64>>,
    /// Points with positive total weight.
    pub n_effective: usize,
}

impl LocalPolyFit {
    pub fn intercept(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn slope(&self) -> f64 {
        self.coefficients.get(1).copied().unwrap_or(0.0)
    }

    pub fn variance(&self, j: usize) -> f64 {
        self.covariance[j][j]
    }

    pub fn predict(&self, x: f64) -> f64 {
        let d = x - self.center;
        self.coefficients.iter().rev().fold(0.0, |acc, b| acc * d + b)
    }
}

/// Kernel-weighted local polynomial regression on one side of `center`.
///
/// The design is built in `(x - center) / bandwidth` for conditioning and
/// the coefficients and covariance are rescaled back to `x` units.
pub fn local_poly_fit(
    points: &[WeightedPoint],
    center: f64,
    bandwidth: f64,
    order: usize,
    kernel: Kernel,
    side: FitSide,
) -> Result<LocalPolyFit, EconometricsError> {
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(EconometricsError::InvalidSpec(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let selected: Vec<(f64, f64, f64)> = points
        .iter()
        .filter(|p| side.admits(p.x, center))
        .filter_map(|p| {
            let u = (p.x - center) / bandwidth;
            let w = kernel.weight(u) * p.weight;
            (w > 0.0 && p.y.is_finite()).then_some((u, p.y, w))
        })
        .collect();
    let needed = order + 2;
    if selected.len() < needed {
        return Err(EconometricsError::InsufficientSupport {
            side,
            found: selected.len(),
            needed,
        });
    }
    let n = selected.len();
    let k = order + 1;
    let x = DMatrix::from_fn(n, k, |i, j| selected[i].0.powi(j as i32));
    let y = DVector::from_iterator(n, selected.iter().map(|s| s.1));
    let w = DVector::from_iterator(n, selected.iter().map(|s| s.2));
    let fit = wls(&x, &y, &w)?;
    let cov = fit.hc1(&x, &w, 0);
    let scale: Vec<f64> = (0..k).map(|j| bandwidth.powi(j as i32)).collect();
    Ok(LocalPolyFit {
        center,
        bandwidth,
        coefficients: (0..k).map(|j| fit.coef[j] / scale[j]).collect(),
        covariance: (0..k)
            .map(|a| (0..k).map(|b| cov[(a, b)] / (scale[a] * scale[b])).collect())
            .collect(),
        n_effective: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, a: f64, b: f64) -> Vec<WeightedPoint> {
        (0..n)
            .map(|i| {
                let x = 80.0 + 40.0 * i as f64 / (n - 1) as f64;
                WeightedPoint::new(x, a + b * x)
            })
            .collect()
    }

    #[test]
    fn exact_linear_data() {
        let pts = line(41, 5.0, -0.001);
        let fit = local_poly_fit(&pts, 100.0, 20.0, 1, Kernel::Triangular, FitSide::Right).unwrap();
        assert!((fit.intercept() - (5.0 - 0.1)).abs() < 1e-12);
        assert!((fit.slope() + 0.001).abs() < 1e-12);
        assert!(fit.variance(0) < 1e-20);
    }

    #[test]
    fn constant_data() {
        let pts: Vec<_> = (0..30).map(|i| WeightedPoint::new(i as f64, 2.5)).collect();
        let fit = local_poly_fit(&pts, 15.0, 20.0, 1, Kernel::Epanechnikov, FitSide::Both).unwrap();
        assert!((fit.intercept() - 2.5).abs() < 1e-12);
        assert!(fit.slope().abs() < 1e-12);
    }

    #[test]
    fn boundary_points_get_zero_triangular_weight() {
        // Three points on the left, one exactly at c - h: only two carry weight.
        let pts = vec![
            WeightedPoint::new(80.0, 1.0),
            WeightedPoint::new(90.0, 1.0),
            WeightedPoint::new(95.0, 1.0),
        ];
        let err = local_poly_fit(&pts, 100.0, 20.0, 1, Kernel::Triangular, FitSide::Left).unwrap_err();
        assert!(matches!(
            err,
            EconometricsError::InsufficientSupport { found: 2, needed: 3, .. }
        ));
    }

    #[test]
    fn repeated_x_is_rank_deficient() {
        let pts = vec![WeightedPoint::new(101.0, 1.0); 5];
        let err = local_poly_fit(&pts, 100.0, 20.0, 1, Kernel::Triangular, FitSide::Right).unwrap_err();
        assert!(matches!(err, EconometricsError::RankDeficient));
    }

    #[test]
    fn predict_uses_centered_polynomial() {
        let pts: Vec<_> = (0..20)
            .map(|i| {
                let x = i as f64;
                WeightedPoint::new(x, 1.0 + 2.0 * (x - 10.0) + 0.5 * (x - 10.0).powi(2))
            })
            .collect();
        let fit = local_poly_fit(&pts, 10.0, 30.0, 2, Kernel::Uniform, FitSide::Both).unwrap();
        assert!((fit.predict(12.0) - (1.0 + 4.0 + 2.0)).abs() < 1e-9);
    }
}
