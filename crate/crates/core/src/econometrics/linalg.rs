//! Weighted least squares via Householder QR, with heteroskedasticity-robust
//! (HC1) and cluster-robust (CR1) sandwich covariances.

use nalgebra::{DMatrix, DVector};

use super::EconometricsError;

/// Relative threshold on `|R_jj| / max |R_kk|` below which the design is
/// treated as rank deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub(crate) struct LsFit {
    pub coef: DVector<f64>,
    pub residuals: DVector<f64>,
    /// `(X' W X)^{-1}`.
    pub bread: DMatrix<f64>,
    pub n: usize,
}

/// Solves `min sum w_i (y_i - x_i' b)^2`. Weights must be positive.
pub(crate) fn wls(x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>) -> Result<LsFit, EconometricsError> {
    let (n, k) = x.shape();
    if n < k || k == 0 {
        return Err(EconometricsError::RankDeficient);
    }
    let sw = w.map(f64::sqrt);
    let mut xs = x.clone();
    for (mut row, s) in xs.row_iter_mut().zip(sw.iter()) {
        row *= *s;
    }
    let ys = y.component_mul(&sw);
    let qr = xs.qr();
    let r = qr.r();
    let diag_max = (0..k).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if !(diag_max > 0.0) || (0..k).any(|j| r[(j, j)].abs() <= RANK_TOL * diag_max) {
        return Err(EconometricsError::RankDeficient);
    }
    let qty = qr.q().transpose() * &ys;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or(EconometricsError::RankDeficient)?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(EconometricsError::RankDeficient)?;
    let bread = &r_inv * r_inv.transpose();
    let residuals = y - x * &coef;
    Ok(LsFit {
        coef,
        residuals,
        bread,
        n,
    })
}

impl LsFit {
    /// HC1 sandwich. `absorbed` counts parameters removed before the fit
    /// (e.g. fixed effects swept out by demeaning) for the dof correction.
    pub fn hc1(&self, x: &DMatrix<f64>, w: &DVector<f64>, absorbed: usize) -> DMatrix<f64> {
        let k = x.ncols();
        let mut meat = DMatrix::<f64>::zeros(k, k);
        for i in 0..self.n {
            let s = w[i] * self.residuals[i];
            let xi = x.row(i).transpose();
            meat += (s * s) * &xi * xi.transpose();
        }
        let dof = self.n as f64 - (k + absorbed) as f64;
        let scale = if dof > 0.0 { self.n as f64 / dof } else { f64::INFINITY };
        &self.bread * meat * &self.bread * scale
    }

    /// CR1 sandwich clustered on `groups` (one label per row).
    pub fn cr1(&self, x: &DMatrix<f64>, w: &DVector<f64>, groups: &[u64], absorbed: usize) -> DMatrix<f64> {
        let k = x.ncols();
        let mut scores: std::collections::BTreeMap<u64, DVector<f64>> = Default::default();
        for i in 0..self.n {
            let s = w[i] * self.residuals[i];
            let entry = scores.entry(groups[i]).or_insert_with(|| DVector::zeros(k));
            *entry += s * x.row(i).transpose();
        }
        let mut meat = DMatrix::<f64>::zeros(k, k);
        for g in scores.values() {
            meat += g * g.transpose();
        }
        let n = self.n as f64;
        let n_groups = scores.len() as f64;
        let dof = n - (k + absorbed) as f64;
        let scale = if n_groups > 1.0 && dof > 0.0 {
            n_groups / (n_groups - 1.0) * (n - 1.0) / dof
        } else {
            f64::INFINITY
        };
        &self.bread * meat * &self.bread * scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let w = DVector::from_element(4, 1.0);
        let fit = wls(&x, &y, &w).unwrap();
        assert!((fit.coef[0] - 1.0).abs() < 1e-12);
        assert!((fit.coef[1] - 2.0).abs() < 1e-12);
        assert!(fit.residuals.amax() < 1e-12);
    }

    #[test]
    fn collinear_columns_are_rank_deficient() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let w = DVector::from_element(3, 1.0);
        assert!(matches!(wls(&x, &y, &w), Err(EconometricsError::RankDeficient)));
    }

    #[test]
    fn hc1_matches_hand_computation_for_a_mean() {
        // Intercept-only model: HC1 variance = n/(n-1) * sum(e^2) / n^2.
        let y = DVector::from_vec(vec![1.0, 2.0, 4.0, 7.0]);
        let x = DMatrix::from_element(4, 1, 1.0);
        let w = DVector::from_element(4, 1.0);
        let fit = wls(&x, &y, &w).unwrap();
        let mean = 3.5;
        let ss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
        let expected = 4.0 / 3.0 * ss / 16.0;
        assert!((fit.hc1(&x, &w, 0)[(0, 0)] - expected).abs() < 1e-12);
    }
}
