//! Weighted linear least squares through the SVD.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Condition number above which a design matrix is rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct LstsqFit {
    pub coefficients: Vec<f64>,
    /// Standard errors of the coefficients from the residual variance.
    pub std_errors: Vec<f64>,
    /// Weighted root-mean-square residual.
    pub rms_residual: f64,
    pub condition: f64,
}

/// Minimizes `sum_i w_i^2 (sum_j X_ij c_j - y_i)^2`. Columns are normalized
/// before factorization so the condition number reflects the basis, not its
/// scaling.
pub fn weighted_lstsq(design: &DMatrix<f64>, rhs: &[f64], weights: &[f64]) -> Result<LstsqFit> {
    let (n, k) = design.shape();
    if n != rhs.len() || n != weights.len() {
        return Err(Error::Fit(
            "design, data and weights differ in length".into(),
        ));
    }
    if n < k {
        return Err(Error::Fit(format!(
            "{n} samples cannot determine {k} coefficients"
        )));
    }
    let mut a = design.clone();
    for (i, w) in weights.iter().enumerate() {
        a.row_mut(i).scale_mut(*w);
    }
    let mut norms = vec![0.0; k];
    for (j, nj) in norms.iter_mut().enumerate() {
        *nj = a.column(j).norm();
        if *nj == 0.0 || !nj.is_finite() {
            return Err(Error::Fit(format!(
                "basis column {j} vanishes on the sample grid"
            )));
        }
        a.column_mut(j).unscale_mut(*nj);
    }
    let b = DVector::from_iterator(n, rhs.iter().zip(weights).map(|(y, w)| y * w));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Fit(format!(
            "ill-conditioned design matrix (condition number {condition:.3e})"
        )));
    }
    let x = svd.solve(&b, 0.0).map_err(|e| Error::Fit(e.to_string()))?;
    let resid = &a * &x - &b;
    let rss = resid.norm_squared();
    let dof = (n - k).max(1) as f64;
    let sigma2 = rss / dof;
    // diag((A^T A)^{-1}) = sum_i V_ji^2 / s_i^2
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let mut std_errors = vec![0.0; k];
    for (j, se) in std_errors.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (i, s) in svd.singular_values.iter().enumerate() {
            acc += v_t[(i, j)].powi(2) / (s * s);
        }
        *se = (sigma2 * acc).sqrt() / norms[j];
    }
    let coefficients = x.iter().zip(&norms).map(|(c, nj)| c / nj).collect();
    Ok(LstsqFit {
        coefficients,
        std_errors,
        rms_residual: (rss / n as f64).sqrt(),
        condition,
    })
}
