//! Dense least-squares helpers shared by the fitting routines.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value cutoff below which a design matrix is treated as
/// rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LinearFit {
    pub params: DVector<f64>,
    /// `s²·(XᵀX)⁻¹` with `s² = RSS / (n − k)`; zero when `n == k`.
    pub covariance: DMatrix<f64>,
    pub rss: f64,
    pub dof: usize,
}

impl LinearFit {
    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.params.len())
            .map(|i| self.covariance[(i, i)].max(0.0).sqrt())
            .collect()
    }
}

/// Ordinary least squares through the SVD of the design matrix.
pub fn linear_lstsq(design: &DMatrix<f64>, y: &DVector<f64>) -> Result<LinearFit> {
    let (n, k) = design.shape();
    if n < k {
        return Err(Error::Degenerate(format!(
            "{n} observations for {k} parameters"
        )));
    }
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= RANK_TOLERANCE * smax {
        return Err(Error::Degenerate("rank-deficient design matrix".into()));
    }
    let params = svd
        .solve(y, 0.0)
        .map_err(|e| Error::Degenerate(e.to_string()))?;
    let resid = y - design * &params;
    let rss = resid.norm_squared();
    let dof = n - k;
    let s2 = if dof > 0 { rss / dof as f64 } else { 0.0 };

    // (XᵀX)⁻¹ = V Σ⁻² Vᵀ
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let mut inv = DMatrix::zeros(k, k);
    for (idx, s) in svd.singular_values.iter().enumerate() {
        let row = v_t.row(idx);
        inv += row.transpose() * row / (s * s);
    }
    Ok(LinearFit {
        params,
        covariance: inv * s2,
        rss,
        dof,
    })
}
