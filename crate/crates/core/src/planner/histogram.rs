//! Histogram of emission energies and a least-squares Gaussian fit to the
//! bin counts.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::GAUSSIAN_FWHM_PER_SIGMA;

const MAX_ITER: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Left edge of the first bin (the smallest sample).
    pub origin: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Bins anchored at the smallest sample, so a constant shift of the data
    /// shifts every edge with it.
    pub fn new(values: &[f64], bin_width: f64) -> Result<Self> {
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return Err(Error::invalid("bin width must be > 0"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite sample"));
        }
        let Some(origin) = values.iter().copied().reduce(f64::min) else {
            return Ok(Self {
                origin: 0.0,
                bin_width,
                counts: Vec::new(),
            });
        };
        let max = values.iter().copied().fold(origin, f64::max);
        let nbins = ((max - origin) / bin_width).floor() as usize + 1;
        let mut counts = vec![0u64; nbins];
        for v in values {
            let i = (((v - origin) / bin_width).floor() as usize).min(nbins - 1);
            counts[i] += 1;
        }
        Ok(Self {
            origin,
            bin_width,
            counts,
        })
    }

    pub fn center(&self, i: usize) -> f64 {
        self.origin + (i as f64 + 0.5) * self.bin_width
    }

    pub fn nonempty_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub mean: f64,
    pub sigma: f64,
    pub fwhm: f64,
    /// Standard errors; `None` when the fit has no residual degrees of
    /// freedom.
    pub mean_std_error: Option<f64>,
    pub sigma_std_error: Option<f64>,
    pub fwhm_std_error: Option<f64>,
    pub bin_width: f64,
    pub n_bins: usize,
    pub n_samples: usize,
}

fn gauss(p: &Vector3<f64>, u: f64) -> f64 {
    let z = (u - p[1]) / p[2];
    p[0] * (-0.5 * z * z).exp()
}

fn jacobian_row(p: &Vector3<f64>, u: f64) -> [f64; 3] {
    let z = (u - p[1]) / p[2];
    let e = (-0.5 * z * z).exp();
    [e, p[0] * e * z / p[2], p[0] * e * z * z / p[2]]
}

fn rss(p: &Vector3<f64>, xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(&u, &y)| (gauss(p, u) - y).powi(2))
        .sum()
}

/// Levenberg–Marquardt fit of `A·exp(−(E−µ)²/2σ²)` to the histogram of
/// `energies` with the given bin width.
pub fn gaussian_fit_histogram(energies: &[f64], bin_width: f64) -> Result<GaussianFit> {
    let hist = Histogram::new(energies, bin_width)?;
    if hist.nonempty_bins() < 3 {
        return Err(Error::Degenerate(format!(
            "need at least 3 nonempty bins, got {}",
            hist.nonempty_bins()
        )));
    }

    // fit in bin units relative to the origin
    let xs: Vec<f64> = (0..hist.counts.len()).map(|i| i as f64 + 0.5).collect();
    let ys: Vec<f64> = hist.counts.iter().map(|&c| c as f64).collect();
    let total: f64 = ys.iter().sum();
    let m1 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / total;
    let var = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y * (x - m1).powi(2))
        .sum::<f64>()
        / total;
    let amp0 = ys.iter().copied().fold(0.0, f64::max);
    let mut p = Vector3::new(amp0, m1, var.sqrt().max(0.5));

    let mut cost = rss(&p, &xs, &ys);
    let mut lambda = 1e-3;
    for _ in 0..MAX_ITER {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (&u, &y) in xs.iter().zip(&ys) {
            let j = Vector3::from(jacobian_row(&p, u));
            let r = y - gauss(&p, u);
            jtj += j * j.transpose();
            jtr += j * r;
        }
        let mut improved = false;
        while lambda < 1e16 {
            let mut a = jtj;
            for i in 0..3 {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            let c = rss(&trial, &xs, &ys);
            if c.is_finite() && c <= cost && trial[2] != 0.0 {
                let rel = (cost - c) / cost.max(f64::MIN_POSITIVE);
                let small = step
                    .iter()
                    .zip(trial.iter())
                    .all(|(s, v)| s.abs() <= 1e-14 * v.abs().max(1e-12));
                p = trial;
                cost = c;
                lambda = (lambda / 10.0).max(1e-12);
                improved = !(rel < 1e-15 || small);
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    p[2] = p[2].abs();

    let m = xs.len();
    let dof = m.saturating_sub(3);
    let cov = if dof > 0 {
        let jm = DMatrix::from_fn(m, 3, |i, k| jacobian_row(&p, xs[i])[k]);
        let jtj = jm.transpose() * &jm;
        jtj.try_inverse().map(|inv| inv * (cost / dof as f64))
    } else {
        None
    };
    let se = |k: usize| cov.as_ref().map(|c| c[(k, k)].max(0.0).sqrt() * bin_width);

    let sigma = p[2] * bin_width;
    Ok(GaussianFit {
        amplitude: p[0],
        mean: hist.origin + p[1] * bin_width,
        sigma,
        fwhm: GAUSSIAN_FWHM_PER_SIGMA * sigma,
        mean_std_error: se(1),
        sigma_std_error: se(2),
        fwhm_std_error: se(2).map(|s| GAUSSIAN_FWHM_PER_SIGMA * s),
        bin_width,
        n_bins: m,
        n_samples: energies.len(),
    })
}
