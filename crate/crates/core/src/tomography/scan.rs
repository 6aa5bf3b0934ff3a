//! FSS and eigenaxis extraction from a half-wave-plate polarization scan.
//!
//! Rotating the HWP by θ rotates the analysed polarization by 2θ, and the
//! XX−X separation oscillates at twice the polarization angle, so
//!
//! ```text
//! ΔE(θ) = offset + (fss/2)·cos(4θ − 4φ)
//! ```
//!
//! Writing the oscillation as `a·cos 4θ + b·sin 4θ` makes the fit linear.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::linear_lstsq;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationScanPoint {
    /// Radians.
    pub hwp_angle: f64,
    /// `E_XX − E_X`, µeV.
    pub energy_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanFit {
    /// Peak-to-peak amplitude, µeV.
    pub fss: f64,
    /// Radians in `[0, π/2)`.
    pub axis_angle: f64,
    /// µeV.
    pub offset: f64,
    pub fss_std_error: f64,
    /// `None` when the angle is indeterminate.
    pub axis_angle_std_error: Option<f64>,
    pub offset_std_error: f64,
    /// Amplitude not resolved from zero; `axis_angle` carries no information.
    pub angle_indeterminate: bool,
    pub residual_rms: f64,
    pub n_points: usize,
}

impl ScanFit {
    pub fn model(&self, hwp_angle: f64) -> f64 {
        scan_model(self.fss, self.axis_angle, self.offset, hwp_angle)
    }
}

pub fn scan_model(fss: f64, axis_angle: f64, offset: f64, hwp_angle: f64) -> f64 {
    offset + 0.5 * fss * (4.0 * hwp_angle - 4.0 * axis_angle).cos()
}

pub fn extract_fss_polarization_scan(points: &[PolarizationScanPoint]) -> Result<ScanFit> {
    if points.len() < 4 {
        return Err(Error::Degenerate(format!(
            "need at least 4 scan points, got {}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|p| !p.hwp_angle.is_finite() || !p.energy_diff.is_finite())
    {
        return Err(Error::invalid("scan contains non-finite values"));
    }
    let n = points.len();
    let design = DMatrix::from_fn(n, 3, |i, j| {
        let t = 4.0 * points[i].hwp_angle;
        match j {
            0 => 1.0,
            1 => t.cos(),
            _ => t.sin(),
        }
    });
    let y = DVector::from_iterator(n, points.iter().map(|p| p.energy_diff));
    let fit = linear_lstsq(&design, &y).map_err(|e| match e {
        Error::Degenerate(_) => {
            Error::Degenerate("scan angles do not resolve the oscillation phase".into())
        }
        other => other,
    })?;

    let (offset, a, b) = (fit.params[0], fit.params[1], fit.params[2]);
    let c = &fit.covariance;
    let (vaa, vbb, vab) = (c[(1, 1)], c[(2, 2)], c[(1, 2)]);
    let r = a.hypot(b);
    let fss = 2.0 * r;
    let axis_angle = (b.atan2(a) / 4.0).rem_euclid(FRAC_PI_2);

    let (fss_se, angle_se) = if r > 0.0 {
        let var_r = (a * a * vaa + b * b * vbb + 2.0 * a * b * vab) / (r * r);
        let var_phase = (b * b * vaa + a * a * vbb - 2.0 * a * b * vab) / (r * r * r * r);
        (
            2.0 * var_r.max(0.0).sqrt(),
            0.25 * var_phase.max(0.0).sqrt(),
        )
    } else {
        (2.0 * vaa.max(vbb).max(0.0).sqrt(), f64::INFINITY)
    };

    let scale = 1.0 + offset.abs();
    let angle_indeterminate = fss <= 3.0 * fss_se || fss <= 1e-9 * scale;

    Ok(ScanFit {
        fss,
        axis_angle,
        offset,
        fss_std_error: fss_se,
        axis_angle_std_error: (!angle_indeterminate).then_some(angle_se),
        offset_std_error: c[(0, 0)].max(0.0).sqrt(),
        angle_indeterminate,
        residual_rms: (fit.rss / n as f64).sqrt(),
        n_points: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(fss: f64, angle: f64, offset: f64, n: usize) -> Vec<PolarizationScanPoint> {
        (0..n)
            .map(|i| {
                let th = std::f64::consts::PI * i as f64 / n as f64;
                PolarizationScanPoint {
                    hwp_angle: th,
                    energy_diff: scan_model(fss, angle, offset, th),
                }
            })
            .collect()
    }

    #[test]
    fn noiseless_recovery() {
        let fit = extract_fss_polarization_scan(&synth(2.92, 0.3, 2400.0, 36)).unwrap();
        assert!((fit.fss - 2.92).abs() < 1e-9);
        assert!((fit.axis_angle - 0.3).abs() < 1e-9);
        assert!((fit.offset - 2400.0).abs() < 1e-9);
        assert!(!fit.angle_indeterminate);
    }

    #[test]
    fn angle_wraps_into_quarter_turn() {
        let fit = extract_fss_polarization_scan(&synth(1.0, -0.2, 0.0, 20)).unwrap();
        assert!((fit.axis_angle - (FRAC_PI_2 - 0.2)).abs() < 1e-9);
    }

    #[test]
    fn zero_fss_is_flagged() {
        let fit = extract_fss_polarization_scan(&synth(0.0, 0.3, 2400.0, 36)).unwrap();
        assert!(fit.fss < 1e-9);
        assert!(fit.angle_indeterminate);
        assert_eq!(fit.axis_angle_std_error, None);
    }

    #[test]
    fn degenerate_angles() {
        let q = std::f64::consts::FRAC_PI_4;
        let pts: Vec<_> = [0.1, 0.1 + q, 0.1 + 2.0 * q, 0.1 + 3.0 * q, 0.1]
            .iter()
            .enumerate()
            .map(|(i, &t)| PolarizationScanPoint {
                hwp_angle: t,
                energy_diff: i as f64,
            })
            .collect();
        assert!(matches!(
            extract_fss_polarization_scan(&pts),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            extract_fss_polarization_scan(&pts[..3]),
            Err(Error::Degenerate(_))
        ));
    }
}
