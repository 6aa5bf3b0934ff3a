//! Maximum-likelihood two-photon state reconstruction.
//!
//! The state is parameterized as `ρ = T†T / Tr(T†T)` with `T` lower
//! triangular (4 real diagonal entries, 6 complex off-diagonal entries), so
//! every iterate is a valid density matrix. Counts are Poisson with known
//! exposure `Eₖ`; the objective is the Poisson log-likelihood measured
//! against the saturated model,
//!
//! ```text
//! L(ρ) = Σₖ nₖ·ln(Eₖpₖ/nₖ) − (Eₖpₖ − nₖ)
//! ```
//!
//! which differs from `Σ nₖ ln(Eₖpₖ) − Eₖpₖ` by a constant and stays O(1)
//! near the optimum, so an absolute improvement tolerance is meaningful.
//! Ascent uses BFGS with Armijo backtracking from `ρ₀ = I/4`.

use nalgebra::{SMatrix, SVector, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{is_informationally_complete, tomography_settings_16, MeasurementRecord};
use crate::cascade::{CMatrix4, TwoPhotonState};
use crate::error::{Error, Result};

const NPARAM: usize = 16;
type Params = SVector<f64, NPARAM>;
type InvHessian = SMatrix<f64, NPARAM, NPARAM>;

/// Strictly-lower-triangular positions of `T`, in parameter order.
const OFF_DIAG: [(usize, usize); 6] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACK: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    /// Hard cap on ascent iterations.
    pub max_iterations: usize,
    /// Converged once one iteration improves `L` by less than this.
    pub tolerance: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleResult {
    pub state: TwoPhotonState,
    pub fidelity: f64,
    /// Log-likelihood relative to the saturated model (≤ 0).
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub last_improvement: f64,
    pub gradient_norm: f64,
}

struct Problem {
    kets: Vec<Vector4<Complex64>>,
    counts: Vec<f64>,
    exposure: Vec<f64>,
}

fn t_matrix(x: &Params) -> CMatrix4 {
    let mut t = CMatrix4::zeros();
    for i in 0..4 {
        t[(i, i)] = Complex64::new(x[i], 0.0);
    }
    for (k, &(i, j)) in OFF_DIAG.iter().enumerate() {
        t[(i, j)] = Complex64::new(x[4 + 2 * k], x[5 + 2 * k]);
    }
    t
}

/// Cholesky-style parameters of a state, used for the starting point.
fn params_of_identity() -> Params {
    let mut x = Params::zeros();
    for i in 0..4 {
        x[i] = 0.5;
    }
    x
}

fn density(x: &Params) -> CMatrix4 {
    let t = t_matrix(x);
    let a = t.adjoint() * t;
    let tr = a.trace().re;
    let mut rho = a / Complex64::new(tr, 0.0);
    // exact Hermitian symmetry
    for i in 0..4 {
        rho[(i, i)] = Complex64::new(rho[(i, i)].re, 0.0);
        for j in 0..i {
            let z = 0.5 * (rho[(i, j)] + rho[(j, i)].conj());
            rho[(i, j)] = z;
            rho[(j, i)] = z.conj();
        }
    }
    rho
}

impl Problem {
    fn probabilities(&self, t: &CMatrix4, trace: f64) -> Vec<f64> {
        self.kets
            .iter()
            .map(|k| (t * k).norm_squared() / trace)
            .collect()
    }

    fn log_likelihood(&self, x: &Params) -> f64 {
        let t = t_matrix(x);
        let trace = x.norm_squared();
        if !(trace > 0.0) {
            return f64::NEG_INFINITY;
        }
        let p = self.probabilities(&t, trace);
        let mut l = 0.0;
        for ((&n, &e), &pk) in self.counts.iter().zip(&self.exposure).zip(&p) {
            let mu = e * pk;
            if n > 0.0 {
                if !(mu > 0.0) {
                    return f64::NEG_INFINITY;
                }
                let r = (mu - n) / n;
                l += n * r.ln_1p() - (mu - n);
            } else {
                l -= mu;
            }
        }
        l
    }

    /// Gradient of the log-likelihood in parameter space.
    fn gradient(&self, x: &Params) -> Params {
        let t = t_matrix(x);
        let trace = x.norm_squared();
        let p = self.probabilities(&t, trace);
        let mut w = CMatrix4::zeros();
        let mut w_rho = 0.0;
        for (k, ket) in self.kets.iter().enumerate() {
            let wk = if self.counts[k] > 0.0 {
                self.counts[k] / p[k] - self.exposure[k]
            } else {
                -self.exposure[k]
            };
            w += ket * ket.adjoint() * Complex64::new(wk, 0.0);
            w_rho += wk * p[k];
        }
        let w_prime =
            (w - CMatrix4::identity() * Complex64::new(w_rho, 0.0)) / Complex64::new(trace, 0.0);
        let m = w_prime * t.adjoint();
        let mut g = Params::zeros();
        for i in 0..4 {
            g[i] = 2.0 * m[(i, i)].re;
        }
        for (k, &(i, j)) in OFF_DIAG.iter().enumerate() {
            g[4 + 2 * k] = 2.0 * m[(j, i)].re;
            g[5 + 2 * k] = -2.0 * m[(j, i)].im;
        }
        g
    }
}

/// Reconstructs the state maximizing the Poisson likelihood of `records`.
///
/// The records must be informationally complete; otherwise the canonical
/// settings absent from the input are reported. Hitting the iteration cap
/// returns a result with `converged == false`.
pub fn mle_reconstruct(records: &[MeasurementRecord], options: &MleOptions) -> Result<MleResult> {
    let settings: Vec<_> = records.iter().map(|r| r.setting).collect();
    if !is_informationally_complete(&settings) {
        let missing: Vec<String> = tomography_settings_16()
            .into_iter()
            .filter(|s| !settings.contains(s))
            .map(|s| s.to_string())
            .collect();
        if missing.is_empty() {
            return Err(Error::Degenerate(
                "settings are not informationally complete".into(),
            ));
        }
        return Err(Error::MissingSettings(missing));
    }
    if records
        .iter()
        .any(|r| !(r.exposure > 0.0 && r.exposure.is_finite()))
    {
        return Err(Error::invalid("exposure must be > 0"));
    }
    if records.iter().all(|r| r.counts == 0) {
        return Err(Error::Degenerate("total counts are zero".into()));
    }
    if options.max_iterations == 0 {
        return Err(Error::invalid("max_iterations must be >= 1"));
    }

    let problem = Problem {
        kets: records.iter().map(|r| r.setting.ket()).collect(),
        counts: records.iter().map(|r| r.counts as f64).collect(),
        exposure: records.iter().map(|r| r.exposure).collect(),
    };

    // minimize f = −L
    let mut x = params_of_identity();
    let mut fx = -problem.log_likelihood(&x);
    let mut g = -problem.gradient(&x);
    let mut h = InvHessian::identity();
    let mut h_is_identity = true;
    let mut scaled = false;
    let mut converged = false;
    let mut last_improvement = f64::INFINITY;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        let mut d = -(h * g);
        let mut slope = g.dot(&d);
        if !(slope < 0.0) {
            h = InvHessian::identity();
            h_is_identity = true;
            d = -g;
            slope = g.dot(&d);
        }
        if slope == 0.0 {
            last_improvement = 0.0;
            converged = true;
            break;
        }

        let mut alpha = if scaled {
            1.0
        } else {
            (0.1 * x.norm() / d.norm()).min(1.0)
        };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let xn = x + d * alpha;
            let fxn = -problem.log_likelihood(&xn);
            if fxn.is_finite() && fxn <= fx + ARMIJO_C * alpha * slope {
                accepted = Some((xn, fxn));
                break;
            }
            alpha *= 0.5;
        }

        let Some((xn, fxn)) = accepted else {
            if h_is_identity {
                // no ascent direction left at working precision
                last_improvement = 0.0;
                converged = true;
                break;
            }
            h = InvHessian::identity();
            h_is_identity = true;
            continue;
        };

        let gn = -problem.gradient(&xn);
        let s = xn - x;
        let y = gn - g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if !scaled {
                h = InvHessian::identity() * (sy / y.norm_squared());
                scaled = true;
            }
            let rho = 1.0 / sy;
            let hy = h * y;
            let yhy = y.dot(&hy);
            // H ← H + ρ²(sᵀy + yᵀHy) ssᵀ − ρ(Hy sᵀ + s yᵀH)
            h += s * s.transpose() * (rho * rho * (sy + yhy))
                - (hy * s.transpose() + s * hy.transpose()) * rho;
            h_is_identity = false;
        }

        last_improvement = fx - fxn;
        x = xn;
        fx = fxn;
        g = gn;
        if last_improvement < options.tolerance {
            converged = true;
            break;
        }
    }

    let state = TwoPhotonState::new(density(&x))?;
    Ok(MleResult {
        fidelity: state.fidelity_to_phi_plus(),
        state,
        log_likelihood: -fx,
        iterations,
        converged,
        last_improvement,
        gradient_norm: g.norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{ideal_bell_state, time_integrated_density_matrix, CascadeParams};
    use crate::tomography::{expected_counts, simulate_counts};

    fn problem_for(records: &[MeasurementRecord]) -> Problem {
        Problem {
            kets: records.iter().map(|r| r.setting.ket()).collect(),
            counts: records.iter().map(|r| r.counts as f64).collect(),
            exposure: records.iter().map(|r| r.exposure).collect(),
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let rho =
            time_integrated_density_matrix(&CascadeParams::new(2.92, 255.0, 0.1).unwrap()).unwrap();
        let recs = simulate_counts(&rho, &tomography_settings_16(), 1e4, 3).unwrap();
        let pb = problem_for(&recs);
        let mut x = Params::zeros();
        for i in 0..NPARAM {
            x[i] = 0.3 + 0.05 * (i as f64).sin();
        }
        let g = pb.gradient(&x);
        for i in 0..NPARAM {
            let h = 1e-6;
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (pb.log_likelihood(&xp) - pb.log_likelihood(&xm)) / (2.0 * h);
            assert!(
                (fd - g[i]).abs() < 1e-4 * g[i].abs().max(1.0),
                "param {i}: fd {fd} vs analytic {}",
                g[i]
            );
        }
    }

    #[test]
    fn starting_point_is_maximally_mixed() {
        let rho = density(&params_of_identity());
        assert_eq!(rho, *TwoPhotonState::maximally_mixed().matrix());
    }

    #[test]
    fn noiseless_bell_counts() {
        let recs = expected_counts(&ideal_bell_state(), &tomography_settings_16(), 1e6);
        let r = mle_reconstruct(&recs, &MleOptions::default()).unwrap();
        assert!(r.converged, "{r:?}");
        assert!(r.fidelity >= 0.9999, "f = {}", r.fidelity);
    }

    #[test]
    fn iteration_cap_is_flagged() {
        let recs = expected_counts(&ideal_bell_state(), &tomography_settings_16(), 1e6);
        let r = mle_reconstruct(
            &recs,
            &MleOptions {
                max_iterations: 1,
                ..MleOptions::default()
            },
        )
        .unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn incomplete_settings_error() {
        let s = &tomography_settings_16()[..15];
        let recs = expected_counts(&ideal_bell_state(), s, 1e3);
        match mle_reconstruct(&recs, &MleOptions::default()) {
            Err(Error::MissingSettings(m)) => assert_eq!(m, vec!["RL"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_counts_error() {
        let mut recs = expected_counts(&ideal_bell_state(), &tomography_settings_16(), 1e3);
        for r in &mut recs {
            r.counts = 0;
        }
        assert!(matches!(
            mle_reconstruct(&recs, &MleOptions::default()),
            Err(Error::Degenerate(_))
        ));
    }
}
