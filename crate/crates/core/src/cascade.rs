//! Two-photon polarization state of the biexciton–exciton cascade.
//!
//! All density matrices use the fixed basis ordering
//! `(H_XX H_X, H_XX V_X, V_XX H_X, V_XX V_X)`, the XX photon first.

use nalgebra::{Matrix4, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::units::phase_from_uev_ps;

pub type CMatrix4 = Matrix4<Complex64>;

/// Labels of the basis states, in matrix index order.
pub const BASIS_LABELS: [&str; 4] = ["HH", "HV", "VH", "VV"];

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;

/// A validated 4×4 two-photon density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonState {
    matrix: CMatrix4,
}

impl TwoPhotonState {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: CMatrix4) -> Result<Self> {
        check_physical(&matrix)?;
        Ok(Self { matrix })
    }

    /// Wraps a matrix that is physical by construction.
    pub(crate) fn from_trusted(matrix: CMatrix4) -> Self {
        debug_assert!(
            check_physical(&matrix).is_ok(),
            "{:?}",
            check_physical(&matrix)
        );
        Self { matrix }
    }

    pub fn matrix(&self) -> &CMatrix4 {
        &self.matrix
    }

    pub fn maximally_mixed() -> Self {
        Self::from_trusted(CMatrix4::identity() * Complex64::new(0.25, 0.0))
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        (self.matrix * self.matrix).trace().re
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 4] {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// `⟨Φ⁺|ρ|Φ⁺⟩`.
    pub fn fidelity_to_phi_plus(&self) -> f64 {
        phi_plus_overlap(&self.matrix)
    }

    /// `½·Σ|λᵢ(ρ − σ)|`.
    pub fn trace_distance(&self, other: &TwoPhotonState) -> f64 {
        let diff = self.matrix - other.matrix;
        0.5 * hermitian_eigenvalues(&diff)
            .iter()
            .map(|l| l.abs())
            .sum::<f64>()
    }
}

fn phi_plus_overlap(m: &CMatrix4) -> f64 {
    0.5 * (m[(0, 0)].re + m[(3, 3)].re + 2.0 * m[(0, 3)].re)
}

fn hermitian_eigenvalues(m: &CMatrix4) -> [f64; 4] {
    // symmetrize to kill round-off asymmetry before the Hermitian solver
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let mut out = [0.0; 4];
    for (o, v) in out.iter_mut().zip(eig.eigenvalues.iter()) {
        *o = *v;
    }
    out.sort_by(f64::total_cmp);
    out
}

fn check_physical(m: &CMatrix4) -> Result<()> {
    for i in 0..4 {
        for j in 0..4 {
            let a = m[(i, j)];
            let b = m[(j, i)].conj();
            if !(a.re.is_finite() && a.im.is_finite()) {
                return Err(Error::NonPhysical("non-finite entry".into()));
            }
            if (a - b).norm() > HERMITIAN_TOL {
                return Err(Error::NonPhysical(format!("not Hermitian at ({i}, {j})")));
            }
        }
    }
    let tr = m.trace();
    if (tr - Complex64::new(1.0, 0.0)).norm() > TRACE_TOL {
        return Err(Error::NonPhysical(format!("trace {tr} != 1")));
    }
    let min = hermitian_eigenvalues(m)[0];
    if min < -PSD_TOL {
        return Err(Error::NonPhysical(format!("negative eigenvalue {min:e}")));
    }
    Ok(())
}

// JSON: 4×4 array of [re, im] pairs, rows in BASIS_LABELS order.
impl Serialize for TwoPhotonState {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..4)
            .map(|i| {
                (0..4)
                    .map(|j| {
                        let z = self.matrix[(i, j)];
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for TwoPhotonState {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: [[[f64; 2]; 4]; 4] = Deserialize::deserialize(d)?;
        let m = CMatrix4::from_fn(|i, j| Complex64::new(rows[i][j][0], rows[i][j][1]));
        TwoPhotonState::new(m).map_err(serde::de::Error::custom)
    }
}

/// Emission parameters entering the time-integrated state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeParams {
    /// `ħδ_FSS`, µeV.
    pub fss: f64,
    /// `τ_X`, ps.
    pub lifetime_x: f64,
    pub g2_zero: f64,
}

impl CascadeParams {
    pub fn new(fss: f64, lifetime_x: f64, g2_zero: f64) -> Result<Self> {
        let p = Self {
            fss,
            lifetime_x,
            g2_zero,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fss >= 0.0 && self.fss.is_finite()) {
            return Err(Error::invalid("fss must be finite and >= 0"));
        }
        if !(self.lifetime_x > 0.0 && self.lifetime_x.is_finite()) {
            return Err(Error::invalid("lifetime_x must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.g2_zero) {
            return Err(Error::invalid("g2_zero must lie in [0, 1]"));
        }
        Ok(())
    }

    /// `x = δ_FSS·τ_X/ħ`.
    pub fn precession(&self) -> f64 {
        phase_from_uev_ps(self.fss, self.lifetime_x)
    }
}

/// `(|HH⟩ + |VV⟩)/√2` as a density matrix.
pub fn ideal_bell_state() -> TwoPhotonState {
    bell_with_coherence(Complex64::new(0.5, 0.0))
}

fn bell_with_coherence(c: Complex64) -> TwoPhotonState {
    let mut m = CMatrix4::zeros();
    m[(0, 0)] = Complex64::new(0.5, 0.0);
    m[(3, 3)] = Complex64::new(0.5, 0.0);
    m[(0, 3)] = c;
    m[(3, 0)] = c.conj();
    TwoPhotonState::from_trusted(m)
}

/// `(|HH⟩ + e^{iδt/ħ}|VV⟩)/√2` for a detection delay `delay` (ps) after the
/// XX photon.
pub fn time_resolved_state(fss: f64, delay: f64) -> Result<TwoPhotonState> {
    if !(delay >= 0.0) {
        return Err(Error::Domain(format!("delay must be >= 0, got {delay}")));
    }
    if !fss.is_finite() {
        return Err(Error::invalid("fss must be finite"));
    }
    let phi = phase_from_uev_ps(fss, delay);
    Ok(bell_with_coherence(Complex64::from_polar(0.5, -phi)))
}

/// Exponential-decay average of [`time_resolved_state`] mixed with white
/// noise of weight `g²(0)`:
/// `ρ = (1−g²)·ρ_FSS + g²·I/4`, `ρ_FSS[HH,VV] = ½·(1 − ix)/(1 + x²)`.
pub fn time_integrated_density_matrix(params: &CascadeParams) -> Result<TwoPhotonState> {
    params.validate()?;
    let x = params.precession();
    let g = params.g2_zero;
    let coherence = Complex64::new(1.0, -x) * (0.5 / (1.0 + x * x));
    let w = Complex64::new(1.0 - g, 0.0);
    let noise = Complex64::new(g / 4.0, 0.0);
    let mut m = CMatrix4::identity() * noise;
    m[(0, 0)] += w * 0.5;
    m[(3, 3)] += w * 0.5;
    m[(0, 3)] = w * coherence;
    m[(3, 0)] = (w * coherence).conj();
    Ok(TwoPhotonState::from_trusted(m))
}

/// `⟨Φ⁺|ρ|Φ⁺⟩`, re-validating the matrix first.
pub fn fidelity_to_phi_plus(rho: &CMatrix4) -> Result<f64> {
    check_physical(rho)?;
    Ok(phi_plus_overlap(rho))
}

/// Closed-form time-integrated fidelity,
/// `¼·(2 − g² + 2(1 − g²)/(1 + (δτ/ħ)²))`.
pub fn fidelity_formula(fss: f64, tau_x: f64, g2: f64) -> Result<f64> {
    let p = CascadeParams::new(fss, tau_x, g2)?;
    let x = p.precession();
    Ok(0.25 * (2.0 - g2 + 2.0 * (1.0 - g2) / (1.0 + x * x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::HBAR_EV_S;

    fn assert_physical(s: &TwoPhotonState) {
        check_physical(s.matrix()).unwrap();
    }

    #[test]
    fn ideal_state_properties() {
        let s = ideal_bell_state();
        assert_physical(&s);
        assert!((s.trace().re - 1.0).abs() < 1e-15);
        assert!((s.purity() - 1.0).abs() < 1e-15);
        assert_eq!(s.fidelity_to_phi_plus(), 1.0);
        assert_eq!(s.matrix()[(1, 1)].re, 0.0);
    }

    #[test]
    fn time_resolved_at_zero_delay_is_bell() {
        assert_eq!(time_resolved_state(2.92, 0.0).unwrap(), ideal_bell_state());
        assert!(matches!(
            time_resolved_state(2.92, -1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn time_resolved_half_period_gives_phi_minus() {
        let t = std::f64::consts::PI * HBAR_EV_S / 2.92e-6 / 1e-12;
        assert!((t - 708.3).abs() < 0.2, "t = {t}");
        let s = time_resolved_state(2.92, t).unwrap();
        assert!(s.fidelity_to_phi_plus().abs() < 1e-12);
        let s = time_resolved_state(2.92, 708.3).unwrap();
        assert!(s.fidelity_to_phi_plus().abs() < 1e-3);
        assert!((s.purity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn integrated_limits() {
        let p = CascadeParams::new(0.0, 255.0, 0.0).unwrap();
        let s = time_integrated_density_matrix(&p).unwrap();
        assert_eq!(s, ideal_bell_state());

        let p = CascadeParams::new(2.92, 255.0, 1.0).unwrap();
        let s = time_integrated_density_matrix(&p).unwrap();
        assert_eq!(s, TwoPhotonState::maximally_mixed());
        assert_eq!(s.fidelity_to_phi_plus(), 0.25);
    }

    #[test]
    fn integrated_coherence_for_qd_a() {
        let p = CascadeParams::new(2.92, 255.0, 0.0).unwrap();
        let x = 2.92e-6 * 255e-12 / HBAR_EV_S;
        assert!((x - 1.1311).abs() < 1e-3);
        let s = time_integrated_density_matrix(&p).unwrap();
        let c = s.matrix()[(0, 3)];
        assert!((c.re - 0.5 / (1.0 + x * x)).abs() < 1e-15);
        assert!((c.re - 0.2194).abs() < 1e-3);
        assert!((c.im + 0.5 * x / (1.0 + x * x)).abs() < 1e-15);
        assert!((s.fidelity_to_phi_plus() - 0.7194).abs() < 5e-4);
    }

    #[test]
    fn formula_examples() {
        assert_eq!(fidelity_formula(0.0, 123.0, 0.0).unwrap(), 1.0);
        assert_eq!(fidelity_formula(7.0, 123.0, 1.0).unwrap(), 0.25);
        let f = fidelity_formula(2.92, 255.0, 0.0).unwrap();
        assert!((f - 0.7194).abs() < 5e-4);
        assert!(fidelity_formula(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn rejects_non_physical() {
        let mut m = *ideal_bell_state().matrix();
        m[(0, 3)] = Complex64::new(0.7, 0.0);
        m[(3, 0)] = Complex64::new(0.7, 0.0);
        assert!(matches!(TwoPhotonState::new(m), Err(Error::NonPhysical(_))));
        assert!(fidelity_to_phi_plus(&m).is_err());

        let mut m = *ideal_bell_state().matrix();
        m[(0, 1)] = Complex64::new(0.0, 0.1);
        assert!(TwoPhotonState::new(m).is_err());

        let m = CMatrix4::identity() * Complex64::new(0.3, 0.0);
        assert!(TwoPhotonState::new(m).is_err());
    }

    #[test]
    fn json_round_trip() {
        let p = CascadeParams::new(2.92, 255.0, 0.06).unwrap();
        let s = time_integrated_density_matrix(&p).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.starts_with("[[["));
        let back: TwoPhotonState = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn trace_distance_basics() {
        let a = ideal_bell_state();
        let b = TwoPhotonState::maximally_mixed();
        assert!(a.trace_distance(&a) < 1e-15);
        // eigenvalues of ρ−I/4: 3/4, −1/4 ×3
        assert!((a.trace_distance(&b) - 0.75).abs() < 1e-12);
    }
}
