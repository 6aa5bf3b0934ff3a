//! Physical constants and the unit conversions used at every boundary.
//!
//! | quantity                | unit      |
//! |-------------------------|-----------|
//! | transition energies     | eV        |
//! | FSS, detuning, Rabi     | µeV       |
//! | lifetimes, delays       | ps        |
//! | CW laser power          | µW        |
//! | bias                    | V         |
//! | internal field          | V/nm      |
//! | optical frequency       | GHz       |

/// Reduced Planck constant in eV·s (CODATA 2018).
pub const HBAR_EV_S: f64 = 6.582_119_569e-16;

/// Planck constant in eV·s (CODATA 2018, exact).
pub const PLANCK_EV_S: f64 = 4.135_667_696e-15;

pub const UEV_PER_EV: f64 = 1e6;
pub const MEV_PER_EV: f64 = 1e3;
pub const S_PER_PS: f64 = 1e-12;

/// FWHM / σ for a Gaussian, `2·sqrt(2·ln 2)`.
pub const GAUSSIAN_FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

pub fn uev_to_ev(uev: f64) -> f64 {
    uev / UEV_PER_EV
}

pub fn ev_to_uev(ev: f64) -> f64 {
    ev * UEV_PER_EV
}

pub fn ev_to_mev(ev: f64) -> f64 {
    ev * MEV_PER_EV
}

pub fn ghz_to_ev(ghz: f64) -> f64 {
    ghz * 1e9 * PLANCK_EV_S
}

pub fn ev_to_ghz(ev: f64) -> f64 {
    ev / PLANCK_EV_S / 1e9
}

/// Dimensionless precession angle `δ·t/ħ` for an energy splitting in µeV
/// acting for a time in ps.
pub fn phase_from_uev_ps(splitting_uev: f64, time_ps: f64) -> f64 {
    uev_to_ev(splitting_uev) * time_ps * S_PER_PS / HBAR_EV_S
}

/// Energy reference for a target line given in either eV or GHz.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "unit", content = "value", rename_all = "lowercase")]
pub enum TargetLine {
    Ev(f64),
    Ghz(f64),
}

impl TargetLine {
    pub fn energy_ev(self) -> f64 {
        match self {
            TargetLine::Ev(e) => e,
            TargetLine::Ghz(f) => ghz_to_ev(f),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fwhm_constant() {
        let exact = 2.0 * (2.0 * std::f64::consts::LN_2).sqrt();
        assert!((GAUSSIAN_FWHM_PER_SIGMA - exact).abs() < 1e-15);
    }

    #[test]
    fn ghz_round_trip() {
        let e = ghz_to_ev(384_230.4844685);
        assert!((e - 1.589_049).abs() < 1e-5);
        assert!((ev_to_ghz(e) - 384_230.4844685).abs() < 1e-6);
    }

    #[test]
    fn precession_phase_for_qd_a() {
        // 2.92 µeV over 255 ps
        let x = phase_from_uev_ps(2.92, 255.0);
        assert!((x - 1.1312).abs() < 1e-3);
    }
}
