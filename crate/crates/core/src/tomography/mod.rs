//! Polarization-projective coincidence measurements: Born-rule
//! probabilities, seeded Poisson count simulation, correlation contrasts and
//! the reduced fidelity estimator, plus the full maximum-likelihood
//! reconstruction ([`mle`]) and the HWP-scan FSS fit ([`scan`]).

pub mod mle;
pub mod scan;

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, Vector4};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::cascade::{CMatrix4, TwoPhotonState};
use crate::error::{Error, Result, RowError};

pub use mle::{mle_reconstruct, MleOptions, MleResult};
pub use scan::{extract_fss_polarization_scan, PolarizationScanPoint, ScanFit};

/// Single-photon projection states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl Polarization {
    pub const ALL: [Polarization; 6] = [
        Polarization::H,
        Polarization::V,
        Polarization::D,
        Polarization::A,
        Polarization::R,
        Polarization::L,
    ];

    /// Jones vector in the (H, V) basis.
    pub fn ket(self) -> [Complex64; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (one, zero) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        match self {
            Polarization::H => [one, zero],
            Polarization::V => [zero, one],
            Polarization::D => [Complex64::new(s, 0.0), Complex64::new(s, 0.0)],
            Polarization::A => [Complex64::new(s, 0.0), Complex64::new(-s, 0.0)],
            Polarization::R => [Complex64::new(s, 0.0), Complex64::new(0.0, s)],
            Polarization::L => [Complex64::new(s, 0.0), Complex64::new(0.0, -s)],
        }
    }

    pub fn orthogonal(self) -> Self {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
            Polarization::D => Polarization::A,
            Polarization::A => Polarization::D,
            Polarization::R => Polarization::L,
            Polarization::L => Polarization::R,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Polarization::H => 'H',
            Polarization::V => 'V',
            Polarization::D => 'D',
            Polarization::A => 'A',
            Polarization::R => 'R',
            Polarization::L => 'L',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        Some(match c.to_ascii_uppercase() {
            'H' => Polarization::H,
            'V' => Polarization::V,
            'D' => Polarization::D,
            'A' => Polarization::A,
            'R' => Polarization::R,
            'L' => Polarization::L,
            _ => return None,
        })
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for Polarization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.trim().chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Polarization::from_char(c),
            _ => None,
        }
        .ok_or_else(|| Error::invalid(format!("unknown polarization {s:?}")))
    }
}

/// Projection of the XX photon and of the X photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PolarizationSetting {
    pub xx_proj: Polarization,
    pub x_proj: Polarization,
}

impl PolarizationSetting {
    pub const fn new(xx_proj: Polarization, x_proj: Polarization) -> Self {
        Self { xx_proj, x_proj }
    }

    /// Two-photon ket `|xx⟩ ⊗ |x⟩`.
    pub fn ket(&self) -> Vector4<Complex64> {
        let a = self.xx_proj.ket();
        let b = self.x_proj.ket();
        Vector4::new(a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
    }

    pub fn projector(&self) -> CMatrix4 {
        let k = self.ket();
        k * k.adjoint()
    }

    /// Same XX projection, orthogonal X projection.
    pub fn cross(&self) -> Self {
        Self::new(self.xx_proj, self.x_proj.orthogonal())
    }
}

impl fmt::Display for PolarizationSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.xx_proj, self.x_proj)
    }
}

impl FromStr for PolarizationSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.trim().chars().collect();
        if chars.len() != 2 {
            return Err(Error::invalid(format!(
                "setting must be two letters, got {s:?}"
            )));
        }
        match (
            Polarization::from_char(chars[0]),
            Polarization::from_char(chars[1]),
        ) {
            (Some(a), Some(b)) => Ok(Self::new(a, b)),
            _ => Err(Error::invalid(format!("unknown setting {s:?}"))),
        }
    }
}

impl Serialize for PolarizationSetting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PolarizationSetting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn settings_from(labels: &[&str]) -> Vec<PolarizationSetting> {
    labels
        .iter()
        .map(|l| l.parse().expect("static label"))
        .collect()
}

/// The 16 two-photon projections used for full reconstruction.
pub fn tomography_settings_16() -> Vec<PolarizationSetting> {
    settings_from(&[
        "HH", "HV", "VV", "VH", "RH", "RV", "DV", "DH", "DR", "DD", "RD", "HD", "VD", "VL", "HL",
        "RL",
    ])
}

/// Co/cross pairs in the linear, diagonal and circular bases.
pub fn reduced_settings_6() -> Vec<PolarizationSetting> {
    settings_from(&["HH", "HV", "DD", "DA", "RR", "RL"])
}

/// Rank of the real Gram matrix `Tr(Πᵢ Πⱼ)` of the settings' projectors.
pub fn projector_rank(settings: &[PolarizationSetting]) -> usize {
    let kets: Vec<_> = settings.iter().map(|s| s.ket()).collect();
    let n = kets.len();
    let gram = DMatrix::from_fn(n, n, |i, j| kets[i].dotc(&kets[j]).norm_sqr());
    let sv = gram.singular_values();
    let max = sv.max();
    sv.iter().filter(|&&s| s > 1e-10 * max).count()
}

/// True when the settings determine any two-photon density matrix.
pub fn is_informationally_complete(settings: &[PolarizationSetting]) -> bool {
    projector_rank(settings) == 16
}

/// Born-rule coincidence probability `Tr(ρ·Π_xx ⊗ Π_x)`.
pub fn coincidence_probability(rho: &TwoPhotonState, setting: PolarizationSetting) -> f64 {
    let k = setting.ket();
    let p = (k.adjoint() * rho.matrix() * k)[(0, 0)].re;
    p.clamp(0.0, 1.0)
}

/// One polarization setting with its observed or simulated coincidences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub setting: PolarizationSetting,
    pub counts: u64,
    /// Pair-generation trials; rates are `counts / exposure`.
    pub exposure: f64,
}

impl MeasurementRecord {
    pub fn rate(&self) -> f64 {
        self.counts as f64 / self.exposure
    }
}

/// Poisson coincidences for each setting, one ChaCha stream per setting
/// index so the output does not depend on evaluation order.
pub fn simulate_counts(
    rho: &TwoPhotonState,
    settings: &[PolarizationSetting],
    mean_pairs_per_setting: f64,
    seed: u64,
) -> Result<Vec<MeasurementRecord>> {
    if !(mean_pairs_per_setting > 0.0 && mean_pairs_per_setting.is_finite()) {
        return Err(Error::invalid("mean pairs per setting must be > 0"));
    }
    settings
        .iter()
        .enumerate()
        .map(|(idx, &setting)| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64);
            let lambda = mean_pairs_per_setting * coincidence_probability(rho, setting);
            let counts = if lambda > 0.0 {
                let dist = Poisson::new(lambda).map_err(|e| Error::invalid(e.to_string()))?;
                let draw: f64 = dist.sample(&mut rng);
                draw as u64
            } else {
                0
            };
            Ok(MeasurementRecord {
                setting,
                counts,
                exposure: mean_pairs_per_setting,
            })
        })
        .collect()
}

/// Noiseless expected counts `N·pₖ` (rounded to the nearest integer).
pub fn expected_counts(
    rho: &TwoPhotonState,
    settings: &[PolarizationSetting],
    mean_pairs_per_setting: f64,
) -> Vec<MeasurementRecord> {
    settings
        .iter()
        .map(|&setting| MeasurementRecord {
            setting,
            counts: (mean_pairs_per_setting * coincidence_probability(rho, setting)).round() as u64,
            exposure: mean_pairs_per_setting,
        })
        .collect()
}

/// `C = (r_co − r_cross)/(r_co + r_cross)` from exposure-normalized rates.
pub fn degree_of_correlation(co: &MeasurementRecord, cross: &MeasurementRecord) -> Result<f64> {
    if !(co.exposure > 0.0 && cross.exposure > 0.0) {
        return Err(Error::invalid("exposure must be > 0"));
    }
    correlation_from_rates(co.rate(), cross.rate())
}

pub fn correlation_from_rates(co: f64, cross: f64) -> Result<f64> {
    let sum = co + cross;
    if !(sum > 0.0) {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((co - cross) / sum)
}

/// `f = (1 + C_lin + C_diag − C_circ)/4`.
pub fn reduced_fidelity(c_linear: f64, c_diagonal: f64, c_circular: f64) -> Result<f64> {
    for c in [c_linear, c_diagonal, c_circular] {
        if !(-1.0..=1.0).contains(&c) {
            return Err(Error::Domain(format!("correlation {c} outside [-1, 1]")));
        }
    }
    Ok((1.0 + c_linear + c_diagonal - c_circular) / 4.0)
}

/// Correlation degrees in the three bases and the fidelity they imply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedAnalysis {
    pub c_linear: f64,
    pub c_diagonal: f64,
    pub c_circular: f64,
    pub fidelity: f64,
}

/// Exact (unsampled) correlation degrees of a state.
pub fn exact_reduced_analysis(rho: &TwoPhotonState) -> Result<ReducedAnalysis> {
    let c = |co: &str| -> Result<f64> {
        let s: PolarizationSetting = co.parse()?;
        correlation_from_rates(
            coincidence_probability(rho, s),
            coincidence_probability(rho, s.cross()),
        )
    };
    let (cl, cd, cc) = (c("HH")?, c("DD")?, c("RR")?);
    Ok(ReducedAnalysis {
        c_linear: cl,
        c_diagonal: cd,
        c_circular: cc,
        fidelity: reduced_fidelity(cl, cd, cc)?,
    })
}

/// Reduced-basis fidelity from measured records containing HH, HV, DD, DA,
/// RR and RL.
pub fn reduced_analysis(records: &[MeasurementRecord]) -> Result<ReducedAnalysis> {
    let find = |s: PolarizationSetting| records.iter().find(|r| r.setting == s);
    let missing: Vec<String> = reduced_settings_6()
        .into_iter()
        .filter(|s| find(*s).is_none())
        .map(|s| s.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingSettings(missing));
    }
    let c = |co: &str| -> Result<f64> {
        let s: PolarizationSetting = co.parse()?;
        degree_of_correlation(find(s).unwrap(), find(s.cross()).unwrap())
    };
    let (cl, cd, cc) = (c("HH")?, c("DD")?, c("RR")?);
    Ok(ReducedAnalysis {
        c_linear: cl,
        c_diagonal: cd,
        c_circular: cc,
        fidelity: reduced_fidelity(cl, cd, cc)?,
    })
}

#[derive(Serialize, Deserialize)]
struct CountsRow {
    xx_proj: String,
    x_proj: String,
    counts: u64,
    exposure: f64,
}

/// Reads `xx_proj,x_proj,counts,exposure` rows. All bad rows are reported.
pub fn read_counts_csv<R: Read>(reader: R) -> Result<Vec<MeasurementRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    let mut bad = Vec::new();
    let headers = rdr.headers()?.clone();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                bad.push(RowError {
                    line: e.position().map_or(0, |p| p.line()),
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        let row: CountsRow = match rec.deserialize(Some(&headers)) {
            Ok(r) => r,
            Err(e) => {
                bad.push(RowError {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let parsed = (|| -> Result<MeasurementRecord> {
            let setting = PolarizationSetting::new(row.xx_proj.parse()?, row.x_proj.parse()?);
            if !(row.exposure > 0.0 && row.exposure.is_finite()) {
                return Err(Error::invalid("exposure must be > 0"));
            }
            Ok(MeasurementRecord {
                setting,
                counts: row.counts,
                exposure: row.exposure,
            })
        })();
        match parsed {
            Ok(r) => out.push(r),
            Err(e) => bad.push(RowError {
                line,
                message: e.to_string(),
            }),
        }
    }
    if bad.is_empty() {
        Ok(out)
    } else {
        Err(Error::InvalidRows(bad))
    }
}

pub fn write_counts_csv<W: Write>(writer: W, records: &[MeasurementRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(CountsRow {
            xx_proj: r.setting.xx_proj.to_string(),
            x_proj: r.setting.x_proj.to_string(),
            counts: r.counts,
            exposure: r.exposure,
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
