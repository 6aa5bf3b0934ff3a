//! Emitter and diode parameters, the DC Stark energy map, the AC Stark
//! FSS shift, and the inverse problems built on them: which bias reaches a
//! target energy, and which CW drive closes the fine-structure splitting.

use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use crate::cascade::fidelity_formula;
use crate::error::{Error, Result};
use crate::linalg::linear_lstsq;

/// Relative tolerance on `ħΩ = k·√P` when validating a [`CwDrive`].
const DRIVE_CONSISTENCY_TOL: f64 = 1e-9;

/// Which cascade transition a Stark map refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Line {
    X,
    XX,
}

/// Maps gate bias onto the field across the intrinsic region of a p-i-n
/// diode, `F = (V_bi − V) / d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiodeModel {
    /// Volts.
    pub built_in_voltage: f64,
    /// Nanometres.
    pub intrinsic_thickness: f64,
}

impl Default for DiodeModel {
    fn default() -> Self {
        Self {
            built_in_voltage: 1.5,
            intrinsic_thickness: 312.0,
        }
    }
}

impl DiodeModel {
    pub fn new(built_in_voltage: f64, intrinsic_thickness: f64) -> Result<Self> {
        let d = Self {
            built_in_voltage,
            intrinsic_thickness,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.built_in_voltage.is_finite() {
            return Err(Error::invalid("built_in_voltage must be finite"));
        }
        if !(self.intrinsic_thickness > 0.0 && self.intrinsic_thickness.is_finite()) {
            return Err(Error::invalid("intrinsic_thickness must be > 0"));
        }
        Ok(())
    }

    /// Field in V/nm at the given bias.
    pub fn field_from_bias(&self, bias: f64) -> f64 {
        (self.built_in_voltage - bias) / self.intrinsic_thickness
    }

    pub fn bias_from_field(&self, field: f64) -> f64 {
        self.built_in_voltage - field * self.intrinsic_thickness
    }
}

pub fn field_from_bias(diode: &DiodeModel, bias: f64) -> f64 {
    diode.field_from_bias(bias)
}

/// Quantum-confined Stark shift, `E₀ − p·F + β·F²`.
pub fn dc_stark_energy(e0: f64, dipole: f64, polarizability: f64, field: f64) -> f64 {
    e0 - dipole * field + polarizability * field * field
}

/// Stark coefficients of a single transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarkLine {
    /// Zero-field energy, eV.
    pub e0: f64,
    /// Permanent dipole over e, nm.
    pub dipole: f64,
    /// eV/(V/nm)².
    pub polarizability: f64,
}

impl StarkLine {
    pub fn energy_at_field(&self, field: f64) -> f64 {
        dc_stark_energy(self.e0, self.dipole, self.polarizability, field)
    }

    pub fn energy_at_bias(&self, diode: &DiodeModel, bias: f64) -> f64 {
        self.energy_at_field(diode.field_from_bias(bias))
    }

    /// `[E_min, E_max]` reached while the bias sweeps `bias_range`.
    pub fn achievable_range(&self, diode: &DiodeModel, bias_range: (f64, f64)) -> (f64, f64) {
        let mut lo = self.energy_at_bias(diode, bias_range.0);
        let mut hi = self.energy_at_bias(diode, bias_range.1);
        if lo > hi {
            std::mem::swap(&mut lo, &mut hi);
        }
        if self.polarizability != 0.0 {
            let f_vertex = self.dipole / (2.0 * self.polarizability);
            let v_vertex = diode.bias_from_field(f_vertex);
            if v_vertex > bias_range.0 && v_vertex < bias_range.1 {
                let e = self.energy_at_field(f_vertex);
                lo = lo.min(e);
                hi = hi.max(e);
            }
        }
        (lo, hi)
    }

    /// Bias inside `bias_range` at which this line emits at `target`.
    ///
    /// When two roots fall inside the window the smaller bias is returned.
    pub fn solve_bias(
        &self,
        diode: &DiodeModel,
        bias_range: (f64, f64),
        target: f64,
    ) -> Result<f64> {
        let (e_min, e_max) = self.achievable_range(diode, bias_range);
        let slack = 1e-15 * target.abs().max(1.0);
        if !(target >= e_min - slack && target <= e_max + slack) {
            return Err(Error::OutOfRange {
                target,
                min: e_min,
                max: e_max,
            });
        }

        // β F² − p F + (E₀ − target) = 0
        let a = self.polarizability;
        let b = -self.dipole;
        let c = self.e0 - target;
        let mut fields = Vec::with_capacity(2);
        if a == 0.0 {
            if b == 0.0 {
                // flat line: any bias reaches the (only) energy
                fields.push(diode.field_from_bias(bias_range.0));
            } else {
                fields.push(-c / b);
            }
        } else {
            let disc = (b * b - 4.0 * a * c).max(0.0);
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            if q != 0.0 {
                fields.push(q / a);
                fields.push(c / q);
            } else {
                fields.push(0.0);
            }
        }

        let width = bias_range.1 - bias_range.0;
        let tol = 1e-9 * width.max(1e-12);
        let mut best: Option<f64> = None;
        for f in fields {
            let v = diode.bias_from_field(f);
            if v >= bias_range.0 - tol && v <= bias_range.1 + tol {
                let v = v.clamp(bias_range.0, bias_range.1);
                let v = self.polish_root(diode, v, target, bias_range);
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        best.ok_or(Error::OutOfRange {
            target,
            min: e_min,
            max: e_max,
        })
    }

    // One Newton step in bias space; kept only if it lowers the residual.
    fn polish_root(&self, diode: &DiodeModel, v: f64, target: f64, range: (f64, f64)) -> f64 {
        let r0 = self.energy_at_bias(diode, v) - target;
        let f = diode.field_from_bias(v);
        let de_df = -self.dipole + 2.0 * self.polarizability * f;
        let de_dv = -de_df / diode.intrinsic_thickness;
        if de_dv == 0.0 || r0 == 0.0 {
            return v;
        }
        let v1 = (v - r0 / de_dv).clamp(range.0, range.1);
        let r1 = self.energy_at_bias(diode, v1) - target;
        if r1.abs() < r0.abs() {
            v1
        } else {
            v
        }
    }
}

/// Per-bias lookup with a scalar fallback. Interpolation is piecewise linear
/// and clamps to the end points outside the tabulated range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "LookupRepr", into = "LookupRepr")]
pub struct BiasLookup {
    pub fallback: f64,
    /// `(bias V, value)` sorted by bias.
    pub table: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LookupRepr {
    Scalar(f64),
    Table {
        fallback: f64,
        #[serde(default)]
        table: Vec<(f64, f64)>,
    },
}

impl From<LookupRepr> for BiasLookup {
    fn from(r: LookupRepr) -> Self {
        match r {
            LookupRepr::Scalar(v) => BiasLookup::constant(v),
            LookupRepr::Table { fallback, table } => BiasLookup::new(fallback, table),
        }
    }
}

impl From<BiasLookup> for LookupRepr {
    fn from(l: BiasLookup) -> Self {
        if l.table.is_empty() {
            LookupRepr::Scalar(l.fallback)
        } else {
            LookupRepr::Table {
                fallback: l.fallback,
                table: l.table,
            }
        }
    }
}

impl BiasLookup {
    pub fn constant(value: f64) -> Self {
        Self {
            fallback: value,
            table: Vec::new(),
        }
    }

    pub fn new(fallback: f64, mut table: Vec<(f64, f64)>) -> Self {
        table.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { fallback, table }
    }

    pub fn at(&self, bias: f64) -> f64 {
        let t = &self.table;
        match t.len() {
            0 => self.fallback,
            1 => t[0].1,
            _ => {
                if bias <= t[0].0 {
                    return t[0].1;
                }
                if bias >= t[t.len() - 1].0 {
                    return t[t.len() - 1].1;
                }
                let i = t.partition_point(|p| p.0 <= bias);
                let (x0, y0) = t[i - 1];
                let (x1, y1) = t[i];
                if x1 == x0 {
                    return y1;
                }
                y0 + (y1 - y0) * (bias - x0) / (x1 - x0)
            }
        }
    }

    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.fallback).chain(self.table.iter().map(|p| p.1))
    }
}

/// Static emitter parameters.
///
/// JSON keys mirror the field names; energies in eV, FSS in µeV, lifetimes
/// in ps, bias in V. `lifetime_x`/`lifetime_xx` accept either a number or
/// `{"fallback": ps, "table": [[bias, ps], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumDot {
    pub id: String,
    pub e0_x: f64,
    pub e0_xx: f64,
    pub dipole_x: f64,
    pub dipole_xx: f64,
    pub polarizability_x: f64,
    pub polarizability_xx: f64,
    /// Intrinsic FSS, µeV.
    pub fss: f64,
    /// Radians.
    #[serde(default)]
    pub eigenaxis_angle: f64,
    pub lifetime_x: BiasLookup,
    pub lifetime_xx: BiasLookup,
    #[serde(default)]
    pub g2_zero: f64,
    pub bias_range: (f64, f64),
    /// Optional per-bias FSS in µeV; when absent `fss` holds at every bias.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fss_table: Option<Vec<(f64, f64)>>,
}

impl QuantumDot {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.e0_x,
            self.e0_xx,
            self.dipole_x,
            self.dipole_xx,
            self.polarizability_x,
            self.polarizability_xx,
            self.fss,
            self.eigenaxis_angle,
            self.g2_zero,
            self.bias_range.0,
            self.bias_range.1,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "dot {}: non-finite parameter",
                self.id
            )));
        }
        if !(self.e0_x > 0.0 && self.e0_xx > 0.0) {
            return Err(Error::invalid(format!(
                "dot {}: e0_x and e0_xx must be > 0",
                self.id
            )));
        }
        if self.fss < 0.0 {
            return Err(Error::invalid(format!("dot {}: fss must be >= 0", self.id)));
        }
        if !(0.0..=1.0).contains(&self.g2_zero) {
            return Err(Error::invalid(format!(
                "dot {}: g2_zero must lie in [0, 1]",
                self.id
            )));
        }
        if !(self.bias_range.0 < self.bias_range.1) {
            return Err(Error::invalid(format!(
                "dot {}: bias_range needs V_min < V_max",
                self.id
            )));
        }
        for (name, l) in [
            ("lifetime_x", &self.lifetime_x),
            ("lifetime_xx", &self.lifetime_xx),
        ] {
            if l.values().any(|v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::invalid(format!(
                    "dot {}: {name} values must be > 0",
                    self.id
                )));
            }
        }
        if let Some(t) = &self.fss_table {
            if t.iter().any(|p| !(p.1 >= 0.0) || !p.0.is_finite()) {
                return Err(Error::invalid(format!(
                    "dot {}: fss_table values must be >= 0",
                    self.id
                )));
            }
        }
        Ok(())
    }

    pub fn line(&self, line: Line) -> StarkLine {
        match line {
            Line::X => StarkLine {
                e0: self.e0_x,
                dipole: self.dipole_x,
                polarizability: self.polarizability_x,
            },
            Line::XX => StarkLine {
                e0: self.e0_xx,
                dipole: self.dipole_xx,
                polarizability: self.polarizability_xx,
            },
        }
    }

    pub fn fss_at(&self, bias: f64) -> f64 {
        match &self.fss_table {
            Some(t) if !t.is_empty() => BiasLookup::new(self.fss, t.clone()).at(bias),
            _ => self.fss,
        }
    }

    pub fn lifetime_x_at(&self, bias: f64) -> f64 {
        self.lifetime_x.at(bias)
    }

    pub fn lifetime_xx_at(&self, bias: f64) -> f64 {
        self.lifetime_xx.at(bias)
    }

    pub fn achievable_range(&self, diode: &DiodeModel, line: Line) -> (f64, f64) {
        self.line(line).achievable_range(diode, self.bias_range)
    }
}

/// Everything needed to plan an operating point for one dot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub dot: QuantumDot,
    #[serde(default)]
    pub diode: DiodeModel,
    /// CW calibration constant `k` in µeV/√µW.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cw_cal_constant: Option<f64>,
}

impl DeviceConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: DeviceConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: DeviceConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.dot.validate()?;
        self.diode.validate()?;
        if let Some(k) = self.cw_cal_constant {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::invalid("cw_cal_constant must be > 0"));
            }
        }
        Ok(())
    }
}

pub fn solve_bias_for_energy(
    qd: &QuantumDot,
    diode: &DiodeModel,
    line: Line,
    target: f64,
) -> Result<f64> {
    qd.line(line).solve_bias(diode, qd.bias_range, target)
}

/// Result of fitting `E(V)` to the Stark map through the diode field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarkFit {
    pub e0: f64,
    pub dipole: f64,
    pub polarizability: f64,
    /// Standard errors of `(e0, dipole, polarizability)`.
    pub std_errors: [f64; 3],
    pub covariance: [[f64; 3]; 3],
    /// eV.
    pub residual_rms: f64,
    pub n_points: usize,
}

impl StarkFit {
    pub fn line(&self) -> StarkLine {
        StarkLine {
            e0: self.e0,
            dipole: self.dipole,
            polarizability: self.polarizability,
        }
    }
}

/// Linear least squares of energy against `field_from_bias(bias)`.
///
/// The field axis is centred and scaled before solving; the coefficients and
/// their covariance are mapped back to `(E₀, p, β)` afterwards.
pub fn fit_stark_parameters(scan: &[(f64, f64)], diode: &DiodeModel) -> Result<StarkFit> {
    diode.validate()?;
    if scan.iter().any(|(v, e)| !v.is_finite() || !e.is_finite()) {
        return Err(Error::invalid("scan contains non-finite values"));
    }
    let mut biases: Vec<f64> = scan.iter().map(|p| p.0).collect();
    biases.sort_by(f64::total_cmp);
    biases.dedup();
    if biases.len() < 3 {
        return Err(Error::Degenerate(format!(
            "need at least 3 distinct bias points, got {}",
            biases.len()
        )));
    }

    let fields: Vec<f64> = scan.iter().map(|p| diode.field_from_bias(p.0)).collect();
    let n = fields.len();
    let f_center = fields.iter().sum::<f64>() / n as f64;
    let f_scale = fields
        .iter()
        .map(|f| (f - f_center).abs())
        .fold(0.0, f64::max);
    if f_scale == 0.0 {
        return Err(Error::Degenerate("all bias points map to one field".into()));
    }
    let e_ref = scan.iter().map(|p| p.1).sum::<f64>() / n as f64;

    let design = DMatrix::from_fn(n, 3, |i, j| {
        let u = (fields[i] - f_center) / f_scale;
        u.powi(j as i32)
    });
    let y = DVector::from_iterator(n, scan.iter().map(|p| p.1 - e_ref));
    let fit = linear_lstsq(&design, &y)?;
    let (c0, c1, c2) = (fit.params[0], fit.params[1], fit.params[2]);

    let (fc, fs) = (f_center, f_scale);
    let beta = c2 / (fs * fs);
    let dipole = -(c1 / fs - 2.0 * c2 * fc / (fs * fs));
    let e0 = e_ref + c0 - c1 * fc / fs + c2 * fc * fc / (fs * fs);

    // d(e0, p, β)/d(c0, c1, c2)
    let jac = Matrix3::new(
        1.0,
        -fc / fs,
        fc * fc / (fs * fs),
        0.0,
        -1.0 / fs,
        2.0 * fc / (fs * fs),
        0.0,
        0.0,
        1.0 / (fs * fs),
    );
    let cov_c = Matrix3::from_fn(|i, j| fit.covariance[(i, j)]);
    let cov = jac * cov_c * jac.transpose();
    let covariance = [
        [cov[(0, 0)], cov[(0, 1)], cov[(0, 2)]],
        [cov[(1, 0)], cov[(1, 1)], cov[(1, 2)]],
        [cov[(2, 0)], cov[(2, 1)], cov[(2, 2)]],
    ];

    let line = StarkLine {
        e0,
        dipole,
        polarizability: beta,
    };
    let rss: f64 = scan
        .iter()
        .zip(&fields)
        .map(|((_, e), f)| (line.energy_at_field(*f) - e).powi(2))
        .sum();

    Ok(StarkFit {
        e0,
        dipole,
        polarizability: beta,
        std_errors: [
            cov[(0, 0)].max(0.0).sqrt(),
            cov[(1, 1)].max(0.0).sqrt(),
            cov[(2, 2)].max(0.0).sqrt(),
        ],
        covariance,
        residual_rms: (rss / n as f64).sqrt(),
        n_points: n,
    })
}

/// Shift of the X_H level (µeV) from a detuned CW drive,
/// `(δ/2)·(1 − √(Ω² + δ²)/|δ|)`.
pub fn ac_stark_shift(rabi_energy: f64, detuning: f64) -> Result<f64> {
    if detuning == 0.0 {
        return Err(Error::SingularDetuning);
    }
    // 1 − √(1+r²) = −r²/(1+√(1+r²)), free of cancellation at small drive
    let r = rabi_energy / detuning;
    let s = (1.0 + r * r).sqrt();
    Ok(-0.5 * detuning * r * r / (1.0 + s))
}

/// `ħΩ = k·√P`.
pub fn rabi_from_power(power: f64, cal_constant: f64) -> Result<f64> {
    if !(power >= 0.0) {
        return Err(Error::Domain(format!(
            "laser power must be >= 0, got {power}"
        )));
    }
    Ok(cal_constant * power.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CwDrive {
    /// `ħδ_CW = E_XX − ħω_CW`, µeV; positive is red-detuned.
    pub detuning: f64,
    /// `ħΩ_CW`, µeV.
    pub rabi_energy: f64,
    /// µW.
    pub power: f64,
    /// µeV/√µW.
    pub cal_constant: f64,
}

impl CwDrive {
    pub fn from_power(detuning: f64, power: f64, cal_constant: f64) -> Result<Self> {
        let rabi_energy = rabi_from_power(power, cal_constant)?;
        Ok(Self {
            detuning,
            rabi_energy,
            power,
            cal_constant,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.power >= 0.0) {
            return Err(Error::Domain("power must be >= 0".into()));
        }
        let expect = self.cal_constant * self.power.sqrt();
        let scale = expect
            .abs()
            .max(self.rabi_energy.abs())
            .max(f64::MIN_POSITIVE);
        if (self.rabi_energy - expect).abs() > DRIVE_CONSISTENCY_TOL * scale {
            return Err(Error::invalid(
                "rabi_energy inconsistent with cal_constant·√power",
            ));
        }
        Ok(())
    }

    pub fn shift(&self) -> Result<f64> {
        ac_stark_shift(self.rabi_energy, self.detuning)
    }
}

/// Closed-form inverse of [`ac_stark_shift`]: the drive whose shift is
/// exactly `−fss`.
pub fn solve_cw_drive_for_fss(fss: f64, detuning: f64, cal_constant: f64) -> Result<CwDrive> {
    if !(fss >= 0.0) {
        return Err(Error::Domain(format!("fss must be >= 0, got {fss}")));
    }
    if !(detuning > 0.0) {
        return Err(Error::Convention(format!(
            "CW drive must be red-detuned (detuning > 0), got {detuning}"
        )));
    }
    if !(cal_constant > 0.0 && cal_constant.is_finite()) {
        return Err(Error::invalid("cal_constant must be > 0"));
    }
    // (2s+δ)² − δ² = 4s(s+δ)
    let rabi_energy = 2.0 * (fss * (fss + detuning)).sqrt();
    let power = (rabi_energy / cal_constant).powi(2);
    Ok(CwDrive {
        detuning,
        rabi_energy,
        power,
        cal_constant,
    })
}

/// Derives `k` from one measured point where a power `power` at `detuning`
/// cancelled a splitting `fss`.
pub fn calibrate_from_cancellation(fss: f64, detuning: f64, power: f64) -> Result<f64> {
    if !(power > 0.0) {
        return Err(Error::Domain("calibration power must be > 0".into()));
    }
    let drive = solve_cw_drive_for_fss(fss, detuning, 1.0)?;
    Ok(drive.rabi_energy / power.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub bias: f64,
    pub drive: CwDrive,
    pub predicted_e_x: f64,
    pub predicted_e_xx: f64,
    /// µeV.
    pub residual_fss: f64,
    pub predicted_fidelity: f64,
}

/// Bias from the X Stark map, then the CW drive that cancels the FSS at that
/// bias, then the predicted fidelity.
pub fn plan_operating_point(
    qd: &QuantumDot,
    diode: &DiodeModel,
    target_e_x: f64,
    detuning: f64,
    cal_constant: f64,
) -> Result<OperatingPoint> {
    if !(detuning > 0.0) {
        return Err(Error::Convention(format!(
            "CW drive must be red-detuned (detuning > 0), got {detuning}"
        )));
    }
    let bias = solve_bias_for_energy(qd, diode, Line::X, target_e_x)?;
    let fss = qd.fss_at(bias);
    let drive = solve_cw_drive_for_fss(fss, detuning, cal_constant)?;
    let residual_fss = (fss + drive.shift()?).abs();
    let predicted_fidelity = fidelity_formula(residual_fss, qd.lifetime_x_at(bias), qd.g2_zero)?;
    Ok(OperatingPoint {
        bias,
        drive,
        predicted_e_x: qd.line(Line::X).energy_at_bias(diode, bias),
        predicted_e_xx: qd.line(Line::XX).energy_at_bias(diode, bias),
        residual_fss,
        predicted_fidelity,
    })
}

/// One row of a fidelity-versus-bias series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSweepRow {
    pub bias_v: f64,
    pub e_x_ev: f64,
    pub e_xx_ev: f64,
    pub fss_uev: f64,
    pub tau_x_ps: f64,
    pub fidelity_untuned: f64,
    pub rabi_uev: f64,
    pub power_uw: f64,
    pub fidelity_tuned: f64,
}

/// Predicted fidelity with and without FSS cancellation at `steps` evenly
/// spaced biases across the dot's window.
pub fn fidelity_vs_bias(
    qd: &QuantumDot,
    diode: &DiodeModel,
    detuning: f64,
    cal_constant: f64,
    steps: usize,
) -> Result<Vec<BiasSweepRow>> {
    if steps < 2 {
        return Err(Error::invalid("sweep needs at least 2 steps"));
    }
    let (v0, v1) = qd.bias_range;
    (0..steps)
        .map(|i| {
            let bias = v0 + (v1 - v0) * i as f64 / (steps - 1) as f64;
            let fss = qd.fss_at(bias);
            let tau = qd.lifetime_x_at(bias);
            let drive = solve_cw_drive_for_fss(fss, detuning, cal_constant)?;
            let residual = (fss + drive.shift()?).abs();
            Ok(BiasSweepRow {
                bias_v: bias,
                e_x_ev: qd.line(Line::X).energy_at_bias(diode, bias),
                e_xx_ev: qd.line(Line::XX).energy_at_bias(diode, bias),
                fss_uev: fss,
                tau_x_ps: tau,
                fidelity_untuned: fidelity_formula(fss, tau, qd.g2_zero)?,
                rabi_uev: drive.rabi_energy,
                power_uw: drive.power,
                fidelity_tuned: fidelity_formula(residual, tau, qd.g2_zero)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diode_300() -> DiodeModel {
        DiodeModel::new(1.5, 300.0).unwrap()
    }

    fn dot() -> QuantumDot {
        QuantumDot {
            id: "t".into(),
            e0_x: 1.5800,
            e0_xx: 1.5780,
            dipole_x: 0.3,
            dipole_xx: 0.25,
            polarizability_x: -118.9,
            polarizability_xx: -80.0,
            fss: 2.92,
            eigenaxis_angle: 0.0,
            lifetime_x: BiasLookup::constant(255.0),
            lifetime_xx: BiasLookup::constant(181.0),
            g2_zero: 0.0,
            bias_range: (0.0, 0.25),
            fss_table: None,
        }
    }

    #[test]
    fn field_examples() {
        let d = diode_300();
        assert_eq!(d.field_from_bias(1.5), 0.0);
        assert!((d.field_from_bias(0.0) - 0.005).abs() < 1e-15);
        assert!((d.field_from_bias(0.25) - 0.004_166_666_666_7).abs() < 1e-12);
    }

    #[test]
    fn dc_stark_examples() {
        assert_eq!(dc_stark_energy(1.5790, 0.7, -3.0, 0.0), 1.5790);
        let e = dc_stark_energy(1.5790, 0.20, -1.0, 0.005);
        assert!((e - 1.577_975).abs() < 1e-15);
    }

    #[test]
    fn diode_rejects_zero_thickness() {
        assert!(DiodeModel::new(1.5, 0.0).is_err());
    }

    #[test]
    fn fit_two_biases_is_degenerate() {
        let scan = [(0.0, 1.58), (0.1, 1.581), (0.1, 1.5811), (0.0, 1.5801)];
        assert!(matches!(
            fit_stark_parameters(&scan, &diode_300()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn solve_bias_round_trip() {
        let qd = dot();
        let d = DiodeModel::default();
        let target = qd.line(Line::X).energy_at_bias(&d, 0.10);
        let v = solve_bias_for_energy(&qd, &d, Line::X, target).unwrap();
        assert!((v - 0.10).abs() < 1e-9);
    }

    #[test]
    fn solve_bias_out_of_range_reports_interval() {
        let qd = dot();
        let d = DiodeModel::default();
        let (lo, hi) = qd.achievable_range(&d, Line::X);
        match solve_bias_for_energy(&qd, &d, Line::X, hi + 1e-4) {
            Err(Error::OutOfRange { min, max, .. }) => {
                assert_eq!(min, lo);
                assert_eq!(max, hi);
            }
            other => panic!("expected out-of-range, got {other:?}"),
        }
    }

    #[test]
    fn two_roots_picks_smaller_bias() {
        // vertex inside the window: F_v = p/(2β) = 0.0044 V/nm -> V = 1.5 - 1.32 = 0.18
        let line = StarkLine {
            e0: 1.58,
            dipole: -0.88,
            polarizability: -100.0,
        };
        let d = DiodeModel::new(1.5, 300.0).unwrap();
        let range = (0.0, 0.4);
        let e_hi = line.energy_at_bias(&d, 0.30);
        let e_lo = line.energy_at_bias(&d, 0.06);
        assert!((e_hi - e_lo).abs() < 1e-15, "symmetric about the vertex");
        let v = line.solve_bias(&d, range, e_hi).unwrap();
        assert!((v - 0.06).abs() < 1e-7, "got {v}");
    }

    #[test]
    fn ac_stark_examples() {
        assert_eq!(ac_stark_shift(0.0, 303.0).unwrap(), 0.0);
        let s = ac_stark_shift(303.0, 303.0).unwrap();
        assert!((s - 151.5 * (1.0 - 2f64.sqrt())).abs() < 1e-10);
        assert!((s + 62.76).abs() < 0.01);
        let s = ac_stark_shift(59.78, 303.0).unwrap();
        assert!((s + 2.92).abs() < 0.005);
        assert!(matches!(
            ac_stark_shift(10.0, 0.0),
            Err(Error::SingularDetuning)
        ));
    }

    #[test]
    fn ac_stark_blue_detuning_shifts_up() {
        assert!(ac_stark_shift(50.0, -303.0).unwrap() > 0.0);
    }

    #[test]
    fn rabi_examples() {
        assert_eq!(rabi_from_power(0.0, 3.0).unwrap(), 0.0);
        assert!((rabi_from_power(14.6, 15.645).unwrap() - 59.78).abs() < 0.01);
        let p = 3.7;
        assert_eq!(
            rabi_from_power(4.0 * p, 15.645).unwrap(),
            2.0 * rabi_from_power(p, 15.645).unwrap()
        );
        assert!(matches!(rabi_from_power(-1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn cw_drive_examples() {
        let d = solve_cw_drive_for_fss(0.0, 303.0, 15.645).unwrap();
        assert_eq!(d.rabi_energy, 0.0);
        assert_eq!(d.power, 0.0);
        let d = solve_cw_drive_for_fss(2.92, 303.0, 15.645).unwrap();
        assert!((d.rabi_energy - 59.78).abs() < 0.01);
        assert!((d.shift().unwrap() + 2.92).abs() < 1e-9);
        d.validate().unwrap();
        let d = solve_cw_drive_for_fss(2.92, 151.5, 15.645).unwrap();
        assert!((d.rabi_energy - 42.47).abs() < 0.01);
        assert!(matches!(
            solve_cw_drive_for_fss(2.92, -303.0, 1.0),
            Err(Error::Convention(_))
        ));
        assert!(matches!(
            solve_cw_drive_for_fss(2.92, 0.0, 1.0),
            Err(Error::Convention(_))
        ));
    }

    #[test]
    fn calibration_matches_reference_operating_point() {
        let k = calibrate_from_cancellation(2.92, 303.0, 14.6).unwrap();
        assert!((k - 15.645).abs() < 0.005, "k = {k}");
    }

    #[test]
    fn lifetime_lookup_interpolates_and_clamps() {
        let l = BiasLookup::new(250.0, vec![(0.2, 300.0), (0.0, 200.0)]);
        assert_eq!(l.at(-1.0), 200.0);
        assert_eq!(l.at(1.0), 300.0);
        assert!((l.at(0.05) - 225.0).abs() < 1e-12);
        assert_eq!(BiasLookup::constant(255.0).at(0.3), 255.0);
    }

    #[test]
    fn lookup_json_forms() {
        let l: BiasLookup = serde_json::from_str("255.0").unwrap();
        assert_eq!(l, BiasLookup::constant(255.0));
        let l: BiasLookup =
            serde_json::from_str(r#"{"fallback": 255.0, "table": [[0.1, 255.0], [0.0, 240.0]]}"#)
                .unwrap();
        assert_eq!(l.table[0], (0.0, 240.0));
    }

    #[test]
    fn validation_rejects_bad_dots() {
        let mut q = dot();
        q.g2_zero = 1.5;
        assert!(q.validate().is_err());
        let mut q = dot();
        q.fss = -1.0;
        assert!(q.validate().is_err());
        let mut q = dot();
        q.bias_range = (0.3, 0.1);
        assert!(q.validate().is_err());
        let mut q = dot();
        q.lifetime_x = BiasLookup::constant(0.0);
        assert!(q.validate().is_err());
        dot().validate().unwrap();
    }

    #[test]
    fn operating_point_zero_fss() {
        let mut q = dot();
        q.fss = 0.0;
        q.g2_zero = 0.1;
        let d = DiodeModel::default();
        let target = q.line(Line::X).energy_at_bias(&d, 0.12);
        let op = plan_operating_point(&q, &d, target, 303.0, 15.645).unwrap();
        assert_eq!(op.drive.power, 0.0);
        let g = 0.1;
        assert!((op.predicted_fidelity - (2.0 - g + 2.0 * (1.0 - g)) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn fss_table_used_per_bias() {
        let mut q = dot();
        q.fss_table = Some(vec![(0.0, 2.0), (0.2, 4.0)]);
        assert!((q.fss_at(0.1) - 3.0).abs() < 1e-12);
    }
}
