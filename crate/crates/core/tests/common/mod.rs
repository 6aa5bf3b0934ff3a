#![allow(dead_code)]

use dualstark::model::BiasLookup;
use dualstark::planner::EnsembleRecord;
use dualstark::{DiodeModel, QuantumDot};

pub const FSS_A: f64 = 2.92;
pub const TAU_X_A: f64 = 255.0;
pub const TAU_XX_A: f64 = 181.0;
pub const SPAN_X_A: f64 = 1.08e-3;
pub const SPAN_XX_A: f64 = 0.76e-3;
pub const BIAS_WINDOW_A: (f64, f64) = (0.0, 0.25);

/// Polarizability giving an exact span `span` (eV) over `window` for dipole
/// `p` on `diode`, assuming the map stays monotonic there.
pub fn polarizability_for_span(diode: &DiodeModel, p: f64, span: f64, window: (f64, f64)) -> f64 {
    let f0 = diode.field_from_bias(window.0);
    let f1 = diode.field_from_bias(window.1);
    (p * (f0 - f1) - span) / (f0 * f0 - f1 * f1)
}

/// A dot whose X line spans 1.08 meV and XX line 0.76 meV over 0–0.25 V on
/// the default diode, with 2.92 µeV FSS and 255/181 ps lifetimes.
pub fn qd_a() -> QuantumDot {
    let d = DiodeModel::default();
    QuantumDot {
        id: "A".into(),
        e0_x: 1.5827,
        e0_xx: 1.5775,
        dipole_x: 0.30,
        dipole_xx: 0.25,
        polarizability_x: polarizability_for_span(&d, 0.30, SPAN_X_A, BIAS_WINDOW_A),
        polarizability_xx: polarizability_for_span(&d, 0.25, SPAN_XX_A, BIAS_WINDOW_A),
        fss: FSS_A,
        eigenaxis_angle: 0.0,
        lifetime_x: BiasLookup::constant(TAU_X_A),
        lifetime_xx: BiasLookup::constant(TAU_XX_A),
        g2_zero: 0.0,
        bias_range: BIAS_WINDOW_A,
        fss_table: None,
    }
}

pub const SHARED_TARGET: f64 = 1.5701;

/// 39 intervals sharing 1.5701 eV plus 12 scattered ones that do not.
pub fn shared_window_ensemble() -> Vec<EnsembleRecord> {
    let mut out = Vec::new();
    for i in 0..39 {
        let lo = 0.05e-3 + 1.1e-3 * ((i * 7) % 39) as f64 / 39.0;
        let hi = 0.05e-3 + 1.1e-3 * ((i * 11 + 3) % 39) as f64 / 39.0;
        let fss = 2.0 + 0.35 * (i % 17) as f64;
        out.push(
            EnsembleRecord::new(
                format!("qd{i:02}"),
                SHARED_TARGET - lo,
                SHARED_TARGET + hi,
                fss,
            )
            .unwrap(),
        );
    }
    for j in 0..12 {
        let c = 1.5600 + 0.0015 * j as f64 + if j >= 6 { 0.0170 } else { 0.0 };
        out.push(EnsembleRecord::new(format!("far{j:02}"), c - 0.5e-3, c + 0.5e-3, 6.0).unwrap());
    }
    out
}

/// Maximum stabbing count over all endpoints, lowest energy on ties.
pub fn brute_force_stab(records: &[EnsembleRecord]) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0usize);
    for e in records.iter().flat_map(|r| [r.e_min, r.e_max]) {
        let n = records
            .iter()
            .filter(|r| r.e_min <= e && e <= r.e_max)
            .count();
        if n > best.1 || (n == best.1 && e < best.0) {
            best = (e, n);
        }
    }
    best
}

/// `¼(2 − g² + 2(1 − g²)/(1 + x²))` with `x = δτ/ħ` evaluated from SI
/// constants.
pub fn fidelity_oracle(fss_uev: f64, tau_ps: f64, g2: f64) -> f64 {
    let hbar = 1.054_571_817e-34; // J·s
    let e = 1.602_176_634e-19; // J/eV
    let x = fss_uev * 1e-6 * e * tau_ps * 1e-12 / hbar;
    0.25 * (2.0 - g2 + 2.0 * (1.0 - g2) / (1.0 + x * x))
}
