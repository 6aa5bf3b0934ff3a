//! Pick a bias for a target X energy and the CW drive that closes the
//! fine-structure splitting there.
//!
//! Run with `cargo run --example tune_operating_point`.

use dualstark::model::{ac_stark_shift, calibrate_from_cancellation, Line};
use dualstark::{fidelity_formula, plan_operating_point, solve_cw_drive_for_fss, DeviceConfig};

fn main() -> dualstark::Result<()> {
    let cfg = DeviceConfig::from_json_str(include_str!("data/qd_a.json"))?;
    let dot = &cfg.dot;
    let detuning = 303.0;

    // calibration: a measured power that cancelled the splitting fixes k
    let k = calibrate_from_cancellation(dot.fss, detuning, 14.6)?;
    println!("calibration constant k = {k:.4} ueV/sqrt(uW)");

    let drive = solve_cw_drive_for_fss(dot.fss, detuning, k)?;
    println!(
        "cancel {} ueV at {detuning} ueV detuning: Omega = {:.4} ueV, P = {:.3} uW, shift = {:.3e} ueV",
        dot.fss,
        drive.rabi_energy,
        drive.power,
        ac_stark_shift(drive.rabi_energy, detuning)?
    );

    let untuned = fidelity_formula(dot.fss, dot.lifetime_x.fallback, dot.g2_zero)?;
    println!("fidelity before cancellation: {untuned:.4}\n");

    let (lo, hi) = dot.achievable_range(&cfg.diode, Line::X);
    println!("target E_X (eV)   bias (V)   E_XX (eV)     P (uW)   f");
    for i in 0..=4 {
        let target = lo + (hi - lo) * i as f64 / 4.0;
        let op = plan_operating_point(dot, &cfg.diode, target, detuning, k)?;
        println!(
            "{target:.6}      {:+.5}   {:.6}   {:>7.3}   {:.4}",
            op.bias, op.predicted_e_xx, op.drive.power, op.predicted_fidelity
        );
    }

    match plan_operating_point(dot, &cfg.diode, hi + 5e-4, detuning, k) {
        Ok(_) => unreachable!(),
        Err(e) => println!("\nout of reach: {e}"),
    }
    Ok(())
}
