//! Fit the quadratic Stark map to a noisy bias scan, then invert it.
//!
//! Run with `cargo run --example fit_stark`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use dualstark::model::Line;
use dualstark::{fit_stark_parameters, DeviceConfig};

fn main() -> dualstark::Result<()> {
    let cfg = DeviceConfig::from_json_str(include_str!("data/qd_a.json"))?;
    let truth = cfg.dot.line(Line::X);

    // 26 biases over the usable window with 1 µeV spectrometer noise
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noise = Normal::new(0.0, 1e-6).unwrap();
    let scan: Vec<(f64, f64)> = (0..26)
        .map(|i| {
            let v = 0.01 * i as f64;
            (
                v,
                truth.energy_at_bias(&cfg.diode, v) + noise.sample(&mut rng),
            )
        })
        .collect();

    let fit = fit_stark_parameters(&scan, &cfg.diode)?;
    println!("parameter            fit              std.err       truth");
    println!(
        "E0 (eV)          {:>14.8} {:>12.2e} {:>12.6}",
        fit.e0, fit.std_errors[0], truth.e0
    );
    println!(
        "p (nm)           {:>14.6} {:>12.2e} {:>12.4}",
        fit.dipole, fit.std_errors[1], truth.dipole
    );
    println!(
        "beta (eV nm2/V2) {:>14.4} {:>12.2e} {:>12.4}",
        fit.polarizability, fit.std_errors[2], truth.polarizability
    );
    println!(
        "residual rms: {:.2} ueV over {} points",
        fit.residual_rms * 1e6,
        fit.n_points
    );

    let line = fit.line();
    let (lo, hi) = line.achievable_range(&cfg.diode, cfg.dot.bias_range);
    println!(
        "\nX tuning range: {lo:.6} .. {hi:.6} eV ({:.3} meV)",
        (hi - lo) * 1e3
    );
    for target in [lo, 0.5 * (lo + hi), hi, hi + 1e-4] {
        match line.solve_bias(&cfg.diode, cfg.dot.bias_range, target) {
            Ok(v) => println!("  E = {target:.6} eV  ->  V = {v:+.5} V"),
            Err(e) => println!("  E = {target:.6} eV  ->  {e}"),
        }
    }
    Ok(())
}
