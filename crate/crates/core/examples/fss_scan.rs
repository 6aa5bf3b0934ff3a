//! Fine-structure splitting and eigenaxis from a half-wave-plate scan of the
//! XX−X energy difference.
//!
//! Run with `cargo run --example fss_scan`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use dualstark::tomography::scan::scan_model;
use dualstark::tomography::{extract_fss_polarization_scan, PolarizationScanPoint};

fn main() -> dualstark::Result<()> {
    let (fss, axis, offset) = (2.92, 0.35, 2400.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let points: Vec<PolarizationScanPoint> = (0..36)
        .map(|i| {
            let th = (5.0 * i as f64).to_radians();
            PolarizationScanPoint {
                hwp_angle: th,
                energy_diff: scan_model(fss, axis, offset, th) + noise.sample(&mut rng),
            }
        })
        .collect();

    let fit = extract_fss_polarization_scan(&points)?;
    println!(
        "fss     {:.3} +/- {:.3} ueV (truth {fss})",
        fit.fss, fit.fss_std_error
    );
    match fit.axis_angle_std_error {
        Some(se) => println!(
            "axis    {:.2} +/- {:.2} deg (truth {:.2})",
            fit.axis_angle.to_degrees(),
            se.to_degrees(),
            axis.to_degrees()
        ),
        None => println!("axis    indeterminate"),
    }
    println!(
        "offset  {:.3} ueV, residual rms {:.3} ueV",
        fit.offset, fit.residual_rms
    );

    // a splitting already cancelled leaves nothing to orient
    let flat: Vec<PolarizationScanPoint> = points
        .iter()
        .map(|p| PolarizationScanPoint {
            energy_diff: offset + noise.sample(&mut rng),
            ..*p
        })
        .collect();
    let fit = extract_fss_polarization_scan(&flat)?;
    println!(
        "\ncancelled: fss {:.3} +/- {:.3} ueV, angle indeterminate = {}",
        fit.fss, fit.fss_std_error, fit.angle_indeterminate
    );
    Ok(())
}
