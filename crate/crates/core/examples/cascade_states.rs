//! Two-photon states of the cascade: time-resolved precession and the
//! time-integrated mixture measured without timing resolution.
//!
//! Run with `cargo run --example cascade_states`.

use dualstark::cascade::BASIS_LABELS;
use dualstark::units::HBAR_EV_S;
use dualstark::{
    fidelity_formula, time_integrated_density_matrix, time_resolved_state, CascadeParams,
};

fn main() -> dualstark::Result<()> {
    let fss = 2.92;
    let period_ps = 2.0 * std::f64::consts::PI * HBAR_EV_S / (fss * 1e-6) * 1e12;
    println!("precession period for {fss} ueV: {period_ps:.1} ps");
    for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let s = time_resolved_state(fss, frac * period_ps)?;
        println!(
            "  t = {:>6.1} ps  f = {:.4}",
            frac * period_ps,
            s.fidelity_to_phi_plus()
        );
    }

    let params = CascadeParams::new(fss, 255.0, 0.0)?;
    let rho = time_integrated_density_matrix(&params)?;
    println!("\ntime-integrated state, x = {:.4}:", params.precession());
    for (i, label) in BASIS_LABELS.iter().enumerate() {
        let row: Vec<String> = (0..4)
            .map(|j| {
                let z = rho.matrix()[(i, j)];
                format!("{:+.4}{:+.4}i", z.re, z.im)
            })
            .collect();
        println!("  {label}  {}", row.join("  "));
    }
    println!(
        "fidelity {:.4} (closed form {:.4}), purity {:.4}",
        rho.fidelity_to_phi_plus(),
        fidelity_formula(fss, 255.0, 0.0)?,
        rho.purity()
    );

    println!("\nfss (ueV)  f(g2=0)  f(g2=0.06)");
    for s in [0.0, 0.5, 1.0, 2.0, 2.92, 5.0, 10.0] {
        println!(
            "{s:>8.2}   {:.4}   {:.4}",
            fidelity_formula(s, 255.0, 0.0)?,
            fidelity_formula(s, 255.0, 0.06)?
        );
    }
    Ok(())
}
