//! Poisson coincidence counts for the 16-setting and reduced 6-setting
//! schemes, and the fidelity from correlation degrees.
//!
//! Run with `cargo run --example simulate_tomography`.

use dualstark::tomography::{exact_reduced_analysis, reduced_analysis, reduced_settings_6};
use dualstark::{
    simulate_counts, time_integrated_density_matrix, tomography_settings_16, CascadeParams,
};

fn main() -> dualstark::Result<()> {
    let rho = time_integrated_density_matrix(&CascadeParams::new(2.92, 255.0, 0.0)?)?;

    let full = simulate_counts(&rho, &tomography_settings_16(), 1e5, 42)?;
    println!("16-setting counts (1e5 pairs per setting):");
    for r in &full {
        println!("  {}  {:>6}", r.setting, r.counts);
    }

    let exact = exact_reduced_analysis(&rho)?;
    println!("\nbasis      exact    N=1e4    N=1e6");
    let small = reduced_analysis(&simulate_counts(&rho, &reduced_settings_6(), 1e4, 1)?)?;
    let large = reduced_analysis(&simulate_counts(&rho, &reduced_settings_6(), 1e6, 1)?)?;
    for (name, e, s, l) in [
        ("linear", exact.c_linear, small.c_linear, large.c_linear),
        (
            "diagonal",
            exact.c_diagonal,
            small.c_diagonal,
            large.c_diagonal,
        ),
        (
            "circular",
            exact.c_circular,
            small.c_circular,
            large.c_circular,
        ),
        ("fidelity", exact.fidelity, small.fidelity, large.fidelity),
    ] {
        println!("{name:<9} {e:+.4}  {s:+.4}  {l:+.4}");
    }
    Ok(())
}
