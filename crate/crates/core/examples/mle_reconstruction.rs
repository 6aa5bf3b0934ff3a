//! Maximum-likelihood reconstruction of the two-photon density matrix from
//! simulated counts, compared against the generating state.
//!
//! Run with `cargo run --release --example mle_reconstruction`.

use dualstark::tomography::MleOptions;
use dualstark::{
    mle_reconstruct, simulate_counts, time_integrated_density_matrix, tomography_settings_16,
    CascadeParams,
};

fn main() -> dualstark::Result<()> {
    let truth = time_integrated_density_matrix(&CascadeParams::new(0.3, 255.0, 0.06)?)?;
    println!("true fidelity {:.4}\n", truth.fidelity_to_phi_plus());
    println!("pairs/setting  fidelity  trace dist  iters  min eig");
    for n in [1e3, 1e4, 1e5, 1e6] {
        let counts = simulate_counts(&truth, &tomography_settings_16(), n, 7)?;
        let r = mle_reconstruct(&counts, &MleOptions::default())?;
        println!(
            "{n:>13.0e}  {:.4}    {:.5}     {:>4}   {:+.1e}",
            r.fidelity,
            r.state.trace_distance(&truth),
            r.iterations,
            r.state.min_eigenvalue()
        );
    }

    let counts = simulate_counts(&truth, &tomography_settings_16(), 1e5, 7)?;
    let capped = mle_reconstruct(
        &counts,
        &MleOptions {
            max_iterations: 3,
            ..MleOptions::default()
        },
    )?;
    println!(
        "\ncapped at 3 iterations: converged = {}, last improvement {:.2e}, |grad| {:.2e}",
        capped.converged, capped.last_improvement, capped.gradient_norm
    );
    Ok(())
}
