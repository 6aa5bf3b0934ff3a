//! Ensemble statistics, the largest group of dots tunable into mutual
//! resonance, and matching to an external reference line.
//!
//! Run with `cargo run --example ensemble_planning`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use dualstark::planner::{best_bin_group, StarkParams};
use dualstark::units::{ghz_to_ev, TargetLine};
use dualstark::{
    ensemble_summary, gaussian_fit_histogram, group_at_target, max_resonance_group, DiodeModel,
    EnsembleRecord, StarkLine,
};

fn main() -> dualstark::Result<()> {
    let diode = DiodeModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let center = Normal::<f64>::new(1.579, 10.5e-3 / 2.355).unwrap();
    let range = Normal::<f64>::new(1.27e-3, 0.31e-3).unwrap();
    let fss = Normal::<f64>::new(7.92, 3.64).unwrap();

    let mut records = Vec::new();
    for i in 0..400 {
        let c: f64 = center.sample(&mut rng);
        let w: f64 = range.sample(&mut rng).abs();
        let s: f64 = fss.sample(&mut rng);
        records.push(EnsembleRecord::new(
            format!("qd{i:03}"),
            c - w / 2.0,
            c + w / 2.0,
            s.abs(),
        )?);
    }

    // one dot with a measured Stark map gets a concrete bias in every plan
    let line = StarkLine {
        e0: 1.5827,
        dipole: 0.3,
        polarizability: -118.882,
    };
    let (lo, hi) = line.achievable_range(&diode, (0.0, 0.25));
    let mut known = EnsembleRecord::new("qdA", lo, hi, 2.92)?;
    known.stark = Some(StarkParams {
        line,
        bias_range: (0.0, 0.25),
    });
    records.push(known);

    let summary = ensemble_summary(&records)?;
    println!(
        "{} dots: tuning range {:.2} +/- {:.2} meV, FSS {:.2} +/- {:.2} ueV",
        summary.count,
        summary.mean_range_ev * 1e3,
        summary.std_range_ev.unwrap_or(0.0) * 1e3,
        summary.mean_fss_uev,
        summary.std_fss_uev.unwrap_or(0.0)
    );

    let mids: Vec<f64> = records.iter().map(|r| 0.5 * (r.e_min + r.e_max)).collect();
    let g = gaussian_fit_histogram(&mids, summary.mean_range_ev)?;
    println!(
        "inhomogeneous line: center {:.4} eV, FWHM {:.2} meV ({} bins)",
        g.mean,
        g.fwhm * 1e3,
        g.n_bins
    );

    let plan = max_resonance_group(&records, &diode)?;
    println!(
        "\nlargest resonant group: {} dots at {:.6} eV",
        plan.coverage_count, plan.target_energy
    );
    let bins = best_bin_group(&records, summary.mean_range_ev, &diode)?;
    println!(
        "best histogram bin ({:.4} eV, {} dots): {} tunable to {:.6} eV",
        bins.bin_center_ev, bins.dots_in_bin, bins.plan.coverage_count, bins.plan.target_energy
    );

    // an external line quoted in GHz
    let reference = TargetLine::Ghz(0.5 * (lo + hi) / ghz_to_ev(1.0));
    let matched = group_at_target(&records, reference.energy_ev(), &diode);
    println!(
        "\n{} dots reach {:.6} eV:",
        matched.coverage_count,
        reference.energy_ev()
    );
    for m in &matched.members {
        if let Some(v) = m.bias {
            println!("  {} at {v:+.4} V", m.id);
        }
    }
    let unmapped = matched.members.iter().filter(|m| m.bias.is_none()).count();
    println!("  {unmapped} more without a measured Stark map");
    Ok(())
}
