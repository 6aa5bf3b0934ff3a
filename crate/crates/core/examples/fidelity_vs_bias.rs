//! Predicted fidelity across the bias window, with and without FSS
//! cancellation, as plot-ready CSV on stdout.
//!
//! Run with `cargo run --example fidelity_vs_bias > sweep.csv`.

use dualstark::model::{fidelity_vs_bias, BiasLookup};
use dualstark::DeviceConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = DeviceConfig::from_json_str(include_str!("data/qd_a.json"))?;
    // lifetime shortening and FSS drift with bias, as tabulated lookups
    cfg.dot.lifetime_x = BiasLookup::new(255.0, vec![(0.0, 262.0), (0.25, 248.0)]);
    cfg.dot.fss_table = Some(vec![(0.0, 3.4), (0.125, 2.92), (0.25, 2.5)]);

    let k = cfg.cw_cal_constant.expect("sample config carries k");
    let rows = fidelity_vs_bias(&cfg.dot, &cfg.diode, 303.0, k, 26)?;
    let mut w = csv::Writer::from_writer(std::io::stdout());
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
