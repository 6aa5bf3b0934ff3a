//! Modeling and planning toolkit for quantum-dot entangled-photon sources
//! tuned by a DC Stark field (emission energy) and a detuned CW laser
//! (fine-structure splitting).
//!
//! - [`model`]: Stark energy map, AC Stark FSS shift and the operating-point
//!   solvers.
//! - [`cascade`]: two-photon density matrices of the cascade and the
//!   entanglement fidelity.
//! - [`tomography`]: projective coincidence simulation, reduced-basis
//!   fidelity, maximum-likelihood reconstruction and the HWP-scan FSS fit.
//! - [`planner`]: tuning intervals across an ensemble of dots, resonance
//!   grouping and distribution statistics.
//! - [`cli`]: the `dualstark` command-line front end.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cascade;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod model;
pub mod planner;
pub mod tomography;
pub mod units;

pub use cascade::{
    fidelity_formula, fidelity_to_phi_plus, ideal_bell_state, time_integrated_density_matrix,
    time_resolved_state, CascadeParams, TwoPhotonState,
};
pub use error::{Error, Result};
pub use model::{
    ac_stark_shift, dc_stark_energy, field_from_bias, fit_stark_parameters, plan_operating_point,
    rabi_from_power, solve_bias_for_energy, solve_cw_drive_for_fss, CwDrive, DeviceConfig,
    DiodeModel, Line, OperatingPoint, QuantumDot, StarkLine,
};
pub use planner::{
    ensemble_summary, gaussian_fit_histogram, group_at_target, max_resonance_group, EnsembleRecord,
    TuningPlan,
};
pub use tomography::{
    coincidence_probability, degree_of_correlation, mle_reconstruct, reduced_fidelity,
    simulate_counts, tomography_settings_16, MeasurementRecord, PolarizationSetting,
};
