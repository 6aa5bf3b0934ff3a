//! Command-line front end.
//!
//! Exit codes: 0 success, 2 input or configuration error, 3 target outside
//! the physically reachable range, 4 numerical non-convergence.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::cascade::{time_integrated_density_matrix, CascadeParams, BASIS_LABELS};
use crate::error::{Error, Result};
use crate::model::{
    fidelity_vs_bias, fit_stark_parameters, plan_operating_point, DeviceConfig, DiodeModel,
};
use crate::planner::{
    best_bin_group, ensemble_summary, gaussian_fit_histogram, group_at_target, load_ensemble,
    max_resonance_group,
};
use crate::tomography::{
    mle_reconstruct, read_counts_csv, reduced_analysis, reduced_settings_6, simulate_counts,
    tomography_settings_16, write_counts_csv, MleOptions,
};
use crate::units::TargetLine;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_OUT_OF_RANGE: i32 = 3;
pub const EXIT_NO_CONVERGENCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "dualstark",
    version,
    about = "Stark-tuned entangled-photon source toolkit"
)]
pub struct Cli {
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Output format where a command supports more than one.
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,

    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SettingsSet {
    #[value(name = "16")]
    Full16,
    #[value(name = "reduced6")]
    Reduced6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TomographyMethod {
    Mle,
    Reduced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnergyUnit {
    Ev,
    Ghz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlanMode {
    Stabbing,
    Bins,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit (E0, p, beta) to a bias scan CSV with columns bias_v,energy_ev.
    FitStark {
        scan_csv: PathBuf,
        /// Diode JSON {built_in_voltage, intrinsic_thickness}; defaults to 1.5 V / 312 nm.
        #[arg(long)]
        diode: Option<PathBuf>,
    },
    /// Solve bias and CW drive for a target X energy with zero FSS.
    Tune {
        device_json: PathBuf,
        /// Target X energy in eV.
        #[arg(long = "target-ex")]
        target_ex: f64,
        /// CW detuning below the XX->X_H transition, ueV.
        #[arg(long, default_value_t = 303.0)]
        detuning: f64,
        /// CW calibration constant, ueV per sqrt(uW); overrides the config.
        #[arg(long)]
        cal_constant: Option<f64>,
    },
    /// Simulate Poisson coincidence counts for the dot's time-integrated state.
    Simulate {
        device_json: PathBuf,
        /// Mean pairs per setting.
        #[arg(long)]
        pairs: f64,
        #[arg(long, value_enum, default_value = "16")]
        settings: SettingsSet,
        /// Bias at which lifetime and FSS are looked up.
        #[arg(long)]
        bias: Option<f64>,
        /// Residual FSS in ueV (0 models a fully cancelled splitting).
        #[arg(long)]
        residual_fss: Option<f64>,
    },
    /// Reconstruct the state or the reduced fidelity from a counts CSV.
    Tomography {
        counts_csv: PathBuf,
        /// mle needs an informationally complete set; reduced needs HH, HV, DD, DA, RR, RL.
        #[arg(long, value_enum)]
        method: TomographyMethod,
        /// Iteration cap for mle; hitting it exits with code 4.
        #[arg(long, default_value_t = MleOptions::default().max_iterations)]
        max_iter: usize,
    },
    /// Find the largest resonant group, or the dots matching a target line.
    Plan {
        ensemble_csv: PathBuf,
        /// External target line; without it the largest resonant group is searched.
        #[arg(long)]
        target: Option<f64>,
        /// Unit of --target.
        #[arg(long, value_enum, default_value = "ev")]
        unit: EnergyUnit,
        /// Optimal interval stabbing, or grouping within histogram bins.
        #[arg(long, value_enum, default_value = "stabbing")]
        mode: PlanMode,
        /// Bin width in eV for --mode bins; defaults to the mean tuning range.
        #[arg(long)]
        bin_width: Option<f64>,
        /// Diode JSON used to assign biases; defaults to 1.5 V / 312 nm.
        #[arg(long)]
        diode: Option<PathBuf>,
    },
    /// Ensemble statistics and a Gaussian fit of the X-energy distribution.
    Stats {
        ensemble_csv: PathBuf,
        /// Histogram bin width in eV; defaults to the mean tuning range.
        #[arg(long)]
        bin_width: Option<f64>,
    },
    /// Fidelity with and without FSS cancellation across the bias window.
    Sweep {
        device_json: PathBuf,
        #[arg(long, default_value_t = 303.0)]
        detuning: f64,
        #[arg(long)]
        cal_constant: Option<f64>,
        #[arg(long, default_value_t = 26)]
        steps: usize,
    },
}

/// Failure carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::OutOfRange { .. } => EXIT_OUT_OF_RANGE,
            _ => EXIT_INPUT,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn input_error(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

/// Parses `args` and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn check_input(path: &Path) -> std::result::Result<(), CliError> {
    if !path.is_file() {
        return Err(input_error(format!("{}: no such file", path.display())));
    }
    Ok(())
}

fn check_output(out: Option<&Path>) -> std::result::Result<(), CliError> {
    if let Some(p) = out {
        let parent = p.parent().filter(|d| !d.as_os_str().is_empty());
        if let Some(d) = parent {
            if !d.is_dir() {
                return Err(input_error(format!(
                    "{}: output directory does not exist",
                    d.display()
                )));
            }
        }
    }
    Ok(())
}

fn load_diode(path: Option<&PathBuf>) -> Result<DiodeModel> {
    let Some(p) = path else {
        return Ok(DiodeModel::default());
    };
    let text = std::fs::read_to_string(p).map_err(|source| Error::Io {
        path: p.clone(),
        source,
    })?;
    let d: DiodeModel = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: p.clone(),
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    d.validate()?;
    Ok(d)
}

fn read_bias_scan(path: &Path) -> Result<Vec<(f64, f64)>> {
    #[derive(serde::Deserialize)]
    struct Row {
        bias_v: f64,
        energy_ev: f64,
    }
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    rdr.deserialize::<Row>()
        .map(|r| {
            r.map(|r| (r.bias_v, r.energy_ev))
                .map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: e.position().map_or(0, |p| p.line()),
                    message: e.to_string(),
                })
        })
        .collect()
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::InvalidRows(rows) => Error::Parse {
            path: path.to_path_buf(),
            line: rows[0].line,
            message: rows
                .iter()
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
                .join("; "),
        },
        other => other,
    }
}

struct Output<'a> {
    path: Option<&'a Path>,
}

impl Output<'_> {
    fn write_bytes(&self, bytes: &[u8]) -> std::result::Result<(), CliError> {
        let res = match self.path {
            Some(p) => std::fs::write(p, bytes),
            None => io::stdout().lock().write_all(bytes),
        };
        res.map_err(|e| input_error(format!("writing output: {e}")))
    }

    fn json<T: Serialize>(&self, value: &T) -> std::result::Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
        text.push('\n');
        self.write_bytes(text.as_bytes())
    }
}

fn want(
    format: Option<OutputFormat>,
    default: OutputFormat,
    allowed: &[OutputFormat],
) -> std::result::Result<OutputFormat, CliError> {
    let f = format.unwrap_or(default);
    if allowed.contains(&f) {
        Ok(f)
    } else {
        Err(input_error(format!(
            "format {f:?} not supported by this command"
        )))
    }
}

fn cal_constant(cfg: &DeviceConfig, flag: Option<f64>) -> std::result::Result<f64, CliError> {
    let k = flag.or(cfg.cw_cal_constant).ok_or_else(|| {
        input_error("no CW calibration constant: set cw_cal_constant or pass --cal-constant")
    })?;
    if !(k > 0.0 && k.is_finite()) {
        return Err(input_error("calibration constant must be > 0"));
    }
    Ok(k)
}

fn execute(cli: &Cli) -> std::result::Result<(), CliError> {
    use OutputFormat::{Csv, Json};
    check_output(cli.out.as_deref())?;
    let out = Output {
        path: cli.out.as_deref(),
    };

    match &cli.command {
        Command::FitStark { scan_csv, diode } => {
            want(cli.format, Json, &[Json])?;
            check_input(scan_csv)?;
            let diode = load_diode(diode.as_ref())?;
            let scan = read_bias_scan(scan_csv)?;
            let fit = fit_stark_parameters(&scan, &diode)?;
            out.json(&json!({
                "e0_ev": fit.e0,
                "dipole_nm": fit.dipole,
                "polarizability_ev_per_v2nm2": fit.polarizability,
                "std_errors": {
                    "e0_ev": fit.std_errors[0],
                    "dipole_nm": fit.std_errors[1],
                    "polarizability_ev_per_v2nm2": fit.std_errors[2],
                },
                "covariance": fit.covariance,
                "residual_rms_ev": fit.residual_rms,
                "n_points": fit.n_points,
                "diode": diode,
            }))
        }
        Command::Tune {
            device_json,
            target_ex,
            detuning,
            cal_constant: k,
        } => {
            want(cli.format, Json, &[Json])?;
            check_input(device_json)?;
            let cfg = DeviceConfig::load(device_json)?;
            let k = cal_constant(&cfg, *k)?;
            let op = plan_operating_point(&cfg.dot, &cfg.diode, *target_ex, *detuning, k).map_err(
                |e| {
                    let mut ce = CliError::from(e);
                    if ce.code == EXIT_OUT_OF_RANGE {
                        ce.message.push_str(" (X line)");
                    }
                    ce
                },
            )?;
            out.json(&json!({
                "id": cfg.dot.id,
                "operating_point": op,
            }))
        }
        Command::Simulate {
            device_json,
            pairs,
            settings,
            bias,
            residual_fss,
        } => {
            let format = want(cli.format, Csv, &[Csv, Json])?;
            check_input(device_json)?;
            let cfg = DeviceConfig::load(device_json)?;
            let dot = &cfg.dot;
            let fss = residual_fss.unwrap_or_else(|| bias.map_or(dot.fss, |v| dot.fss_at(v)));
            let tau = bias.map_or(dot.lifetime_x.fallback, |v| dot.lifetime_x_at(v));
            let params = CascadeParams::new(fss, tau, dot.g2_zero)?;
            let rho = time_integrated_density_matrix(&params)?;
            let list = match settings {
                SettingsSet::Full16 => tomography_settings_16(),
                SettingsSet::Reduced6 => reduced_settings_6(),
            };
            let records = simulate_counts(&rho, &list, *pairs, cli.seed)?;
            match format {
                Csv => {
                    let mut buf = Vec::new();
                    write_counts_csv(&mut buf, &records)?;
                    out.write_bytes(&buf)
                }
                Json => out.json(&records),
            }
        }
        Command::Tomography {
            counts_csv,
            method,
            max_iter,
        } => {
            want(cli.format, Json, &[Json])?;
            check_input(counts_csv)?;
            let file = File::open(counts_csv).map_err(|source| Error::Io {
                path: counts_csv.clone(),
                source,
            })?;
            let records = read_counts_csv(file).map_err(|e| with_path(counts_csv, e))?;
            match method {
                TomographyMethod::Reduced => {
                    let r = reduced_analysis(&records)?;
                    out.json(&json!({
                        "method": "reduced",
                        "fidelity": r.fidelity,
                        "c_linear": r.c_linear,
                        "c_diagonal": r.c_diagonal,
                        "c_circular": r.c_circular,
                    }))
                }
                TomographyMethod::Mle => {
                    let opts = MleOptions {
                        max_iterations: *max_iter,
                        ..MleOptions::default()
                    };
                    let r = mle_reconstruct(&records, &opts)?;
                    out.json(&json!({
                        "method": "mle",
                        "fidelity": r.fidelity,
                        "basis": BASIS_LABELS,
                        "density_matrix": r.state,
                        "converged": r.converged,
                        "iterations": r.iterations,
                        "log_likelihood": r.log_likelihood,
                        "last_improvement": r.last_improvement,
                        "gradient_norm": r.gradient_norm,
                    }))?;
                    if !r.converged {
                        return Err(CliError {
                            code: EXIT_NO_CONVERGENCE,
                            message: format!(
                                "MLE did not converge in {} iterations (last improvement {:e}, gradient norm {:e})",
                                r.iterations, r.last_improvement, r.gradient_norm
                            ),
                        });
                    }
                    Ok(())
                }
            }
        }
        Command::Plan {
            ensemble_csv,
            target,
            unit,
            mode,
            bin_width,
            diode,
        } => {
            let format = want(cli.format, Json, &[Json, Csv])?;
            check_input(ensemble_csv)?;
            let diode = load_diode(diode.as_ref())?;
            let records = load_ensemble(ensemble_csv)?;
            let plan = match (target, mode) {
                (Some(t), _) => {
                    let line = match unit {
                        EnergyUnit::Ev => TargetLine::Ev(*t),
                        EnergyUnit::Ghz => TargetLine::Ghz(*t),
                    };
                    group_at_target(&records, line.energy_ev(), &diode)
                }
                (None, PlanMode::Stabbing) => max_resonance_group(&records, &diode)?,
                (None, PlanMode::Bins) => {
                    let w = match bin_width {
                        Some(w) => *w,
                        None => ensemble_summary(&records)?.mean_range_ev,
                    };
                    best_bin_group(&records, w, &diode)?.plan
                }
            };
            match format {
                Json => out.json(&plan),
                Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["id", "bias_v", "target_energy_ev"])
                        .map_err(Error::from)?;
                    for m in &plan.members {
                        w.write_record([
                            m.id.clone(),
                            m.bias.map_or(String::new(), |b| b.to_string()),
                            plan.target_energy.to_string(),
                        ])
                        .map_err(Error::from)?;
                    }
                    let buf = w.into_inner().map_err(|e| input_error(e.to_string()))?;
                    out.write_bytes(&buf)
                }
            }
        }
        Command::Stats {
            ensemble_csv,
            bin_width,
        } => {
            want(cli.format, Json, &[Json])?;
            check_input(ensemble_csv)?;
            let records = load_ensemble(ensemble_csv)?;
            let summary = ensemble_summary(&records)?;
            let w = bin_width.unwrap_or(summary.mean_range_ev);
            let mids: Vec<f64> = records.iter().map(|r| 0.5 * (r.e_min + r.e_max)).collect();
            let fit = gaussian_fit_histogram(&mids, w)?;
            out.json(&json!({ "summary": summary, "gaussian_fit": fit }))
        }
        Command::Sweep {
            device_json,
            detuning,
            cal_constant: k,
            steps,
        } => {
            let format = want(cli.format, Csv, &[Csv, Json])?;
            check_input(device_json)?;
            let cfg = DeviceConfig::load(device_json)?;
            let k = cal_constant(&cfg, *k)?;
            let rows = fidelity_vs_bias(&cfg.dot, &cfg.diode, *detuning, k, *steps)?;
            match format {
                Json => out.json(&rows),
                Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    for r in &rows {
                        w.serialize(r).map_err(Error::from)?;
                    }
                    let buf = w.into_inner().map_err(|e| input_error(e.to_string()))?;
                    out.write_bytes(&buf)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn bad_setting_name_is_input_error() {
        let code = run([
            "dualstark",
            "simulate",
            "x.json",
            "--pairs",
            "10",
            "--settings",
            "9",
        ]);
        assert_eq!(code, EXIT_INPUT);
    }

    #[test]
    fn out_of_range_maps_to_3() {
        let e = CliError::from(Error::OutOfRange {
            target: 2.0,
            min: 1.0,
            max: 1.5,
        });
        assert_eq!(e.code, EXIT_OUT_OF_RANGE);
    }
}
