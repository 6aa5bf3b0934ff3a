//! Ensemble-level wavelength matching.
//!
//! Each dot contributes the closed interval of X energies it reaches over
//! its bias window. The planner finds the energy stabbed by the most
//! intervals, matches dots to an externally supplied line, and summarizes
//! the inhomogeneous distribution.

pub mod histogram;

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, RowError};
use crate::model::{DiodeModel, StarkLine};

pub use histogram::{gaussian_fit_histogram, GaussianFit, Histogram};

/// X-line Stark map and bias window, enough to invert energy → bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarkParams {
    pub line: StarkLine,
    pub bias_range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    pub id: String,
    /// eV.
    pub e_min: f64,
    /// eV.
    pub e_max: f64,
    /// µeV.
    pub fss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stark: Option<StarkParams>,
}

impl EnsembleRecord {
    pub fn new(id: impl Into<String>, e_min: f64, e_max: f64, fss: f64) -> Result<Self> {
        let r = Self {
            id: id.into(),
            e_min,
            e_max,
            fss,
            stark: None,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e_min.is_finite() && self.e_max.is_finite() && self.fss.is_finite()) {
            return Err(Error::invalid(format!("{}: non-finite value", self.id)));
        }
        if self.e_min > self.e_max {
            return Err(Error::invalid(format!(
                "{}: e_min {} > e_max {}",
                self.id, self.e_min, self.e_max
            )));
        }
        if self.fss < 0.0 {
            return Err(Error::invalid(format!("{}: fss must be >= 0", self.id)));
        }
        if let Some(s) = &self.stark {
            if !(s.bias_range.0 < s.bias_range.1) {
                return Err(Error::invalid(format!(
                    "{}: bias_min must be < bias_max",
                    self.id
                )));
            }
        }
        Ok(())
    }

    pub fn tuning_range(&self) -> f64 {
        self.e_max - self.e_min
    }

    /// Closed-interval membership.
    pub fn contains(&self, energy: f64) -> bool {
        self.e_min <= energy && energy <= self.e_max
    }

    fn assign_bias(&self, diode: &DiodeModel, target: f64) -> Option<f64> {
        let s = self.stark?;
        s.line.solve_bias(diode, s.bias_range, target).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanMember {
    pub id: String,
    #[serde(rename = "bias_v")]
    pub bias: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningPlan {
    #[serde(rename = "target_energy_ev")]
    pub target_energy: f64,
    pub members: Vec<PlanMember>,
    pub coverage_count: usize,
}

impl TuningPlan {
    fn build(records: &[EnsembleRecord], target: f64, diode: &DiodeModel) -> Self {
        let mut hits: Vec<&EnsembleRecord> =
            records.iter().filter(|r| r.contains(target)).collect();
        hits.sort_by(|a, b| {
            a.id.cmp(&b.id)
                .then(a.e_min.total_cmp(&b.e_min))
                .then(a.e_max.total_cmp(&b.e_max))
        });
        let members: Vec<PlanMember> = hits
            .into_iter()
            .map(|r| PlanMember {
                id: r.id.clone(),
                bias: r.assign_bias(diode, target),
            })
            .collect();
        TuningPlan {
            target_energy: target,
            coverage_count: members.len(),
            members,
        }
    }
}

/// Energy covered by the most intervals, found by a sweep over sorted
/// endpoints. Returns the left edge of the lowest deepest overlap region.
pub fn max_resonance_group(records: &[EnsembleRecord], diode: &DiodeModel) -> Result<TuningPlan> {
    let (target, depth) = max_stabbing_point(records)?;
    let plan = TuningPlan::build(records, target, diode);
    debug_assert_eq!(plan.coverage_count, depth);
    Ok(plan)
}

/// `(energy, count)` of the deepest point; ties go to the lowest energy.
pub fn max_stabbing_point(records: &[EnsembleRecord]) -> Result<(f64, usize)> {
    if records.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    // closed intervals: at equal energy, openings are processed first
    let mut events: Vec<(f64, i8)> = records
        .iter()
        .flat_map(|r| [(r.e_min, 0i8), (r.e_max, 1i8)])
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut depth = 0usize;
    let mut best = (events[0].0, 0usize);
    for (e, kind) in events {
        if kind == 0 {
            depth += 1;
            if depth > best.1 {
                best = (e, depth);
            }
        } else {
            depth -= 1;
        }
    }
    Ok(best)
}

/// All dots whose interval contains `target`, with biases where the Stark
/// parameters are known.
pub fn group_at_target(records: &[EnsembleRecord], target: f64, diode: &DiodeModel) -> TuningPlan {
    TuningPlan::build(records, target, diode)
}

/// Bin-based grouping: dots are binned by interval midpoint and the deepest
/// stabbing point is searched within each bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinGroup {
    pub bin_center_ev: f64,
    pub dots_in_bin: usize,
    pub plan: TuningPlan,
}

pub fn bin_resonance_groups(
    records: &[EnsembleRecord],
    bin_width: f64,
    diode: &DiodeModel,
) -> Result<Vec<BinGroup>> {
    if records.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mids: Vec<f64> = records.iter().map(|r| 0.5 * (r.e_min + r.e_max)).collect();
    let hist = Histogram::new(&mids, bin_width)?;
    let mut bins: Vec<Vec<EnsembleRecord>> = vec![Vec::new(); hist.counts.len()];
    for (r, m) in records.iter().zip(&mids) {
        let i = (((m - hist.origin) / bin_width).floor() as usize).min(bins.len() - 1);
        bins[i].push(r.clone());
    }
    bins.into_iter()
        .enumerate()
        .filter(|(_, b)| !b.is_empty())
        .map(|(i, b)| {
            Ok(BinGroup {
                bin_center_ev: hist.center(i),
                dots_in_bin: b.len(),
                plan: max_resonance_group(&b, diode)?,
            })
        })
        .collect()
}

/// The bin group with the largest coverage (lowest energy on ties).
pub fn best_bin_group(
    records: &[EnsembleRecord],
    bin_width: f64,
    diode: &DiodeModel,
) -> Result<BinGroup> {
    let groups = bin_resonance_groups(records, bin_width, diode)?;
    let mut best: Option<BinGroup> = None;
    for g in groups {
        if best
            .as_ref()
            .is_none_or(|b| g.plan.coverage_count > b.plan.coverage_count)
        {
            best = Some(g);
        }
    }
    best.ok_or(Error::EmptyEnsemble)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub count: usize,
    pub mean_range_ev: f64,
    /// Sample standard deviation; `None` for a single record.
    pub std_range_ev: Option<f64>,
    pub mean_fss_uev: f64,
    pub std_fss_uev: Option<f64>,
}

fn mean_std(v: impl Iterator<Item = f64> + Clone) -> (f64, Option<f64>) {
    let n = v.clone().count();
    let mean = v.clone().sum::<f64>() / n as f64;
    let std = (n > 1).then(|| (v.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
    (mean, std)
}

pub fn ensemble_summary(records: &[EnsembleRecord]) -> Result<EnsembleSummary> {
    if records.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let (mean_range_ev, std_range_ev) = mean_std(records.iter().map(|r| r.tuning_range()));
    let (mean_fss_uev, std_fss_uev) = mean_std(records.iter().map(|r| r.fss));
    Ok(EnsembleSummary {
        count: records.len(),
        mean_range_ev,
        std_range_ev,
        mean_fss_uev,
        std_fss_uev,
    })
}

const BASE_COLUMNS: [&str; 4] = ["id", "e_min_ev", "e_max_ev", "fss_uev"];
const STARK_COLUMNS: [&str; 5] = [
    "e0_x_ev",
    "dipole_x_nm",
    "polarizability_x",
    "bias_min_v",
    "bias_max_v",
];

#[derive(Deserialize)]
struct EnsembleRow {
    id: String,
    e_min_ev: f64,
    e_max_ev: f64,
    fss_uev: f64,
    #[serde(default)]
    e0_x_ev: Option<f64>,
    #[serde(default)]
    dipole_x_nm: Option<f64>,
    #[serde(default)]
    polarizability_x: Option<f64>,
    #[serde(default)]
    bias_min_v: Option<f64>,
    #[serde(default)]
    bias_max_v: Option<f64>,
}

impl EnsembleRow {
    fn into_record(self) -> Result<EnsembleRecord> {
        let opt = [
            self.e0_x_ev,
            self.dipole_x_nm,
            self.polarizability_x,
            self.bias_min_v,
            self.bias_max_v,
        ];
        let stark = match opt {
            [Some(e0), Some(p), Some(b), Some(v0), Some(v1)] => Some(StarkParams {
                line: StarkLine {
                    e0,
                    dipole: p,
                    polarizability: b,
                },
                bias_range: (v0, v1),
            }),
            [None, None, None, None, None] => None,
            _ => {
                return Err(Error::invalid(
                    "full-parameter columns must be all present or all empty",
                ))
            }
        };
        let r = EnsembleRecord {
            id: self.id,
            e_min: self.e_min_ev,
            e_max: self.e_max_ev,
            fss: self.fss_uev,
            stark,
        };
        r.validate()?;
        Ok(r)
    }
}

/// Reads `id,e_min_ev,e_max_ev,fss_uev[,e0_x_ev,dipole_x_nm,polarizability_x,bias_min_v,bias_max_v]`.
/// Every rejected row is reported with its line number.
pub fn read_ensemble_csv<R: Read>(reader: R) -> Result<Vec<EnsembleRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    let mut bad = Vec::new();
    let headers = rdr.headers()?.clone();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                bad.push(RowError {
                    line: e.position().map_or(0, |p| p.line()),
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        let parsed = rec
            .deserialize::<EnsembleRow>(Some(&headers))
            .map_err(Error::from)
            .and_then(EnsembleRow::into_record);
        match parsed {
            Ok(r) => out.push(r),
            Err(e) => bad.push(RowError {
                line,
                message: e.to_string(),
            }),
        }
    }
    if bad.is_empty() {
        Ok(out)
    } else {
        Err(Error::InvalidRows(bad))
    }
}

pub fn load_ensemble(path: &Path) -> Result<Vec<EnsembleRecord>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_ensemble_csv(file).map_err(|e| match e {
        Error::InvalidRows(rows) => {
            let first = rows[0].clone();
            Error::Parse {
                path: path.to_path_buf(),
                line: first.line,
                message: rows
                    .iter()
                    .map(|r| r.to_string())
                    .collect::<Vec<_>>()
                    .join("; "),
            }
        }
        other => other,
    })
}

/// Writes records back in the input schema. The optional columns appear only
/// when some record carries Stark parameters.
pub fn write_ensemble_csv<W: Write>(writer: W, records: &[EnsembleRecord]) -> Result<()> {
    let full = records.iter().any(|r| r.stark.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = BASE_COLUMNS.to_vec();
    if full {
        header.extend(STARK_COLUMNS);
    }
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.id.clone(),
            r.e_min.to_string(),
            r.e_max.to_string(),
            r.fss.to_string(),
        ];
        if full {
            match &r.stark {
                Some(s) => row.extend([
                    s.line.e0.to_string(),
                    s.line.dipole.to_string(),
                    s.line.polarizability.to_string(),
                    s.bias_range.0.to_string(),
                    s.bias_range.1.to_string(),
                ]),
                None => row.extend(std::iter::repeat_n(String::new(), STARK_COLUMNS.len())),
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, a: f64, b: f64) -> EnsembleRecord {
        EnsembleRecord::new(id, a, b, 1.0).unwrap()
    }

    #[test]
    fn toy_sweep() {
        let r = vec![rec("a", 0.0, 2.0), rec("b", 1.0, 3.0), rec("c", 2.5, 4.0)];
        let plan = max_resonance_group(&r, &DiodeModel::default()).unwrap();
        assert_eq!(plan.target_energy, 1.0);
        assert_eq!(plan.coverage_count, 2);
        let ids: Vec<_> = plan.members.iter().map(|m| m.id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
    }

    #[test]
    fn touching_endpoints_count() {
        let r = vec![rec("a", 0.0, 1.0), rec("b", 1.0, 2.0)];
        assert_eq!(max_stabbing_point(&r).unwrap(), (1.0, 2));
    }

    #[test]
    fn single_interval() {
        let r = vec![rec("a", 1.5, 1.6)];
        let plan = max_resonance_group(&r, &DiodeModel::default()).unwrap();
        assert_eq!(plan.target_energy, 1.5);
        assert_eq!(plan.coverage_count, 1);
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(
            max_resonance_group(&[], &DiodeModel::default()),
            Err(Error::EmptyEnsemble)
        ));
        assert!(matches!(ensemble_summary(&[]), Err(Error::EmptyEnsemble)));
        let r = vec![rec("a", 0.0, 1.0)];
        let plan = group_at_target(&r, 5.0, &DiodeModel::default());
        assert_eq!(plan.coverage_count, 0);
        assert!(plan.members.is_empty());
    }

    #[test]
    fn summary_arithmetic() {
        let r = vec![rec("a", 0.0, 1.0), rec("b", 0.0, 3.0)];
        let s = ensemble_summary(&r).unwrap();
        assert_eq!(s.mean_range_ev, 2.0);
        assert!((s.std_range_ev.unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let s = ensemble_summary(&r[..1]).unwrap();
        assert_eq!(s.std_range_ev, None);
        assert_eq!(s.std_fss_uev, None);
    }

    #[test]
    fn csv_round_trip_is_identical() {
        let text = "id,e_min_ev,e_max_ev,fss_uev\nQD1,1.5695,1.5708,7.92\n";
        let recs = read_ensemble_csv(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        let mut out = Vec::new();
        write_ensemble_csv(&mut out, &recs).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
        assert!(
            read_ensemble_csv("id,e_min_ev,e_max_ev,fss_uev\n".as_bytes())
                .unwrap()
                .is_empty()
        );
        assert!(read_ensemble_csv("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn csv_rejects_inverted_interval() {
        let text = "id,e_min_ev,e_max_ev,fss_uev\nok,1.0,2.0,1\nbad,2.0,1.0,1\n";
        match read_ensemble_csv(text.as_bytes()) {
            Err(Error::InvalidRows(rows)) => {
                assert_eq!(rows.len(), 1);
                assert_eq!(rows[0].line, 3);
                assert!(rows[0].message.contains("bad"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_full_parameters_assign_bias() {
        let d = DiodeModel::default();
        let line = StarkLine {
            e0: 1.58,
            dipole: 0.3,
            polarizability: -118.9,
        };
        let (lo, hi) = line.achievable_range(&d, (0.0, 0.25));
        let text = format!(
            "id,e_min_ev,e_max_ev,fss_uev,e0_x_ev,dipole_x_nm,polarizability_x,bias_min_v,bias_max_v\nA,{lo},{hi},2.92,1.58,0.3,-118.9,0,0.25\nB,{lo},{hi},3,,,,,\n"
        );
        let recs = read_ensemble_csv(text.as_bytes()).unwrap();
        let target = 0.5 * (lo + hi);
        let plan = group_at_target(&recs, target, &d);
        assert_eq!(plan.coverage_count, 2);
        let v = plan.members[0].bias.unwrap();
        assert!((line.energy_at_bias(&d, v) - target).abs() < 1e-12);
        assert_eq!(plan.members[1].bias, None);
    }

    #[test]
    fn bin_mode_groups_by_midpoint() {
        let r = vec![rec("a", 1.0, 1.2), rec("b", 1.05, 1.25), rec("c", 2.0, 2.1)];
        let g = best_bin_group(&r, 0.5, &DiodeModel::default()).unwrap();
        assert_eq!(g.dots_in_bin, 2);
        assert_eq!(g.plan.coverage_count, 2);
        assert_eq!(g.plan.target_energy, 1.05);
    }
}
