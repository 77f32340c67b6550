//! Result persistence: one CSV per field and a JSON run summary.
//!
//! A field file has a header row `t\x, x₀, …, x_N` followed by one row per
//! saved time, `tᵢ, u(tᵢ, x₀), …`. Values are written with 17 significant
//! digits so that they read back bit-exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::coupled::{SimulationResult, StopReason};
use crate::error::{Error, Result};
use crate::model::GatingBounds;
use crate::numerics::{Mesh, StateField};
use crate::sliding::{self, SlidingBound};

pub const CORNER: &str = "t\\x";
pub const SUMMARY_FILE: &str = "summary.json";

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders a field as CSV text.
pub fn field_to_csv(field: &StateField, mesh: &Mesh) -> Result<String> {
    if (field.n_t(), field.n_x()) != (mesh.max_t(), mesh.max_x()) {
        return Err(Error::domain("field shape does not match mesh"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::FieldFormat(e.to_string());
    let mut header = vec![CORNER.to_owned()];
    header.extend(mesh.xmesh().iter().map(|&x| fmt(x)));
    w.write_record(&header).map_err(csv_err)?;
    for (i, &t) in mesh.tmesh().iter().enumerate() {
        let mut row = vec![fmt(t)];
        row.extend(field.row(i).iter().map(|&v| fmt(v)));
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::FieldFormat(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::FieldFormat(e.to_string()))
}

/// A field read back from CSV together with its axes.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTable {
    pub xmesh: Vec<f64>,
    pub tmesh: Vec<f64>,
    pub field: StateField,
}

fn parse_cell(cell: &str, row: usize) -> Result<f64> {
    match cell.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::FieldFormat(format!("row {row}: `{cell}` is not a finite number"))),
    }
}

pub fn parse_field_csv(text: &str) -> Result<FieldTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| Error::FieldFormat(e.to_string()))?,
        None => return Err(Error::FieldFormat("empty file".into())),
    };
    if header.len() < 2 {
        return Err(Error::FieldFormat("header has no space nodes".into()));
    }
    let xmesh = header
        .iter()
        .skip(1)
        .map(|c| parse_cell(c, 1))
        .collect::<Result<Vec<_>>>()?;
    let mut tmesh = Vec::new();
    let mut rows = Vec::new();
    for (k, record) in records.enumerate() {
        let record = record.map_err(|e| Error::FieldFormat(e.to_string()))?;
        let row = k + 2;
        tmesh.push(parse_cell(&record[0], row)?);
        rows.push(
            record
                .iter()
                .skip(1)
                .map(|c| parse_cell(c, row))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    if rows.is_empty() {
        return Err(Error::FieldFormat("no time rows".into()));
    }
    Ok(FieldTable {
        xmesh,
        tmesh,
        field: StateField::from_rows(rows)?,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `v.csv` and one CSV per gating field into `dir`.
pub fn write_fields(result: &SimulationResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let fields = std::iter::once(("v", &result.v))
        .chain(result.gating_names.iter().map(String::as_str).zip(&result.gating));
    for (name, field) in fields {
        let path = dir.join(format!("{name}.csv"));
        write_text(&path, &field_to_csv(field, &result.mesh)?)?;
        written.push(path);
    }
    Ok(written)
}

/// Predicted and observed sliding behaviour of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlidingReport {
    /// Tube half-width used for the empirical onset.
    pub band: f64,
    /// First saved time after which `v` stays within `band` of the target.
    pub empirical_onset: Option<f64>,
    pub gating_bounds: GatingBounds,
    /// Sufficient-condition quantities; an upper estimate, not a prediction
    /// of the observed onset.
    pub theoretical: SlidingBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Complete input of the run; feeding it back reproduces the CSVs.
    pub config: RunConfig,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub residual_trace: Vec<f64>,
    pub elapsed_seconds: f64,
    pub v_max: f64,
    pub v_min: f64,
    pub sliding: SlidingReport,
    pub files: Vec<String>,
}

impl Summary {
    pub fn new(config: &RunConfig, result: &SimulationResult) -> Result<Self> {
        let gating_bounds = GatingBounds::UNIT;
        let theoretical = sliding::analyze(&config.scenario, &gating_bounds)?;
        let band = sliding::default_band(config.scenario.params.epsilon, config.settings.threshold);
        Ok(Self {
            config: config.clone(),
            stop_reason: result.stop_reason,
            iterations: result.iterations,
            residual_trace: result.residual_trace.clone(),
            elapsed_seconds: result.elapsed,
            v_max: result.v.max(),
            v_min: result.v.min(),
            sliding: SlidingReport {
                band,
                empirical_onset: sliding::detect_sliding(result, &config.scenario.target, band),
                gating_bounds,
                theoretical,
            },
            files: Vec::new(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn parse_summary(text: &str) -> Result<Summary> {
    let summary: Summary = serde_json::from_str(text)?;
    summary.config.validate()?;
    Ok(summary)
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_summary(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupled::{run_simulation, IterationSettings};
    use crate::presets;

    fn small_config() -> RunConfig {
        let mut cfg = RunConfig::from_preset(presets::preset("fig2").unwrap());
        cfg.scenario.mesh = Mesh::new(1.0, 5.0, 5, 11).unwrap();
        cfg
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mesh = Mesh::new(1.0, 3.0, 4, 3).unwrap();
        let field = StateField::from_fn(3, 4, |i, j| (i as f64 + 0.1).sqrt() * std::f64::consts::PI - j as f64 / 7.0);
        let text = field_to_csv(&field, &mesh).unwrap();
        assert!(text.starts_with("t\\x,0.0000000000000000e0,"));
        assert_eq!(text.lines().count(), 4);
        let table = parse_field_csv(&text).unwrap();
        assert_eq!(table.field, field);
        assert_eq!(table.xmesh, mesh.xmesh());
        assert_eq!(table.tmesh, mesh.tmesh());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mesh = Mesh::new(1.0, 3.0, 4, 3).unwrap();
        let field = StateField::from_fn(2, 4, |_, _| 0.0);
        assert!(field_to_csv(&field, &mesh).is_err());
    }

    #[test]
    fn malformed_csv_rejected() {
        for text in [
            "",
            "t\\x\n",
            "t\\x,0,1\n",
            "t\\x,0,1\n0,1\n",
            "t\\x,0,1\n0,1,abc\n",
            "t\\x,0,1\n0,1,NaN\n",
            "t\\x,zero,1\n0,1,2\n",
        ] {
            assert!(parse_field_csv(text).is_err(), "{text:?}");
        }
    }

    #[test]
    fn summary_round_trip() {
        let cfg = small_config();
        let result = run_simulation(&cfg.scenario, &cfg.settings).unwrap();
        let summary = Summary::new(&cfg, &result).unwrap();
        let back = parse_summary(&summary.to_json().unwrap()).unwrap();
        assert_eq!(back, summary);
        assert_eq!(back.config, cfg);
    }

    #[test]
    fn summary_reports_both_onsets() {
        let cfg = small_config();
        let result = run_simulation(&cfg.scenario, &IterationSettings::default()).unwrap();
        let summary = Summary::new(&cfg, &result).unwrap();
        let json = summary.to_json().unwrap();
        assert!(json.contains("\"empirical_onset\""));
        assert!(json.contains("\"T_star\""));
        assert!(summary.sliding.theoretical.a > 1e4);
        assert!(summary.sliding.empirical_onset.is_some());
    }

    #[test]
    fn invalid_summary_rejected() {
        assert!(parse_summary("{}").is_err());
        assert!(parse_summary("not json").is_err());
    }

    proptest::proptest! {
        #[test]
        fn arbitrary_csv_never_panics(text in "[-+.,0-9a-z\\\\\n\"]{0,200}") {
            if let Ok(t) = parse_field_csv(&text) {
                proptest::prop_assert_eq!(t.field.n_t(), t.tmesh.len());
            }
        }

        #[test]
        fn csv_round_trip(nt in 2usize..6, nx in 3usize..6, values in proptest::collection::vec(-1e6f64..1e6, 36)) {
            let mesh = Mesh::new(1.0, 1.0, nx, nt).unwrap();
            let field = StateField::from_fn(nt, nx, |i, j| values[i * nx + j]);
            let table = parse_field_csv(&field_to_csv(&field, &mesh).unwrap()).unwrap();
            proptest::prop_assert_eq!(table.field, field);
        }
    }
}
