//! Trial records, summary reports, and their CSV/JSON wire formats.
//!
//! Output artifacts are a pure function of `(config, seed, software
//! version)`: floats are written with 17 significant digits (enough to
//! round-trip `f64` exactly), JSON object keys are emitted in sorted order,
//! and records are sorted by trial index before emission. Per-trial wall
//! times are recorded only when timing capture is switched on, since
//! measured durations would break byte-reproducibility of the artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// One Monte Carlo trial: inputs, design error, exceedance flag, timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub stream_index: u64,
    pub d_a: usize,
    pub k: usize,
    pub m: u64,
    pub delta: f64,
    pub design_error: f64,
    pub threshold_used: f64,
    pub exceeded: bool,
    pub wall_time_ms: f64,
}

/// Exact CSV header for trial records.
pub const TRIAL_CSV_HEADER: &str =
    "trial_index,stream_index,d_A,k,M,delta,design_error,threshold_used,exceeded,wall_time_ms";

/// Serialization format for record emission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Csv,
    Json,
}

/// `f64` with 17 significant digits; parses back to the identical bits.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x:.16e}")
    }
}

fn parse_float(s: &str) -> Result<f64> {
    match s {
        "NaN" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s
            .parse::<f64>()
            .map_err(|e| Error::InvalidArgument(format!("bad float {s:?}: {e}"))),
    }
}

impl TrialRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.trial_index,
            self.stream_index,
            self.d_a,
            self.k,
            self.m,
            format_float(self.delta),
            format_float(self.design_error),
            format_float(self.threshold_used),
            self.exceeded,
            format_float(self.wall_time_ms),
        )
    }

    pub fn from_csv_row(row: &str) -> Result<Self> {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::InvalidArgument(format!(
                "expected 10 CSV fields, got {}",
                fields.len()
            )));
        }
        let int = |s: &str| -> Result<u64> {
            s.parse::<u64>()
                .map_err(|e| Error::InvalidArgument(format!("bad integer {s:?}: {e}")))
        };
        Ok(TrialRecord {
            trial_index: int(fields[0])?,
            stream_index: int(fields[1])?,
            d_a: int(fields[2])? as usize,
            k: int(fields[3])? as usize,
            m: int(fields[4])?,
            delta: parse_float(fields[5])?,
            design_error: parse_float(fields[6])?,
            threshold_used: parse_float(fields[7])?,
            exceeded: match fields[8] {
                "true" => true,
                "false" => false,
                other => {
                    return Err(Error::InvalidArgument(format!("bad boolean {other:?}")))
                }
            },
            wall_time_ms: parse_float(fields[9])?,
        })
    }
}

/// Records as a CSV document (header + one row per record, sorted by trial
/// index).
pub fn records_to_csv(records: &[TrialRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to emit".into()));
    }
    let mut sorted: Vec<&TrialRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.trial_index);
    let mut out = String::with_capacity(records.len() * 96);
    out.push_str(TRIAL_CSV_HEADER);
    out.push('\n');
    for r in sorted {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_records_csv(text: &str) -> Result<Vec<TrialRecord>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty CSV".into()))?;
    if header != TRIAL_CSV_HEADER {
        return Err(Error::InvalidArgument(format!(
            "unexpected CSV header {header:?}"
        )));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(TrialRecord::from_csv_row)
        .collect()
}

const RECORDS_SCHEMA: &str = "design-lab/trial-records/v1";

/// Records as a JSON document with 17-significant-digit floats.
pub fn records_to_json(records: &[TrialRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to emit".into()));
    }
    let mut sorted = records.to_vec();
    sorted.sort_by_key(|r| r.trial_index);
    let value = serde_json::json!({
        "schema": RECORDS_SCHEMA,
        "records": sorted,
    });
    Ok(json_with_full_floats(&value))
}

pub fn parse_records_json(text: &str) -> Result<Vec<TrialRecord>> {
    #[derive(Deserialize)]
    struct Doc {
        schema: String,
        records: Vec<TrialRecord>,
    }
    let doc: Doc = serde_json::from_str(text)
        .map_err(|e| Error::InvalidArgument(format!("json: {e}")))?;
    if doc.schema != RECORDS_SCHEMA {
        return Err(Error::InvalidArgument(format!(
            "unknown records schema {:?}",
            doc.schema
        )));
    }
    Ok(doc.records)
}

/// Writes records to `path` in the requested format. Errors on an empty
/// record list.
pub fn emit_records(records: &[TrialRecord], format: RecordFormat, path: &Path) -> Result<()> {
    let body = match format {
        RecordFormat::Csv => records_to_csv(records)?,
        RecordFormat::Json => records_to_json(records)?,
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, body)?;
    Ok(())
}

/// Pass/fail line of a summary: everything needed to re-derive the verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub label: String,
    pub observed: f64,
    pub bound: f64,
    pub passed: bool,
}

/// RNG metadata embedded in every summary so a run can be reproduced from
/// the report alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RngMetadata {
    pub algorithm_id: String,
    pub seed: u64,
    pub stream_layout: String,
}

const SUMMARY_SCHEMA: &str = "design-lab/summary/v1";

/// The JSON summary of one experiment run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryReport {
    pub schema: String,
    pub version: String,
    pub experiment: String,
    pub config: Value,
    pub rng: RngMetadata,
    pub criteria: Vec<CriterionOutcome>,
    pub metrics: Value,
}

impl SummaryReport {
    pub fn new(
        experiment: &str,
        config: Value,
        seed: u64,
        criteria: Vec<CriterionOutcome>,
        metrics: Value,
    ) -> Self {
        SummaryReport {
            schema: SUMMARY_SCHEMA.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            experiment: experiment.into(),
            config,
            rng: RngMetadata {
                algorithm_id: crate::sampling::RNG_ALGORITHM.into(),
                seed,
                stream_layout: "stream_index = trial_index".into(),
            },
            criteria,
        metrics,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("summary serializes");
        json_with_full_floats(&value)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("json: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Serializes a JSON value with floats at 17 significant digits and object
/// keys in sorted order. (`serde_json`'s shortest-round-trip floats would
/// also parse back exactly, but the fixed width keeps the artifact format
/// independent of the serializer's minimization.)
pub fn json_with_full_floats(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, 0, &mut out);
    out.push('\n');
    out
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                let x = n.as_f64().expect("number is one of i64/u64/f64");
                if x.is_finite() {
                    let _ = write!(out, "{x:.16e}");
                } else {
                    // JSON has no infinities; fall back to string form
                    let _ = write!(out, "\"{}\"", format_float(x));
                }
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string serializes"));
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                push_indent(indent + 1, out);
                write_value(item, indent + 1, out);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            push_indent(indent, out);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, key) in keys.iter().enumerate() {
                push_indent(indent + 1, out);
                out.push_str(&serde_json::to_string(key).expect("key serializes"));
                out.push_str(": ");
                write_value(&map[*key], indent + 1, out);
                if i + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            push_indent(indent, out);
            out.push('}');
        }
    }
}

fn push_indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_records() -> Vec<TrialRecord> {
        vec![
            TrialRecord {
                trial_index: 1,
                stream_index: 1,
                d_a: 2,
                k: 2,
                m: 64,
                delta: 0.0,
                design_error: 1.0 / 3.0,
                threshold_used: 0.3,
                exceeded: true,
                wall_time_ms: 0.0,
            },
            TrialRecord {
                trial_index: 0,
                stream_index: 0,
                d_a: 2,
                k: 2,
                m: 64,
                delta: 1e-4,
                design_error: 0.123456789012345678,
                threshold_used: 0.35676854249492379,
                exceeded: false,
                wall_time_ms: 12.5,
            },
        ]
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let records = sample_records();
        let csv = records_to_csv(&records).unwrap();
        assert!(csv.starts_with(TRIAL_CSV_HEADER));
        let parsed = parse_records_csv(&csv).unwrap();
        // emission sorts by trial index
        assert_eq!(parsed[0], records[1]);
        assert_eq!(parsed[1], records[0]);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let records = sample_records();
        let json = records_to_json(&records).unwrap();
        let parsed = parse_records_json(&json).unwrap();
        assert_eq!(parsed[0], records[1]);
        assert_eq!(parsed[1], records[0]);
    }

    #[test]
    fn empty_record_list_is_an_error() {
        assert!(records_to_csv(&[]).is_err());
        assert!(records_to_json(&[]).is_err());
    }

    #[test]
    fn float_formatting_round_trips() {
        for &x in &[0.1, 1.0 / 3.0, 2.2250738585072014e-308, 1.7976931348623157e308, 0.0] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(format_float(f64::INFINITY), "inf");
    }

    #[test]
    fn summary_json_parses_back() {
        let report = SummaryReport::new(
            "lemma2_tail",
            serde_json::json!({"d_a": 2, "k": 2}),
            7,
            vec![CriterionOutcome {
                label: "exceedance <= delta_prob".into(),
                observed: 0.0,
                bound: 0.1,
                passed: true,
            }],
            serde_json::json!({"exceedance": 0.0, "wilson_high": 0.0073}),
        );
        let text = report.to_json();
        let back = SummaryReport::from_json(&text).unwrap();
        assert!(back.all_passed());
        assert_eq!(back.experiment, "lemma2_tail");
        assert_eq!(back.rng.algorithm_id, "chacha12");
    }
}
