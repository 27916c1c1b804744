//! JSON experiment files and report rendering.
//!
//! Experiment file layout:
//!
//! ```json
//! {
//!   "reference_trials": 28000000,
//!   "model": { "r": 0.26 },
//!   "angles_deg": { "a": 3.8, "a_prime": -25.2, "b": -3.8, "b_prime": 25.2 },
//!   "settings": [
//!     { "alice": "a", "bob": "b", "trials": 27220875, "coincidences": 29173 }
//!   ],
//!   "singles": { "alice": { "label": "a", "count": 1 }, "bob": { "label": "b", "count": 1 } }
//! }
//! ```
//!
//! `reference_trials` defaults to 28,000,000 and `singles` is optional.
//! Integers are read as signed values and range-checked afterwards so that a
//! negative count is reported as a validation error on the offending record.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::error::Category;

use crate::anomaly::ComparisonTable;
use crate::error::{Error, Result};
use crate::pipeline::{
    AliceSetting, BobSetting, ExperimentRecord, SettingData, SettingPair, Singles,
    DEFAULT_REFERENCE_TRIALS,
};
use crate::quantum::{PairSourceModel, SettingsQuad};
use crate::sim::SimConfig;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference_trials: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model: Option<ModelEntry>,
    angles_deg: SettingsQuad,
    settings: Vec<SettingEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    singles: Option<SinglesEntry>,
}

// Kept separate from `PairSourceModel` so that a negative `r` is a validation
// error rather than a schema error.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelEntry {
    r: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SettingEntry {
    alice: AliceSetting,
    bob: BobSetting,
    trials: i64,
    coincidences: i64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SinglesEntry {
    alice: SingleCount<AliceSetting>,
    bob: SingleCount<BobSetting>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SingleCount<L> {
    label: L,
    count: i64,
}

fn to_u64(value: i64, record: &str, field: &str) -> Result<u64> {
    u64::try_from(value).map_err(|_| {
        Error::validation(record, format!("`{field}` must be nonnegative, got {value}"))
    })
}

/// Pulls the field name out of serde messages such as "missing field `angles_deg`".
fn field_from_message(message: &str) -> String {
    let mut parts = message.split('`');
    match (parts.next(), parts.next()) {
        (Some(_), Some(name)) if !name.is_empty() => name.to_string(),
        _ => "document".to_string(),
    }
}

fn map_json_error(err: serde_json::Error) -> Error {
    let message = err.to_string();
    match err.classify() {
        Category::Data => Error::Schema {
            field: field_from_message(&message),
            message,
        },
        Category::Syntax | Category::Eof | Category::Io => Error::Parse {
            line: err.line(),
            column: err.column(),
            message,
        },
    }
}

/// Parses and validates an experiment document.
pub fn parse_experiment_file(document: &[u8]) -> Result<ExperimentRecord> {
    let text = std::str::from_utf8(document).map_err(|e| Error::Parse {
        line: 0,
        column: 0,
        message: format!("document is not UTF-8: {e}"),
    })?;
    let file: ExperimentFile = serde_json::from_str(text).map_err(map_json_error)?;

    let reference_trials = match file.reference_trials {
        Some(v) => to_u64(v, "record", "reference_trials")?,
        None => DEFAULT_REFERENCE_TRIALS,
    };
    let model = file
        .model
        .map(|m| {
            PairSourceModel::new(m.r)
                .map_err(|e| Error::validation("model", e.to_string()))
        })
        .transpose()?;
    let settings = file
        .settings
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let pair = SettingPair { alice: s.alice, bob: s.bob };
            let record = format!("settings[{i}] ({})", pair.key());
            let data = SettingData {
                pair,
                trials: to_u64(s.trials, &record, "trials")?,
                coincidences: to_u64(s.coincidences, &record, "coincidences")?,
            };
            data.validate().map_err(|e| match e {
                Error::Validation { message, .. } => Error::validation(record, message),
                other => other,
            })?;
            Ok(data)
        })
        .collect::<Result<Vec<_>>>()?;
    let singles = file
        .singles
        .map(|s| -> Result<Singles> {
            Ok(Singles {
                alice: s.alice.label,
                alice_count: to_u64(s.alice.count, "singles.alice", "count")?,
                bob: s.bob.label,
                bob_count: to_u64(s.bob.count, "singles.bob", "count")?,
            })
        })
        .transpose()?;
    ExperimentRecord::new(reference_trials, file.angles_deg, &settings, singles, model)
}

/// Serializes a record back to the experiment file format (pretty JSON,
/// settings in canonical order, `reference_trials` always written).
pub fn serialize_experiment(record: &ExperimentRecord) -> String {
    let file = ExperimentFile {
        reference_trials: Some(record.reference_trials() as i64),
        model: record.model().map(|m| ModelEntry { r: m.r() }),
        angles_deg: *record.angles(),
        settings: record
            .settings()
            .iter()
            .map(|s| SettingEntry {
                alice: s.pair.alice,
                bob: s.pair.bob,
                trials: s.trials as i64,
                coincidences: s.coincidences as i64,
            })
            .collect(),
        singles: record.singles().map(|s| SinglesEntry {
            alice: SingleCount { label: s.alice, count: s.alice_count as i64 },
            bob: SingleCount { label: s.bob, count: s.bob_count as i64 },
        }),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("experiment file serializes");
    out.push('\n');
    out
}

/// Parses a simulation config document.
pub fn parse_sim_config(document: &[u8]) -> Result<SimConfig> {
    let config: SimConfig = serde_json::from_slice(document).map_err(map_json_error)?;
    config
        .validate()
        .map_err(|e| Error::validation("simulation config", e.to_string()))?;
    Ok(config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Usage(format!(
                "unknown report format `{other}` (expected text, csv or json)"
            ))),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Text => "text",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        })
    }
}

const UNDEFINED: &str = "n/a";

/// Half-up rounding to an integer for display.
fn display_count(x: f64) -> String {
    format!("{}", (x + 0.5).floor() as i64)
}

fn display_fixed(x: Option<f64>, decimals: usize) -> String {
    match x {
        Some(v) => format!("{v:.decimals$}"),
        None => UNDEFINED.to_string(),
    }
}

/// Shortest representation that parses back to the same `f64`.
fn exact(x: f64) -> String {
    format!("{x:?}")
}

fn exact_opt(x: Option<f64>) -> String {
    x.map(exact).unwrap_or_else(|| UNDEFINED.to_string())
}

fn render_text(table: &ComparisonTable) -> String {
    let mut rows: Vec<(String, Vec<String>)> = vec![
        ("Settings".into(), table.rows.iter().map(|r| r.pair.to_string()).collect()),
        ("Experiment".into(), table.rows.iter().map(|r| r.raw.to_string()).collect()),
        ("Exper.corrected".into(), table.rows.iter().map(|r| display_count(r.corrected)).collect()),
        ("Quantum".into(), table.rows.iter().map(|r| display_count(r.predicted)).collect()),
        ("Probability".into(), table.rows.iter().map(|r| format!("{:.6}", r.probability)).collect()),
        ("z-score".into(), table.rows.iter().map(|r| display_fixed(r.z_score, 2)).collect()),
        ("Ratio".into(), table.rows.iter().map(|r| display_fixed(r.ratio, 2)).collect()),
    ];
    let label_width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
    let cell_width = rows
        .iter()
        .flat_map(|(_, cells)| cells.iter().map(String::len))
        .max()
        .unwrap_or(0);

    let a = &table.angles;
    let mut out = String::new();
    let _ = writeln!(out, "# r = {}", table.model.r());
    let _ = writeln!(
        out,
        "# angles_deg: a = {}, a_prime = {}, b = {}, b_prime = {}",
        a.a.degrees(),
        a.a_prime.degrees(),
        a.b.degrees(),
        a.b_prime.degrees()
    );
    let _ = writeln!(out, "# reference_trials = {}", table.reference_trials);
    let _ = writeln!(out, "# fitted scale N*eta1*eta2 = {}", display_count(table.scale));
    for (label, cells) in rows.drain(..) {
        let _ = write!(out, "{label:<label_width$}");
        for cell in cells {
            let _ = write!(out, "  {cell:>cell_width$}");
        }
        out.push('\n');
    }
    out
}

fn render_csv(table: &ComparisonTable) -> String {
    let mut out = String::from("setting,raw,corrected,probability,predicted,z_score,ratio\n");
    for r in &table.rows {
        let _ = writeln!(
            out,
            "\"{}\",{},{},{},{},{},{}",
            r.pair.key(),
            r.raw,
            exact(r.corrected),
            exact(r.probability),
            exact(r.predicted),
            exact_opt(r.z_score),
            exact_opt(r.ratio)
        );
    }
    let _ = writeln!(out, "\"scale\",,,,{},,", exact(table.scale));
    out
}

/// Renders the comparison table. Output is byte-stable for a given table.
pub fn render_report(table: &ComparisonTable, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Text => render_text(table).into_bytes(),
        ReportFormat::Csv => render_csv(table).into_bytes(),
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(table).expect("table serializes");
            out.push(b'\n');
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anomaly::build_comparison;

    const MINIMAL: &str = r#"{
        "model": {"r": 0.26},
        "angles_deg": {"a": 3.8, "a_prime": -25.2, "b": -3.8, "b_prime": 25.2},
        "settings": [
            {"alice": "a", "bob": "b", "trials": 100, "coincidences": 6},
            {"alice": "a", "bob": "b_prime", "trials": 100, "coincidences": 7},
            {"alice": "a_prime", "bob": "b", "trials": 100, "coincidences": 7},
            {"alice": "a_prime", "bob": "b_prime", "trials": 100, "coincidences": COINC}
        ]
    }"#;

    fn doc(coinc: &str) -> String {
        MINIMAL.replace("COINC", coinc)
    }

    #[test]
    fn defaults_reference_trials() {
        let rec = parse_experiment_file(doc("1").as_bytes()).unwrap();
        assert_eq!(rec.reference_trials(), DEFAULT_REFERENCE_TRIALS);
        assert!(rec.singles().is_none());
        assert!(serialize_experiment(&rec).contains("\"reference_trials\": 28000000"));
    }

    #[test]
    fn missing_field_is_schema_error() {
        let text = doc("1").replace(
            r#""angles_deg": {"a": 3.8, "a_prime": -25.2, "b": -3.8, "b_prime": 25.2},"#,
            "",
        );
        match parse_experiment_file(text.as_bytes()) {
            Err(Error::Schema { field, .. }) => assert_eq!(field, "angles_deg"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_field_is_schema_error() {
        let text = doc("1").replace(r#""model""#, r#""extra": 1, "model""#);
        match parse_experiment_file(text.as_bytes()) {
            Err(Error::Schema { field, .. }) => assert_eq!(field, "extra"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_count_is_validation_error() {
        match parse_experiment_file(doc("-1").as_bytes()) {
            Err(Error::Validation { record, .. }) => assert!(record.contains("a_prime,b_prime"), "{record}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn excess_coincidences_and_duplicates_rejected() {
        assert!(matches!(
            parse_experiment_file(doc("101").as_bytes()),
            Err(Error::Validation { .. })
        ));
        let dup = doc("1").replace(r#""alice": "a_prime", "bob": "b_prime""#, r#""alice": "a", "bob": "b""#);
        match parse_experiment_file(dup.as_bytes()) {
            Err(Error::Validation { record, message }) => {
                assert!(record.contains("a,b") && message.contains("duplicate"))
            }
            other => panic!("unexpected {other:?}"),
        }
        let neg_r = doc("1").replace("0.26", "-0.26");
        assert!(matches!(parse_experiment_file(neg_r.as_bytes()), Err(Error::Validation { .. })));
    }

    #[test]
    fn syntax_error_reports_position() {
        match parse_experiment_file(b"{\n  \"model\": {\"r\": 0.26},\n  oops\n}") {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_label_is_schema_error() {
        let text = doc("1").replace(r#""alice": "a_prime", "bob": "b_prime""#, r#""alice": "b", "bob": "b_prime""#);
        assert!(matches!(parse_experiment_file(text.as_bytes()), Err(Error::Schema { .. })));
    }

    #[test]
    fn report_format_parse() {
        assert_eq!("csv".parse::<ReportFormat>().unwrap(), ReportFormat::Csv);
        assert!(matches!("xml".parse::<ReportFormat>(), Err(Error::Usage(_))));
    }

    #[test]
    fn undefined_cells_render_as_na() {
        let rec = parse_experiment_file(doc("1").replace("\"coincidences\": 6", "\"coincidences\": 0")
            .replace("\"coincidences\": 7", "\"coincidences\": 0")
            .replace("\"coincidences\": 1", "\"coincidences\": 0")
            .as_bytes())
        .unwrap();
        let table = build_comparison(&rec, rec.model().unwrap()).unwrap();
        let text = String::from_utf8(render_report(&table, ReportFormat::Text)).unwrap();
        let z_line = text.lines().find(|l| l.starts_with("z-score")).unwrap();
        assert_eq!(z_line.matches(UNDEFINED).count(), 4);
        let csv = String::from_utf8(render_report(&table, ReportFormat::Csv)).unwrap();
        assert_eq!(csv.matches(UNDEFINED).count(), 8);
        let json: serde_json::Value = serde_json::from_slice(&render_report(&table, ReportFormat::Json)).unwrap();
        assert!(json["rows"][0]["ratio"].is_null());
    }

    #[test]
    fn half_up_display() {
        assert_eq!(display_count(2.5), "3");
        assert_eq!(display_count(483.84), "484");
        assert_eq!(display_count(0.49), "0");
    }
}
