//! Result tables and their CSV/JSON renderings.
//!
//! Every subcommand produces one [`ResultTable`]: a column schema with
//! units, float rows, and enough metadata (scenario hash, tool version,
//! seed) to re-run the exact computation. The renderings are byte-stable:
//! the same table always serializes to the same bytes, so reruns of a
//! deterministic scenario can be compared with `diff`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::CliError;

/// Output format selected by `--format`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    /// RFC-4180 CSV with `name[unit]` headers, LF line endings, and
    /// 12-significant-digit floats.
    #[default]
    Csv,
    /// A JSON object with `schema`, `rows`, and `metadata` keys.
    Json,
}

/// One column of the schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Column {
    pub name: String,
    /// Unit string for the header; `-` marks a dimensionless quantity.
    pub unit: String,
}

/// Builds a column; `unit = "-"` for dimensionless columns.
pub fn col(name: &str, unit: &str) -> Column {
    Column {
        name: name.into(),
        unit: unit.into(),
    }
}

/// Provenance carried with every table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    /// Emitting tool, always `uwqkd`.
    pub tool: String,
    /// Crate version at build time.
    pub version: String,
    /// The subcommand that produced the table.
    pub subcommand: String,
    /// FNV-1a digest of the canonical scenario, including overrides.
    pub scenario_hash: String,
    /// Effective random seed for Monte Carlo subcommands.
    pub seed: Option<u64>,
    /// Subcommand-specific scalars (photon counts, optima, and the like).
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

impl Metadata {
    /// Metadata for a subcommand run against a hashed scenario.
    pub fn new(subcommand: &str, scenario_hash: String, seed: Option<u64>) -> Self {
        Metadata {
            tool: "uwqkd".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            scenario_hash,
            seed,
            extra: BTreeMap::new(),
        }
    }

    /// Attaches a named scalar to the metadata.
    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.extra.insert(key.into(), value);
        self
    }
}

/// A schema-checked table of float rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultTable {
    pub schema: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
    pub metadata: Metadata,
}

impl ResultTable {
    pub fn new(schema: Vec<Column>, metadata: Metadata) -> Self {
        ResultTable {
            schema,
            rows: Vec::new(),
            metadata,
        }
    }

    /// Appends a row, which must match the schema's arity.
    pub fn push_row(&mut self, row: Vec<f64>) {
        assert_eq!(
            row.len(),
            self.schema.len(),
            "row arity {} does not match schema arity {}",
            row.len(),
            self.schema.len()
        );
        self.rows.push(row);
    }

    /// Renders the table in the requested format.
    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    /// CSV with a `name[unit]` header row and 12-significant-digit floats.
    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .quote_style(csv::QuoteStyle::Necessary)
            .from_writer(Vec::new());
        let header: Vec<String> = self
            .schema
            .iter()
            .map(|c| format!("{}[{}]", c.name, c.unit))
            .collect();
        writer
            .write_record(&header)
            .map_err(|e| CliError::Config(format!("csv rendering failed: {e}")))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
            writer
                .write_record(&cells)
                .map_err(|e| CliError::Config(format!("csv rendering failed: {e}")))?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| CliError::Config(format!("csv rendering failed: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is always UTF-8"))
    }

    /// JSON object with `schema`, `rows`, and `metadata` keys.
    pub fn to_json(&self) -> Result<String, CliError> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Config(format!("json rendering failed: {e}")))?;
        text.push('\n');
        Ok(text)
    }
}

/// Formats a float with 12 significant digits in scientific notation.
fn format_float(value: f64) -> String {
    format!("{value:.11e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_metadata() -> Metadata {
        Metadata::new("qber-sweep", "fnv1a64:0123456789abcdef".into(), None)
    }

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_float(155.3125), "1.55312500000e2");
        assert_eq!(format_float(0.0), "0.00000000000e0");
        assert_eq!(format_float(-2.5e-7), "-2.50000000000e-7");
    }

    #[test]
    fn printed_floats_reparse_to_printed_precision() {
        for &v in &[1.0 / 3.0, 107.25, 6.626e-34, 2.0_f64.sqrt()] {
            let printed = format_float(v);
            let back: f64 = printed.parse().unwrap();
            assert!(
                ((back - v) / v).abs() < 1e-11,
                "{v} printed as {printed}, reparsed {back}"
            );
        }
    }

    #[test]
    fn empty_table_renders_as_header_only_csv() {
        let table = ResultTable::new(
            vec![col("distance", "m"), col("qber", "-")],
            sample_metadata(),
        );
        assert_eq!(table.to_csv().unwrap(), "distance[m],qber[-]\n");
    }

    #[test]
    fn csv_uses_lf_endings_and_quotes_only_when_needed() {
        let mut table = ResultTable::new(
            vec![col("plain", "m"), col("with,comma", "-")],
            sample_metadata(),
        );
        table.push_row(vec![1.0, 2.0]);
        let text = table.to_csv().unwrap();
        assert!(!text.contains('\r'));
        assert!(text.starts_with("plain[m],\"with,comma[-]\"\n"));
        assert!(text.ends_with("1.00000000000e0,2.00000000000e0\n"));
    }

    #[test]
    fn json_has_the_three_contract_keys() {
        let mut table = ResultTable::new(vec![col("x", "m")], sample_metadata().with("n", 3.0));
        table.push_row(vec![42.0]);
        let text = table.to_json().unwrap();
        let value: serde_json::Value = text.parse().unwrap();
        assert!(value.get("schema").is_some());
        assert!(value.get("rows").is_some());
        assert_eq!(value["metadata"]["tool"], "uwqkd");
        assert_eq!(value["metadata"]["extra"]["n"], 3.0);
        assert_eq!(value["rows"][0][0], 42.0);
    }

    #[test]
    fn rendering_is_byte_stable() {
        let mut table = ResultTable::new(
            vec![col("a", "m"), col("b", "-")],
            sample_metadata().with("seed", 7.0),
        );
        table.push_row(vec![1.0 / 3.0, 1e-300]);
        assert_eq!(table.to_csv().unwrap(), table.to_csv().unwrap());
        assert_eq!(table.to_json().unwrap(), table.to_json().unwrap());
    }

    #[test]
    #[should_panic(expected = "row arity")]
    fn arity_mismatch_is_a_programming_error() {
        let mut table = ResultTable::new(vec![col("x", "m")], sample_metadata());
        table.push_row(vec![1.0, 2.0]);
    }
}
