//! Deterministic CSV and JSON emission shared by every subcommand.
//!
//! Both formats carry full provenance — tool version, command, and every
//! resolved parameter including the master seed — so any published table
//! can be regenerated bit for bit from its own header. JSON output is a
//! single top-level object with a `schema_version` field; CSV output is a
//! comment block (`#`-prefixed), a header row, and one record per row,
//! with standard quoting for fields containing delimiters.
//!
//! Numbers are rendered through the JSON serializer in both formats, so a
//! CSV cell and its JSON counterpart are textually identical.

use serde::Serialize;

/// Output format selector shared by every subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// Comment block, header row, one record per line.
    Csv,
    /// Single top-level object with a `schema_version` field.
    Json,
}

/// Version tag of the output layout, bumped only on breaking changes.
pub const SCHEMA_VERSION: &str = "1";

/// Tool name embedded in every artifact.
pub const TOOL: &str = "sedsim";

/// Tool version embedded in every artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// The JSON envelope: provenance, resolved parameters, an optional
/// command-specific summary, and the row table.
#[derive(Debug, Serialize)]
pub struct Document<P: Serialize, S: Serialize, R: Serialize> {
    pub schema_version: &'static str,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub params: P,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<S>,
    pub rows: Vec<R>,
}

impl<P: Serialize, S: Serialize, R: Serialize> Document<P, S, R> {
    /// Assembles an envelope with the standard provenance fields filled in.
    pub fn new(command: &'static str, params: P, summary: Option<S>, rows: Vec<R>) -> Self {
        Document {
            schema_version: SCHEMA_VERSION,
            tool: TOOL,
            version: VERSION,
            command,
            params,
            summary,
            rows,
        }
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn to_json(&self) -> anyhow::Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// CSV rendering: provenance comments (tool version, command, the
    /// params object as compact JSON), the header row, then the records
    /// produced by `cells` in column order.
    pub fn to_csv(
        &self,
        columns: &[&str],
        cells: impl Fn(&R) -> Vec<String>,
    ) -> anyhow::Result<String> {
        let mut out = String::new();
        out.push_str(&format!("# {TOOL} v{VERSION} {}\n", self.command));
        out.push_str(&format!(
            "# params: {}\n",
            serde_json::to_string(&self.params)?
        ));
        if let Some(summary) = &self.summary {
            out.push_str(&format!("# summary: {}\n", serde_json::to_string(summary)?));
        }
        out.push_str(&format!("# columns: {}\n", columns.join(",")));
        out.push_str(
            &columns
                .iter()
                .map(|c| csv_field(c))
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push('\n');
        for row in &self.rows {
            let rendered = cells(row);
            assert_eq!(
                rendered.len(),
                columns.len(),
                "row width must match the declared columns"
            );
            out.push_str(&rendered.join(","));
            out.push('\n');
        }
        Ok(out)
    }
}

/// Quotes a CSV field when it contains a delimiter, quote, or newline;
/// embedded quotes are doubled.
pub fn csv_field(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Renders a value exactly as the JSON serializer would, so CSV and JSON
/// encode identical number text.
pub fn cell<T: Serialize>(value: &T) -> String {
    let rendered = serde_json::to_string(value).expect("cells are plain scalars");
    // Strings arrive JSON-quoted; strip that layer and apply CSV quoting
    // instead.
    if let Ok(serde_json::Value::String(s)) = serde_json::from_str(&rendered) {
        csv_field(&s)
    } else {
        rendered
    }
}
