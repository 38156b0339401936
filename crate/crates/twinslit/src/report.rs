//! Output writers: CSV tables with commented metadata headers, JSON
//! documents, and JSONL record streams. Every artifact embeds the full run
//! configuration so results are reproducible from the file alone.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;
use crate::Result;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Metadata lines prepended (with `# `) to CSV outputs: tool version, seed,
/// and the configuration as one line of JSON.
fn metadata_lines(config: &RunConfig) -> Result<Vec<String>> {
    Ok(vec![
        format!("tool_version: {TOOL_VERSION}"),
        format!("seed: {}", config.seed),
        format!("config: {}", serde_json::to_string(config)?),
    ])
}

/// Writes a CSV table: commented metadata, a header row, and one row per
/// record (fields rendered with full float precision).
pub fn write_csv(
    path: &Path,
    config: &RunConfig,
    header: &[&str],
    rows: &[Vec<f64>],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for line in metadata_lines(config)? {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let rendered: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", rendered.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Wraps a result document with the configuration and tool version.
#[derive(Debug, Serialize)]
struct Document<'a, T: Serialize> {
    tool_version: &'static str,
    config: &'a RunConfig,
    result: &'a T,
}

/// Writes a pretty-printed JSON document embedding the configuration.
pub fn write_json<T: Serialize>(path: &Path, config: &RunConfig, result: &T) -> Result<()> {
    let doc = Document {
        tool_version: TOOL_VERSION,
        config,
        result,
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &doc)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Writes one JSON object per line (no configuration wrapper; pair with a
/// sibling JSON document carrying the metadata).
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for record in records {
        serde_json::to_writer(&mut w, record)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
