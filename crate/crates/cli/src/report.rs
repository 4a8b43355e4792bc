use std::io::Write;

use boundarylab::active::PipelineReport;

use crate::al::al_markdown;
use crate::args::ReportArgs;
use crate::error::{CliError, CliResult};
use crate::{missing, write_file};

/// Reads the CSV written by `al` back into reports.
pub fn parse_report_csv(text: &str) -> CliResult<Vec<PipelineReport>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    reader
        .deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| CliError::Io(format!("report row {}: {e}", i + 1))))
        .collect()
}

pub fn run(a: ReportArgs, out: &mut dyn Write) -> CliResult<()> {
    let path = a.input.ok_or_else(|| missing(&["report"], "input"))?;
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let md = al_markdown(&parse_report_csv(&text)?);
    if let Some(dest) = &a.out {
        write_file(dest, &md)?;
    }
    out.write_all(md.as_bytes())?;
    Ok(())
}
