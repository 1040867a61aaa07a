//! CSV output: a header row, one record per result row, and a trailing
//! `#` comment line with the build version and the spec echo.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::experiments::{ExperimentSpec, Table};
use crate::HarnessError;

pub fn version_string() -> String {
    format!(
        "twf-harness {} ({})",
        env!("CARGO_PKG_VERSION"),
        env!("TWF_GIT_DESCRIBE")
    )
}

pub fn write_table<W: Write>(table: &Table, spec: &ExperimentSpec, w: W) -> Result<(), HarnessError> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    wtr.write_record(&table.header)?;
    for row in &table.rows {
        wtr.write_record(row)?;
    }
    wtr.flush()?;
    let mut w = wtr
        .into_inner()
        .map_err(|e| HarnessError::Io(std::io::Error::other(e.to_string())))?;
    writeln!(w, "# {} {}", version_string(), spec.echo())?;
    w.flush()?;
    Ok(())
}

pub fn write_table_to(table: &Table, spec: &ExperimentSpec, path: &Path) -> Result<(), HarnessError> {
    write_table(table, spec, BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::ExperimentKind;

    #[test]
    fn header_rows_and_trailer() {
        let t = Table {
            header: vec!["a", "b"],
            rows: vec![vec!["1".into(), "x,y".into()]],
        };
        let spec = ExperimentSpec::new(ExperimentKind::InitCompare);
        let mut buf = Vec::new();
        write_table(&t, &spec, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "a,b");
        assert_eq!(lines[1], "1,\"x,y\"");
        assert!(lines[2].starts_with("# twf-harness "));
        assert!(lines[2].contains("experiment=init-compare"));
        assert!(!text.contains('\r'));
    }
}
