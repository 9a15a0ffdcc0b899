//! CSV schema: a header row naming `index,value` plus optional `label` and
//! `truth` columns. `index` is 1-based and sequential; an empty label cell
//! means the point is unlabeled.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use imr_core::{LabeledSeries, TimeSeries};
use tempfile::NamedTempFile;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeriesTable {
    pub values: Vec<f64>,
    pub labels: Option<Vec<Option<f64>>>,
    pub truth: Option<Vec<f64>>,
}

impl SeriesTable {
    pub fn series(&self) -> Result<TimeSeries, CliError> {
        TimeSeries::new(self.values.clone()).map_err(CliError::input)
    }

    pub fn labeled(&self) -> Result<LabeledSeries, CliError> {
        let Some(labels) = &self.labels else {
            return Ok(LabeledSeries::new());
        };
        LabeledSeries::from_pairs(
            labels
                .iter()
                .enumerate()
                .filter_map(|(i, l)| l.map(|v| (i, v))),
        )
        .map_err(CliError::input)
    }

    pub fn truth_series(&self) -> Result<Option<TimeSeries>, CliError> {
        self.truth
            .clone()
            .map(TimeSeries::new)
            .transpose()
            .map_err(CliError::input)
    }
}

fn parse_float(cell: &str, line: usize, column: &str) -> Result<f64, CliError> {
    let v: f64 = cell.trim().parse().map_err(|_| {
        CliError::Parse(format!(
            "line {line}: column '{column}' holds '{cell}', not a number"
        ))
    })?;
    if !v.is_finite() {
        return Err(CliError::Parse(format!(
            "line {line}: column '{column}' is not finite"
        )));
    }
    Ok(v)
}

pub fn parse_table<R: Read>(reader: R) -> Result<SeriesTable, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (Some(idx_col), Some(val_col)) = (col("index"), col("value")) else {
        return Err(CliError::Parse(
            "header must name at least the 'index' and 'value' columns".into(),
        ));
    };
    let label_col = col("label");
    let truth_col = col("truth");
    if let Some(extra) = headers
        .iter()
        .find(|h| !matches!(h.trim(), "index" | "value" | "label" | "truth"))
    {
        return Err(CliError::Parse(format!("unknown column '{extra}'")));
    }

    let mut table = SeriesTable {
        labels: label_col.map(|_| Vec::new()),
        truth: truth_col.map(|_| Vec::new()),
        ..SeriesTable::default()
    };
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let line = row + 2;
        let index: usize = record[idx_col].trim().parse().map_err(|_| {
            CliError::Parse(format!(
                "line {line}: index '{}' is not an integer",
                &record[idx_col]
            ))
        })?;
        if index != row + 1 {
            return Err(CliError::Parse(format!(
                "line {line}: expected index {}, found {index}",
                row + 1
            )));
        }
        table
            .values
            .push(parse_float(&record[val_col], line, "value")?);
        if let (Some(c), Some(labels)) = (label_col, table.labels.as_mut()) {
            let cell = record[c].trim();
            labels.push(if cell.is_empty() {
                None
            } else {
                Some(parse_float(cell, line, "label")?)
            });
        }
        if let (Some(c), Some(truth)) = (truth_col, table.truth.as_mut()) {
            truth.push(parse_float(&record[c], line, "truth")?);
        }
    }
    if table.values.is_empty() {
        return Err(CliError::Parse("file holds no data rows".into()));
    }
    Ok(table)
}

pub fn read_table(path: &Path) -> Result<SeriesTable, CliError> {
    if path.as_os_str() == "-" {
        return parse_table(io::stdin().lock());
    }
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_table(file)
}

pub fn emit_table<W: Write>(table: &SeriesTable, writer: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["index", "value"];
    if table.labels.is_some() {
        header.push("label");
    }
    if table.truth.is_some() {
        header.push("truth");
    }
    w.write_record(&header)?;
    for (i, v) in table.values.iter().enumerate() {
        let mut rec = vec![(i + 1).to_string(), v.to_string()];
        if let Some(labels) = &table.labels {
            rec.push(labels[i].map(|l| l.to_string()).unwrap_or_default());
        }
        if let Some(truth) = &table.truth {
            rec.push(truth[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed run never leaves a partial file behind.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
{
    if path.as_os_str() == "-" {
        let stdout = io::stdout();
        let mut lock = stdout.lock();
        return fill(&mut lock);
    }
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    {
        let mut buf = io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf)?;
        buf.flush().map_err(|e| CliError::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_table(path: &Path, table: &SeriesTable) -> Result<(), CliError> {
    write_atomic(path, |w| emit_table(table, w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_schema() {
        let text = "index,value,label,truth\n1,6,6,6\n2,10,,5.6\n3,9.6,5.4,5.4\n";
        let t = parse_table(text.as_bytes()).unwrap();
        assert_eq!(t.values, vec![6.0, 10.0, 9.6]);
        assert_eq!(t.labels, Some(vec![Some(6.0), None, Some(5.4)]));
        assert_eq!(t.truth, Some(vec![6.0, 5.6, 5.4]));
        assert_eq!(t.labeled().unwrap().len(), 2);
    }

    #[test]
    fn round_trip_is_value_identical() {
        let t = SeriesTable {
            values: vec![0.1 + 0.2, -1e-300, 12345.678901234567, 3.0],
            labels: Some(vec![None, Some(1.0 / 3.0), None, Some(-0.0)]),
            truth: None,
        };
        let mut buf = Vec::new();
        emit_table(&t, &mut buf).unwrap();
        let back = parse_table(buf.as_slice()).unwrap();
        assert_eq!(back, t);
        let mut again = Vec::new();
        emit_table(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn rejects_malformed() {
        for bad in [
            "value\n1\n",
            "index,value\n",
            "index,value\n1,abc\n",
            "index,value\n2,1.0\n",
            "index,value\n1,NaN\n",
            "index,value,extra\n1,2,3\n",
            "index,value\n1,2,3\n",
        ] {
            assert!(parse_table(bad.as_bytes()).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn atomic_write_leaves_nothing_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let res = write_atomic(&path, |_| Err(CliError::Parse("boom".into())));
        assert!(res.is_err());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
