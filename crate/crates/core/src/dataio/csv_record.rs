use std::fs::File;
use std::path::Path;

use super::{EcgRecord, LeadSignal};
use crate::error::{Error, Result};
use crate::num::Scalar;

/// Reads a comma-separated record, one column per lead.
///
/// With `has_header`, the first row holds lead names; they are used when
/// `lead_names` is empty and otherwise ignored. Without a header and without
/// names, leads are called `ch0`, `ch1`, ….
pub fn read_csv_record<T: Scalar>(
    csv_path: impl AsRef<Path>,
    sampling_rate_hz: u32,
    lead_names: &[String],
    has_header: bool,
) -> Result<EcgRecord<T>> {
    let path = csv_path.as_ref();
    let label = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut names: Vec<String> = lead_names.to_vec();
    if has_header && names.is_empty() {
        let header = reader
            .headers()
            .map_err(|e| Error::parse(&label, 1, e.to_string()))?;
        names = header.iter().map(str::to_string).collect();
    }

    let mut columns: Vec<Vec<T>> = Vec::new();
    for (row_idx, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::parse(&label, row_idx + 1, e.to_string()))?;
        let line = row.position().map_or(row_idx + 1, |p| p.line() as usize);
        if columns.is_empty() {
            if names.is_empty() {
                names = (0..row.len()).map(|i| format!("ch{i}")).collect();
            }
            if row.len() != names.len() {
                return Err(Error::parse(
                    &label,
                    line,
                    format!("expected {} columns, found {}", names.len(), row.len()),
                ));
            }
            columns = vec![Vec::new(); names.len()];
        } else if row.len() != columns.len() {
            return Err(Error::parse(
                &label,
                line,
                format!(
                    "ragged row: expected {} columns, found {}",
                    columns.len(),
                    row.len()
                ),
            ));
        }
        for (col, cell) in row.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                Error::parse(
                    &label,
                    line,
                    format!("column {}: non-numeric cell {cell:?}", col + 1),
                )
            })?;
            columns[col].push(T::lit(v));
        }
    }
    if columns.is_empty() {
        return Err(Error::parse(&label, 1, "no data rows"));
    }

    let record_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| label.clone());
    let leads = names
        .into_iter()
        .zip(columns)
        .map(|(n, c)| LeadSignal::new(n, c))
        .collect::<Result<Vec<_>>>()?;
    EcgRecord::new(record_id, sampling_rate_hz, leads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn two_column_passthrough() {
        let f = write("0.1,0.2\n0.3,0.4\n0.5,0.6\n");
        let names = vec!["MLII".to_string(), "V1".to_string()];
        let r: EcgRecord<f64> = read_csv_record(f.path(), 360, &names, false).unwrap();
        assert_eq!(r.leads.len(), 2);
        assert_eq!(r.duration_samples, 3);
        assert_eq!(r.sampling_rate_hz, 360);
        assert_eq!(r.leads[1].samples, vec![0.2, 0.4, 0.6]);
    }

    #[test]
    fn header_names_used_when_none_given() {
        let f = write("V4,V5\n1,2\n3,4\n");
        let r: EcgRecord<f32> = read_csv_record(f.path(), 500, &[], true).unwrap();
        assert_eq!(r.lead_names(), vec!["V4", "V5"]);
        assert_eq!(r.leads[0].samples, vec![1.0, 3.0]);
    }

    #[test]
    fn empty_file_is_parse_error() {
        let f = write("");
        assert!(matches!(
            read_csv_record::<f64>(f.path(), 500, &[], false),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn ragged_row_reports_line() {
        let f = write("1,2\n3,4\n5\n");
        match read_csv_record::<f64>(f.path(), 500, &[], false) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("ragged"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_reports_row_and_column() {
        let f = write("1,2\n3,x\n");
        match read_csv_record::<f64>(f.path(), 500, &[], false) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("column 2"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
