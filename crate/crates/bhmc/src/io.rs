//! CSV datasets.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use bhmc_core::Dataset;

use crate::error::{CliError, Result};

/// Read a rectangular numeric CSV. Rows and columns in error messages are
/// 1-based and count data rows only.
pub fn load_csv(path: &Path, has_header: bool) -> Result<Dataset> {
    let file = File::open(path).map_err(|source| CliError::Read { path: path.to_owned(), source })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut values = Vec::new();
    let mut dim = None;
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|source| CliError::Csv { path: path.to_owned(), source })?;
        let row = i + 1;
        let expected = *dim.get_or_insert(record.len());
        if record.len() != expected {
            return Err(CliError::Ragged { path: path.to_owned(), row, expected, got: record.len() });
        }
        for (j, cell) in record.iter().enumerate() {
            let cell_err = |reason: String| CliError::Cell { path: path.to_owned(), row, col: j + 1, reason };
            let v: f64 = cell.parse().map_err(|_| cell_err(format!("not a number: {cell:?}")))?;
            if !v.is_finite() {
                return Err(cell_err(format!("non-finite value {cell:?}")));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(CliError::Model(bhmc_core::Error::EmptyData));
    }
    Ok(Dataset::from_flat(rows, dim.unwrap_or(0), values)?)
}

pub fn write_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut out = String::new();
    for row in data.rows() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let write_err = |source| CliError::Write { path: path.to_owned(), source };
    let mut f = File::create(path).map_err(write_err)?;
    f.write_all(bytes).map_err(write_err)
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_owned(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_identity() {
        let f = file("1,0\n0,1\n");
        let d = load_csv(f.path(), false).unwrap();
        assert_eq!(d.rows().collect::<Vec<_>>(), vec![&[1.0, 0.0][..], &[0.0, 1.0][..]]);
    }

    #[test]
    fn skips_header() {
        let f = file("a,b\n1.5,2\n");
        let d = load_csv(f.path(), true).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.row(0), &[1.5, 2.0]);
    }

    #[test]
    fn nan_names_location() {
        let f = file("1,2\n3,NaN\n");
        let msg = load_csv(f.path(), false).unwrap_err().to_string();
        assert!(msg.contains("row 2, column 2"), "{msg}");
    }

    #[test]
    fn ragged_and_text_rejected() {
        let f = file("1,2\n3\n");
        assert!(matches!(load_csv(f.path(), false), Err(CliError::Ragged { row: 2, .. })));
        let f = file("1,x\n");
        assert!(matches!(load_csv(f.path(), false), Err(CliError::Cell { row: 1, col: 2, .. })));
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_csv(Path::new("/no/such/data.csv"), false).unwrap_err();
        assert!(err.to_string().contains("/no/such/data.csv"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let d = Dataset::from_rows(&[vec![0.1, -2.5e-7], vec![3.0, 1e10]]).unwrap();
        write_csv(&p, &d).unwrap();
        assert_eq!(load_csv(&p, false).unwrap(), d);
    }
}
