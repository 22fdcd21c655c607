use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use ihskit::linalg::DenseMatrix;
use ihskit::Error;

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Nonconverged(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Nonconverged(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Nonconverged(m) => write!(f, "not converged: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::SvdNoConvergence { .. } | Error::SketchRankDeficient { .. } => {
                CliError::Nonconverged(e.to_string())
            }
            other => CliError::Usage(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Headerless CSV of reals, one matrix row per line.
pub fn read_matrix(path: &Path) -> CliResult<DenseMatrix> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_matrix(&text).map_err(|m| CliError::Usage(format!("{}: {m}", path.display())))
}

pub fn parse_matrix(text: &str) -> Result<DenseMatrix, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| e.to_string())?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| format!("line {line}, column {}: '{field}' is not a number", j + 1))?;
            if !v.is_finite() {
                return Err(format!("line {line}, column {}: non-finite value '{field}'", j + 1));
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(format!(
                    "line {line}: expected {} values, found {}",
                    first.len(),
                    row.len()
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err("no data rows".into());
    }
    DenseMatrix::from_rows(&rows).map_err(|e| e.to_string())
}

pub fn format_matrix(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Writes through a temporary file in the destination directory, then
/// renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rows() {
        let m = parse_matrix("1, 2\n3,4.5\n\n-1e-3,0\n").unwrap();
        assert_eq!(m.shape(), (3, 2));
        assert_eq!(m.get(1, 1), 4.5);
        assert_eq!(m.get(2, 0), -1e-3);
    }

    #[test]
    fn names_offending_line() {
        let err = parse_matrix("1,2\n3,x\n").unwrap_err();
        assert!(err.contains("line 2"), "{err}");
        let err = parse_matrix("1,2\n3,4\n5\n").unwrap_err();
        assert!(err.contains("line 3") && err.contains("expected 2"), "{err}");
        assert!(parse_matrix("1,inf\n").unwrap_err().contains("line 1"));
        assert!(parse_matrix("\n").is_err());
    }

    #[test]
    fn round_trips_exactly() {
        let m = DenseMatrix::from_rows(&[vec![1.0 / 3.0, -2.5e-300], vec![std::f64::consts::PI, 0.0]]).unwrap();
        assert_eq!(parse_matrix(&format_matrix(&m)).unwrap(), m);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        write_atomic(&p, b"first").unwrap();
        write_atomic(&p, b"second").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "second");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
