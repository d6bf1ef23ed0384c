use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use blockmom::SampleBatch;

use crate::error::{CliError, Result};

/// Parses one finite decimal number per line. Blank lines and lines starting
/// with `#` are skipped; errors carry the 1-based line number.
pub fn parse_samples(text: &str) -> Result<SampleBatch> {
    let mut values = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(_) => {
                return Err(CliError::Data(format!(
                    "line {}: not a finite number",
                    i + 1
                )))
            }
            Err(_) => return Err(CliError::Data(format!("line {}: not a number", i + 1))),
        }
    }
    if values.is_empty() {
        return Err(CliError::Data("empty file: no observations".into()));
    }
    Ok(SampleBatch::new(values)?)
}

pub fn read_samples(path: &Path) -> Result<SampleBatch> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    parse_samples(&text)
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp: PathBuf = dir.join(tmp_name);
    let mut file = fs::File::create(&tmp).map_err(|e| io_error(&tmp, e))?;
    file.write_all(contents).map_err(|e| io_error(&tmp, e))?;
    file.sync_all().map_err(|e| io_error(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_error(path, e))
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

/// Shortest decimal representation that parses back to the same value.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_comments_and_blanks() {
        let b = parse_samples("# header\n1\n\n 2.5 \n-3e2\n").unwrap();
        assert_eq!(b.values(), &[1.0, 2.5, -300.0]);
    }

    #[test]
    fn reports_bad_line() {
        let err = parse_samples("1\nx\n3").unwrap_err();
        assert_eq!(err.to_string(), "data error: line 2: not a number");
        assert_eq!(err.exit_code(), 3);
        let err = parse_samples("1\n\ninf\n").unwrap_err();
        assert_eq!(err.to_string(), "data error: line 3: not a finite number");
    }

    #[test]
    fn rejects_empty() {
        assert!(parse_samples("").is_err());
        assert!(parse_samples("# only a comment\n\n").is_err());
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0, 123456789.123456789] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(0.5), "0.5");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/out.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }
}
