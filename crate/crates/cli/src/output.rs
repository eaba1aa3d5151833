use std::io::Write;
use std::path::Path;

use crate::CliError;

/// Writes `name` inside `dir` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.join(name).display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(dir.join(name)).map_err(|e| io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replaces_existing_files_and_leaves_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("nested");
        write_atomic(&sub, "a.csv", "x\n1\n").unwrap();
        write_atomic(&sub, "a.csv", "x\n2\n").unwrap();
        assert_eq!(std::fs::read_to_string(sub.join("a.csv")).unwrap(), "x\n2\n");
        assert_eq!(std::fs::read_dir(&sub).unwrap().count(), 1);
    }
}
