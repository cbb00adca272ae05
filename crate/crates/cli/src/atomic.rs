use std::io::{BufWriter, Write};
use std::path::Path;

use pulseplay_core::{Error, Result};
use tempfile::NamedTempFile;

/// Writes through a temporary file in the destination directory and renames
/// it into place, so a failed write leaves no partial output.
pub fn write_atomic(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io_err = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut tmp = NamedTempFile::new_in(dir).map_err(io_err)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        f(&mut w)?;
        w.flush().map_err(io_err)?;
    }
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Fails unless the directory that will hold `path` exists.
pub fn check_output_path(path: &Path) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if dir.is_dir() {
        Ok(())
    } else {
        Err(Error::Io(format!("output directory {} does not exist", dir.display())))
    }
}

/// Fails unless `path` is an existing regular file.
pub fn check_input_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Io(format!("input file {} not found", path.display())))
    }
}
