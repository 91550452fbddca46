//! Atomic file writes: every output lands via write-temp-then-rename.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{at_path, CliError, Result};

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = path
        .parent()
        .ok_or_else(|| CliError::data(format!("{}: no parent directory", path.display())))?;
    fs::create_dir_all(parent).map_err(at_path(parent))?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(at_path(&tmp))?;
        f.write_all(bytes).map_err(at_path(&tmp))?;
        f.sync_all().map_err(at_path(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(at_path(path))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(at_path(path))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(at_path(path))
}
