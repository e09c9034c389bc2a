use std::fs;
use std::io::Write;
use std::path::Path;

use crate::{Error, Result};

fn parent_of(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Builds a directory in a sibling temp dir, then renames it to `out`.
///
/// If `build` fails nothing is left at `out`. An existing directory at `out`
/// is replaced only after the new one is complete.
pub fn write_dir_atomic<F>(out: &Path, build: F) -> Result<()>
where
    F: FnOnce(&Path) -> Result<()>,
{
    let parent = parent_of(out);
    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let staging = tempfile::Builder::new()
        .prefix(".baryalign-staging-")
        .tempdir_in(parent)
        .map_err(|e| Error::io(parent, e))?;
    build(staging.path())?;

    if out.exists() {
        if !out.is_dir() {
            return Err(Error::io(
                out,
                std::io::Error::new(std::io::ErrorKind::AlreadyExists, "not a directory"),
            ));
        }
        let old = tempfile::Builder::new()
            .prefix(".baryalign-old-")
            .tempdir_in(parent)
            .map_err(|e| Error::io(parent, e))?;
        let old_path = old.path().join("previous");
        fs::rename(out, &old_path).map_err(|e| Error::io(out, e))?;
        let staged = staging.keep();
        fs::rename(&staged, out).map_err(|e| Error::io(out, e))?;
        drop(old);
    } else {
        let staged = staging.keep();
        fs::rename(&staged, out).map_err(|e| Error::io(out, e))?;
    }
    Ok(())
}

/// Writes `contents` to a temp file next to `path` and renames it into place.
pub fn write_file_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let parent = parent_of(path);
    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(|e| Error::io(parent, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
