use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{check_file_stem, load_matrix, save_matrix};
use crate::scoring::ProjectedPool;
use crate::types::{build_pool, ModelPool, ReprMatrix};
use crate::{Error, Matrix, Result};

pub const MANIFEST_VERSION: u32 = 1;
const STIMULI_FILE: &str = "stimuli.txt";
const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoolManifest {
    format_version: u32,
    name: String,
    /// Sidecar file with one stimulus id per line. Optional when every member
    /// is a CSV file carrying its own ids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stimuli: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    common_width: Option<usize>,
    members: Vec<MemberEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MemberEntry {
    model_id: String,
    path: String,
    /// Original width before padding.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    width: Option<usize>,
}

fn manifest_error(path: &Path, message: impl Into<String>) -> Error {
    Error::ManifestParse {
        path: path.into(),
        message: message.into(),
    }
}

pub fn read_stimulus_ids(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::to_owned).collect())
}

pub fn write_stimulus_ids(path: impl AsRef<Path>, ids: &[String]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for id in ids {
        if id.contains(['\n', '\r', '\t']) {
            return Err(Error::InvalidStimulusId(id.clone()));
        }
        text.push_str(id);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a CSV matrix whose header row names an id column followed by
/// feature columns, and whose first field on each row is the stimulus id.
pub fn read_csv_matrix(path: impl AsRef<Path>) -> Result<(Vec<String>, Matrix)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let parse_error = |line: usize, message: String| Error::ParseFailure {
        path: path.into(),
        line,
        message,
    };
    let cols = reader
        .headers()
        .map_err(|e| parse_error(1, e.to_string()))?
        .len()
        .checked_sub(1)
        .filter(|&c| c > 0)
        .ok_or_else(|| parse_error(1, "header needs an id column and at least one feature".into()))?;

    let mut ids = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        ids.push(record[0].to_owned());
        for field in record.iter().skip(1) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_error(line, format!("`{field}` is not a number")))?;
            values.push(v);
        }
    }
    if ids.is_empty() {
        return Err(parse_error(2, "no data rows".into()));
    }
    Ok((ids.clone(), Matrix::from_row_slice(ids.len(), cols, &values)))
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Loads and validates the pool described by a manifest.
///
/// Relative paths are resolved against the manifest's directory.
pub fn load_pool(manifest_path: impl AsRef<Path>) -> Result<ModelPool> {
    let manifest_path = manifest_path.as_ref();
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: PoolManifest =
        toml::from_str(&text).map_err(|e| manifest_error(manifest_path, e.to_string()))?;
    if manifest.format_version != MANIFEST_VERSION {
        return Err(manifest_error(
            manifest_path,
            format!("unsupported manifest version {}", manifest.format_version),
        ));
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &str| -> PathBuf { base.join(p) };

    let mut stimuli = manifest
        .stimuli
        .as_deref()
        .map(|p| read_stimulus_ids(resolve(p)))
        .transpose()?;

    let mut members = Vec::with_capacity(manifest.members.len());
    for entry in &manifest.members {
        let path = resolve(&entry.path);
        let (ids, data) = if is_csv(&path) {
            let (csv_ids, data) = read_csv_matrix(&path)?;
            let ids = stimuli.get_or_insert_with(|| csv_ids.clone()).clone();
            if csv_ids != ids {
                return Err(Error::MismatchedStimuli {
                    model_id: entry.model_id.clone(),
                });
            }
            (ids, data)
        } else {
            let ids = stimuli.clone().ok_or_else(|| {
                manifest_error(
                    manifest_path,
                    format!("member `{}` is binary but no stimuli file is given", entry.model_id),
                )
            })?;
            (ids, load_matrix(&path)?)
        };
        if ids.len() != data.nrows() {
            return Err(Error::MismatchedStimuli {
                model_id: entry.model_id.clone(),
            });
        }
        if let Some(width) = entry.width {
            if width != data.ncols() {
                return Err(manifest_error(
                    manifest_path,
                    format!(
                        "member `{}` declares width {width} but its matrix has {} columns",
                        entry.model_id,
                        data.ncols()
                    ),
                ));
            }
        }
        members.push(ReprMatrix::new(entry.model_id.clone(), ids, data)?);
    }

    let pool = build_pool(members)?;
    if let Some(w) = manifest.common_width {
        if w != pool.common_width() {
            return Err(manifest_error(
                manifest_path,
                format!("common_width {w} but widest member has {}", pool.common_width()),
            ));
        }
    }
    Ok(pool)
}

fn write_manifest(dir: &Path, manifest: &PoolManifest) -> Result<PathBuf> {
    let path = dir.join(MANIFEST_FILE);
    let text = toml::to_string(manifest).map_err(|e| manifest_error(&path, e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes `pool` into `dir` (which must exist): one `BARYMAT1` file per model
/// holding its unpadded columns, the stimulus ids and `manifest.toml`.
/// Returns the manifest path.
pub fn save_pool(pool: &ModelPool, dir: &Path, name: &str) -> Result<PathBuf> {
    write_stimulus_ids(dir.join(STIMULI_FILE), pool.stimulus_ids())?;
    let mut members = Vec::with_capacity(pool.len());
    for (member, &width) in pool.members().iter().zip(pool.original_widths()) {
        check_file_stem(member.model_id())?;
        let file = format!("{}.bin", member.model_id());
        save_matrix(dir.join(&file), &member.data().columns(0, width).into_owned())?;
        members.push(MemberEntry {
            model_id: member.model_id().to_owned(),
            path: file,
            width: Some(width),
        });
    }
    write_manifest(
        dir,
        &PoolManifest {
            format_version: MANIFEST_VERSION,
            name: name.to_owned(),
            stimuli: Some(STIMULI_FILE.into()),
            common_width: Some(pool.common_width()),
            members,
        },
    )
}

/// Writes a projected pool in the pool-manifest layout; every member has the
/// universal width.
pub fn save_projected(projected: &ProjectedPool, dir: &Path, name: &str) -> Result<PathBuf> {
    write_stimulus_ids(dir.join(STIMULI_FILE), projected.stimulus_ids())?;
    let width = projected.width();
    let mut members = Vec::with_capacity(projected.n_models());
    for (model_id, m) in projected.model_ids().iter().zip(projected.members()) {
        check_file_stem(model_id)?;
        let file = format!("{model_id}.bin");
        save_matrix(dir.join(&file), m)?;
        members.push(MemberEntry {
            model_id: model_id.clone(),
            path: file,
            width: Some(width),
        });
    }
    write_manifest(
        dir,
        &PoolManifest {
            format_version: MANIFEST_VERSION,
            name: name.to_owned(),
            stimuli: Some(STIMULI_FILE.into()),
            common_width: Some(width),
            members,
        },
    )
}
