//! On-disk formats.
//!
//! * `BARYMAT1` matrix files: 8 magic bytes, little-endian `u16` version,
//!   `u64` rows, `u64` cols, then `rows × cols` little-endian `f64` in
//!   row-major order. Nothing follows the payload.
//! * Pool manifests (TOML) naming each member's matrix file, plus a sidecar
//!   text file with one stimulus id per line. Members may also be CSV files
//!   whose first column holds stimulus ids.
//! * Alignment-model bundles: a directory with the barycenter, one transform
//!   per model and a `metadata.toml`.
//! * Reports: UTF-8 tab-separated tables, floats with 17 significant digits.

mod atomic;
mod bundle;
mod matrix;
mod pool;
mod report;

pub use atomic::{write_dir_atomic, write_file_atomic};
pub use bundle::{load_model, save_model, BUNDLE_VERSION};
pub use matrix::{decode_matrix, encode_matrix, load_matrix, save_matrix, MATRIX_MAGIC, MATRIX_VERSION};
pub use pool::{
    load_pool, read_csv_matrix, read_stimulus_ids, save_pool, save_projected, write_stimulus_ids,
    MANIFEST_VERSION,
};
pub use report::{
    format_consistency_report, format_eval_report, load_consistency_report, load_eval_report,
    parse_consistency_report, parse_eval_report, save_consistency_report, save_eval_report,
    ReportFormat, REPORT_VERSION,
};

use crate::{Error, Result};

/// Model ids double as file names inside bundles and pool directories.
pub(crate) fn check_file_stem(model_id: &str) -> Result<()> {
    let bad = model_id.is_empty()
        || model_id == "."
        || model_id == ".."
        || model_id
            .chars()
            .any(|c| c == '/' || c == '\\' || c.is_control());
    if bad {
        Err(Error::InvalidModelId(model_id.to_owned()))
    } else {
        Ok(())
    }
}

/// Formats a float with 17 significant digits, enough to round-trip `f64`.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
