use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::pool::{read_stimulus_ids, write_stimulus_ids};
use super::{check_file_stem, fmt_f64, load_matrix, save_matrix};
use crate::barycenter::TrainTrace;
use crate::synth::GENERATOR;
use crate::types::{AlignmentModel, TrainingMeta};
use crate::{Error, Matrix, Result};

pub const BUNDLE_VERSION: u32 = 1;
const METADATA_FILE: &str = "metadata.toml";
const BARYCENTER_FILE: &str = "barycenter.bin";
const STIMULI_FILE: &str = "stimuli.txt";
const TRACE_FILE: &str = "trace.tsv";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleMetadata {
    format_version: u32,
    /// Random generator used by the synthetic-data tooling of this build.
    generator: String,
    barycenter: String,
    stimuli: String,
    training: TrainingSection,
    models: Vec<ModelEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainingSection {
    epsilon: f64,
    max_iterations: usize,
    iterations_run: usize,
    final_objective: f64,
    final_relative_change: f64,
    converged: bool,
    centered: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelEntry {
    model_id: String,
    original_width: usize,
    transform: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    center: Option<String>,
}

/// Writes `model` (and an optional trace) into the existing directory `dir`.
pub fn save_model(model: &AlignmentModel, trace: Option<&TrainTrace>, dir: &Path) -> Result<()> {
    let transforms_dir = dir.join("transforms");
    std::fs::create_dir_all(&transforms_dir).map_err(|e| Error::io(&transforms_dir, e))?;
    let centers_dir = dir.join("centers");
    if model.centers().is_some() {
        std::fs::create_dir_all(&centers_dir).map_err(|e| Error::io(&centers_dir, e))?;
    }

    save_matrix(dir.join(BARYCENTER_FILE), model.barycenter())?;
    write_stimulus_ids(dir.join(STIMULI_FILE), model.stimulus_ids())?;

    let mut models = Vec::with_capacity(model.model_ids().len());
    for (i, id) in model.model_ids().iter().enumerate() {
        check_file_stem(id)?;
        let transform = format!("transforms/{id}.bin");
        save_matrix(dir.join(&transform), &model.transforms()[i])?;
        let center = match model.centers() {
            Some(centers) => {
                let rel = format!("centers/{id}.bin");
                save_matrix(dir.join(&rel), &Matrix::from_row_slice(1, centers[i].len(), centers[i].as_slice()))?;
                Some(rel)
            }
            None => None,
        };
        models.push(ModelEntry {
            model_id: id.clone(),
            original_width: model.original_widths()[i],
            transform,
            center,
        });
    }

    let meta = model.meta();
    let metadata = BundleMetadata {
        format_version: BUNDLE_VERSION,
        generator: GENERATOR.to_owned(),
        barycenter: BARYCENTER_FILE.into(),
        stimuli: STIMULI_FILE.into(),
        training: TrainingSection {
            epsilon: meta.epsilon,
            max_iterations: meta.max_iterations,
            iterations_run: meta.iterations_run,
            final_objective: meta.final_objective,
            final_relative_change: meta.final_relative_change,
            converged: meta.converged,
            centered: meta.centered,
        },
        models,
    };
    let path = dir.join(METADATA_FILE);
    let text = toml::to_string(&metadata).map_err(|e| Error::ManifestParse {
        path: path.clone(),
        message: e.to_string(),
    })?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;

    if let Some(trace) = trace {
        let mut text = String::from("iteration\tobjective\trelative_change\n");
        for (i, (obj, rel)) in trace.objectives.iter().zip(&trace.relative_changes).enumerate() {
            text.push_str(&format!("{}\t{}\t{}\n", i + 1, fmt_f64(*obj), fmt_f64(*rel)));
        }
        let path = dir.join(TRACE_FILE);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Loads a bundle written by [`save_model`].
pub fn load_model(dir: impl AsRef<Path>) -> Result<AlignmentModel> {
    let dir = dir.as_ref();
    let path = dir.join(METADATA_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let metadata: BundleMetadata = toml::from_str(&text).map_err(|e| Error::ManifestParse {
        path: path.clone(),
        message: e.to_string(),
    })?;
    if metadata.format_version != BUNDLE_VERSION {
        return Err(Error::ManifestParse {
            path,
            message: format!("unsupported bundle version {}", metadata.format_version),
        });
    }

    let barycenter = load_matrix(dir.join(&metadata.barycenter))?;
    let stimulus_ids = read_stimulus_ids(dir.join(&metadata.stimuli))?;
    let mut model_ids = Vec::new();
    let mut transforms = Vec::new();
    let mut widths = Vec::new();
    let mut centers = Vec::new();
    for entry in &metadata.models {
        model_ids.push(entry.model_id.clone());
        transforms.push(load_matrix(dir.join(&entry.transform))?);
        widths.push(entry.original_width);
        if let Some(rel) = &entry.center {
            let c = load_matrix(dir.join(rel))?;
            centers.push(DVector::from_column_slice(c.as_slice()));
        }
    }
    let t = &metadata.training;
    let centers = match (t.centered, centers.len()) {
        (false, 0) => None,
        (true, n) if n == model_ids.len() => Some(centers),
        _ => {
            return Err(Error::ManifestParse {
                path,
                message: "centering vectors do not match the `centered` flag".into(),
            })
        }
    };
    AlignmentModel::new(
        barycenter,
        stimulus_ids,
        model_ids,
        transforms,
        widths,
        centers,
        TrainingMeta {
            iterations_run: t.iterations_run,
            final_relative_change: t.final_relative_change,
            final_objective: t.final_objective,
            epsilon: t.epsilon,
            max_iterations: t.max_iterations,
            converged: t.converged,
            centered: t.centered,
        },
    )
}
