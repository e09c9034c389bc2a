//! Domain types shared by every stage: representation matrices, padded model
//! pools and the trained alignment model.

use std::collections::HashSet;

use nalgebra::DVector;

use crate::{Error, Matrix, Result};

/// Tolerance on `||TᵀT − I||_F` accepted for a stored transform.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-8;

/// One model's representation of a stimulus set.
///
/// Row `j` holds the embedding of `stimulus_ids[j]`. Entries are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ReprMatrix {
    model_id: String,
    stimulus_ids: Vec<String>,
    data: Matrix,
}

impl ReprMatrix {
    pub fn new(
        model_id: impl Into<String>,
        stimulus_ids: Vec<String>,
        data: Matrix,
    ) -> Result<Self> {
        let model_id = model_id.into();
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::EmptyMatrix {
                model_id,
                rows: data.nrows(),
                cols: data.ncols(),
            });
        }
        if stimulus_ids.len() != data.nrows() {
            return Err(Error::StimulusCountMismatch {
                model_id,
                ids: stimulus_ids.len(),
                rows: data.nrows(),
            });
        }
        let mut seen = HashSet::with_capacity(stimulus_ids.len());
        for id in &stimulus_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateStimulusId {
                    model_id,
                    stimulus_id: id.clone(),
                });
            }
        }
        // Row-major scan so the reported entry is the first in reading order.
        for row in 0..data.nrows() {
            for col in 0..data.ncols() {
                if !data[(row, col)].is_finite() {
                    return Err(Error::NonFiniteData { model_id, row, col });
                }
            }
        }
        Ok(Self {
            model_id,
            stimulus_ids,
            data,
        })
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn stimulus_ids(&self) -> &[String] {
        &self.stimulus_ids
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn width(&self) -> usize {
        self.data.ncols()
    }

    pub fn into_data(self) -> Matrix {
        self.data
    }

    /// Copy of this matrix with `target_width - width` zero columns appended.
    pub fn padded(&self, target_width: usize) -> Result<Self> {
        if target_width < self.width() {
            return Err(Error::TargetTooSmall {
                target: target_width,
                width: self.width(),
            });
        }
        if target_width == self.width() {
            return Ok(self.clone());
        }
        let mut data = Matrix::zeros(self.rows(), target_width);
        data.columns_mut(0, self.width()).copy_from(&self.data);
        Ok(Self {
            model_id: self.model_id.clone(),
            stimulus_ids: self.stimulus_ids.clone(),
            data,
        })
    }
}

/// Zero-pads every member on the right to `target_width` columns.
pub fn pad_pool(members: &[ReprMatrix], target_width: usize) -> Result<Vec<ReprMatrix>> {
    members.iter().map(|m| m.padded(target_width)).collect()
}

/// Validated, ordered collection of at least two representation matrices over
/// identical stimuli, all padded to the widest member.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPool {
    members: Vec<ReprMatrix>,
    original_widths: Vec<usize>,
    common_width: usize,
}

/// Validates `members` and zero-pads them to a common width.
///
/// Member order is preserved; every ordered result downstream follows it.
pub fn build_pool(members: Vec<ReprMatrix>) -> Result<ModelPool> {
    if members.len() < 2 {
        return Err(Error::TooFewModels(members.len()));
    }
    let mut ids = HashSet::with_capacity(members.len());
    for m in &members {
        if !ids.insert(m.model_id()) {
            return Err(Error::DuplicateModelId(m.model_id().to_owned()));
        }
    }
    let reference = members[0].stimulus_ids();
    for m in &members[1..] {
        if m.stimulus_ids() != reference {
            return Err(Error::MismatchedStimuli {
                model_id: m.model_id().to_owned(),
            });
        }
    }
    let original_widths: Vec<usize> = members.iter().map(ReprMatrix::width).collect();
    let common_width = original_widths.iter().copied().max().unwrap_or(0);
    let members = pad_pool(&members, common_width)?;
    Ok(ModelPool {
        members,
        original_widths,
        common_width,
    })
}

impl ModelPool {
    pub fn members(&self) -> &[ReprMatrix] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn common_width(&self) -> usize {
        self.common_width
    }

    /// Widths of the members before padding, in member order.
    pub fn original_widths(&self) -> &[usize] {
        &self.original_widths
    }

    pub fn stimulus_ids(&self) -> &[String] {
        self.members[0].stimulus_ids()
    }

    pub fn n_stimuli(&self) -> usize {
        self.members[0].rows()
    }

    pub fn model_ids(&self) -> Vec<&str> {
        self.members.iter().map(ReprMatrix::model_id).collect()
    }

    /// Member matrices in pool order.
    pub fn matrices(&self) -> impl Iterator<Item = &Matrix> {
        self.members.iter().map(ReprMatrix::data)
    }

    /// Re-pads the pool to a wider common width, keeping original widths.
    pub fn repadded(&self, target_width: usize) -> Result<Self> {
        Ok(Self {
            members: pad_pool(&self.members, target_width)?,
            original_widths: self.original_widths.clone(),
            common_width: target_width,
        })
    }

    /// Per-member column means over stimuli.
    pub fn column_means(&self) -> Vec<DVector<f64>> {
        self.members
            .iter()
            .map(|m| m.data().row_mean().transpose())
            .collect()
    }

    /// Subtracts `means[i]` from every row of member `i`.
    pub fn subtract_means(&self, means: &[DVector<f64>]) -> Result<Self> {
        if means.len() != self.len() {
            return Err(Error::ModelPoolMismatch(format!(
                "{} mean vectors for {} models",
                means.len(),
                self.len()
            )));
        }
        let members = self
            .members
            .iter()
            .zip(means)
            .map(|(m, mean)| {
                if mean.len() != m.width() {
                    return Err(Error::ShapeMismatch(format!(
                        "mean of length {} for width {}",
                        mean.len(),
                        m.width()
                    )));
                }
                let mut data = m.data().clone();
                for mut row in data.row_iter_mut() {
                    row -= mean.transpose();
                }
                ReprMatrix::new(m.model_id(), m.stimulus_ids().to_vec(), data)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            members,
            original_widths: self.original_widths.clone(),
            common_width: self.common_width,
        })
    }
}

/// Bookkeeping recorded by a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub iterations_run: usize,
    pub final_relative_change: f64,
    /// `Σ_i ||X_i T_i − M||_F²` at return.
    pub final_objective: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub converged: bool,
    pub centered: bool,
}

/// Trained barycenter template plus one orthogonal map per model.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentModel {
    barycenter: Matrix,
    stimulus_ids: Vec<String>,
    model_ids: Vec<String>,
    transforms: Vec<Matrix>,
    original_widths: Vec<usize>,
    centers: Option<Vec<DVector<f64>>>,
    meta: TrainingMeta,
}

impl AlignmentModel {
    /// Assembles a model, checking shapes and that every transform is
    /// orthogonal to within [`ORTHOGONALITY_TOLERANCE`].
    pub fn new(
        barycenter: Matrix,
        stimulus_ids: Vec<String>,
        model_ids: Vec<String>,
        transforms: Vec<Matrix>,
        original_widths: Vec<usize>,
        centers: Option<Vec<DVector<f64>>>,
        meta: TrainingMeta,
    ) -> Result<Self> {
        let d = barycenter.ncols();
        if stimulus_ids.len() != barycenter.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} stimulus ids for a {}-row barycenter",
                stimulus_ids.len(),
                barycenter.nrows()
            )));
        }
        let n = model_ids.len();
        if transforms.len() != n || original_widths.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{} model ids, {} transforms, {} widths",
                n,
                transforms.len(),
                original_widths.len()
            )));
        }
        let mut seen = HashSet::new();
        for id in &model_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateModelId(id.clone()));
            }
        }
        for (id, t) in model_ids.iter().zip(&transforms) {
            if t.shape() != (d, d) {
                return Err(Error::ShapeMismatch(format!(
                    "transform for `{id}` is {}x{}, expected {d}x{d}",
                    t.nrows(),
                    t.ncols()
                )));
            }
            let defect = orthogonality_defect(t);
            if defect.is_nan() || defect > ORTHOGONALITY_TOLERANCE {
                return Err(Error::ModelPoolMismatch(format!(
                    "transform for `{id}` is not orthogonal (||TᵀT − I||_F = {defect:e})"
                )));
            }
        }
        if let Some(&w) = original_widths.iter().find(|&&w| w == 0 || w > d) {
            return Err(Error::ShapeMismatch(format!(
                "original width {w} outside 1..={d}"
            )));
        }
        if let Some(centers) = &centers {
            if centers.len() != n || centers.iter().any(|c| c.len() != d) {
                return Err(Error::ShapeMismatch(
                    "centering vectors do not match the model list".into(),
                ));
            }
        }
        Ok(Self {
            barycenter,
            stimulus_ids,
            model_ids,
            transforms,
            original_widths,
            centers,
            meta,
        })
    }

    pub fn barycenter(&self) -> &Matrix {
        &self.barycenter
    }

    /// Training stimulus ids, one per barycenter row.
    pub fn stimulus_ids(&self) -> &[String] {
        &self.stimulus_ids
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn transforms(&self) -> &[Matrix] {
        &self.transforms
    }

    pub fn original_widths(&self) -> &[usize] {
        &self.original_widths
    }

    /// Training column means per model when the model was trained on
    /// centered data.
    pub fn centers(&self) -> Option<&[DVector<f64>]> {
        self.centers.as_deref()
    }

    pub fn meta(&self) -> &TrainingMeta {
        &self.meta
    }

    /// Width of the universal space.
    pub fn width(&self) -> usize {
        self.barycenter.ncols()
    }

    pub fn index_of(&self, model_id: &str) -> Option<usize> {
        self.model_ids.iter().position(|id| id == model_id)
    }

    pub fn transform(&self, model_id: &str) -> Option<&Matrix> {
        self.index_of(model_id).map(|i| &self.transforms[i])
    }
}

/// `||TᵀT − I||_F`.
pub fn orthogonality_defect(t: &Matrix) -> f64 {
    let gram = t.transpose() * t;
    (gram - Matrix::identity(t.ncols(), t.ncols())).norm()
}
