//! Training: Procrustes barycenter by alternating alignment and averaging.
//!
//! Starting from the arithmetic mean `M⁰ = (1/N) Σ X_i`, each iteration aligns
//! every model to the current template (all against the same `Mᵗ`), then
//! replaces the template by the mean of the aligned matrices. Iteration stops
//! once `||Mᵗ⁺¹ − Mᵗ||_F / ||Mᵗ||_F < ε` or after `max_iterations`.
//!
//! Both half-steps minimise `Σ ||X_i T_i − M||_F²` in one block, so the
//! objective recorded after every template update is non-increasing.

use rayon::prelude::*;

use crate::procrustes::{solve_orthogonal_procrustes, squared_residual};
use crate::types::{AlignmentModel, ModelPool, TrainingMeta};
use crate::{Error, Matrix, Result};

/// Absolute slack allowed when checking that the objective does not increase.
pub const DESCENT_SLACK: f64 = 1e-9;

/// Relative slack added on top of [`DESCENT_SLACK`] for large objectives, where
/// rounding in the objective itself exceeds the absolute slack.
const RELATIVE_DESCENT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Relative template change below which training stops.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub record_trace: bool,
    /// Subtract each model's training column means before alignment.
    pub center: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_iterations: 100,
            record_trace: false,
            center: false,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-iteration history of a training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    /// `Σ_i ||X_i T_i − Mᵗ⁺¹||_F²` after each template update.
    pub objectives: Vec<f64>,
    /// `||Mᵗ⁺¹ − Mᵗ||_F / ||Mᵗ||_F` for each iteration.
    pub relative_changes: Vec<f64>,
}

/// Trains the barycenter starting from the arithmetic mean of the pool.
pub fn train_barycenter(
    pool: &ModelPool,
    config: &TrainConfig,
) -> Result<(AlignmentModel, Option<TrainTrace>)> {
    train_barycenter_from(pool, config, None)
}

/// Like [`train_barycenter`] but with an explicit initial template.
///
/// With `config.center` set, `initial` is taken in centered coordinates.
pub fn train_barycenter_from(
    pool: &ModelPool,
    config: &TrainConfig,
    initial: Option<&Matrix>,
) -> Result<(AlignmentModel, Option<TrainTrace>)> {
    config.validate()?;

    let (centers, working) = if config.center {
        let means = pool.column_means();
        let centered = pool.subtract_means(&means)?;
        (Some(means), centered)
    } else {
        (None, pool.clone())
    };
    let xs: Vec<&Matrix> = working.matrices().collect();
    let n_models = xs.len();
    let (rows, width) = xs[0].shape();

    let mut template = match initial {
        Some(m) if m.shape() != (rows, width) => {
            return Err(Error::ShapeMismatch(format!(
                "initial template is {}x{}, pool is {rows}x{width}",
                m.nrows(),
                m.ncols()
            )))
        }
        Some(m) => m.clone(),
        None => mean_of(xs.iter().copied(), rows, width),
    };
    let scale = xs.iter().map(|x| x.norm()).fold(0.0, f64::max);

    let mut trace = config.record_trace.then(TrainTrace::default);
    let mut transforms: Vec<Matrix> = Vec::new();
    let mut previous_objective = f64::INFINITY;
    let mut relative_change = f64::INFINITY;
    let mut objective = f64::INFINITY;
    let mut converged = false;
    let mut iterations_run = 0;

    for iteration in 0..config.max_iterations {
        let template_norm = template.norm();
        if template_norm.is_nan() || template_norm <= f64::EPSILON * scale {
            return Err(Error::DegenerateTemplate { iteration });
        }

        // Alignment: every model against the same template. Results are
        // collected in member order so the reduction below is deterministic.
        let solved: Vec<(Matrix, Matrix)> = xs
            .par_iter()
            .map(|x| {
                let sol = solve_orthogonal_procrustes(x, &template)?;
                let aligned = *x * &sol.rotation;
                Ok((sol.rotation, aligned))
            })
            .collect::<Result<_>>()?;
        let (rotations, aligned): (Vec<Matrix>, Vec<Matrix>) = solved.into_iter().unzip();

        let next = mean_of(aligned.iter(), rows, width);
        relative_change = (&next - &template).norm() / template_norm;
        objective = aligned
            .iter()
            .map(|a| (a - &next).norm_squared())
            .sum();
        iterations_run = iteration + 1;

        if let Some(trace) = trace.as_mut() {
            trace.objectives.push(objective);
            trace.relative_changes.push(relative_change);
        }
        let slack = DESCENT_SLACK.max(RELATIVE_DESCENT_SLACK * previous_objective.abs());
        if previous_objective.is_finite() && objective > previous_objective + slack {
            return Err(Error::NumericalInstability {
                iteration,
                previous: previous_objective,
                current: objective,
            });
        }
        log::debug!(
            "iteration {iterations_run}: objective {objective:.6e}, relative change {relative_change:.3e}"
        );

        previous_objective = objective;
        transforms = rotations;
        template = next;
        if relative_change < config.epsilon {
            converged = true;
            break;
        }
    }
    debug_assert_eq!(transforms.len(), n_models);

    let meta = TrainingMeta {
        iterations_run,
        final_relative_change: relative_change,
        final_objective: objective,
        epsilon: config.epsilon,
        max_iterations: config.max_iterations,
        converged,
        centered: config.center,
    };
    if !converged {
        log::warn!(
            "barycenter did not converge in {} iterations (relative change {:.3e})",
            iterations_run,
            relative_change
        );
    }
    let model = AlignmentModel::new(
        template,
        pool.stimulus_ids().to_vec(),
        pool.model_ids().into_iter().map(str::to_owned).collect(),
        transforms,
        pool.original_widths().to_vec(),
        centers,
        meta,
    )?;
    Ok((model, trace))
}

/// `Σ_i ||X_i T_i − M||_F²` for a pool against a trained model.
///
/// The pool must hold the model's training stimuli and models in the same
/// order. Centering recorded in the model is applied first.
pub fn total_objective(pool: &ModelPool, model: &AlignmentModel) -> Result<f64> {
    let ids: Vec<&str> = model.model_ids().iter().map(String::as_str).collect();
    if pool.model_ids() != ids {
        return Err(Error::ModelPoolMismatch(
            "model ids or their order differ".into(),
        ));
    }
    if pool.common_width() != model.width() || pool.n_stimuli() != model.barycenter().nrows() {
        return Err(Error::ModelPoolMismatch(format!(
            "pool is {}x{}, barycenter is {}x{}",
            pool.n_stimuli(),
            pool.common_width(),
            model.barycenter().nrows(),
            model.width()
        )));
    }
    let working = match model.centers() {
        Some(means) => pool.subtract_means(means)?,
        None => pool.clone(),
    };
    Ok(working
        .matrices()
        .zip(model.transforms())
        .map(|(x, t)| squared_residual(x, t, model.barycenter()))
        .sum())
}

fn mean_of<'a>(mats: impl Iterator<Item = &'a Matrix>, rows: usize, cols: usize) -> Matrix {
    let mut sum = Matrix::zeros(rows, cols);
    let mut count = 0usize;
    for m in mats {
        sum += m;
        count += 1;
    }
    sum / count as f64
}
