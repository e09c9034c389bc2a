//! Synthetic pools with known ground truth, plus sampling oracles.
//!
//! Every model sees the same Gaussian latent stimuli through its own
//! Haar-random orthogonal map, optionally with additive noise and truncated to
//! fewer columns. All randomness comes from a seeded [`ChaCha8Rng`], so a
//! given [`SynthSpec`] always yields bit-identical pools.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::procrustes::squared_residual;
use crate::types::{build_pool, ModelPool, ReprMatrix};
use crate::{Error, Matrix, Result};

/// Identifier of the pseudo-random generator, recorded in output manifests.
pub const GENERATOR: &str = "ChaCha8Rng/rand_chacha-0.9;StandardNormal/rand_distr-0.5";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_train: usize,
    pub m_test: usize,
    /// Latent width.
    pub d: usize,
    pub n_models: usize,
    pub noise_sigma: f64,
    /// Per-model kept widths; model `i` keeps its first `width_schedule[i]`
    /// columns.
    pub width_schedule: Option<Vec<usize>>,
    pub seed: u64,
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.m_test == 0 || self.d == 0 {
            return Err(Error::InvalidSpec(
                "n_train, m_test and d must be positive".into(),
            ));
        }
        if self.n_models < 2 {
            return Err(Error::InvalidSpec("need at least 2 models".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "noise_sigma must be a finite non-negative number, got {}",
                self.noise_sigma
            )));
        }
        if let Some(widths) = &self.width_schedule {
            if widths.len() != self.n_models {
                return Err(Error::InvalidSpec(format!(
                    "width schedule has {} entries for {} models",
                    widths.len(),
                    self.n_models
                )));
            }
            if let Some(w) = widths.iter().find(|&&w| w == 0 || w > self.d) {
                return Err(Error::InvalidSpec(format!(
                    "width {w} outside 1..={}",
                    self.d
                )));
            }
        }
        if self.n_train < self.d {
            log::warn!(
                "n_train = {} < d = {}: training matrices are rank deficient",
                self.n_train,
                self.d
            );
        }
        Ok(())
    }

    /// Model ids used for generated pools: `model_00`, `model_01`, …
    pub fn model_ids(&self) -> Vec<String> {
        (0..self.n_models).map(|i| format!("model_{i:02}")).collect()
    }
}

/// Latents and per-model maps used to build a synthetic pool.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Training latents, `n_train × d`.
    pub latent_train: Matrix,
    /// Held-out latents, `m_test × d`.
    pub latent_test: Matrix,
    /// `Q_i` per model, `d × d`.
    pub rotations: Vec<Matrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthPools {
    pub train: ModelPool,
    pub test: ModelPool,
    pub truth: GroundTruth,
}

/// Haar-distributed `d×d` orthogonal matrix, deterministic in `seed`.
pub fn random_orthogonal(d: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_orthogonal_with(&mut rng, d)
}

/// QR of a standard Gaussian matrix with the signs of `diag(R)` folded into
/// `Q`, which makes the distribution of `Q` exactly Haar.
pub fn random_orthogonal_with<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Matrix {
    let g = gaussian_matrix(rng, d, d, 1.0);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

/// Matrix of i.i.d. `N(0, sigma²)` entries, filled in row-major order.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, sigma: f64) -> Matrix {
    let values: Vec<f64> = (0..rows * cols)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sigma * z
        })
        .collect();
    Matrix::from_row_slice(rows, cols, &values)
}

/// Builds train and test pools from `spec`.
///
/// Draw order is fixed: `Z`, `W`, then for each model `Q_i`, training noise
/// and test noise. Noise is drawn even when `noise_sigma` is zero so that the
/// latents and rotations do not depend on the noise level.
pub fn make_synthetic_pool(spec: &SynthSpec) -> Result<SynthPools> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let latent_train = gaussian_matrix(&mut rng, spec.n_train, spec.d, 1.0);
    let latent_test = gaussian_matrix(&mut rng, spec.m_test, spec.d, 1.0);

    let train_ids: Vec<String> = (0..spec.n_train).map(|i| format!("train_{i:05}")).collect();
    let test_ids: Vec<String> = (0..spec.m_test).map(|i| format!("test_{i:05}")).collect();

    let mut rotations = Vec::with_capacity(spec.n_models);
    let mut train = Vec::with_capacity(spec.n_models);
    let mut test = Vec::with_capacity(spec.n_models);
    for (i, model_id) in spec.model_ids().into_iter().enumerate() {
        let q = random_orthogonal_with(&mut rng, spec.d);
        let x = &latent_train * &q + gaussian_matrix(&mut rng, spec.n_train, spec.d, spec.noise_sigma);
        let y = &latent_test * &q + gaussian_matrix(&mut rng, spec.m_test, spec.d, spec.noise_sigma);
        let keep = spec
            .width_schedule
            .as_ref()
            .map_or(spec.d, |widths| widths[i]);
        train.push(ReprMatrix::new(
            model_id.clone(),
            train_ids.clone(),
            x.columns(0, keep).into_owned(),
        )?);
        test.push(ReprMatrix::new(
            model_id,
            test_ids.clone(),
            y.columns(0, keep).into_owned(),
        )?);
        rotations.push(q);
    }

    Ok(SynthPools {
        train: build_pool(train)?,
        test: build_pool(test)?,
        truth: GroundTruth {
            latent_train,
            latent_test,
            rotations,
        },
    })
}

/// Smallest `||XR − M||_F²` over `samples` Haar-random orthogonal `R`.
///
/// An upper bound on the true minimum that the closed-form solver must match
/// or beat.
pub fn brute_force_best_orthogonal(x: &Matrix, m: &Matrix, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = x.ncols();
    (0..samples)
        .map(|_| squared_residual(x, &random_orthogonal_with(&mut rng, d), m))
        .fold(f64::INFINITY, f64::min)
}

/// Exhaustive sweep of O(2): `steps` rotation angles on each of the two
/// components (rotations and reflections). Only valid for `d = 2`.
pub fn angle_sweep_best_orthogonal(x: &Matrix, m: &Matrix, steps: usize) -> f64 {
    assert_eq!(x.ncols(), 2, "angle sweep covers O(2) only");
    let mut best = f64::INFINITY;
    for k in 0..steps {
        let theta = std::f64::consts::TAU * k as f64 / steps as f64;
        let (s, c) = theta.sin_cos();
        let rotation = Matrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let reflection = Matrix::from_row_slice(2, 2, &[c, s, s, -c]);
        best = best
            .min(squared_residual(x, &rotation, m))
            .min(squared_residual(x, &reflection, m));
    }
    best
}
