//! Inference: projection of held-out representations into the universal
//! space and instance-level consistency scores.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::types::{AlignmentModel, ModelPool};
use crate::{Error, Matrix, Result};

/// Rows with Euclidean norm below this are treated as zero by [`cosine`].
pub const ZERO_NORM: f64 = 1e-12;

/// Similarity used for per-stimulus agreement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Similarity {
    #[default]
    Cosine,
}

impl Similarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Similarity::Cosine => "cosine",
        }
    }
}

impl fmt::Display for Similarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Similarity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "cosine" => Ok(Similarity::Cosine),
            other => Err(format!("unknown similarity `{other}`")),
        }
    }
}

/// Held-out representations mapped into the universal space, `Y'_i = Y_i T_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedPool {
    members: Vec<Matrix>,
    stimulus_ids: Vec<String>,
    model_ids: Vec<String>,
}

impl ProjectedPool {
    pub fn new(members: Vec<Matrix>, stimulus_ids: Vec<String>, model_ids: Vec<String>) -> Result<Self> {
        if members.len() != model_ids.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} matrices for {} model ids",
                members.len(),
                model_ids.len()
            )));
        }
        if members.is_empty() {
            return Err(Error::TooFewModels(0));
        }
        let shape = members[0].shape();
        if shape.0 != stimulus_ids.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} rows for {} stimulus ids",
                shape.0,
                stimulus_ids.len()
            )));
        }
        if let Some(m) = members.iter().find(|m| m.shape() != shape) {
            return Err(Error::ShapeMismatch(format!(
                "member is {}x{}, expected {}x{}",
                m.nrows(),
                m.ncols(),
                shape.0,
                shape.1
            )));
        }
        Ok(Self {
            members,
            stimulus_ids,
            model_ids,
        })
    }

    /// Treats an already-projected pool (e.g. loaded from disk) as projected.
    pub fn from_pool(pool: &ModelPool) -> Self {
        Self {
            members: pool.matrices().cloned().collect(),
            stimulus_ids: pool.stimulus_ids().to_vec(),
            model_ids: pool.model_ids().into_iter().map(str::to_owned).collect(),
        }
    }

    pub fn members(&self) -> &[Matrix] {
        &self.members
    }

    pub fn stimulus_ids(&self) -> &[String] {
        &self.stimulus_ids
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn n_models(&self) -> usize {
        self.members.len()
    }

    pub fn n_stimuli(&self) -> usize {
        self.stimulus_ids.len()
    }

    pub fn width(&self) -> usize {
        self.members[0].ncols()
    }

    /// Same pool with rows reordered so that new row `r` is old row `perm[r]`.
    pub fn permute_stimuli(&self, perm: &[usize]) -> Self {
        let rows = perm.len();
        Self {
            members: self
                .members
                .iter()
                .map(|m| Matrix::from_fn(rows, m.ncols(), |r, c| m[(perm[r], c)]))
                .collect(),
            stimulus_ids: perm.iter().map(|&r| self.stimulus_ids[r].clone()).collect(),
            model_ids: self.model_ids.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProjectOptions {
    /// Accept a test pool holding only some of the trained models.
    pub allow_subset: bool,
}

/// Maps every test member into the universal space with its trained
/// transform, keeping the test pool's member order.
///
/// Each test model must have the same raw width it had during training.
pub fn project(test: &ModelPool, model: &AlignmentModel, options: ProjectOptions) -> Result<ProjectedPool> {
    let mut indices = Vec::with_capacity(test.len());
    for (member, &width) in test.members().iter().zip(test.original_widths()) {
        let index = model
            .index_of(member.model_id())
            .ok_or_else(|| Error::UnknownModelId(member.model_id().to_owned()))?;
        let expected = model.original_widths()[index];
        if width != expected {
            return Err(Error::WidthMismatch {
                model_id: member.model_id().to_owned(),
                expected,
                actual: width,
            });
        }
        indices.push(index);
    }
    if indices.len() != model.model_ids().len() && !options.allow_subset {
        let missing: Vec<&str> = model
            .model_ids()
            .iter()
            .filter(|id| !test.model_ids().contains(&id.as_str()))
            .map(String::as_str)
            .collect();
        return Err(Error::ModelPoolMismatch(format!(
            "test pool lacks trained models {missing:?}; subsetting must be requested explicitly"
        )));
    }

    let d = model.width();
    let padded = if test.common_width() == d {
        test.clone()
    } else {
        test.repadded(d)?
    };
    let working = match model.centers() {
        Some(all) => {
            let means: Vec<_> = indices.iter().map(|&i| all[i].clone()).collect();
            padded.subtract_means(&means)?
        }
        None => padded,
    };
    let members: Vec<Matrix> = working
        .matrices()
        .zip(&indices)
        .map(|(y, &i)| y * &model.transforms()[i])
        .collect();
    ProjectedPool::new(
        members,
        test.stimulus_ids().to_vec(),
        test.model_ids().into_iter().map(str::to_owned).collect(),
    )
}

/// Per-stimulus agreement across the models of a projected pool.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub stimulus_ids: Vec<String>,
    pub scores: Vec<f64>,
    pub pool_model_ids: Vec<String>,
    pub similarity: Similarity,
    /// Number of (model, stimulus) rows whose norm fell below [`ZERO_NORM`].
    pub zero_norm_rows: usize,
}

/// Cosine similarity, defined as 0 when either vector is (numerically) zero.
/// The result is clamped to `[-1, 1]`.
pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu < ZERO_NORM || nv < ZERO_NORM {
        return 0.0;
    }
    (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0)
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// `S_j = 1/(N(N−1)) Σ_{p≠q} SIM(Y'_pj, Y'_qj)` for every stimulus `j`.
///
/// The similarity is symmetric, so each unordered pair is evaluated once and
/// counted twice.
pub fn consistency_scores(projected: &ProjectedPool, sim: Similarity) -> Result<ConsistencyReport> {
    let n = projected.n_models();
    if n < 2 {
        return Err(Error::TooFewModels(n));
    }
    let d = projected.width();
    // Transposed copies make each stimulus a contiguous slice.
    let rows: Vec<Matrix> = projected.members().iter().map(Matrix::transpose).collect();
    let row = |i: usize, j: usize| &rows[i].as_slice()[j * d..(j + 1) * d];

    let zero_norm_rows = (0..projected.n_stimuli())
        .flat_map(|j| (0..n).map(move |i| (i, j)))
        .filter(|&(i, j)| dot(row(i, j), row(i, j)).sqrt() < ZERO_NORM)
        .count();
    if zero_norm_rows > 0 {
        log::warn!("{zero_norm_rows} projected rows have zero norm; their similarities are 0");
    }

    let pairs = (n * (n - 1)) as f64;
    let scores: Vec<f64> = (0..projected.n_stimuli())
        .into_par_iter()
        .map(|j| {
            let mut total = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    total += match sim {
                        Similarity::Cosine => cosine(row(p, j), row(q, j)),
                    };
                }
            }
            (2.0 * total / pairs).clamp(-1.0, 1.0)
        })
        .collect();

    Ok(ConsistencyReport {
        stimulus_ids: projected.stimulus_ids().to_vec(),
        scores,
        pool_model_ids: projected.model_ids().to_vec(),
        similarity: sim,
        zero_norm_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barycenter::{train_barycenter, TrainConfig};
    use crate::synth::{make_synthetic_pool, SynthSpec};
    use crate::types::{build_pool, ReprMatrix};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    fn projected_of(mats: Vec<Matrix>) -> ProjectedPool {
        let rows = mats[0].nrows();
        let ids = (0..mats.len()).map(|i| format!("m{i}")).collect();
        ProjectedPool::new(mats, (0..rows).map(|j| format!("s{j}")).collect(), ids).unwrap()
    }

    fn ordered_pair_oracle(p: &ProjectedPool) -> Vec<f64> {
        let n = p.n_models();
        (0..p.n_stimuli())
            .map(|j| {
                let mut total = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        if a != b {
                            let u: Vec<f64> = p.members()[a].row(j).iter().copied().collect();
                            let v: Vec<f64> = p.members()[b].row(j).iter().copied().collect();
                            total += cosine(&u, &v);
                        }
                    }
                }
                total / (n * (n - 1)) as f64
            })
            .collect()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[2., 0.], &[5., 0.]), 1.0);
        assert_eq!(cosine(&[1., 1.], &[1., -1.]), 0.0);
        let expected = 32.0 / (14f64.sqrt() * 77f64.sqrt());
        assert!((cosine(&[1., 2., 3.], &[4., 5., 6.]) - expected).abs() < 1e-15);
        assert!((expected - 0.974631846).abs() < 1e-9);
        assert_eq!(cosine(&[0., 0.], &[1., 2.]), 0.0);
    }

    #[test]
    fn identical_members_score_one() {
        let x = gaussian(6, 3, 1);
        let report =
            consistency_scores(&projected_of(vec![x.clone(), x.clone(), x]), Similarity::Cosine)
                .unwrap();
        for s in report.scores {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_computed_scores() {
        let a = Matrix::from_row_slice(1, 2, &[1., 0.]);
        let b = Matrix::from_row_slice(1, 2, &[0., 1.]);
        let two = consistency_scores(&projected_of(vec![a.clone(), b.clone()]), Similarity::Cosine)
            .unwrap();
        assert_eq!(two.scores, vec![0.0]);
        let three = consistency_scores(&projected_of(vec![a.clone(), a, b]), Similarity::Cosine)
            .unwrap();
        assert!((three.scores[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_rows_are_counted() {
        let mut a = gaussian(3, 2, 4);
        a.row_mut(1).fill(0.0);
        let b = gaussian(3, 2, 5);
        let report = consistency_scores(&projected_of(vec![a, b]), Similarity::Cosine).unwrap();
        assert_eq!(report.zero_norm_rows, 1);
        assert_eq!(report.scores[1], 0.0);
    }

    #[test]
    fn single_model_is_rejected() {
        let p = projected_of(vec![gaussian(3, 2, 1)]);
        assert!(matches!(
            consistency_scores(&p, Similarity::Cosine),
            Err(Error::TooFewModels(1))
        ));
    }

    fn synth(noise: f64, widths: Option<Vec<usize>>) -> crate::synth::SynthPools {
        make_synthetic_pool(&SynthSpec {
            n_train: 60,
            m_test: 20,
            d: 8,
            n_models: 3,
            noise_sigma: noise,
            width_schedule: widths,
            seed: 31,
        })
        .unwrap()
    }

    #[test]
    fn identity_transforms_leave_test_data_unchanged() {
        let x = gaussian(10, 3, 8);
        let stim: Vec<String> = (0..10).map(|j| format!("s{j}")).collect();
        let pool = build_pool(vec![
            ReprMatrix::new("a", stim.clone(), x.clone()).unwrap(),
            ReprMatrix::new("b", stim.clone(), x.clone()).unwrap(),
        ])
        .unwrap();
        let (model, _) = train_barycenter(&pool, &TrainConfig::default()).unwrap();
        let y = gaussian(4, 3, 9);
        let tstim: Vec<String> = (0..4).map(|j| format!("t{j}")).collect();
        let test = build_pool(vec![
            ReprMatrix::new("a", tstim.clone(), y.clone()).unwrap(),
            ReprMatrix::new("b", tstim, y.clone()).unwrap(),
        ])
        .unwrap();
        let projected = project(&test, &model, ProjectOptions::default()).unwrap();
        for m in projected.members() {
            assert!((m - &y).amax() < 1e-10);
        }
    }

    #[test]
    fn projecting_training_data_reproduces_alignment() {
        let pools = synth(0.2, None);
        let (model, _) = train_barycenter(&pools.train, &TrainConfig::default()).unwrap();
        let projected = project(&pools.train, &model, ProjectOptions::default()).unwrap();
        for ((x, t), p) in pools.train.matrices().zip(model.transforms()).zip(projected.members()) {
            assert_eq!(&(x * t), p);
        }
    }

    #[test]
    fn held_out_rotated_copies_coincide() {
        let pools = synth(0.0, None);
        let config = TrainConfig {
            epsilon: 1e-10,
            ..TrainConfig::default()
        };
        let (model, _) = train_barycenter(&pools.train, &config).unwrap();
        let projected = project(&pools.test, &model, ProjectOptions::default()).unwrap();
        for a in projected.members() {
            for b in projected.members() {
                assert!((a - b).norm() <= 1e-6);
            }
        }
        let report = consistency_scores(&projected, Similarity::Cosine).unwrap();
        assert!(report.scores.iter().all(|s| (s - 1.0).abs() <= 1e-9));
    }

    #[test]
    fn padded_models_project_with_training_width() {
        let pools = synth(0.0, Some(vec![3, 8, 5]));
        let (model, _) = train_barycenter(&pools.train, &TrainConfig::default()).unwrap();
        let projected = project(&pools.test, &model, ProjectOptions::default()).unwrap();
        assert_eq!(projected.width(), 8);
    }

    #[test]
    fn projection_errors() {
        let pools = synth(0.0, Some(vec![3, 8, 5]));
        let (model, _) = train_barycenter(&pools.train, &TrainConfig::default()).unwrap();
        let tstim = pools.test.stimulus_ids().to_vec();
        let members = pools.test.members();

        let renamed = build_pool(vec![
            ReprMatrix::new("stranger", tstim.clone(), members[0].data().clone()).unwrap(),
            members[1].clone(),
        ])
        .unwrap();
        assert!(matches!(
            project(&renamed, &model, ProjectOptions::default()),
            Err(Error::UnknownModelId(id)) if id == "stranger"
        ));

        // model_00 trained at width 3, now presented at width 4.
        let widened = build_pool(vec![
            ReprMatrix::new(
                members[0].model_id(),
                tstim.clone(),
                gaussian(tstim.len(), 4, 1),
            )
            .unwrap(),
            members[1].clone(),
            members[2].clone(),
        ])
        .unwrap();
        assert!(matches!(
            project(&widened, &model, ProjectOptions::default()),
            Err(Error::WidthMismatch { expected: 3, actual: 4, .. })
        ));

        let narrowed = |m: &ReprMatrix, w: usize| {
            ReprMatrix::new(m.model_id(), tstim.clone(), m.data().columns(0, w).into_owned())
                .unwrap()
        };
        let subset = build_pool(vec![narrowed(&members[0], 3), narrowed(&members[2], 5)]).unwrap();
        assert!(matches!(
            project(&subset, &model, ProjectOptions::default()),
            Err(Error::ModelPoolMismatch(_))
        ));
        let projected = project(&subset, &model, ProjectOptions { allow_subset: true }).unwrap();
        assert_eq!(projected.width(), 8);
        assert_eq!(projected.model_ids(), &["model_00", "model_02"]);
    }

    #[test]
    fn centered_models_subtract_training_means() {
        let pools = synth(0.0, None);
        let config = TrainConfig {
            center: true,
            epsilon: 1e-10,
            ..TrainConfig::default()
        };
        let (model, _) = train_barycenter(&pools.train, &config).unwrap();
        let projected = project(&pools.test, &model, ProjectOptions::default()).unwrap();
        // Training means are rotated copies of the latent mean, so held-out
        // rows still coincide after centering.
        for a in projected.members() {
            assert!((a - &projected.members()[0]).norm() <= 1e-6);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn score_properties(seed in any::<u64>(), n in 2usize..6, scale in 0.01f64..100.0) {
            let mats: Vec<Matrix> = (0..n).map(|i| gaussian(8, 4, seed.wrapping_add(i as u64))).collect();
            let pool = projected_of(mats.clone());
            let report = consistency_scores(&pool, Similarity::Cosine).unwrap();
            prop_assert!(report.scores.iter().all(|s| (-1.0..=1.0).contains(s)));

            let oracle = ordered_pair_oracle(&pool);
            for (a, b) in report.scores.iter().zip(&oracle) {
                prop_assert!((a - b).abs() <= 1e-15);
            }

            let mut reversed = mats.clone();
            reversed.reverse();
            let rev = consistency_scores(&projected_of(reversed), Similarity::Cosine).unwrap();
            for (a, b) in report.scores.iter().zip(&rev.scores) {
                prop_assert!((a - b).abs() <= 1e-12);
            }

            let mut scaled = mats;
            scaled[0] *= scale;
            let sc = consistency_scores(&projected_of(scaled), Similarity::Cosine).unwrap();
            for (a, b) in report.scores.iter().zip(&sc.scores) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
