//! Closed-form orthogonal Procrustes solver.
//!
//! For `X, M ∈ R^{n×d}` the minimiser of `||XR − M||_F` over the full
//! orthogonal group O(d) is `R = UVᵀ` where `XᵀM = UΣVᵀ`. Reflections are
//! valid solutions, so no determinant correction is applied.

use nalgebra::SVD;

use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ProcrustesSolution {
    /// Orthogonal `d×d` map applied on the right of `X`.
    pub rotation: Matrix,
    /// `||X R − M||_F²`.
    pub objective: f64,
}

/// Finds the orthogonal `R` minimising `||XR − M||_F`.
///
/// When `XᵀM` is rank deficient the minimiser is not unique; one of them is
/// returned.
pub fn solve_orthogonal_procrustes(x: &Matrix, m: &Matrix) -> Result<ProcrustesSolution> {
    if x.shape() != m.shape() {
        return Err(Error::ShapeMismatch(format!(
            "X is {}x{}, M is {}x{}",
            x.nrows(),
            x.ncols(),
            m.nrows(),
            m.ncols()
        )));
    }
    if x.iter().chain(m.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("solve_orthogonal_procrustes"));
    }
    let d = x.ncols();
    let cross = x.transpose() * m;
    let max_iter = 100 * d.max(10);
    let svd = SVD::try_new(cross, true, true, f64::EPSILON, max_iter)
        .ok_or(Error::SvdFailure { rows: d, cols: d })?;
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::SvdFailure { rows: d, cols: d }),
    };
    let rotation = u * v_t;
    let objective = squared_residual(x, &rotation, m);
    Ok(ProcrustesSolution {
        rotation,
        objective,
    })
}

/// `||XR − M||_F²`.
pub fn procrustes_objective(x: &Matrix, r: &Matrix, m: &Matrix) -> Result<f64> {
    if x.ncols() != r.nrows() || r.nrows() != r.ncols() || x.nrows() != m.nrows() || m.ncols() != r.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "X {}x{}, R {}x{}, M {}x{}",
            x.nrows(),
            x.ncols(),
            r.nrows(),
            r.ncols(),
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(squared_residual(x, r, m))
}

pub(crate) fn squared_residual(x: &Matrix, r: &Matrix, m: &Matrix) -> f64 {
    (x * r - m).norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{brute_force_best_orthogonal, random_orthogonal};
    use crate::types::orthogonality_defect;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn identical_inputs_give_identity() {
        let x = Matrix::from_row_slice(3, 3, &[2., 1., 0., -1., 3., 1., 0.5, 0., 4.]);
        let sol = solve_orthogonal_procrustes(&x, &x).unwrap();
        assert!((&sol.rotation - Matrix::identity(3, 3)).amax() < 1e-10);
        assert!(sol.objective < 1e-20);
    }

    #[test]
    fn recovers_quarter_turn() {
        let x = Matrix::identity(2, 2);
        let r0 = Matrix::from_row_slice(2, 2, &[0., -1., 1., 0.]);
        let m = &x * &r0;
        let sol = solve_orthogonal_procrustes(&x, &m).unwrap();
        assert!((&sol.rotation - &r0).amax() < 1e-12);
        assert!(sol.objective < 1e-24);
    }

    #[test]
    fn reflections_are_allowed() {
        let x = gaussian(10, 3, 1);
        let flip = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1., 1., -1.]));
        let m = &x * &flip;
        let sol = solve_orthogonal_procrustes(&x, &m).unwrap();
        assert!((&sol.rotation - &flip).amax() < 1e-10);
        assert!(sol.rotation.determinant() < 0.0);
    }

    #[test]
    fn beats_haar_sampling_oracle() {
        let x = gaussian(20, 4, 11);
        let m = gaussian(20, 4, 12);
        let sol = solve_orthogonal_procrustes(&x, &m).unwrap();
        let oracle = brute_force_best_orthogonal(&x, &m, 10_000, 13);
        assert!(sol.objective <= oracle + 1e-9, "{} > {}", sol.objective, oracle);
    }

    #[test]
    fn objective_hand_values() {
        let x = Matrix::from_row_slice(1, 2, &[1., 0.]);
        let m = Matrix::from_row_slice(1, 2, &[0., 1.]);
        let i = Matrix::identity(2, 2);
        assert_eq!(procrustes_objective(&x, &i, &m).unwrap(), 2.0);
        assert_eq!(procrustes_objective(&x, &i, &x).unwrap(), 0.0);
    }

    #[test]
    fn objective_matches_naive_loop() {
        let x = gaussian(7, 3, 2);
        let r = random_orthogonal(3, 3);
        let m = gaussian(7, 3, 4);
        let mut naive = 0.0;
        for i in 0..7 {
            for j in 0..3 {
                let mut xr = 0.0;
                for k in 0..3 {
                    xr += x[(i, k)] * r[(k, j)];
                }
                naive += (xr - m[(i, j)]).powi(2);
            }
        }
        let got = procrustes_objective(&x, &r, &m).unwrap();
        assert!((got - naive).abs() <= 1e-12 * naive.max(1.0));
    }

    #[test]
    fn shape_and_finiteness_errors() {
        let a = Matrix::zeros(3, 2);
        let b = Matrix::zeros(2, 2);
        assert!(matches!(
            solve_orthogonal_procrustes(&a, &b),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            procrustes_objective(&a, &Matrix::identity(3, 3), &a),
            Err(Error::ShapeMismatch(_))
        ));
        let mut c = Matrix::zeros(2, 2);
        c[(0, 1)] = f64::NAN;
        assert!(matches!(
            solve_orthogonal_procrustes(&c, &b),
            Err(Error::NonFiniteInput(_))
        ));
    }

    #[test]
    fn rank_deficient_cross_product_still_orthogonal() {
        let mut x = gaussian(6, 4, 5);
        x.column_mut(3).fill(0.0);
        x.column_mut(2).fill(0.0);
        let m = gaussian(6, 4, 6);
        let sol = solve_orthogonal_procrustes(&x, &m).unwrap();
        assert!(orthogonality_defect(&sol.rotation) <= 1e-8);
        let zero = solve_orthogonal_procrustes(&Matrix::zeros(3, 4), &m.rows(0, 3).into_owned())
            .unwrap();
        assert!(orthogonality_defect(&zero.rotation) <= 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn solution_is_orthogonal_isometric_and_exact(seed in any::<u64>(), n in 4usize..12, d in 1usize..5) {
            let x = gaussian(n.max(d), d, seed);
            let q = random_orthogonal(d, seed ^ 0x5eed);
            let m = &x * &q;
            let sol = solve_orthogonal_procrustes(&x, &m).unwrap();
            prop_assert!(orthogonality_defect(&sol.rotation) <= 1e-8);
            prop_assert!(sol.objective <= 1e-16 * m.norm_squared().max(1e-300) + 1e-28);

            let aligned = &x * &sol.rotation;
            for a in 0..x.nrows() {
                for b in (a + 1)..x.nrows() {
                    let before = (x.row(a) - x.row(b)).norm();
                    let after = (aligned.row(a) - aligned.row(b)).norm();
                    prop_assert!((before - after).abs() <= 1e-9 * before.max(1.0));
                }
            }
        }

        #[test]
        fn minimum_is_left_invariant(seed in any::<u64>(), d in 1usize..5) {
            let x = gaussian(10, d, seed);
            let m = gaussian(10, d, seed.wrapping_add(1));
            let p = random_orthogonal(d, seed.wrapping_add(2));
            let base = solve_orthogonal_procrustes(&x, &m).unwrap();
            let rotated = solve_orthogonal_procrustes(&(&x * &p), &m).unwrap();
            prop_assert!((base.objective - rotated.objective).abs() <= 1e-9 * base.objective.max(1.0));
        }
    }
}
