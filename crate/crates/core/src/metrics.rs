//! Alignment-quality metrics over a projected pool.
//!
//! Notation: `N` models, `m` stimuli, `D` universal dimensions. For model `i`
//! every summary averages over all partners `j ≠ i`:
//!
//! * correlation: Pearson correlation of column `d` of `Y'_i` and `Y'_j`
//!   across stimuli, averaged over partners and dimensions. Dimensions where
//!   either column is constant are skipped and counted;
//! * RMS: root-mean-square difference of column `d` across stimuli, averaged
//!   over partners and dimensions;
//! * top-K retrieval: whether stimulus `x` queried from model `i` has its own
//!   row in model `j` among the `K` nearest (Euclidean) gallery rows, averaged
//!   over stimuli and partners. Ties are broken by gallery row index.

use rayon::prelude::*;

use crate::scoring::{ConsistencyReport, ProjectedPool};
use crate::{Error, Matrix, Result};

/// Top-K values evaluated by default.
pub const DEFAULT_KS: [usize; 3] = [1, 5, 10];

/// Per-model correlation scores and the number of skipped Pearson
/// computations.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationScores {
    pub per_model: Vec<f64>,
    /// Skipped (unordered model pair, dimension) combinations.
    pub skipped_constant_dimensions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Model ids in pool order; the per-model vectors follow it.
    pub model_ids: Vec<String>,
    pub n_stimuli: usize,
    pub per_model_correlation: Vec<f64>,
    pub per_model_rms: Vec<f64>,
    /// `per_model_retrieval[i][k]` is `Acc_{ks[k]}` for model `i`.
    pub per_model_retrieval: Vec<Vec<f64>>,
    /// Sorted, distinct.
    pub ks: Vec<usize>,
    /// `K / m` for each entry of `ks`.
    pub chance_levels: Vec<f64>,
    pub skipped_constant_dimensions: usize,
}

impl EvalReport {
    pub fn retrieval(&self, model_id: &str, k: usize) -> Option<f64> {
        let i = self.model_ids.iter().position(|id| id == model_id)?;
        let kk = self.ks.iter().position(|&x| x == k)?;
        Some(self.per_model_retrieval[i][kk])
    }

    pub fn correlation(&self, model_id: &str) -> Option<f64> {
        let i = self.model_ids.iter().position(|id| id == model_id)?;
        Some(self.per_model_correlation[i])
    }

    pub fn rms(&self, model_id: &str) -> Option<f64> {
        let i = self.model_ids.iter().position(|id| id == model_id)?;
        Some(self.per_model_rms[i])
    }
}

fn require_models(p: &ProjectedPool) -> Result<()> {
    if p.n_models() < 2 {
        return Err(Error::TooFewModels(p.n_models()));
    }
    Ok(())
}

fn unordered_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect()
}

fn column(m: &Matrix, c: usize) -> &[f64] {
    let rows = m.nrows();
    &m.as_slice()[c * rows..(c + 1) * rows]
}

/// Two-pass Pearson correlation; `None` when either input is constant.
fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

fn is_constant(col: &[f64]) -> bool {
    col.iter().all(|&v| v == col[0])
}

/// Per-model correlation score, `Corr(i)`.
pub fn correlation_score(projected: &ProjectedPool) -> Result<CorrelationScores> {
    require_models(projected)?;
    let m = projected.n_stimuli();
    if m < 3 {
        return Err(Error::TooFewStimuli { required: 3, actual: m });
    }
    let n = projected.n_models();
    let d = projected.width();
    let members = projected.members();
    let pairs = unordered_pairs(n);

    // (sum of ρ, number of dimensions used) per unordered pair.
    let per_pair: Vec<(f64, usize)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let mut sum = 0.0;
            let mut used = 0;
            for c in 0..d {
                let (a, b) = (column(&members[i], c), column(&members[j], c));
                // Exactly constant columns are skipped even if rounding in the
                // mean would leave a tiny non-zero variance.
                if is_constant(a) || is_constant(b) {
                    continue;
                }
                if let Some(r) = pearson(a, b) {
                    sum += r;
                    used += 1;
                }
            }
            (sum, used)
        })
        .collect();

    let skipped = per_pair.iter().map(|&(_, used)| d - used).sum();
    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for (&(i, j), &(s, used)) in pairs.iter().zip(&per_pair) {
        for k in [i, j] {
            sums[k] += s;
            counts[k] += used;
        }
    }
    let per_model = sums
        .iter()
        .zip(&counts)
        .zip(projected.model_ids())
        .map(|((&s, &c), id)| {
            if c == 0 {
                Err(Error::NoVaryingDimensions(id.clone()))
            } else {
                Ok((s / c as f64).clamp(-1.0, 1.0))
            }
        })
        .collect::<Result<_>>()?;
    Ok(CorrelationScores {
        per_model,
        skipped_constant_dimensions: skipped,
    })
}

/// Per-model RMS score, `RMS(i)`.
pub fn rms_score(projected: &ProjectedPool) -> Result<Vec<f64>> {
    require_models(projected)?;
    let n = projected.n_models();
    let d = projected.width();
    let m = projected.n_stimuli() as f64;
    let members = projected.members();
    let pairs = unordered_pairs(n);

    let per_pair: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            (0..d)
                .map(|c| {
                    let sq: f64 = column(&members[i], c)
                        .iter()
                        .zip(column(&members[j], c))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (sq / m).sqrt()
                })
                .sum::<f64>()
        })
        .collect();

    let mut sums = vec![0.0; n];
    for (&(i, j), &s) in pairs.iter().zip(&per_pair) {
        sums[i] += s;
        sums[j] += s;
    }
    let denom = ((n - 1) * d) as f64;
    Ok(sums.into_iter().map(|s| s / denom).collect())
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Top-K cross-model retrieval accuracy, `result[i][k]` for `ks[k]`.
///
/// Query model `i`, gallery model `j`: stimulus `x` is a hit when fewer than
/// `K` gallery rows precede row `x` in (distance, row index) order.
pub fn retrieval_accuracy(projected: &ProjectedPool, ks: &[usize]) -> Result<Vec<Vec<f64>>> {
    require_models(projected)?;
    let m = projected.n_stimuli();
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > m) {
        return Err(Error::KTooLarge { k, stimuli: m });
    }
    let n = projected.n_models();
    let d = projected.width();
    let rows: Vec<Matrix> = projected.members().iter().map(Matrix::transpose).collect();
    let row = |i: usize, x: usize| &rows[i].as_slice()[x * d..(x + 1) * d];

    // rank[(i, j)][x]: number of gallery rows of j ranked ahead of x.
    let ordered: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let ranks: Vec<Vec<usize>> = ordered
        .par_iter()
        .map(|&(i, j)| {
            (0..m)
                .map(|x| {
                    let query = row(i, x);
                    let own = euclidean(query, row(j, x));
                    (0..m)
                        .filter(|&y| {
                            let dist = euclidean(query, row(j, y));
                            dist < own || (dist == own && y < x)
                        })
                        .count()
                })
                .collect()
        })
        .collect();

    let mut hits = vec![vec![0usize; ks.len()]; n];
    for (&(i, _), pair_ranks) in ordered.iter().zip(&ranks) {
        for &rank in pair_ranks {
            for (slot, &k) in ks.iter().enumerate() {
                if rank < k {
                    hits[i][slot] += 1;
                }
            }
        }
    }
    let denom = ((n - 1) * m) as f64;
    Ok(hits
        .into_iter()
        .map(|h| h.into_iter().map(|c| c as f64 / denom).collect())
        .collect())
}

/// Expected top-K accuracy under random ranking of `m` gallery stimuli.
pub fn chance_level(m: usize, k: usize) -> Result<f64> {
    if k == 0 || k > m {
        return Err(Error::KTooLarge { k, stimuli: m });
    }
    Ok(k as f64 / m as f64)
}

/// Pearson correlation between two consistency reports over the same stimuli.
pub fn score_correlation(a: &ConsistencyReport, b: &ConsistencyReport) -> Result<f64> {
    if a.stimulus_ids != b.stimulus_ids {
        return Err(Error::StimulusMismatch);
    }
    let m = a.scores.len();
    if m < 3 {
        return Err(Error::TooFewStimuli { required: 3, actual: m });
    }
    pearson(&a.scores, &b.scores).ok_or(Error::TooFewStimuli { required: 3, actual: m })
}

/// Runs all three metrics. `ks` is sorted and de-duplicated.
pub fn evaluate(projected: &ProjectedPool, ks: &[usize]) -> Result<EvalReport> {
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let m = projected.n_stimuli();
    let chance_levels = ks
        .iter()
        .map(|&k| chance_level(m, k))
        .collect::<Result<_>>()?;
    let corr = correlation_score(projected)?;
    Ok(EvalReport {
        model_ids: projected.model_ids().to_vec(),
        n_stimuli: m,
        per_model_correlation: corr.per_model,
        per_model_rms: rms_score(projected)?,
        per_model_retrieval: retrieval_accuracy(projected, &ks)?,
        ks,
        chance_levels,
        skipped_constant_dimensions: corr.skipped_constant_dimensions,
    })
}
