//! Exploration-subset selection: find d arms whose stacked matrix is as far
//! from singular as possible.
//!
//! The exact problem (maximize the smallest singular value over d-subsets)
//! is combinatorial, so selection works in two phases. A Frank–Wolfe ascent
//! on the simplex maximizes the smallest eigenvalue of the weighted second
//! moment Σ wᵢ xᵢxᵢᵀ, a concave relaxation whose heavy arms indicate a
//! well-spread subset. The top-d arms by weight then compete against a pool
//! of random d-subsets, and the best directly-scored candidate wins.

use rand::Rng;

use crate::env::ArmSet;
use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, RANK_RTOL};

/// Where the winning subset came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionSource {
    /// Top-d arms by relaxation weight.
    Relaxation,
    /// One of the random candidate subsets.
    RandomCandidate,
}

/// A selected exploration subset with its score.
#[derive(Debug, Clone)]
pub struct SubsetSelection {
    /// d distinct arm indices, ascending.
    pub indices: Vec<usize>,
    /// Smallest singular value of the stacked subset.
    pub score: f64,
    pub source: SelectionSource,
}

/// Smallest singular value of the d×d matrix formed by stacking the chosen
/// arms as rows; 0 if the stack is rank deficient.
pub fn score_subset(arms: &ArmSet, indices: &[usize]) -> Result<f64> {
    let d = arms.dim();
    if indices.len() != d {
        return Err(Error::InvalidDimension(format!(
            "subset has {} arms, need exactly {d}",
            indices.len()
        )));
    }
    let mut seen = indices.to_vec();
    seen.sort_unstable();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput("subset indices must be distinct".into()));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= arms.len()) {
        return Err(Error::InvalidInput(format!("arm index {bad} out of range")));
    }
    let stacked = arms.stacked_subset(indices);
    let f = linalg::thin_svd(&stacked)?;
    let smax = f.s[0];
    let smin = f.s[d - 1];
    if smax <= 0.0 || smin <= RANK_RTOL * smax {
        return Ok(0.0);
    }
    Ok(smin)
}

/// Frank–Wolfe ascent of `w ↦ λ_min(Σ wᵢ xᵢ xᵢᵀ)` over the simplex.
///
/// Each iteration moves mass toward the arm that most improves the minimal
/// eigendirection, with step `step(k)` at (1-based) iteration k. Returns the
/// final weights, which sum to 1.
pub fn relaxation_weights(
    arms: &ArmSet,
    iters: usize,
    step: impl Fn(usize) -> f64,
) -> Result<Vec<f64>> {
    let d = arms.dim();
    let n = arms.len();
    let mut w = vec![1.0 / n as f64; n];
    for k in 1..=iters {
        let mut second_moment = DenseMatrix::zeros(d, d);
        for (i, arm) in arms.iter().enumerate() {
            if w[i] == 0.0 {
                continue;
            }
            for a in 0..d {
                let wa = w[i] * arm[a];
                if wa == 0.0 {
                    continue;
                }
                for b in 0..d {
                    second_moment[(a, b)] += wa * arm[b];
                }
            }
        }
        // A supergradient of λ_min at the current moment matrix is v vᵀ for
        // v the minimal eigenvector; the best vertex maximizes (xᵢᵀv)².
        let f = linalg::thin_svd(&second_moment)?;
        let v = f.v.col(d - 1);
        let mut best = 0usize;
        let mut best_gain = f64::NEG_INFINITY;
        for (i, arm) in arms.iter().enumerate() {
            let g = linalg::dot(arm, &v);
            let gain = g * g;
            if gain > best_gain {
                best_gain = gain;
                best = i;
            }
        }
        let gamma = step(k).clamp(0.0, 1.0);
        for (i, wi) in w.iter_mut().enumerate() {
            *wi *= 1.0 - gamma;
            if i == best {
                *wi += gamma;
            }
        }
    }
    Ok(w)
}

/// Default Frank–Wolfe step schedule.
pub fn default_step(k: usize) -> f64 {
    2.0 / (k as f64 + 2.0)
}

const RELAXATION_ITERS: usize = 500;
const SINGULAR_RETRIES: usize = 100;

/// Selects a nonsingular exploration subset of d arms.
///
/// Candidates are the top-d arms by relaxation weight plus `n_random` random
/// d-subsets; the candidate with the highest [`score_subset`] wins. If every
/// candidate scores 0, up to 100 further random subsets are tried before
/// giving up with a degenerate-arm-set error.
pub fn select_subset(arms: &ArmSet, n_random: usize, rng: &mut impl Rng) -> Result<SubsetSelection> {
    let d = arms.dim();
    let n = arms.len();
    if n < d {
        return Err(Error::InvalidInput(format!(
            "{n} arms cannot contain a spanning subset of size {d}"
        )));
    }

    let w = relaxation_weights(arms, RELAXATION_ITERS, default_step)?;
    let mut by_weight: Vec<usize> = (0..n).collect();
    by_weight.sort_by(|&i, &j| w[j].partial_cmp(&w[i]).unwrap().then(i.cmp(&j)));
    let mut top: Vec<usize> = by_weight[..d].to_vec();
    top.sort_unstable();

    let mut best: Option<SubsetSelection> = None;
    let consider = |indices: Vec<usize>, source: SelectionSource, best: &mut Option<SubsetSelection>| -> Result<()> {
        let score = score_subset(arms, &indices)?;
        let better = match best {
            None => true,
            Some(b) => score > b.score,
        };
        if better {
            *best = Some(SubsetSelection {
                indices,
                score,
                source,
            });
        }
        Ok(())
    };

    consider(top, SelectionSource::Relaxation, &mut best)?;
    for _ in 0..n_random {
        consider(random_subset(n, d, rng), SelectionSource::RandomCandidate, &mut best)?;
    }
    for _ in 0..SINGULAR_RETRIES {
        if best.as_ref().map(|b| b.score > 0.0).unwrap_or(false) {
            break;
        }
        consider(random_subset(n, d, rng), SelectionSource::RandomCandidate, &mut best)?;
    }

    let best = best.expect("at least one candidate was scored");
    if best.score > 0.0 {
        Ok(best)
    } else {
        Err(Error::DegenerateArmSet(format!(
            "no nonsingular {d}-subset found among candidates"
        )))
    }
}

fn random_subset(n: usize, d: usize, rng: &mut impl Rng) -> Vec<usize> {
    // Partial Fisher-Yates: uniform d-subset without replacement.
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..d {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    let mut chosen = pool[..d].to_vec();
    chosen.sort_unstable();
    chosen
}
