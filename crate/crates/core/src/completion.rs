//! Noisy low-rank matrix completion for averaged reward observations.
//!
//! Stage-1 exploration pulls a d1×d2 grid of arm pairs and averages repeated
//! observations per cell into K̃. Completion then fits a rank-r factorization
//! K̂ = A Bᵀ to the observed cells by alternating exact least squares on the
//! factors (a Burer–Monteiro fit), starting from a rescaled spectral
//! initialization. The `optspace-style` variant additionally trims
//! over-observed rows and columns before the spectral step, which
//! de-emphasizes cells that would otherwise dominate the initialization.
//!
//! The returned K̂ always has rank at most r, exactly, because it is produced
//! in factored form. Downstream subspace estimates rely on that: the sin-θ
//! transfer bound checked in [`sin_theta_product`] assumes the estimate
//! carries no residual tail spectrum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, RANK_RTOL};

/// Accumulates reward observations per (row, column) cell.
#[derive(Debug, Clone)]
pub struct ObservationTable {
    d1: usize,
    d2: usize,
    sum: DenseMatrix,
    count: Vec<u64>,
    total: u64,
}

impl ObservationTable {
    pub fn new(d1: usize, d2: usize) -> Result<Self> {
        if d1 == 0 || d2 == 0 {
            return Err(Error::InvalidDimension(
                "observation table needs positive dimensions".into(),
            ));
        }
        Ok(ObservationTable {
            d1,
            d2,
            sum: DenseMatrix::zeros(d1, d2),
            count: vec![0; d1 * d2],
            total: 0,
        })
    }

    pub fn record(&mut self, i: usize, j: usize, y: f64) -> Result<()> {
        if i >= self.d1 || j >= self.d2 {
            return Err(Error::InvalidDimension(format!(
                "cell ({i},{j}) outside {}x{}",
                self.d1, self.d2
            )));
        }
        if !y.is_finite() {
            return Err(Error::InvalidInput("observation is not finite".into()));
        }
        self.sum[(i, j)] += y;
        self.count[i * self.d2 + j] += 1;
        self.total += 1;
        Ok(())
    }

    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.count[i * self.d2 + j]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    /// Per-cell averages (zero where unobserved) plus the observation mask.
    pub fn averaged(&self) -> (DenseMatrix, Vec<bool>) {
        let mut k = DenseMatrix::zeros(self.d1, self.d2);
        let mut mask = vec![false; self.d1 * self.d2];
        for i in 0..self.d1 {
            for j in 0..self.d2 {
                let c = self.count[i * self.d2 + j];
                if c > 0 {
                    k[(i, j)] = self.sum[(i, j)] / c as f64;
                    mask[i * self.d2 + j] = true;
                }
            }
        }
        (k, mask)
    }
}

/// Completion initialization/refinement variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompletionMethod {
    /// Spectral initialization followed by alternating least squares.
    #[default]
    BurerMonteiro,
    /// Trims over-observed rows/columns before the spectral step, then the
    /// same alternating refinement.
    OptspaceStyle,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CompletionOptions {
    /// Cap on alternation sweeps.
    pub max_iters: usize,
    /// Stop when the observed squared residual changes by less than this
    /// relative amount between sweeps.
    pub rel_tol: f64,
    /// Gradient norm under which the fit counts as a local minimizer.
    pub grad_tol: f64,
}

impl Default for CompletionOptions {
    fn default() -> Self {
        CompletionOptions {
            max_iters: 200,
            rel_tol: 1.0e-9,
            grad_tol: 1.0e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompletionResult {
    /// Rank-≤r completion, returned in multiplied-out form.
    pub k_hat: DenseMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// Final squared residual over observed cells.
    pub objective: f64,
    /// Frobenius norm of the objective gradient at the fit.
    pub grad_norm: f64,
    /// Rows/columns with no observations at all (their fit is extrapolated).
    pub empty_rows: usize,
    pub empty_cols: usize,
}

/// Completes `k_tilde` (zero-filled averages with `mask` marking observed
/// cells) to a rank-≤`r` matrix.
pub fn complete(
    k_tilde: &DenseMatrix,
    mask: &[bool],
    r: usize,
    method: CompletionMethod,
    opts: &CompletionOptions,
) -> Result<CompletionResult> {
    let (d1, d2) = (k_tilde.rows(), k_tilde.cols());
    if mask.len() != d1 * d2 {
        return Err(Error::InvalidDimension(format!(
            "mask length {} does not match {d1}x{d2}",
            mask.len()
        )));
    }
    if r == 0 || r > d1.min(d2) {
        return Err(Error::InvalidRank(format!(
            "completion rank {r} out of range for {d1}x{d2}"
        )));
    }
    if !k_tilde.is_finite() {
        return Err(Error::InvalidInput("k_tilde has non-finite entries".into()));
    }
    let trace = complete_with_trace(k_tilde, mask, r, method, opts)?;
    Ok(trace.result)
}

/// Completion plus the per-sweep objective history; used by tests to verify
/// that the alternation never increases the residual.
pub(crate) struct CompletionTrace {
    pub result: CompletionResult,
    #[cfg_attr(not(test), allow(dead_code))]
    pub objective_history: Vec<f64>,
}

pub(crate) fn complete_with_trace(
    k_tilde: &DenseMatrix,
    mask: &[bool],
    r: usize,
    method: CompletionMethod,
    opts: &CompletionOptions,
) -> Result<CompletionTrace> {
    let (d1, d2) = (k_tilde.rows(), k_tilde.cols());
    let observed = mask.iter().filter(|&&m| m).count();

    let row_degree: Vec<usize> = (0..d1)
        .map(|i| (0..d2).filter(|&j| mask[i * d2 + j]).count())
        .collect();
    let col_degree: Vec<usize> = (0..d2)
        .map(|j| (0..d1).filter(|&i| mask[i * d2 + j]).count())
        .collect();
    let empty_rows = row_degree.iter().filter(|&&c| c == 0).count();
    let empty_cols = col_degree.iter().filter(|&&c| c == 0).count();

    // Spectral initialization: rescale the zero-filled averages so the
    // observed fraction does not shrink the spectrum, optionally trimming
    // over-observed lines first.
    let mut init = k_tilde.clone();
    if method == CompletionMethod::OptspaceStyle && observed > 0 {
        let row_mean = observed as f64 / d1 as f64;
        let col_mean = observed as f64 / d2 as f64;
        for i in 0..d1 {
            if (row_degree[i] as f64) > 2.0 * row_mean {
                for j in 0..d2 {
                    init[(i, j)] = 0.0;
                }
            }
        }
        for j in 0..d2 {
            if (col_degree[j] as f64) > 2.0 * col_mean {
                for i in 0..d1 {
                    init[(i, j)] = 0.0;
                }
            }
        }
    }
    let rescale = if observed > 0 {
        (d1 * d2) as f64 / observed as f64
    } else {
        1.0
    };
    let init = init.scale(rescale);
    let f = linalg::thin_svd(&init)?;
    let mut a = DenseMatrix::zeros(d1, r);
    let mut b = DenseMatrix::zeros(d2, r);
    for k in 0..r {
        let root = f.s[k].sqrt();
        for i in 0..d1 {
            a[(i, k)] = f.u[(i, k)] * root;
        }
        for j in 0..d2 {
            b[(j, k)] = f.v[(j, k)] * root;
        }
    }

    let objective = |a: &DenseMatrix, b: &DenseMatrix| -> f64 {
        let mut obj = 0.0;
        for i in 0..d1 {
            for j in 0..d2 {
                if mask[i * d2 + j] {
                    let resid = linalg::dot(a.row(i), b.row(j)) - k_tilde[(i, j)];
                    obj += resid * resid;
                }
            }
        }
        obj
    };

    let mut history = vec![objective(&a, &b)];
    let mut iterations = 0;
    let mut converged = observed == 0;
    while iterations < opts.max_iters && !converged {
        iterations += 1;
        // Row-wise exact least squares for A with B fixed.
        for i in 0..d1 {
            if row_degree[i] == 0 {
                continue;
            }
            let mut g = DenseMatrix::zeros(r, r);
            let mut rhs = vec![0.0; r];
            for j in 0..d2 {
                if mask[i * d2 + j] {
                    g.rank_one_add(b.row(j));
                    let y = k_tilde[(i, j)];
                    for k in 0..r {
                        rhs[k] += y * b[(j, k)];
                    }
                }
            }
            let x = solve_gram(&g, &rhs)?;
            for k in 0..r {
                a[(i, k)] = x[k];
            }
        }
        // Column-wise exact least squares for B with A fixed.
        for j in 0..d2 {
            if col_degree[j] == 0 {
                continue;
            }
            let mut g = DenseMatrix::zeros(r, r);
            let mut rhs = vec![0.0; r];
            for i in 0..d1 {
                if mask[i * d2 + j] {
                    g.rank_one_add(a.row(i));
                    let y = k_tilde[(i, j)];
                    for k in 0..r {
                        rhs[k] += y * a[(i, k)];
                    }
                }
            }
            let x = solve_gram(&g, &rhs)?;
            for k in 0..r {
                b[(j, k)] = x[k];
            }
        }
        let obj = objective(&a, &b);
        let prev = *history.last().unwrap();
        history.push(obj);
        let denom = prev.max(1.0e-300);
        if (prev - obj).abs() / denom < opts.rel_tol || obj < 1.0e-300 {
            converged = true;
        }
    }

    let grad_norm = {
        // ∇_A = 2 R B and ∇_B = 2 Rᵀ A for the masked residual R.
        let mut resid = DenseMatrix::zeros(d1, d2);
        for i in 0..d1 {
            for j in 0..d2 {
                if mask[i * d2 + j] {
                    resid[(i, j)] = linalg::dot(a.row(i), b.row(j)) - k_tilde[(i, j)];
                }
            }
        }
        let ga = resid.matmul(&b).scale(2.0);
        let gb = resid.matmul_tn(&a).scale(2.0);
        (ga.frobenius_norm().powi(2) + gb.frobenius_norm().powi(2)).sqrt()
    };
    if grad_norm <= opts.grad_tol {
        converged = true;
    }

    let k_hat = a.matmul_nt(&b);
    let objective_final = *history.last().unwrap();
    Ok(CompletionTrace {
        result: CompletionResult {
            k_hat,
            iterations,
            converged,
            objective: objective_final,
            grad_norm,
            empty_rows,
            empty_cols,
        },
        objective_history: history,
    })
}

fn solve_gram(g: &DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    // The Gram matrix is singular whenever a line has fewer observations
    // than the factor rank; fall back to the minimum-norm solution so the
    // sweep still decreases the objective.
    match linalg::cholesky(g) {
        Ok(l) => {
            let y = linalg::forward_sub(&l, rhs);
            Ok(linalg::back_sub_lt(&l, &y))
        }
        Err(_) => linalg::solve_psd_least_norm(g, rhs),
    }
}

/// Incoherence statistics of a rank-r matrix, used to sanity-check that a
/// drawn instance is completable from uniform samples.
#[derive(Debug, Clone, Copy)]
pub struct IncoherenceReport {
    /// Max row/column leverage scaled by dimension over rank; ≥ 1.
    pub mu0: f64,
    /// Scaled max entry of the spectrally reweighted reconstruction.
    pub mu1: f64,
    /// Condition number of the nonzero spectrum.
    pub condition_number: f64,
}

/// Computes incoherence statistics for `k`, which must have rank at least
/// `r` (relative to the usual threshold).
pub fn incoherence(k: &DenseMatrix, r: usize) -> Result<IncoherenceReport> {
    let (d1, d2) = (k.rows(), k.cols());
    if r == 0 || r > d1.min(d2) {
        return Err(Error::InvalidRank(format!(
            "rank {r} out of range for {d1}x{d2}"
        )));
    }
    let f = linalg::thin_svd(k)?;
    let smax = f.s[0];
    if smax <= 0.0 || f.s[r - 1] <= RANK_RTOL * smax {
        return Err(Error::InvalidRank(format!(
            "matrix rank is below {r}"
        )));
    }
    let mut mu0: f64 = 0.0;
    for i in 0..d1 {
        let lev: f64 = (0..r).map(|k| f.u[(i, k)] * f.u[(i, k)]).sum();
        mu0 = mu0.max(lev * d1 as f64 / r as f64);
    }
    for j in 0..d2 {
        let lev: f64 = (0..r).map(|k| f.v[(j, k)] * f.v[(j, k)]).sum();
        mu0 = mu0.max(lev * d2 as f64 / r as f64);
    }
    let mut max_entry: f64 = 0.0;
    for i in 0..d1 {
        for j in 0..d2 {
            let e: f64 = (0..r)
                .map(|k| f.u[(i, k)] * (f.s[k] / smax) * f.v[(j, k)])
                .sum();
            max_entry = max_entry.max(e.abs());
        }
    }
    let mu1 = max_entry * ((d1 * d2) as f64 / r as f64).sqrt();
    Ok(IncoherenceReport {
        mu0,
        mu1,
        condition_number: smax / f.s[r - 1],
    })
}

/// Product of the subspace misalignment norms `‖Û⊥ᵀ U*‖_F · ‖V̂⊥ᵀ V*‖_F`.
///
/// Both perpendicular bases and both reference bases must have orthonormal
/// columns; row dimensions must agree pairwise.
pub fn sin_theta_product(
    u_hat_perp: &DenseMatrix,
    u_star: &DenseMatrix,
    v_hat_perp: &DenseMatrix,
    v_star: &DenseMatrix,
) -> Result<f64> {
    check_orthonormal("u_hat_perp", u_hat_perp)?;
    check_orthonormal("u_star", u_star)?;
    check_orthonormal("v_hat_perp", v_hat_perp)?;
    check_orthonormal("v_star", v_star)?;
    if u_hat_perp.rows() != u_star.rows() || v_hat_perp.rows() != v_star.rows() {
        return Err(Error::InvalidDimension(
            "subspace bases live in mismatched ambient spaces".into(),
        ));
    }
    let left = u_hat_perp.matmul_tn(u_star).frobenius_norm();
    let right = v_hat_perp.matmul_tn(v_star).frobenius_norm();
    Ok(left * right)
}

fn check_orthonormal(name: &str, m: &DenseMatrix) -> Result<()> {
    if m.cols() == 0 {
        return Ok(());
    }
    let gram = m.matmul_tn(m);
    let eye = DenseMatrix::identity(m.cols());
    if gram.sub(&eye).max_abs() > 1.0e-8 {
        return Err(Error::InvalidInput(format!(
            "{name} does not have orthonormal columns"
        )));
    }
    Ok(())
}
