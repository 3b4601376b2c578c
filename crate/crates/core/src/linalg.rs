//! Dense linear algebra kernels sized for this crate's workloads.
//!
//! Every matrix in the bandit pipeline is small (at most 64×64 after
//! vectorization), so the factorizations here favor simplicity and numerical
//! robustness over asymptotics: one-sided Jacobi for the SVD, Householder
//! reflections for QR, and an unblocked Cholesky with a rank-one update for
//! the incremental Gram matrices kept by the bandit loop.
//!
//! Conventions: row-major storage, thin SVD `A = U Σ Vᵀ` with singular values
//! sorted descending, lower-triangular Cholesky factors, and a relative rank
//! threshold of `1e-10 · σ_max` everywhere a rank decision is made.

use crate::error::{Error, Result};

/// Relative threshold under which a singular value counts as zero.
pub const RANK_RTOL: f64 = 1e-10;

const JACOBI_TOL: f64 = 1.0e-15;
const JACOBI_MAX_SWEEPS: usize = 60;

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row slices, validating shape and finiteness.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::InvalidDimension(
                "matrix needs at least one row and one column".into(),
            ));
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::InvalidDimension(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("matrix entry is not finite".into()));
        }
        Ok(DenseMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidDimension(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("matrix entry is not finite".into()));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DenseMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Stacks column vectors; `rows` disambiguates the empty case.
    pub fn from_columns(rows: usize, cols: &[Vec<f64>]) -> Self {
        let mut m = DenseMatrix::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), rows, "column length mismatch");
            for i in 0..rows {
                m[(i, j)] = c[i];
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `self * other`; shapes are a programmer contract, not runtime input.
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// `selfᵀ * other` without materializing the transpose.
    pub fn matmul_tn(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.rows, other.rows, "matmul_tn shape mismatch");
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            for i in 0..self.cols {
                let a = self[(k, i)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// `self * otherᵀ`.
    pub fn matmul_nt(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.cols, "matmul_nt shape mismatch");
        let mut out = DenseMatrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            for j in 0..other.rows {
                out[(i, j)] = dot(self.row(i), other.row(j));
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "matvec shape mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `selfᵀ x`.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, x.len(), "matvec_t shape mismatch");
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for j in 0..self.cols {
                out[j] += xi * self[(i, j)];
            }
        }
        out
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    /// In-place `self += x xᵀ` for square `self`.
    pub fn rank_one_add(&mut self, x: &[f64]) {
        assert_eq!(self.rows, self.cols);
        assert_eq!(self.rows, x.len());
        for i in 0..self.rows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for j in 0..self.cols {
                self[(i, j)] += xi * x[j];
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Thin SVD factors: `u` is m×k, `s` has k descending entries, `v` is n×k,
/// with k = min(m, n).
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

/// Thin SVD by one-sided Jacobi rotations.
///
/// Columns of the working copy are rotated pairwise until all are mutually
/// orthogonal relative to their norms; column norms are then the singular
/// values. Exactly-zero columns (rank deficiency) get their `u` directions
/// from an orthonormal completion so `uᵀu = I` holds regardless of rank.
pub fn thin_svd(a: &DenseMatrix) -> Result<SvdFactors> {
    if !a.is_finite() {
        return Err(Error::InvalidInput("svd input has non-finite entries".into()));
    }
    if a.rows < a.cols {
        let f = thin_svd(&a.transpose())?;
        return Ok(SvdFactors {
            u: f.v,
            s: f.s,
            v: f.u,
        });
    }
    let (m, n) = (a.rows, a.cols);
    let mut w: Vec<Vec<f64>> = (0..n).map(|j| a.col(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(&w[p], &w[q]);
                if gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta.abs() < 1.0e150 {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                } else {
                    0.5 / zeta
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut w, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
                rotated = true;
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = w.iter().map(|c| norm2(c)).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap().then(i.cmp(&j)));

    let s: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let v_sorted: Vec<Vec<f64>> = order.iter().map(|&j| v[j].clone()).collect();
    let sigma_max = s[0];

    let mut u_cols: Vec<Option<Vec<f64>>> = Vec::with_capacity(n);
    let mut valid: Vec<Vec<f64>> = Vec::new();
    for &j in &order {
        // Columns at or below ~1e-290·σ_max are zero up to denormals; their
        // direction is meaningless and gets filled by completion below.
        if norms[j] > sigma_max * 1.0e-290 && norms[j] > 0.0 {
            let col: Vec<f64> = w[j].iter().map(|x| x / norms[j]).collect();
            valid.push(col.clone());
            u_cols.push(Some(col));
        } else {
            u_cols.push(None);
        }
    }
    let missing = u_cols.iter().filter(|c| c.is_none()).count();
    if missing > 0 {
        let basis = DenseMatrix::from_columns(m, &valid);
        let fill = orthonormal_completion(&basis, missing);
        let mut next = 0;
        for c in u_cols.iter_mut() {
            if c.is_none() {
                *c = Some(fill.col(next));
                next += 1;
            }
        }
    }

    let u = DenseMatrix::from_columns(m, &u_cols.into_iter().map(Option::unwrap).collect::<Vec<_>>());
    let v = DenseMatrix::from_columns(n, &v_sorted);
    Ok(SvdFactors { u, s, v })
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let cp = &mut lo[p];
    let cq = &mut hi[0];
    for i in 0..cp.len() {
        let xp = cp[i];
        let xq = cq[i];
        cp[i] = c * xp - s * xq;
        cq[i] = s * xp + c * xq;
    }
}

/// QR factors from Householder reflections: `q` is m×m orthogonal, `r` is m×n
/// upper triangular (in its top n rows).
#[derive(Debug, Clone)]
pub struct QrFactors {
    pub q: DenseMatrix,
    pub r: DenseMatrix,
}

pub fn householder_qr(a: &DenseMatrix) -> QrFactors {
    let (m, n) = (a.rows(), a.cols());
    let mut r = a.clone();
    let mut q = DenseMatrix::identity(m);
    let steps = n.min(m.saturating_sub(1));
    let mut v = vec![0.0; m];
    for k in 0..steps {
        let mut norm_x = 0.0;
        for i in k..m {
            norm_x += r[(i, k)] * r[(i, k)];
        }
        let norm_x = norm_x.sqrt();
        if norm_x == 0.0 {
            continue;
        }
        let sign = if r[(k, k)] >= 0.0 { 1.0 } else { -1.0 };
        let alpha = -sign * norm_x;
        for i in 0..m {
            v[i] = if i < k { 0.0 } else { r[(i, k)] };
        }
        v[k] -= alpha;
        let vnorm2 = dot(&v, &v);
        if vnorm2 == 0.0 {
            continue;
        }
        // R ← H R restricted to the active block.
        for j in k..n {
            let mut s = 0.0;
            for i in k..m {
                s += v[i] * r[(i, j)];
            }
            let s = 2.0 * s / vnorm2;
            for i in k..m {
                r[(i, j)] -= s * v[i];
            }
        }
        // Q ← Q H, applied to each row of Q.
        for i in 0..m {
            let mut s = 0.0;
            for j in k..m {
                s += q[(i, j)] * v[j];
            }
            let s = 2.0 * s / vnorm2;
            for j in k..m {
                q[(i, j)] -= s * v[j];
            }
        }
        r[(k, k)] = alpha;
        for i in k + 1..m {
            r[(i, k)] = 0.0;
        }
    }
    QrFactors { q, r }
}

/// Least-squares solve `min ‖a x − b‖₂` for full column rank `a` (m ≥ n).
pub fn lstsq(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    assert_eq!(a.rows(), b.len(), "lstsq shape mismatch");
    if a.rows() < a.cols() {
        return Err(Error::InvalidDimension(
            "lstsq requires at least as many rows as columns".into(),
        ));
    }
    let f = householder_qr(a);
    let qtb = f.q.matvec_t(b);
    back_sub_upper(&f.r, &qtb[..a.cols()])
}

/// Column-wise least squares: solves `min ‖a X − b‖_F`, returning X (n×c).
pub fn lstsq_matrix(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    assert_eq!(a.rows(), b.rows(), "lstsq_matrix shape mismatch");
    if a.rows() < a.cols() {
        return Err(Error::InvalidDimension(
            "lstsq_matrix requires at least as many rows as columns".into(),
        ));
    }
    let f = householder_qr(a);
    let qtb = f.q.matmul_tn(b);
    let n = a.cols();
    let mut out = DenseMatrix::zeros(n, b.cols());
    for j in 0..b.cols() {
        let col: Vec<f64> = (0..n).map(|i| qtb[(i, j)]).collect();
        let x = back_sub_upper(&f.r, &col)?;
        for i in 0..n {
            out[(i, j)] = x[i];
        }
    }
    Ok(out)
}

fn back_sub_upper(r: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut max_diag: f64 = 0.0;
    for j in 0..n {
        max_diag = max_diag.max(r[(j, j)].abs());
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= r[(i, j)] * x[j];
        }
        let d = r[(i, i)];
        if d.abs() <= max_diag * 1.0e-13 || d == 0.0 {
            return Err(Error::SingularMatrix(format!(
                "triangular solve pivot {i} is negligible"
            )));
        }
        x[i] = s / d;
    }
    Ok(x)
}

/// Cholesky factorization `a = L Lᵀ`; errors if `a` is not positive definite.
pub fn cholesky(a: &DenseMatrix) -> Result<DenseMatrix> {
    assert_eq!(a.rows(), a.cols(), "cholesky needs a square matrix");
    if !a.is_finite() {
        return Err(Error::InvalidInput(
            "cholesky input has non-finite entries".into(),
        ));
    }
    let n = a.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::SingularMatrix(format!(
                "matrix is not positive definite (pivot {j})"
            )));
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Rank-one update of a Cholesky factor: after the call, `l lᵀ` equals the
/// old `l lᵀ + x xᵀ`. Runs in O(n²) with hyperbolic-free Givens-style scaling.
pub fn cholesky_update(l: &mut DenseMatrix, x: &[f64]) {
    let n = l.rows();
    assert_eq!(n, l.cols());
    assert_eq!(n, x.len());
    let mut work = x.to_vec();
    for k in 0..n {
        let lkk = l[(k, k)];
        let r = (lkk * lkk + work[k] * work[k]).sqrt();
        let c = r / lkk;
        let s = work[k] / lkk;
        l[(k, k)] = r;
        for i in k + 1..n {
            let lik = (l[(i, k)] + s * work[i]) / c;
            work[i] = c * work[i] - s * lik;
            l[(i, k)] = lik;
        }
    }
}

/// Solves `L y = b` for lower-triangular `L`.
pub fn forward_sub(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        let row = l.row(i);
        for j in 0..i {
            s -= row[j] * y[j];
        }
        y[i] = s / row[i];
    }
    y
}

/// Solves `Lᵀ x = b` for lower-triangular `L` without forming the transpose.
pub fn back_sub_lt(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= l[(j, i)] * x[j];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solves `V x = b` for symmetric positive definite `V`.
pub fn solve_spd(v: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    assert_eq!(v.rows(), v.cols(), "solve_spd needs a square matrix");
    let scale = 1.0 + v.max_abs();
    for i in 0..v.rows() {
        for j in i + 1..v.cols() {
            if (v[(i, j)] - v[(j, i)]).abs() > 1.0e-10 * scale {
                return Err(Error::InvalidInput(format!(
                    "matrix is not symmetric at ({i},{j})"
                )));
            }
        }
    }
    let l = cholesky(v)?;
    let y = forward_sub(&l, b);
    Ok(back_sub_lt(&l, &y))
}

/// Orthonormal basis of the orthogonal complement of `span(u)`.
///
/// `u` must have orthonormal columns (d×r with r < d); the result W is
/// d×(d−r) with `Wᵀ W = I` and `Wᵀ u = 0`. Built as the trailing columns of a
/// Householder QR of `[u | G]` where G is a fixed-seed Gaussian block, so the
/// result is deterministic.
pub fn complement_basis(u: &DenseMatrix) -> Result<DenseMatrix> {
    let (d, r) = (u.rows(), u.cols());
    if r >= d {
        return Err(Error::InvalidDimension(format!(
            "no complement: basis has {r} columns in dimension {d}"
        )));
    }
    let gram = u.matmul_tn(u);
    let eye = DenseMatrix::identity(r);
    if r > 0 && gram.sub(&eye).max_abs() > 1.0e-8 {
        return Err(Error::InvalidInput(
            "complement_basis input columns are not orthonormal".into(),
        ));
    }
    Ok(orthonormal_completion(u, d - r))
}

/// Extends the orthonormal columns of `basis` (m×k) with `extra` further
/// orthonormal columns, all mutually orthogonal to the originals.
fn orthonormal_completion(basis: &DenseMatrix, extra: usize) -> DenseMatrix {
    use rand::SeedableRng;
    let m = basis.rows();
    let k = basis.cols();
    debug_assert!(k + extra <= m);
    // Any fill block works; a fixed-seed Gaussian one keeps R well scaled and
    // the output reproducible across calls.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x6f72_7468_6f21);
    let mut stacked = DenseMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..k {
            stacked[(i, j)] = basis[(i, j)];
        }
        for j in k..m {
            stacked[(i, j)] = standard_normal(&mut rng);
        }
    }
    let f = householder_qr(&stacked);
    let mut out = DenseMatrix::zeros(m, extra);
    for i in 0..m {
        for j in 0..extra {
            out[(i, j)] = f.q[(i, k + j)];
        }
    }
    out
}

fn standard_normal(rng: &mut impl rand::Rng) -> f64 {
    use rand_distr::Distribution;
    rand_distr::StandardNormal.sample(rng)
}

/// Smallest singular value exceeding `RANK_RTOL · σ_max`; 0 for the zero
/// matrix.
pub fn min_nonzero_singular(a: &DenseMatrix) -> Result<f64> {
    let f = thin_svd(a)?;
    let sigma_max = f.s[0];
    if sigma_max <= 0.0 {
        return Ok(0.0);
    }
    let thresh = RANK_RTOL * sigma_max;
    Ok(f.s
        .iter()
        .copied()
        .filter(|&s| s > thresh)
        .fold(f64::INFINITY, f64::min))
}

/// Largest singular value.
pub fn spectral_norm(a: &DenseMatrix) -> Result<f64> {
    Ok(thin_svd(a)?.s[0])
}

/// Minimum-norm least-squares solve of a symmetric PSD system `g x = b`,
/// tolerating rank deficiency (used by the completion alternation when a row
/// has fewer observations than the factor rank).
pub fn solve_psd_least_norm(g: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let f = thin_svd(g)?;
    let smax = f.s[0];
    let n = b.len();
    let mut x = vec![0.0; n];
    if smax <= 0.0 {
        return Ok(x);
    }
    let thresh = RANK_RTOL * smax;
    let utb = f.u.matvec_t(b);
    for j in 0..f.s.len() {
        if f.s[j] > thresh {
            let coeff = utb[j] / f.s[j];
            for i in 0..n {
                x[i] += coeff * f.v[(i, j)];
            }
        }
    }
    Ok(x)
}
