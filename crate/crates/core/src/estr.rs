//! Explore-subspace-then-refine strategies for bilinear bandits.
//!
//! `run_estr` plays in two stages. Stage 1 picks d1 left arms and d2 right
//! arms whose stacked matrices are well conditioned, pulls the d1×d2 grid of
//! pairs near-uniformly for T1 rounds, completes the averaged reward grid to
//! a rank-r matrix, and converts it to an estimate Θ̂ of the hidden matrix by
//! undoing the arm change of basis. The singular subspaces of Θ̂ then define
//! a rotation of the pair space under which the true parameter θ* has almost
//! all of its mass on the first k = (d1+d2)r − r² coordinates; the remaining
//! coordinates are bounded by B⊥ = S₂·γ where γ shrinks like 1/T1. Stage 2
//! runs the split-penalty UCB engine of [`crate::lowoful`] on the rotated,
//! vectorized pairs for the remaining T − T1 rounds.
//!
//! `run_oful_baseline` runs the same engine without rotation or penalty
//! split (the dimension-agnostic baseline), and `run_isse` interleaves the
//! two ideas: it plays UCB from the start and re-estimates the subspace at a
//! geometric schedule of rounds, replaying its own history into each newly
//! rotated state.
//!
//! Vectorization layout: with rotated coordinates x' = [Û Û⊥]ᵀx and
//! z' = [V̂ V̂⊥]ᵀz, the pair feature is the outer product x'z'ᵀ flattened in
//! four blocks, column-major within each: (estimated×estimated),
//! (complement×estimated), (estimated×complement), (complement×complement).
//! The first three blocks are the k leading coordinates; the last is the
//! tail that the large penalty suppresses.

use rand::Rng;

use crate::arm_selection::select_subset;
use crate::completion::{complete, sin_theta_product, CompletionMethod, CompletionOptions, ObservationTable};
use crate::env::{ArmSet, BilinearEnvironment, RegretTrace};
use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};
use crate::lowoful::{lambda_perp_default, LowOfulConfig, UcbRunner};
use crate::rng::RunStream;

/// Random d-subsets scored alongside the relaxation's pick during stage-1
/// arm selection.
const N_RANDOM_SUBSETS: usize = 20;

/// How the subspace-error scale γ(T1) is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaMode {
    /// γ = σ² d³ r / T1 with d = max(d1, d2); the form used by the
    /// experiment protocol.
    #[default]
    Simplified,
    /// The full bound including the conditioning of the selected arm
    /// matrices and the spectrum of Θ*:
    /// γ = (‖X⁻¹‖₂² ‖Z⁻¹‖₂² / S_r²) · C₁² · (S₂/S_r)⁴ · σ² d³ r / T1.
    ConditionScaled,
}

/// Parameters of one two-stage (or interleaved) run.
#[derive(Debug, Clone)]
pub struct EstrConfig {
    /// Total rounds T.
    pub t: u64,
    /// Stage-1 rounds T1 (ignored by the interleaved strategy).
    pub t1: u64,
    /// Known rank of Θ*.
    pub r: usize,
    /// Known bound on ‖Θ*‖_F.
    pub s_f: f64,
    /// Known bound on ‖Θ*‖₂.
    pub s_2: f64,
    /// Known lower bound on the r-th singular value of Θ*.
    pub s_r: f64,
    /// Ridge penalty on the leading coordinates.
    pub lambda: f64,
    /// Confidence level for the UCB stage.
    pub delta: f64,
    /// Exploration multiplier.
    pub c: f64,
    /// Leading constant of the condition-scaled γ bound.
    pub c1: f64,
    pub gamma_mode: GammaMode,
    pub completion_method: CompletionMethod,
    /// Optional intermediate penalty on the two mixed coordinate blocks
    /// (complement×estimated and estimated×complement). Off by default; the
    /// confidence-width formula is unchanged when enabled.
    pub lambda_cross: Option<f64>,
}

impl EstrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t < 2 {
            return Err(Error::config("t", "horizon must be at least 2"));
        }
        if self.t1 == 0 || self.t1 >= self.t {
            return Err(Error::config(
                "t1",
                format!("t1 must satisfy 1 <= t1 < t, got t1 = {} with t = {}", self.t1, self.t),
            ));
        }
        if self.r == 0 {
            return Err(Error::config("r", "rank must be at least 1"));
        }
        // The ordering is exact in theory; tolerate last-bit drift between
        // independently computed norms of the same matrix.
        let ord_ok = self.s_r > 0.0
            && self.s_r <= self.s_2 * (1.0 + 1e-9)
            && self.s_2 <= self.s_f * (1.0 + 1e-9);
        if !ord_ok {
            return Err(Error::config(
                "s_r",
                format!(
                    "need 0 < s_r <= s_2 <= s_f, got s_r = {}, s_2 = {}, s_f = {}",
                    self.s_r, self.s_2, self.s_f
                ),
            ));
        }
        for (name, v) in [("lambda", self.lambda), ("c", self.c), ("c1", self.c1)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config("delta", format!("must be in (0,1), got {}", self.delta)));
        }
        if let Some(lc) = self.lambda_cross {
            if !(lc > 0.0) || !lc.is_finite() {
                return Err(Error::config("lambda_cross", format!("must be positive, got {lc}")));
            }
        }
        Ok(())
    }

    /// Head dimension of the rotated space: k = (d1+d2)r − r².
    pub fn head_dim(&self, d1: usize, d2: usize) -> usize {
        let r = self.r.min(d1).min(d2);
        (d1 + d2) * r - r * r
    }
}

/// Near-uniform stage-1 pull schedule over the d1×d2 grid: every cell
/// ⌊T1/(d1·d2)⌋ times, plus one extra pull for T1 mod (d1·d2) distinct cells
/// chosen uniformly, the whole sequence shuffled.
pub fn stage1_schedule(t1: u64, d1: usize, d2: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    assert!(t1 >= 1 && d1 >= 1 && d2 >= 1);
    let cells = d1 * d2;
    let base = (t1 as usize) / cells;
    let rem = (t1 as usize) % cells;
    let mut pairs: Vec<(usize, usize)> = (0..d1).flat_map(|i| (0..d2).map(move |j| (i, j))).collect();
    // Partial Fisher-Yates marks the cells that receive the extra pull.
    for i in 0..rem {
        let j = rng.random_range(i..cells);
        pairs.swap(i, j);
    }
    let mut schedule = Vec::with_capacity(t1 as usize);
    for (ix, &pair) in pairs.iter().enumerate() {
        let count = base + usize::from(ix < rem);
        schedule.extend(std::iter::repeat(pair).take(count));
    }
    for i in (1..schedule.len()).rev() {
        let j = rng.random_range(0..=i);
        schedule.swap(i, j);
    }
    schedule
}

/// Recovers Θ̂ from a completed reward grid: solves
/// `min_Θ ‖X Θ Zᵀ − K̂‖_F` for full-column-rank X (n1×d1) and Z (n2×d2).
/// With square invertible X and Z this is exactly X⁻¹ K̂ Z⁻ᵀ.
pub fn estimate_theta(k_hat: &DenseMatrix, x: &DenseMatrix, z: &DenseMatrix) -> Result<DenseMatrix> {
    if k_hat.rows() != x.rows() || k_hat.cols() != z.rows() {
        return Err(Error::InvalidDimension(format!(
            "grid {}x{} does not match arm stacks {}x? and {}x?",
            k_hat.rows(),
            k_hat.cols(),
            x.rows(),
            z.rows()
        )));
    }
    for (name, m) in [("x", x), ("z", z)] {
        if m.rows() < m.cols() {
            return Err(Error::InvalidDimension(format!(
                "{name} stack is wider than tall: {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let f = linalg::thin_svd(m)?;
        let smin = f.s[m.cols() - 1];
        if smin <= linalg::RANK_RTOL * f.s[0].max(1e-300) || smin <= 1.0e-10 {
            return Err(Error::SingularMatrix(format!(
                "{name} stack is numerically rank deficient"
            )));
        }
    }
    // X M = K̂, then Z Θᵀ = Mᵀ.
    let m = linalg::lstsq_matrix(x, k_hat)?;
    let theta_t = linalg::lstsq_matrix(z, &m.transpose())?;
    let theta = theta_t.transpose();
    if x.rows() == x.cols() && z.rows() == z.cols() {
        let resid = x.matmul(&theta).matmul_nt(z).sub(k_hat).frobenius_norm();
        debug_assert!(
            resid <= 1.0e-8 * k_hat.frobenius_norm().max(1.0),
            "square-system residual {resid} too large"
        );
    }
    Ok(theta)
}

/// Scale of the stage-1 subspace error after T1 exploration rounds; B⊥ is
/// `S₂ · γ`.
pub fn gamma_bound(
    config: &EstrConfig,
    x_sel: &DenseMatrix,
    z_sel: &DenseMatrix,
    sigma: f64,
    d1: usize,
    d2: usize,
) -> Result<f64> {
    let d = d1.max(d2) as f64;
    let r = config.r as f64;
    let base = sigma * sigma * d.powi(3) * r / config.t1 as f64;
    match config.gamma_mode {
        GammaMode::Simplified => Ok(base),
        GammaMode::ConditionScaled => {
            let sx = linalg::min_nonzero_singular(x_sel)?;
            let sz = linalg::min_nonzero_singular(z_sel)?;
            if sx <= 0.0 || sz <= 0.0 {
                return Err(Error::SingularMatrix(
                    "selected arm stack is singular; cannot scale the subspace bound".into(),
                ));
            }
            let cond = 1.0 / (sx * sx * sz * sz * config.s_r * config.s_r);
            let ratio = config.s_2 / config.s_r;
            Ok(cond * config.c1 * config.c1 * ratio.powi(4) * base)
        }
    }
}

/// Estimated singular subspaces of Θ̂ with their orthogonal complements and
/// the error scale γ they were computed under.
#[derive(Debug, Clone)]
pub struct SubspaceEstimate {
    pub u_hat: DenseMatrix,
    pub u_hat_perp: DenseMatrix,
    pub v_hat: DenseMatrix,
    pub v_hat_perp: DenseMatrix,
    pub r: usize,
    pub gamma: f64,
}

impl SubspaceEstimate {
    pub fn from_theta_hat(theta_hat: &DenseMatrix, r: usize, gamma: f64) -> Result<Self> {
        let (d1, d2) = (theta_hat.rows(), theta_hat.cols());
        if r == 0 || r > d1.min(d2) {
            return Err(Error::InvalidRank(format!(
                "subspace rank {r} out of range for {d1}x{d2}"
            )));
        }
        let f = linalg::thin_svd(theta_hat)?;
        let u_hat = columns(&f.u, 0, r);
        let v_hat = columns(&f.v, 0, r);
        let u_hat_perp = if r < d1 {
            linalg::complement_basis(&u_hat)?
        } else {
            DenseMatrix::zeros(d1, 0)
        };
        let v_hat_perp = if r < d2 {
            linalg::complement_basis(&v_hat)?
        } else {
            DenseMatrix::zeros(d2, 0)
        };
        Ok(SubspaceEstimate {
            u_hat,
            u_hat_perp,
            v_hat,
            v_hat_perp,
            r,
            gamma,
        })
    }

    pub fn d1(&self) -> usize {
        self.u_hat.rows()
    }

    pub fn d2(&self) -> usize {
        self.v_hat.rows()
    }

    /// `[Û Û⊥]`, the full left rotation.
    pub fn rotation_left(&self) -> DenseMatrix {
        concat_cols(&self.u_hat, &self.u_hat_perp)
    }

    /// `[V̂ V̂⊥]`, the full right rotation.
    pub fn rotation_right(&self) -> DenseMatrix {
        concat_cols(&self.v_hat, &self.v_hat_perp)
    }
}

fn columns(m: &DenseMatrix, lo: usize, hi: usize) -> DenseMatrix {
    DenseMatrix::from_fn(m.rows(), hi - lo, |i, j| m[(i, lo + j)])
}

fn concat_cols(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    debug_assert_eq!(a.rows(), b.rows());
    DenseMatrix::from_fn(a.rows(), a.cols() + b.cols(), |i, j| {
        if j < a.cols() {
            a[(i, j)]
        } else {
            b[(i, j - a.cols())]
        }
    })
}

/// Rotates both arm coordinates by the estimated bases and lays out the
/// outer product of each (x, z) pair in block order (see module docs). Pair
/// (i, j) lands at index `i * zs.len() + j`.
pub fn rotate_and_vectorize(
    xs: &ArmSet,
    zs: &ArmSet,
    est: &SubspaceEstimate,
) -> Result<Vec<Vec<f64>>> {
    if xs.dim() != est.d1() || zs.dim() != est.d2() {
        return Err(Error::InvalidDimension(format!(
            "arm dims ({}, {}) do not match subspace dims ({}, {})",
            xs.dim(),
            zs.dim(),
            est.d1(),
            est.d2()
        )));
    }
    let xr: Vec<Vec<f64>> = xs.iter().map(|x| rotate_coords(x, &est.u_hat, &est.u_hat_perp)).collect();
    let zr: Vec<Vec<f64>> = zs.iter().map(|z| rotate_coords(z, &est.v_hat, &est.v_hat_perp)).collect();
    let mut out = Vec::with_capacity(xs.len() * zs.len());
    for x in &xr {
        for z in &zr {
            out.push(vectorize_blocks(x, z, est.r));
        }
    }
    Ok(out)
}

fn rotate_coords(v: &[f64], basis: &DenseMatrix, complement: &DenseMatrix) -> Vec<f64> {
    let mut out = basis.matvec_t(v);
    out.extend(complement.matvec_t(v));
    out
}

/// Outer-product vectorization in block order, column-major within blocks.
fn vectorize_blocks(x: &[f64], z: &[f64], r: usize) -> Vec<f64> {
    let d1 = x.len();
    let d2 = z.len();
    let mut out = Vec::with_capacity(d1 * d2);
    for b in 0..r {
        for a in 0..r {
            out.push(x[a] * z[b]);
        }
    }
    for b in 0..r {
        for a in r..d1 {
            out.push(x[a] * z[b]);
        }
    }
    for b in r..d2 {
        for a in 0..r {
            out.push(x[a] * z[b]);
        }
    }
    for b in r..d2 {
        for a in r..d1 {
            out.push(x[a] * z[b]);
        }
    }
    out
}

/// Lays out a rotated parameter matrix `m` (d1×d2, already expressed in the
/// rotated bases) in the same block order as [`rotate_and_vectorize`], so
/// that `⟨vectorized pair, rearranged θ⟩ = xᵀ Θ z`.
pub fn rearranged_theta(m: &DenseMatrix, r: usize) -> Vec<f64> {
    let (d1, d2) = (m.rows(), m.cols());
    let mut out = Vec::with_capacity(d1 * d2);
    for b in 0..r {
        for a in 0..r {
            out.push(m[(a, b)]);
        }
    }
    for b in 0..r {
        for a in r..d1 {
            out.push(m[(a, b)]);
        }
    }
    for b in r..d2 {
        for a in 0..r {
            out.push(m[(a, b)]);
        }
    }
    for b in r..d2 {
        for a in r..d1 {
            out.push(m[(a, b)]);
        }
    }
    out
}

/// Per-refit diagnostics tying the subspace estimate to the ground truth.
#[derive(Debug, Clone)]
pub struct SubspaceDiagnostics {
    pub gamma: f64,
    pub b_perp: f64,
    pub k: usize,
    /// ‖tail of the rotated true parameter‖²; bounded by `tail_bound_rhs`.
    pub tail_norm_sq: f64,
    /// ‖Û⊥ᵀU*‖²_F · ‖Θ*‖₂² · ‖V̂⊥ᵀV*‖²_F.
    pub tail_bound_rhs: f64,
    /// ‖Û⊥ᵀU*‖_F · ‖V̂⊥ᵀV*‖_F; bounded by `wedin_rhs` since the estimate
    /// has no spectral tail.
    pub sin_product: f64,
    /// ‖Θ̂ − Θ*‖²_F / s*_r².
    pub wedin_rhs: f64,
    pub completion_iterations: usize,
    pub completion_converged: bool,
}

/// Everything a run reports besides its regret trace.
#[derive(Debug, Clone)]
pub struct RunDiagnostics {
    pub method: String,
    pub stage1_rounds: u64,
    pub stage1_regret: f64,
    /// 2 · S₂ · (stage-1 rounds): hard cap on stage-1 regret.
    pub stage1_cap: f64,
    pub selection_scores: Option<(f64, f64)>,
    pub subspace: Vec<SubspaceDiagnostics>,
    pub beta_monotone: bool,
    /// Log-det budget 2k·log(1 + horizon/λ) of the final UCB state.
    pub logdet_budget: f64,
    pub logdet_used: f64,
    pub skipped_refits: usize,
}

fn subspace_diagnostics(
    env: &BilinearEnvironment,
    est: &SubspaceEstimate,
    theta_hat: &DenseMatrix,
    b_perp: f64,
    k: usize,
    completion_iterations: usize,
    completion_converged: bool,
) -> Result<SubspaceDiagnostics> {
    // m = [Û Û⊥]ᵀ Θ* [V̂ V̂⊥]
    let m = est.rotation_left().matmul_tn(env.theta()).matmul(&est.rotation_right());
    let theta_rot = rearranged_theta(&m, est.r);
    let tail_norm_sq: f64 = theta_rot[k..].iter().map(|v| v * v).sum();
    let r_star = env.rank();
    let u_star = columns(&env.svd().u, 0, r_star);
    let v_star = columns(&env.svd().v, 0, r_star);
    let sin_product = sin_theta_product(&est.u_hat_perp, &u_star, &est.v_hat_perp, &v_star)?;
    let left = est.u_hat_perp.matmul_tn(&u_star).frobenius_norm();
    let right = est.v_hat_perp.matmul_tn(&v_star).frobenius_norm();
    let s1 = env.spectral_norm();
    let tail_bound_rhs = left * left * s1 * s1 * right * right;
    let err = theta_hat.sub(env.theta()).frobenius_norm();
    let sr = env.min_singular();
    let wedin_rhs = err * err / (sr * sr);
    Ok(SubspaceDiagnostics {
        gamma: est.gamma,
        b_perp,
        k,
        tail_norm_sq,
        tail_bound_rhs,
        sin_product,
        wedin_rhs,
        completion_iterations,
        completion_converged,
    })
}

struct UcbPhase {
    runner: UcbRunner,
    beta_prev: f64,
    beta_monotone: bool,
}

impl UcbPhase {
    fn new(runner: UcbRunner) -> Self {
        let beta_prev = runner.state().beta(runner.config());
        UcbPhase {
            runner,
            beta_prev,
            beta_monotone: true,
        }
    }

    /// Plays one UCB round; returns the flat pair index pulled and the
    /// observed reward.
    fn step(
        &mut self,
        env: &BilinearEnvironment,
        xs: &ArmSet,
        zs: &ArmSet,
        best_value: f64,
        trace: &mut RegretTrace,
        rng: &mut impl Rng,
    ) -> Result<(usize, f64)> {
        let (idx, _) = self.runner.select();
        let (i, j) = (idx / zs.len(), idx % zs.len());
        let x = xs.arm(i);
        let z = zs.arm(j);
        let y = env.sample_reward(x, z, rng);
        self.runner.play(idx, y);
        trace.push(env.instantaneous_regret(best_value, x, z)?);
        let beta = self.runner.state().beta(self.runner.config());
        if beta < self.beta_prev - 1.0e-9 {
            self.beta_monotone = false;
        }
        self.beta_prev = beta;
        Ok((idx, y))
    }
}

/// Two-stage run; see the module docs. Returns the regret trace only.
pub fn run_estr(
    env: &BilinearEnvironment,
    xs: &ArmSet,
    zs: &ArmSet,
    config: &EstrConfig,
    stream: &RunStream,
) -> Result<RegretTrace> {
    run_estr_detailed(env, xs, zs, config, stream).map(|(trace, _)| trace)
}

/// Two-stage run returning the trace plus per-run diagnostics.
pub fn run_estr_detailed(
    env: &BilinearEnvironment,
    xs: &ArmSet,
    zs: &ArmSet,
    config: &EstrConfig,
    stream: &RunStream,
) -> Result<(RegretTrace, RunDiagnostics)> {
    config.validate()?;
    let (d1, d2) = (env.d1(), env.d2());
    if xs.dim() != d1 || zs.dim() != d2 {
        return Err(Error::InvalidDimension(format!(
            "arm dims ({}, {}) do not match environment ({d1}, {d2})",
            xs.dim(),
            zs.dim()
        )));
    }
    if config.r > d1.min(d2) {
        return Err(Error::InvalidRank(format!(
            "rank {} exceeds min({d1}, {d2})",
            config.r
        )));
    }
    let label = match config.completion_method {
        CompletionMethod::BurerMonteiro => "estr-bm",
        CompletionMethod::OptspaceStyle => "estr-os",
    };
    let (_, _, best_value) = env.best_pair(xs, zs)?;
    let mut trace = RegretTrace::with_capacity(label, config.t as usize);

    // Stage 1: explore a well-conditioned grid of pairs.
    let sel_x = select_subset(xs, N_RANDOM_SUBSETS, &mut stream.aux_rng("select-x"))?;
    let sel_z = select_subset(zs, N_RANDOM_SUBSETS, &mut stream.aux_rng("select-z"))?;
    let x_sel = xs.stacked_subset(&sel_x.indices);
    let z_sel = zs.stacked_subset(&sel_z.indices);
    let schedule = stage1_schedule(config.t1, d1, d2, &mut stream.aux_rng("schedule"));
    let mut table = ObservationTable::new(d1, d2)?;
    for (round, &(i, j)) in schedule.iter().enumerate() {
        let x = xs.arm(sel_x.indices[i]);
        let z = zs.arm(sel_z.indices[j]);
        let y = env.sample_reward(x, z, &mut stream.round_rng(round as u64));
        table.record(i, j, y)?;
        trace.push(env.instantaneous_regret(best_value, x, z)?);
    }
    let stage1_regret = trace.final_cumulative();

    // Subspace estimation from the completed grid.
    let (k_tilde, mask) = table.averaged();
    let comp = complete(&k_tilde, &mask, config.r, config.completion_method, &CompletionOptions::default())?;
    let theta_hat = estimate_theta(&comp.k_hat, &x_sel, &z_sel)?;
    let gamma = gamma_bound(config, &x_sel, &z_sel, env.sigma(), d1, d2)?;
    let est = SubspaceEstimate::from_theta_hat(&theta_hat, config.r, gamma)?;

    // Stage 2: rotated UCB with the complement pinned down.
    let p = d1 * d2;
    let k = config.head_dim(d1, d2);
    let t2 = config.t - config.t1;
    let (lambda_perp, b_perp) = if k < p {
        (lambda_perp_default(t2.max(1), k, config.lambda), config.s_2 * gamma)
    } else {
        (config.lambda, config.s_f)
    };
    let locfg = LowOfulConfig {
        p,
        k,
        lambda: config.lambda,
        lambda_perp,
        b: config.s_f,
        b_perp,
        sigma: env.sigma(),
        delta: config.delta,
        c: config.c,
    };
    let arms_vec = rotate_and_vectorize(xs, zs, &est)?;
    let runner = match config.lambda_cross {
        Some(lc) if k < p => {
            let mut penalties = vec![config.lambda; p];
            let r = est.r;
            for v in penalties.iter_mut().take(k).skip(r * r) {
                *v = lc;
            }
            for v in penalties.iter_mut().skip(k) {
                *v = lambda_perp;
            }
            UcbRunner::with_penalties(locfg, penalties, &arms_vec)?
        }
        _ => UcbRunner::new(locfg, &arms_vec)?,
    };
    let mut phase = UcbPhase::new(runner);
    for round in 0..t2 {
        let mut rng = stream.round_rng(config.t1 + round);
        phase.step(env, xs, zs, best_value, &mut trace, &mut rng)?;
    }

    let sub = subspace_diagnostics(env, &est, &theta_hat, b_perp, k, comp.iterations, comp.converged)?;
    let state = phase.runner.state();
    let diagnostics = RunDiagnostics {
        method: label.to_string(),
        stage1_rounds: config.t1,
        stage1_regret,
        stage1_cap: 2.0 * config.s_2 * config.t1 as f64,
        selection_scores: Some((sel_x.score, sel_z.score)),
        subspace: vec![sub],
        beta_monotone: phase.beta_monotone,
        logdet_budget: 2.0 * k as f64 * (1.0 + t2 as f64 / config.lambda).ln(),
        logdet_used: state.logdet_v() - state.logdet_lambda(),
        skipped_refits: 0,
    };
    Ok((trace, diagnostics))
}

fn plain_vectorized_arms(xs: &ArmSet, zs: &ArmSet) -> Vec<Vec<f64>> {
    let d1 = xs.dim();
    let mut out = Vec::with_capacity(xs.len() * zs.len());
    for x in xs.iter() {
        for z in zs.iter() {
            // Column-major vec(x zᵀ).
            let mut v = Vec::with_capacity(d1 * z.len());
            for zb in z {
                for xa in x {
                    v.push(xa * zb);
                }
            }
            out.push(v);
        }
    }
    out
}

/// Dimension-agnostic baseline: plain optimistic linear bandit over the
/// unrotated vectorized pairs, uniform penalty λ, for all T rounds.
pub fn run_oful_baseline(
    env: &BilinearEnvironment,
    xs: &ArmSet,
    zs: &ArmSet,
    config: &EstrConfig,
    stream: &RunStream,
) -> Result<RegretTrace> {
    run_oful_baseline_detailed(env, xs, zs, config, stream).map(|(trace, _)| trace)
}

pub fn run_oful_baseline_detailed(
    env: &BilinearEnvironment,
    xs: &ArmSet,
    zs: &ArmSet,
    config: &EstrConfig,
    stream: &RunStream,
) -> Result<(RegretTrace, RunDiagnostics)> {
    config.validate()?;
    let (d1, d2) = (env.d1(), env.d2());
    if xs.dim() != d1 || zs.dim() != d2 {
        return Err(Error::InvalidDimension(
            "arm dims do not match environment".into(),
        ));
    }
    let p = d1 * d2;
    let (_, _, best_value) = env.best_pair(xs, zs)?;
    let locfg = LowOfulConfig {
        p,
        k: p,
        lambda: config.lambda,
        lambda_perp: config.lambda,
        b: config.s_f,
        b_perp: config.s_f,
        sigma: env.sigma(),
        delta: config.delta,
        c: config.c,
    };
    let runner = UcbRunner::new(locfg, &plain_vectorized_arms(xs, zs))?;
    let mut trace = RegretTrace::with_capacity("oful", config.t as usize);
    let mut phase = UcbPhase::new(runner);
    for round in 0..config.t {
        let mut rng = stream.round_rng(round);
        phase.step(env, xs, zs, best_value, &mut trace, &mut rng)?;
    }
    let state = phase.runner.state();
    let diagnostics = RunDiagnostics {
        method: "oful".to_string(),
        stage1_rounds: 0,
        stage1_regret: 0.0,
        stage1_cap: 0.0,
        selection_scores: None,
        subspace: Vec::new(),
        beta_monotone: phase.beta_monotone,
        logdet_budget: 2.0 * p as f64 * (1.0 + config.t as f64 / config.lambda).ln(),
        logdet_used: state.logdet_v() - state.logdet_lambda(),
        skipped_refits: 0,
    };
    Ok((trace, diagnostics))
}

/// Refit rounds for the interleaved strategy: round(10^(m/2)) for m ≥ 1,
/// deduplicated, capped at the horizon.
pub fn isse_knots(horizon: u64) -> Vec<u64> {
    let mut knots = Vec::new();
    for m in 1.. {
        let v = 10f64.powf(m as f64 / 2.0).round() as u64;
        if v > horizon {
            break;
        }
        if knots.last() != Some(&v) {
            knots.push(v);
        }
    }
    knots
}

/// Interleaved subspace estimation: UCB from round one, with the rotation
/// re-estimated from all past observations at a geometric schedule of
/// rounds. Each refit replays the full history into the freshly rotated
/// state; a refit whose completion or solve fails is skipped, keeping the
/// previous rotation.
pub fn run_isse(
    env: &BilinearEnvironment,
    xs: &ArmSet,
    zs: &ArmSet,
    config: &EstrConfig,
    stream: &RunStream,
) -> Result<RegretTrace> {
    run_isse_detailed(env, xs, zs, config, stream).map(|(trace, _)| trace)
}

pub fn run_isse_detailed(
    env: &BilinearEnvironment,
    xs: &ArmSet,
    zs: &ArmSet,
    config: &EstrConfig,
    stream: &RunStream,
) -> Result<(RegretTrace, RunDiagnostics)> {
    config.validate()?;
    let (d1, d2) = (env.d1(), env.d2());
    if xs.dim() != d1 || zs.dim() != d2 {
        return Err(Error::InvalidDimension(
            "arm dims do not match environment".into(),
        ));
    }
    if config.r > d1.min(d2) {
        return Err(Error::InvalidRank(format!(
            "rank {} exceeds min({d1}, {d2})",
            config.r
        )));
    }
    let p = d1 * d2;
    let (_, _, best_value) = env.best_pair(xs, zs)?;
    let plain_cfg = LowOfulConfig {
        p,
        k: p,
        lambda: config.lambda,
        lambda_perp: config.lambda,
        b: config.s_f,
        b_perp: config.s_f,
        sigma: env.sigma(),
        delta: config.delta,
        c: config.c,
    };
    let plain_arms = plain_vectorized_arms(xs, zs);
    let mut phase = UcbPhase::new(UcbRunner::new(plain_cfg, &plain_arms)?);

    let mut table = ObservationTable::new(xs.len(), zs.len())?;
    let mut history: Vec<(usize, f64)> = Vec::with_capacity(config.t as usize);
    let knots = isse_knots(config.t);
    let mut next_knot = 0usize;
    let mut trace = RegretTrace::with_capacity("isse", config.t as usize);
    let mut subspace = Vec::new();
    let mut skipped_refits = 0usize;
    // β resets at every refit; monotonicity is tracked per segment and
    // AND-ed across them.
    let mut beta_monotone = true;
    let x_all = xs.stacked();
    let z_all = zs.stacked();
    let k_head = config.head_dim(d1, d2);

    for round in 0..config.t {
        // Refits happen at the start of their round, before the pull.
        if next_knot < knots.len() && round + 1 == knots[next_knot] {
            let knot = knots[next_knot];
            next_knot += 1;
            if table.total() > 0 {
                match refit(
                    env, config, &table, &x_all, &z_all, xs, zs, knot, k_head, p, &history,
                ) {
                    Ok((runner, diag)) => {
                        subspace.push(diag);
                        beta_monotone &= phase.beta_monotone;
                        phase = UcbPhase::new(runner);
                    }
                    Err(_) => skipped_refits += 1,
                }
            } else {
                skipped_refits += 1;
            }
        }
        let mut rng = stream.round_rng(round);
        let (idx, y) = phase.step(env, xs, zs, best_value, &mut trace, &mut rng)?;
        table.record(idx / zs.len(), idx % zs.len(), y)?;
        history.push((idx, y));
    }

    beta_monotone &= phase.beta_monotone;
    let state = phase.runner.state();
    let final_k = phase.runner.config().k;
    let diagnostics = RunDiagnostics {
        method: "isse".to_string(),
        stage1_rounds: 0,
        stage1_regret: 0.0,
        stage1_cap: 0.0,
        selection_scores: None,
        subspace,
        beta_monotone,
        logdet_budget: 2.0 * final_k as f64 * (1.0 + config.t as f64 / config.lambda).ln(),
        logdet_used: state.logdet_v() - state.logdet_lambda(),
        skipped_refits,
    };
    Ok((trace, diagnostics))
}

#[allow(clippy::too_many_arguments)]
fn refit(
    env: &BilinearEnvironment,
    config: &EstrConfig,
    table: &ObservationTable,
    x_all: &DenseMatrix,
    z_all: &DenseMatrix,
    xs: &ArmSet,
    zs: &ArmSet,
    knot: u64,
    k_head: usize,
    p: usize,
    history: &[(usize, f64)],
) -> Result<(UcbRunner, SubspaceDiagnostics)> {
    let (k_tilde, mask) = table.averaged();
    let comp = complete(
        &k_tilde,
        &mask,
        config.r,
        CompletionMethod::BurerMonteiro,
        &CompletionOptions::default(),
    )?;
    let theta_hat = estimate_theta(&comp.k_hat, x_all, z_all)?;
    let d = env.d1().max(env.d2()) as f64;
    let gamma = env.sigma() * env.sigma() * d.powi(3) * config.r as f64 / knot as f64;
    let est = SubspaceEstimate::from_theta_hat(&theta_hat, config.r, gamma)?;
    let (lambda_perp, b_perp) = if k_head < p {
        (
            lambda_perp_default(config.t, k_head, config.lambda),
            config.s_2 * gamma,
        )
    } else {
        (config.lambda, config.s_f)
    };
    let locfg = LowOfulConfig {
        p,
        k: k_head,
        lambda: config.lambda,
        lambda_perp,
        b: config.s_f,
        b_perp,
        sigma: env.sigma(),
        delta: config.delta,
        c: config.c,
    };
    let arms_vec = rotate_and_vectorize(xs, zs, &est)?;
    let mut runner = UcbRunner::new(locfg, &arms_vec)?;
    for &(idx, y) in history {
        runner.replay(idx, y);
    }
    runner.finish_replay();
    let diag = subspace_diagnostics(env, &est, &theta_hat, b_perp, k_head, comp.iterations, comp.converged)?;
    Ok((runner, diag))
}
