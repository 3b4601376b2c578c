//! Simulated bilinear reward model and arm-set plumbing.
//!
//! Rewards follow `y = xᵀ Θ* z + η` where Θ* is a fixed low-rank matrix and
//! η is zero-mean noise with scale σ. Arms live on or inside the unit ball,
//! which keeps rewards bounded by `‖Θ*‖₂` and makes the confidence-width
//! algebra of the bandit modules valid without extra scaling.

use rand::Rng;
use rand_distr::Distribution;

use crate::error::{Error, Result};
use crate::linalg::{self, norm2, DenseMatrix, SvdFactors, RANK_RTOL};

const ARM_NORM_SLACK: f64 = 1.0e-12;

/// A finite set of arms in ℝᵈ, each with Euclidean norm at most 1, jointly
/// spanning ℝᵈ.
#[derive(Debug, Clone)]
pub struct ArmSet {
    dim: usize,
    arms: Vec<Vec<f64>>,
}

impl ArmSet {
    pub fn new(arms: Vec<Vec<f64>>) -> Result<Self> {
        if arms.is_empty() {
            return Err(Error::InvalidInput("arm set is empty".into()));
        }
        let dim = arms[0].len();
        if dim == 0 {
            return Err(Error::InvalidDimension("arms must have dimension >= 1".into()));
        }
        for (i, arm) in arms.iter().enumerate() {
            if arm.len() != dim {
                return Err(Error::InvalidDimension(format!(
                    "arm {i} has dimension {}, expected {dim}",
                    arm.len()
                )));
            }
            if !arm.iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidInput(format!("arm {i} has non-finite entries")));
            }
            let n = norm2(arm);
            if n > 1.0 + ARM_NORM_SLACK {
                return Err(Error::InvalidInput(format!(
                    "arm {i} has norm {n} > 1"
                )));
            }
        }
        if arms.len() < dim {
            return Err(Error::InvalidInput(format!(
                "{} arms cannot span dimension {dim}",
                arms.len()
            )));
        }
        let set = ArmSet { dim, arms };
        let stacked = set.stacked();
        let f = linalg::thin_svd(&stacked)?;
        if f.s[0] <= 0.0 || f.s[dim - 1] <= RANK_RTOL * f.s[0] {
            return Err(Error::InvalidInput(
                "arms do not span the ambient space".into(),
            ));
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn arm(&self, i: usize) -> &[f64] {
        &self.arms[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.arms.iter().map(|a| a.as_slice())
    }

    /// Arms stacked as rows, one n×d matrix.
    pub fn stacked(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.arms.len(), self.dim, |i, j| self.arms[i][j])
    }

    /// Stacks the selected arms (by index, in the given order) as rows.
    pub fn stacked_subset(&self, indices: &[usize]) -> DenseMatrix {
        DenseMatrix::from_fn(indices.len(), self.dim, |i, j| self.arms[indices[i]][j])
    }
}

/// Reward noise family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    Rademacher,
}

/// The simulated environment: a hidden low-rank Θ*, a noise scale, and the
/// derived spectral quantities the algorithms treat as known constants.
#[derive(Debug, Clone)]
pub struct BilinearEnvironment {
    theta: DenseMatrix,
    sigma: f64,
    noise: NoiseKind,
    svd: SvdFactors,
    rank: usize,
}

impl BilinearEnvironment {
    pub fn new(theta: DenseMatrix, sigma: f64, noise: NoiseKind) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::InvalidInput("theta has non-finite entries".into()));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidInput(format!("sigma must be >= 0, got {sigma}")));
        }
        let svd = linalg::thin_svd(&theta)?;
        let smax = svd.s[0];
        if smax <= 0.0 {
            return Err(Error::InvalidInput("theta must be nonzero".into()));
        }
        let rank = svd.s.iter().filter(|&&s| s > RANK_RTOL * smax).count();
        Ok(BilinearEnvironment {
            theta,
            sigma,
            noise,
            svd,
            rank,
        })
    }

    pub fn d1(&self) -> usize {
        self.theta.rows()
    }

    pub fn d2(&self) -> usize {
        self.theta.cols()
    }

    pub fn theta(&self) -> &DenseMatrix {
        &self.theta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn noise_kind(&self) -> NoiseKind {
        self.noise
    }

    pub fn svd(&self) -> &SvdFactors {
        &self.svd
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Largest singular value of Θ*.
    pub fn spectral_norm(&self) -> f64 {
        self.svd.s[0]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.theta.frobenius_norm()
    }

    /// Smallest nonzero singular value of Θ*.
    pub fn min_singular(&self) -> f64 {
        self.svd.s[self.rank - 1]
    }

    pub fn mean_reward(&self, x: &[f64], z: &[f64]) -> f64 {
        let tz = self.theta.matvec(z);
        linalg::dot(x, &tz)
    }

    pub fn sample_reward(&self, x: &[f64], z: &[f64], rng: &mut impl Rng) -> f64 {
        let mean = self.mean_reward(x, z);
        if self.sigma == 0.0 {
            return mean;
        }
        let eta = match self.noise {
            NoiseKind::Gaussian => {
                let n: f64 = rand_distr::StandardNormal.sample(rng);
                self.sigma * n
            }
            NoiseKind::Rademacher => {
                if rng.random::<bool>() {
                    self.sigma
                } else {
                    -self.sigma
                }
            }
        };
        mean + eta
    }

    /// Highest-mean pair of arms; ties break toward the lexicographically
    /// smallest (i, j).
    pub fn best_pair(&self, xs: &ArmSet, zs: &ArmSet) -> Result<(usize, usize, f64)> {
        if xs.dim() != self.d1() || zs.dim() != self.d2() {
            return Err(Error::InvalidDimension(format!(
                "arm dims ({}, {}) do not match theta {}x{}",
                xs.dim(),
                zs.dim(),
                self.d1(),
                self.d2()
            )));
        }
        let mut best = (0usize, 0usize, f64::NEG_INFINITY);
        for i in 0..xs.len() {
            let tx = self.theta.matvec_t(xs.arm(i));
            for j in 0..zs.len() {
                let v = linalg::dot(&tx, zs.arm(j));
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        Ok(best)
    }

    /// Gap between the best mean and the played pair's mean. Tiny negative
    /// values (floating-point noise when the played pair is optimal) clamp
    /// to 0; values below −1e-9 indicate `best_value` was not a maximum and
    /// are an error.
    pub fn instantaneous_regret(&self, best_value: f64, x: &[f64], z: &[f64]) -> Result<f64> {
        let reg = best_value - self.mean_reward(x, z);
        if reg < -1.0e-9 {
            return Err(Error::InvalidInput(format!(
                "regret {reg} is negative beyond tolerance; best_value is not the maximum"
            )));
        }
        Ok(reg.max(0.0))
    }
}

/// Per-run regret bookkeeping: instantaneous values and their prefix sums.
#[derive(Debug, Clone)]
pub struct RegretTrace {
    method: String,
    instantaneous: Vec<f64>,
    cumulative: Vec<f64>,
}

impl RegretTrace {
    pub fn new(method: impl Into<String>) -> Self {
        RegretTrace {
            method: method.into(),
            instantaneous: Vec::new(),
            cumulative: Vec::new(),
        }
    }

    pub fn with_capacity(method: impl Into<String>, cap: usize) -> Self {
        RegretTrace {
            method: method.into(),
            instantaneous: Vec::with_capacity(cap),
            cumulative: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, inst: f64) {
        let prev = self.cumulative.last().copied().unwrap_or(0.0);
        self.instantaneous.push(inst);
        self.cumulative.push(prev + inst);
    }

    pub fn method(&self) -> &str {
        &self.method
    }

    pub fn len(&self) -> usize {
        self.instantaneous.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instantaneous.is_empty()
    }

    pub fn instantaneous(&self) -> &[f64] {
        &self.instantaneous
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn final_cumulative(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Draws `n` arms uniformly from the unit sphere in ℝᵈ, retrying (up to 100
/// times) until they span the space.
pub fn generate_sphere_arms(n: usize, d: usize, rng: &mut impl Rng) -> Result<ArmSet> {
    if d == 0 {
        return Err(Error::InvalidDimension("dimension must be >= 1".into()));
    }
    if n < d {
        return Err(Error::InvalidInput(format!(
            "{n} arms cannot span dimension {d}"
        )));
    }
    for _ in 0..100 {
        let mut arms = Vec::with_capacity(n);
        for _ in 0..n {
            let mut v: Vec<f64>;
            loop {
                v = (0..d)
                    .map(|_| rand_distr::StandardNormal.sample(rng))
                    .collect();
                let nv = norm2(&v);
                if nv > 1.0e-12 {
                    for x in v.iter_mut() {
                        *x /= nv;
                    }
                    break;
                }
            }
            arms.push(v);
        }
        match ArmSet::new(arms) {
            Ok(set) => return Ok(set),
            Err(_) => continue,
        }
    }
    Err(Error::DegenerateArmSet(
        "could not draw a spanning arm set in 100 attempts".into(),
    ))
}

/// Draws a d1×d2 matrix of rank exactly `r` with Frobenius norm
/// `frobenius_norm`: random orthonormal factors and singular values uniform
/// in [0.5, 1] before rescaling, so the condition number stays at most 2.
pub fn make_low_rank_theta(
    d1: usize,
    d2: usize,
    r: usize,
    frobenius_norm: f64,
    rng: &mut impl Rng,
) -> Result<DenseMatrix> {
    if r == 0 || r > d1.min(d2) {
        return Err(Error::InvalidRank(format!(
            "rank {r} out of range for {d1}x{d2}"
        )));
    }
    if !(frobenius_norm > 0.0) || !frobenius_norm.is_finite() {
        return Err(Error::InvalidInput(format!(
            "frobenius_norm must be positive, got {frobenius_norm}"
        )));
    }
    let u = random_orthonormal(d1, r, rng);
    let v = random_orthonormal(d2, r, rng);
    let mut s: Vec<f64> = (0..r).map(|_| rng.random_range(0.5..1.0)).collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let scale = frobenius_norm / norm2(&s);
    for x in s.iter_mut() {
        *x *= scale;
    }
    let mut us = u;
    for i in 0..d1 {
        for j in 0..r {
            us[(i, j)] *= s[j];
        }
    }
    Ok(us.matmul_nt(&v))
}

fn random_orthonormal(d: usize, r: usize, rng: &mut impl Rng) -> DenseMatrix {
    let g = DenseMatrix::from_fn(d, r, |_, _| rand_distr::StandardNormal.sample(rng));
    let f = linalg::householder_qr(&g);
    DenseMatrix::from_fn(d, r, |i, j| f.q[(i, j)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn simple_env() -> BilinearEnvironment {
        let theta = DenseMatrix::from_rows(&[vec![0.8, 0.0], vec![0.0, 0.2]]).unwrap();
        BilinearEnvironment::new(theta, 0.0, NoiseKind::Gaussian).unwrap()
    }

    #[test]
    fn arm_set_validates_inputs() {
        assert!(ArmSet::new(vec![]).is_err());
        assert!(ArmSet::new(vec![vec![1.0, 0.0], vec![0.0]]).is_err());
        assert!(ArmSet::new(vec![vec![2.0, 0.0], vec![0.0, 1.0]]).is_err());
        assert!(ArmSet::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]]).is_err());
        assert!(ArmSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).is_ok());
    }

    #[test]
    fn best_pair_is_lexicographic_on_ties() {
        let env = simple_env();
        // Duplicate optimal arms force a tie; the first indices must win.
        let xs = ArmSet::new(vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let zs = ArmSet::new(vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let (i, j, v) = env.best_pair(&xs, &zs).unwrap();
        assert_eq!((i, j), (0, 0));
        assert_abs_diff_eq!(v, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn regret_clamps_fp_noise_and_rejects_real_negatives() {
        let env = simple_env();
        let x = [1.0, 0.0];
        let z = [1.0, 0.0];
        assert_eq!(env.instantaneous_regret(0.8 - 1.0e-13, &x, &z).unwrap(), 0.0);
        let r = env.instantaneous_regret(0.8, &[0.0, 1.0], &[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(r, 0.6, epsilon = 1e-12);
        assert!(env.instantaneous_regret(0.5, &x, &z).is_err());
    }

    #[test]
    fn regret_trace_accumulates() {
        let mut t = RegretTrace::new("demo");
        t.push(1.0);
        t.push(0.25);
        t.push(0.0);
        assert_eq!(t.cumulative(), &[1.0, 1.25, 1.25]);
        assert_eq!(t.final_cumulative(), 1.25);
        assert_eq!(t.len(), 3);
    }

    #[test]
    fn sigma_zero_rewards_are_exact() {
        let env = simple_env();
        let mut rng = derive_stream(1, "test", &[0]);
        let y = env.sample_reward(&[1.0, 0.0], &[1.0, 0.0], &mut rng);
        assert_eq!(y, 0.8);
    }

    #[test]
    fn rademacher_noise_is_two_valued() {
        let theta = DenseMatrix::from_rows(&[vec![0.5]]).unwrap();
        let env = BilinearEnvironment::new(theta, 0.1, NoiseKind::Rademacher).unwrap();
        let mut rng = derive_stream(2, "test", &[0]);
        for _ in 0..64 {
            let y = env.sample_reward(&[1.0], &[1.0], &mut rng);
            assert!((y - 0.6).abs() < 1e-15 || (y - 0.4).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_noise_has_the_right_scale() {
        let theta = DenseMatrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.3]]).unwrap();
        let env = BilinearEnvironment::new(theta, 0.5, NoiseKind::Gaussian).unwrap();
        let mut rng = derive_stream(3, "test", &[0]);
        let n = 4000;
        let samples: Vec<f64> = (0..n)
            .map(|_| env.sample_reward(&[1.0, 0.0], &[1.0, 0.0], &mut rng))
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4.0 * 0.5 / (n as f64).sqrt());
        assert!((var.sqrt() - 0.5).abs() < 0.05);
    }

    #[test]
    fn sphere_arms_are_unit_norm_and_deterministic() {
        let mut rng = derive_stream(7, "arms", &[0]);
        let set = generate_sphere_arms(12, 5, &mut rng).unwrap();
        assert_eq!(set.len(), 12);
        for arm in set.iter() {
            assert_abs_diff_eq!(norm2(arm), 1.0, epsilon = 1e-12);
        }
        let mut rng2 = derive_stream(7, "arms", &[0]);
        let set2 = generate_sphere_arms(12, 5, &mut rng2).unwrap();
        for i in 0..set.len() {
            assert_eq!(set.arm(i), set2.arm(i));
        }
    }

    #[test]
    fn sphere_arms_need_enough_arms() {
        let mut rng = derive_stream(7, "arms", &[1]);
        assert!(generate_sphere_arms(3, 5, &mut rng).is_err());
    }

    #[test]
    fn low_rank_theta_has_exact_rank_and_norm() {
        let mut rng = derive_stream(9, "theta", &[0]);
        let theta = make_low_rank_theta(6, 4, 2, 1.0, &mut rng).unwrap();
        assert_abs_diff_eq!(theta.frobenius_norm(), 1.0, epsilon = 1e-9);
        let f = crate::linalg::thin_svd(&theta).unwrap();
        assert!(f.s[1] > RANK_RTOL * f.s[0]);
        assert!(f.s[2] <= RANK_RTOL * f.s[0]);
        // Condition number of the nonzero part stays at most 2 by design.
        assert!(f.s[0] / f.s[1] <= 2.0 + 1e-9);
    }

    #[test]
    fn low_rank_theta_validates() {
        let mut rng = derive_stream(9, "theta", &[1]);
        assert!(make_low_rank_theta(4, 4, 0, 1.0, &mut rng).is_err());
        assert!(make_low_rank_theta(4, 4, 5, 1.0, &mut rng).is_err());
        assert!(make_low_rank_theta(4, 4, 2, 0.0, &mut rng).is_err());
    }

    #[test]
    fn environment_rejects_zero_theta() {
        let theta = DenseMatrix::zeros(3, 3);
        assert!(BilinearEnvironment::new(theta, 0.1, NoiseKind::Gaussian).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn mean_reward_is_bounded_by_spectral_norm(
            entries in prop::collection::vec(-2.0f64..2.0, 12),
            xe in prop::collection::vec(-1.0f64..1.0, 3),
            ze in prop::collection::vec(-1.0f64..1.0, 4),
        ) {
            let theta = DenseMatrix::from_fn(3, 4, |i, j| entries[i * 4 + j]);
            prop_assume!(theta.frobenius_norm() > 1e-6);
            let env = BilinearEnvironment::new(theta, 0.0, NoiseKind::Gaussian).unwrap();
            let nx = norm2(&xe).max(1e-9);
            let nz = norm2(&ze).max(1e-9);
            let x: Vec<f64> = xe.iter().map(|v| v / nx).collect();
            let z: Vec<f64> = ze.iter().map(|v| v / nz).collect();
            let m = env.mean_reward(&x, &z);
            prop_assert!(m.abs() <= env.spectral_norm() * (1.0 + 1e-9));
        }

        #[test]
        fn regret_trace_cumulative_is_monotone(vals in prop::collection::vec(0.0f64..3.0, 1..40)) {
            let mut t = RegretTrace::new("demo");
            for v in &vals {
                t.push(*v);
            }
            for w in t.cumulative().windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
            prop_assert_eq!(t.len(), vals.len());
        }
    }
}
