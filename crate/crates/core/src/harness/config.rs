//! Experiment configuration: JSON in, fully-defaulted struct out.

use crate::env::NoiseKind;
use crate::error::{Error, Result};
use crate::estr::GammaMode;

/// Strategies the harness can run and compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Optimistic linear bandit over unrotated vectorized pairs.
    Oful,
    /// Two-stage strategy with spectral-init completion and trimming.
    EstrOs,
    /// Two-stage strategy with factored alternating least squares.
    EstrBm,
    /// Interleaved subspace estimation with refits at geometric rounds.
    Isse,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Oful => "oful",
            Method::EstrOs => "estr-os",
            Method::EstrBm => "estr-bm",
            Method::Isse => "isse",
        }
    }

    /// Whether the stage-1 length is a tunable hyperparameter.
    pub fn uses_t1(self) -> bool {
        matches!(self, Method::EstrOs | Method::EstrBm)
    }

    pub fn all() -> [Method; 4] {
        [Method::Oful, Method::EstrOs, Method::EstrBm, Method::Isse]
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::all()
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| Error::config("methods", format!("unknown method {s:?}")))
    }
}

/// Full description of one experiment. Every field has a default, so an
/// empty JSON object (or empty file) runs the standard comparison.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d1: usize,
    pub d2: usize,
    pub r: usize,
    pub sigma: f64,
    pub noise: NoiseKind,
    /// ‖Θ*‖_F of each sampled instance.
    pub theta_frobenius: f64,
    pub n_left_arms: usize,
    pub n_right_arms: usize,
    pub t: u64,
    /// Repetitions of the winning hyperparameter point.
    pub reps: u64,
    /// Repetitions per grid point during tuning.
    pub tune_reps: u64,
    pub lambda: f64,
    pub delta: f64,
    pub c1: f64,
    pub gamma_mode: GammaMode,
    pub lambda_cross: Option<f64>,
    /// Exploration-multiplier grid, tuned for every method.
    pub c_grid: Vec<f64>,
    /// Stage-1-length grid, tuned for the two-stage methods. Empty means
    /// the single heuristic point √(t·r)·max(d1,d2)^{3/2}.
    pub t1_grid: Vec<u64>,
    pub methods: Vec<Method>,
    pub seed: u64,
    /// After round 100, only rounds divisible by this stride are logged.
    pub log_stride: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            d1: 8,
            d2: 8,
            r: 1,
            sigma: 0.01,
            noise: NoiseKind::Gaussian,
            theta_frobenius: 1.0,
            n_left_arms: 16,
            n_right_arms: 16,
            t: 10_000,
            reps: 60,
            tune_reps: 4,
            lambda: 1.0,
            delta: 0.01,
            c1: 1.0,
            gamma_mode: GammaMode::Simplified,
            lambda_cross: None,
            c_grid: vec![0.01, 0.05, 0.1, 0.5, 1.0],
            t1_grid: vec![256, 512, 1024, 2048, 4096],
            methods: vec![Method::Oful, Method::EstrOs, Method::EstrBm, Method::Isse],
            seed: 42,
            log_stride: 10,
        }
    }
}

impl ExperimentConfig {
    /// Parses a JSON config; an empty or whitespace-only string yields the
    /// defaults. Unknown keys are rejected.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = if text.trim().is_empty() {
            ExperimentConfig::default()
        } else {
            serde_json::from_str(text)
                .map_err(|e| Error::config("json", format!("cannot parse config: {e}")))?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.d1 == 0 || self.d2 == 0 {
            return Err(Error::config("d1", "arm dimensions must be positive"));
        }
        if self.r == 0 || self.r > self.d1.min(self.d2) {
            return Err(Error::config(
                "r",
                format!("rank must be in 1..=min(d1, d2), got {}", self.r),
            ));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::config("sigma", "noise scale must be finite and >= 0"));
        }
        if !(self.theta_frobenius > 0.0) || !self.theta_frobenius.is_finite() {
            return Err(Error::config("theta_frobenius", "must be finite and positive"));
        }
        if self.n_left_arms < self.d1 || self.n_right_arms < self.d2 {
            return Err(Error::config(
                "n_left_arms",
                "need at least as many arms per side as the dimension",
            ));
        }
        if self.t < 2 {
            return Err(Error::config("t", "horizon must be at least 2"));
        }
        if self.reps == 0 {
            return Err(Error::config("reps", "need at least one repetition"));
        }
        if self.tune_reps == 0 || self.tune_reps > self.reps {
            return Err(Error::config(
                "tune_reps",
                format!("must be in 1..=reps, got {}", self.tune_reps),
            ));
        }
        for (name, v) in [("lambda", self.lambda), ("c1", self.c1)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config("delta", format!("must be in (0,1), got {}", self.delta)));
        }
        if let Some(lc) = self.lambda_cross {
            if !(lc > 0.0) || !lc.is_finite() {
                return Err(Error::config("lambda_cross", "must be positive when set"));
            }
        }
        if self.c_grid.is_empty() {
            return Err(Error::config("c_grid", "must not be empty"));
        }
        for &c in &self.c_grid {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::config("c_grid", format!("entries must be positive, got {c}")));
            }
        }
        // The stage-1 grid only matters when a two-stage method runs.
        if self.methods.iter().any(|m| m.uses_t1()) {
            for &t1 in &self.t1_grid {
                if t1 == 0 || t1 >= self.t {
                    return Err(Error::config(
                        "t1_grid",
                        format!("entries must be in 1..t, got {t1} with t = {}", self.t),
                    ));
                }
            }
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods", "must not be empty"));
        }
        let mut seen = std::collections::HashSet::new();
        for &m in &self.methods {
            if !seen.insert(m) {
                return Err(Error::config("methods", format!("{m} listed twice")));
            }
        }
        if self.log_stride == 0 {
            return Err(Error::config("log_stride", "must be positive"));
        }
        Ok(())
    }

    /// Heuristic stage-1 length: √(t·r)·max(d1, d2)^{3/2}, clamped to the
    /// feasible range [d1·d2, t−1].
    pub fn default_t1(&self) -> u64 {
        let d = self.d1.max(self.d2) as f64;
        let v = ((self.t as f64 * self.r as f64).sqrt() * d.powf(1.5)).round() as u64;
        v.clamp((self.d1 * self.d2) as u64, (self.t - 1).max(1))
    }
}
