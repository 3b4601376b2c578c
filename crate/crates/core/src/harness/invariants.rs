//! Randomized replay of the guarantees the algorithms are built on.
//!
//! Each instance samples a small random problem, runs one strategy with
//! full diagnostics, and checks every analytical statement the run exposes:
//! the rotated true parameter's tail against its subspace bound, the
//! sin-theta product against the perturbation bound, stage-1 regret against
//! its cap, the design-matrix log-determinant against its budget, and the
//! monotonicity of the confidence radius. Violations come back as strings
//! naming the instance and the failed statement.

use rand::Rng;
use rayon::prelude::*;

use super::Method;
use crate::completion::CompletionMethod;
use crate::env::{generate_sphere_arms, make_low_rank_theta, BilinearEnvironment, NoiseKind, RegretTrace};
use crate::error::Result;
use crate::estr::{
    run_estr_detailed, run_isse_detailed, run_oful_baseline_detailed, EstrConfig, GammaMode,
    RunDiagnostics,
};
use crate::rng::{derive_stream, RunStream};

const TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct InvariantReport {
    pub instances: usize,
    pub checks_run: usize,
    pub violations: Vec<String>,
}

impl InvariantReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

struct InstanceOutcome {
    checks: usize,
    violations: Vec<String>,
}

/// Runs `n_instances` randomized small problems and checks every exposed
/// guarantee. Deterministic in `seed`.
pub fn run_invariant_checks(seed: u64, n_instances: usize) -> InvariantReport {
    let outcomes: Vec<InstanceOutcome> = (0..n_instances)
        .into_par_iter()
        .map(|i| check_instance(seed, i))
        .collect();
    let mut report = InvariantReport {
        instances: n_instances,
        checks_run: 0,
        violations: Vec::new(),
    };
    for outcome in outcomes {
        report.checks_run += outcome.checks;
        report.violations.extend(outcome.violations);
    }
    report
}

fn check_instance(seed: u64, i: usize) -> InstanceOutcome {
    match run_instance(seed, i) {
        Ok((t, trace, diag)) => {
            let mut c = Checker::new(i);
            c.check_trace(t, &trace);
            c.check_diagnostics(&diag);
            InstanceOutcome {
                checks: c.checks,
                violations: c.violations,
            }
        }
        Err(e) => InstanceOutcome {
            checks: 1,
            violations: vec![format!("instance {i}: run failed: {e}")],
        },
    }
}

fn run_instance(seed: u64, i: usize) -> Result<(u64, RegretTrace, RunDiagnostics)> {
    let mut rng = derive_stream(seed, "invariants", &[i as u64]);
    let d1 = rng.random_range(2..=5usize);
    let d2 = rng.random_range(2..=5usize);
    let r = rng.random_range(1..=d1.min(d2));
    let sigma = rng.random_range(0.005..0.3);
    let n_x = d1 + rng.random_range(1..=4usize);
    let n_z = d2 + rng.random_range(1..=4usize);
    let t = rng.random_range(60..=200u64);
    let t1 = rng.random_range((d1 * d2) as u64..=t / 2);
    let noise = if i % 2 == 0 {
        NoiseKind::Gaussian
    } else {
        NoiseKind::Rademacher
    };
    let method = [Method::EstrBm, Method::EstrOs, Method::Isse, Method::Oful][i % 4];
    let theta = make_low_rank_theta(d1, d2, r, 1.0, &mut rng)?;
    let env = BilinearEnvironment::new(theta, sigma, noise)?;
    let xs = generate_sphere_arms(n_x, d1, &mut rng)?;
    let zs = generate_sphere_arms(n_z, d2, &mut rng)?;
    let config = EstrConfig {
        t,
        t1,
        r,
        s_f: env.frobenius_norm(),
        s_2: env.spectral_norm(),
        s_r: env.min_singular(),
        lambda: 1.0,
        delta: 0.05,
        c: 0.5,
        c1: 1.0,
        gamma_mode: if i % 3 == 0 {
            GammaMode::ConditionScaled
        } else {
            GammaMode::Simplified
        },
        completion_method: match method {
            Method::EstrOs => CompletionMethod::OptspaceStyle,
            _ => CompletionMethod::BurerMonteiro,
        },
        lambda_cross: if i % 5 == 0 { Some(3.0) } else { None },
    };
    let stream = RunStream::new(seed, method.label(), i as u64);
    let (trace, diag) = match method {
        Method::Oful => run_oful_baseline_detailed(&env, &xs, &zs, &config, &stream)?,
        Method::EstrOs | Method::EstrBm => run_estr_detailed(&env, &xs, &zs, &config, &stream)?,
        Method::Isse => run_isse_detailed(&env, &xs, &zs, &config, &stream)?,
    };
    Ok((t, trace, diag))
}

struct Checker {
    instance: usize,
    checks: usize,
    violations: Vec<String>,
}

impl Checker {
    fn new(instance: usize) -> Self {
        Checker {
            instance,
            checks: 0,
            violations: Vec::new(),
        }
    }

    fn claim(&mut self, holds: bool, statement: &str, detail: String) {
        self.checks += 1;
        if !holds {
            self.violations
                .push(format!("instance {}: {statement}: {detail}", self.instance));
        }
    }

    fn check_trace(&mut self, t: u64, trace: &RegretTrace) {
        self.claim(
            trace.len() as u64 == t,
            "trace covers every round",
            format!("len {} want {t}", trace.len()),
        );
        let inst = trace.instantaneous();
        self.claim(
            inst.iter().all(|v| v.is_finite() && *v >= 0.0),
            "instantaneous regret is finite and nonnegative",
            format!("min {:?}", inst.iter().cloned().fold(f64::INFINITY, f64::min)),
        );
        let cum = trace.cumulative();
        self.claim(
            cum.windows(2).all(|w| w[1] >= w[0] - 1e-12),
            "cumulative regret is nondecreasing",
            String::new(),
        );
    }

    fn check_diagnostics(&mut self, diag: &RunDiagnostics) {
        self.claim(
            diag.stage1_regret <= diag.stage1_cap + TOL,
            "stage-1 regret respects its cap",
            format!("{} > {}", diag.stage1_regret, diag.stage1_cap),
        );
        self.claim(
            diag.logdet_used <= diag.logdet_budget + TOL && diag.logdet_used >= -TOL,
            "design log-det stays within budget",
            format!("used {} budget {}", diag.logdet_used, diag.logdet_budget),
        );
        self.claim(diag.beta_monotone, "confidence radius never shrinks", String::new());
        for (ix, sub) in diag.subspace.iter().enumerate() {
            self.claim(
                sub.tail_norm_sq <= sub.tail_bound_rhs + TOL,
                "rotated tail mass respects the subspace bound",
                format!("refit {ix}: {} > {}", sub.tail_norm_sq, sub.tail_bound_rhs),
            );
            self.claim(
                sub.sin_product <= sub.wedin_rhs + TOL,
                "sin-theta product respects the perturbation bound",
                format!("refit {ix}: {} > {}", sub.sin_product, sub.wedin_rhs),
            );
            self.claim(
                sub.gamma >= 0.0 && sub.b_perp >= 0.0,
                "subspace error scales are nonnegative",
                format!("refit {ix}: gamma {} b_perp {}", sub.gamma, sub.b_perp),
            );
        }
    }
}
