//! Multi-method experiment orchestration.
//!
//! [`run_experiment`] compares strategies on a common family of random
//! instances: repetition i of every method sees the same hidden matrix and
//! the same arm sets, while reward noise is drawn from per-(method, round)
//! streams. Each method first tunes its hyperparameters on a small number
//! of repetitions per grid point (exploration multiplier c for all methods,
//! stage-1 length for the two-stage ones), then the winning point is rerun
//! for the full repetition count. Results carry per-repetition regret
//! traces plus a 95% normal-approximation band on the final cumulative
//! regret.
//!
//! [`csv`] serializes traces to a flat table and parses it back, [`svg`]
//! renders mean curves with confidence bands, and [`invariants`] replays
//! the library's analytical guarantees on randomized small instances.

mod config;
pub mod csv;
pub mod invariants;
pub mod svg;

pub use config::{ExperimentConfig, Method};
pub use invariants::{run_invariant_checks, InvariantReport};

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::completion::CompletionMethod;
use crate::env::{generate_sphere_arms, make_low_rank_theta, ArmSet, BilinearEnvironment, RegretTrace};
use crate::error::{Error, Result};
use crate::estr::{run_estr, run_isse, run_oful_baseline, EstrConfig};
use crate::rng::{derive_stream, RunStream};

/// Outcome of one method's tuning plus final repetitions.
#[derive(Debug, Clone)]
pub struct MethodResult {
    pub method: Method,
    pub chosen_c: f64,
    /// Tuned stage-1 length; `None` for methods without one.
    pub chosen_t1: Option<u64>,
    /// Mean final cumulative regret over the successful repetitions.
    pub mean_final_regret: f64,
    /// 1.96·s/√n over the final repetitions (0 when fewer than two).
    pub band_halfwidth: f64,
    pub traces: Vec<RegretTrace>,
    pub failures: usize,
    pub wall_clock: Duration,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub methods: Vec<MethodResult>,
}

/// Samples the shared instance of repetition `rep`: hidden matrix plus the
/// two arm sets. Every method sees the identical instance for a given
/// config seed and repetition.
pub fn instance_for_rep(
    config: &ExperimentConfig,
    rep: u64,
) -> Result<(BilinearEnvironment, ArmSet, ArmSet)> {
    let mut env_rng = derive_stream(config.seed, "env", &[rep]);
    let theta = make_low_rank_theta(config.d1, config.d2, config.r, config.theta_frobenius, &mut env_rng)?;
    let env = BilinearEnvironment::new(theta, config.sigma, config.noise)?;
    let mut arms_rng = derive_stream(config.seed, "arms", &[rep]);
    let xs = generate_sphere_arms(config.n_left_arms, config.d1, &mut arms_rng)?;
    let zs = generate_sphere_arms(config.n_right_arms, config.d2, &mut arms_rng)?;
    Ok((env, xs, zs))
}

fn run_single(
    config: &ExperimentConfig,
    method: Method,
    rep: u64,
    c: f64,
    t1: Option<u64>,
) -> Result<RegretTrace> {
    let (env, xs, zs) = instance_for_rep(config, rep)?;
    let run_config = EstrConfig {
        t: config.t,
        t1: t1.unwrap_or((config.t / 2).max(1)),
        r: config.r,
        s_f: env.frobenius_norm(),
        s_2: env.spectral_norm(),
        s_r: env.min_singular(),
        lambda: config.lambda,
        delta: config.delta,
        c,
        c1: config.c1,
        gamma_mode: config.gamma_mode,
        completion_method: match method {
            Method::EstrOs => CompletionMethod::OptspaceStyle,
            _ => CompletionMethod::BurerMonteiro,
        },
        lambda_cross: config.lambda_cross,
    };
    let stream = RunStream::new(config.seed, method.label(), rep).with_grid_point(c, t1.unwrap_or(0));
    match method {
        Method::Oful => run_oful_baseline(&env, &xs, &zs, &run_config, &stream),
        Method::EstrOs | Method::EstrBm => run_estr(&env, &xs, &zs, &run_config, &stream),
        Method::Isse => run_isse(&env, &xs, &zs, &run_config, &stream),
    }
}

fn grid_points(config: &ExperimentConfig, method: Method) -> Vec<(f64, Option<u64>)> {
    if method.uses_t1() {
        let t1s: Vec<u64> = if config.t1_grid.is_empty() {
            vec![config.default_t1()]
        } else {
            config.t1_grid.clone()
        };
        config
            .c_grid
            .iter()
            .flat_map(|&c| t1s.iter().map(move |&t1| (c, Some(t1))))
            .collect()
    } else {
        config.c_grid.iter().map(|&c| (c, None)).collect()
    }
}

struct Batch {
    traces: Vec<RegretTrace>,
    failures: usize,
    mean_final: f64,
}

fn run_batch(
    config: &ExperimentConfig,
    method: Method,
    reps: u64,
    c: f64,
    t1: Option<u64>,
) -> Batch {
    let outcomes: Vec<Result<RegretTrace>> = (0..reps)
        .into_par_iter()
        .map(|rep| run_single(config, method, rep, c, t1))
        .collect();
    let mut traces = Vec::with_capacity(outcomes.len());
    let mut failures = 0;
    for outcome in outcomes {
        match outcome {
            Ok(trace) => traces.push(trace),
            Err(_) => failures += 1,
        }
    }
    let mean_final = if traces.is_empty() {
        f64::INFINITY
    } else {
        traces.iter().map(|t| t.final_cumulative()).sum::<f64>() / traces.len() as f64
    };
    Batch {
        traces,
        failures,
        mean_final,
    }
}

fn run_method(config: &ExperimentConfig, method: Method) -> Result<MethodResult> {
    let start = Instant::now();
    let grid = grid_points(config, method);
    let mut attempted = 0u64;
    let mut failures = 0usize;
    let mut best: Option<(f64, Option<u64>, f64)> = None;
    let tuning_covers_final = config.tune_reps == config.reps;
    let mut winner_traces: Option<Vec<RegretTrace>> = None;
    for &(c, t1) in &grid {
        let batch = run_batch(config, method, config.tune_reps, c, t1);
        attempted += config.tune_reps;
        failures += batch.failures;
        // Strict < keeps the earliest grid point on ties.
        if best.is_none() || batch.mean_final < best.unwrap().2 {
            best = Some((c, t1, batch.mean_final));
            if tuning_covers_final {
                winner_traces = Some(batch.traces);
            }
        }
    }
    let (chosen_c, chosen_t1, best_mean) = best.expect("grid is never empty");
    if !best_mean.is_finite() {
        return Err(Error::RunFailure(format!(
            "{method}: every hyperparameter point failed during tuning"
        )));
    }
    let traces = match winner_traces {
        Some(traces) => traces,
        None => {
            let batch = run_batch(config, method, config.reps, chosen_c, chosen_t1);
            attempted += config.reps;
            failures += batch.failures;
            batch.traces
        }
    };
    if failures as u64 * 10 > attempted {
        return Err(Error::RunFailure(format!(
            "{method}: {failures} of {attempted} runs failed"
        )));
    }
    if traces.is_empty() {
        return Err(Error::RunFailure(format!(
            "{method}: no successful repetitions of the chosen point"
        )));
    }
    let finals: Vec<f64> = traces.iter().map(|t| t.final_cumulative()).collect();
    let n = finals.len() as f64;
    let mean = finals.iter().sum::<f64>() / n;
    let band_halfwidth = if finals.len() >= 2 {
        let var = finals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        1.96 * (var / n).sqrt()
    } else {
        0.0
    };
    Ok(MethodResult {
        method,
        chosen_c,
        chosen_t1,
        mean_final_regret: mean,
        band_halfwidth,
        traces,
        failures,
        wall_clock: start.elapsed(),
    })
}

/// Runs every configured method: tune on the grid, rerun the winner, and
/// report traces with final-regret statistics. Fails if any method loses
/// more than 10% of its runs.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let mut methods = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        methods.push(run_method(config, method)?);
    }
    Ok(ExperimentResult {
        config: config.clone(),
        methods,
    })
}

/// One-line-per-method JSON summary of an experiment result.
pub fn summary_json(result: &ExperimentResult) -> String {
    #[derive(serde::Serialize)]
    struct Row<'a> {
        method: &'a str,
        chosen_c: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        chosen_t1: Option<u64>,
        mean_final_regret: f64,
        band_halfwidth: f64,
        reps: usize,
        failures: usize,
        wall_clock_secs: f64,
    }
    let rows: Vec<Row> = result
        .methods
        .iter()
        .map(|m| Row {
            method: m.method.label(),
            chosen_c: m.chosen_c,
            chosen_t1: m.chosen_t1,
            mean_final_regret: m.mean_final_regret,
            band_halfwidth: m.band_halfwidth,
            reps: m.traces.len(),
            failures: m.failures,
            wall_clock_secs: m.wall_clock.as_secs_f64(),
        })
        .collect();
    serde_json::to_string_pretty(&rows).expect("summary serializes")
}
