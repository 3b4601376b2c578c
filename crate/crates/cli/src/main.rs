//! Command-line front end: run experiments, plot results, replay the
//! analytical guarantees.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 run failure,
//! 3 invariant violation.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use bibandit_core::error::Error;
use bibandit_core::harness::{
    csv, run_experiment, run_invariant_checks, summary_json, svg, ExperimentConfig, Method,
};

#[derive(Parser)]
#[command(
    name = "bibandit",
    version,
    about = "Bandit strategies for bilinear rewards: run, plot, verify"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment; writes results.csv, regret.svg, and
    /// summary.json into the output directory.
    Run(RunArgs),
    /// Render an SVG regret plot from a previously written results CSV.
    Plot(PlotArgs),
    /// Replay the analytical guarantees on randomized small instances.
    CheckInvariants(CheckArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON). An empty file, or omitting the flag,
    /// selects the built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of final repetitions.
    #[arg(long)]
    reps: Option<u64>,
    /// Run only these methods (comma separated: oful,estr-os,estr-bm,isse).
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Directory for results.csv, regret.svg, and summary.json.
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Input CSV, as written by `run`.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output SVG path.
    #[arg(long = "out")]
    output: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    /// Optional config; only its seed is used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of randomized instances to replay.
    #[arg(long, default_value_t = 120)]
    instances: usize,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Plot(args) => cmd_plot(args),
        Command::CheckInvariants(args) => cmd_check(args),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::InvalidInput(_) => 1,
        _ => 2,
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, Error> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::config("config", format!("cannot read {}: {e}", path.display()))
            })?;
            ExperimentConfig::from_json_str(&text)
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<i32, Error> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(reps) = args.reps {
        config.reps = reps;
        config.tune_reps = config.tune_reps.min(reps);
    }
    if let Some(methods) = args.methods {
        config.methods = methods
            .iter()
            .map(|m| m.trim().parse::<Method>())
            .collect::<Result<Vec<_>, _>>()?;
    }
    config.validate()?;

    let result = run_experiment(&config)?;

    std::fs::create_dir_all(&args.out_dir)?;
    let csv_path = args.out_dir.join("results.csv");
    let svg_path = args.out_dir.join("regret.svg");
    let summary_path = args.out_dir.join("summary.json");
    std::fs::write(&csv_path, csv::render_csv(&result))?;
    std::fs::write(&svg_path, svg::render_experiment_plot(&result)?)?;
    std::fs::write(&summary_path, summary_json(&result))?;

    println!("{:<8} {:>6} {:>6} {:>14} {:>10} {:>5} {:>9}", "method", "c", "t1", "final regret", "95% half", "fails", "secs");
    for m in &result.methods {
        println!(
            "{:<8} {:>6} {:>6} {:>14.3} {:>10.3} {:>5} {:>9.2}",
            m.method.label(),
            m.chosen_c,
            m.chosen_t1.map_or_else(|| "-".to_string(), |v| v.to_string()),
            m.mean_final_regret,
            m.band_halfwidth,
            m.failures,
            m.wall_clock.as_secs_f64()
        );
    }
    println!(
        "wrote {}, {}, {}",
        csv_path.display(),
        svg_path.display(),
        summary_path.display()
    );
    Ok(0)
}

fn cmd_plot(args: PlotArgs) -> Result<i32, Error> {
    let text = std::fs::read_to_string(&args.input).map_err(|e| {
        Error::InvalidInput(format!("cannot read {}: {e}", args.input.display()))
    })?;
    let rows = csv::parse_csv(&text)?;
    let series = svg::series_from_csv(&rows)?;
    let n_reps = rows
        .iter()
        .filter(|r| r.method == rows[0].method)
        .count();
    let title = format!("Cumulative regret, mean over {n_reps} repetitions with 95% bands");
    let rendered = svg::render_plot(&series, &title)?;
    std::fs::write(&args.output, rendered)?;
    println!("wrote {}", args.output.display());
    Ok(0)
}

fn cmd_check(args: CheckArgs) -> Result<i32, Error> {
    let config = load_config(args.config.as_deref())?;
    let seed = args.seed.unwrap_or(config.seed);
    if args.instances == 0 {
        return Err(Error::config("instances", "need at least one instance"));
    }
    let report = run_invariant_checks(seed, args.instances);
    println!(
        "{} instances, {} checks, {} violations",
        report.instances,
        report.checks_run,
        report.violations.len()
    );
    if report.is_clean() {
        Ok(0)
    } else {
        for v in &report.violations {
            eprintln!("violation: {v}");
        }
        Ok(3)
    }
}
