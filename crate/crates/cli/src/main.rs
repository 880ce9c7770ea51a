use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use qae_core::experiment::{
    compare_runs, export_trash_density, parse_config_text, run_experiment, write_density_csv, ExperimentConfig, Probe,
    Thresholds,
};
use qae_core::QaeError;

/// Train and compare quantum autoencoders on Ising ground states or
/// handwritten digits.
#[derive(Parser)]
#[command(name = "qae", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one autoencoder and write its artifact bundle.
    Run(RunArgs),
    /// Compare two bundles and print a JSON report.
    Compare(CompareArgs),
    /// Print the trash density matrix of one probe input as CSV.
    TrashDensity(TrashArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    workload: Option<String>,
    /// qae, ef_qae or ef_qae_star.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    trash: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// QAE bundle (or its theta_opt.json) to start ef_qae_star from.
    #[arg(long)]
    warm_start: Option<PathBuf>,
    #[arg(long)]
    max_evals: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Any other config key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct CompareArgs {
    run_a: PathBuf,
    run_b: PathBuf,
    #[arg(long, default_value_t = Thresholds::default().max_cost_ratio)]
    max_cost_ratio: f64,
    #[arg(long, default_value_t = Thresholds::default().min_mean_test_fidelity_delta)]
    min_fidelity_delta: f64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrashArgs {
    run: PathBuf,
    /// Ising ground state at this transverse field.
    #[arg(long, conflicts_with = "digit", required_unless_present = "digit")]
    lambda: Option<f64>,
    /// Index into the digits test set.
    #[arg(long)]
    digit: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn config_pairs(args: &RunArgs) -> anyhow::Result<Vec<(String, String)>> {
    let mut pairs = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| QaeError::Io {
                path: path.clone(),
                source: e,
            })?;
            parse_config_text(&text)?
        }
        None => Vec::new(),
    };
    let flags = [
        ("workload", args.workload.clone()),
        ("mode", args.mode.clone()),
        ("layers", args.layers.map(|v| v.to_string())),
        ("trash", args.trash.map(|v| v.to_string())),
        ("seed", args.seed.map(|v| v.to_string())),
        ("out", args.out.as_ref().map(|p| p.display().to_string())),
        ("warm_start", args.warm_start.as_ref().map(|p| p.display().to_string())),
        ("max_evals", args.max_evals.map(|v| v.to_string())),
        ("restarts", args.restarts.map(|v| v.to_string())),
    ];
    pairs.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| QaeError::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        pairs.push((k.to_string(), v.to_string()));
    }
    Ok(pairs)
}

fn emit(out: Option<&PathBuf>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| QaeError::Io {
            path: path.clone(),
            source: e,
        })?,
        None => std::io::stdout().write_all(bytes).context("writing to stdout")?,
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run(args) => {
            let config = ExperimentConfig::from_pairs(&config_pairs(&args)?)?;
            let summary = run_experiment(&config)?;
            let t = &summary.theta;
            println!(
                "{} {}: cost {:.6} -> {:.6} in {} evaluations ({:?}), restart {}/{}, bundle {}",
                t.workload,
                t.mode,
                t.initial_cost,
                t.final_cost,
                t.evaluations,
                t.termination,
                t.best_restart + 1,
                t.restarts,
                summary.output_dir.display()
            );
        }
        Command::Compare(args) => {
            let thresholds = Thresholds {
                max_cost_ratio: args.max_cost_ratio,
                min_mean_test_fidelity_delta: args.min_fidelity_delta,
            };
            let report = compare_runs(&args.run_a, &args.run_b, &thresholds)?;
            let mut json = serde_json::to_vec_pretty(&report)?;
            json.push(b'\n');
            emit(args.out.as_ref(), &json)?;
        }
        Command::TrashDensity(args) => {
            let probe = match (args.lambda, args.digit) {
                (Some(l), _) => Probe::Lambda(l),
                (None, Some(i)) => Probe::TestDigit(i),
                (None, None) => unreachable!("clap requires one probe"),
            };
            let row = export_trash_density(&args.run, probe)?;
            let mut buf = Vec::new();
            write_density_csv(&[row], &mut buf)?;
            emit(args.out.as_ref(), &buf)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err.downcast_ref::<QaeError>().map(QaeError::exit_code).unwrap_or(1);
            ExitCode::from(code as u8)
        }
    }
}
