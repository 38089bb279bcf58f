//! chainverifier: numerically check phi-irreducibility, aperiodicity and
//! the T-chain property of a nonlinear state-space Markov chain through its
//! deterministic control model.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use chainverifier_cli::config::RunConfig;
use chainverifier_cli::runner;
use chainverifier_cli::{CliError, EXIT_ERROR};

#[derive(Parser)]
#[command(name = "chainverifier", version, about)]
struct Cli {
    /// Path to the TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports and CSV files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Replace every section seed in the config.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    /// Replace analysis.rank_rel_tol.
    #[arg(long, global = true)]
    rank_tol: Option<f64>,
    /// Suppress progress diagnostics on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full stability analysis and assemble a verdict.
    Analyze,
    /// Validate analytic densities against their samplers.
    CheckDensity,
    /// Estimate the linear convergence rate by two routes.
    Rate,
    /// Answer explicit path-search queries.
    Paths,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let mut config = RunConfig::load(config_path)?;
    if let Some(seed) = cli.seed_override {
        config.override_seeds(seed);
    }
    if let Some(tol) = cli.rank_tol {
        if let Some(a) = &mut config.analysis {
            a.rank_rel_tol = tol;
        }
    }

    let diag = |msg: &str| {
        if !cli.quiet {
            eprintln!("chainverifier: {msg}");
        }
    };

    let default_name;
    let (report_json, exit, side_files) = match cli.command {
        Command::Analyze => {
            diag("running analyze");
            default_name = "analyze-report.json";
            let (report, exit) = runner::cmd_analyze(&config)?;
            diag(&format!("conclusion: {:?}", report.verdict.conclusion));
            (to_json(&report)?, exit, Vec::new())
        }
        Command::CheckDensity => {
            diag("running check-density");
            default_name = "check-density-report.json";
            let (report, exit, side) = runner::cmd_check_density(&config)?;
            diag(&format!("all_pass: {}", report.all_pass));
            (to_json(&report)?, exit, side)
        }
        Command::Rate => {
            diag("running rate");
            default_name = "rate-report.json";
            let (report, exit, side) = runner::cmd_rate(&config)?;
            diag(&format!(
                "route A {:+.6e}, route B {:+.6e}, agree: {}",
                report.estimate.per_iteration_log_step_ratio,
                report.estimate.expectation_route,
                report.routes_agree
            ));
            (to_json(&report)?, exit, side)
        }
        Command::Paths => {
            diag("running paths");
            default_name = "paths-report.json";
            let (report, exit) = runner::cmd_paths(&config)?;
            (to_json(&report)?, exit, Vec::new())
        }
    };

    let report_name = config.output.report.clone().unwrap_or_else(|| default_name.to_string());
    write_out(&cli.out, &report_name, &report_json)?;
    for (name, content) in &side_files {
        write_out(&cli.out, name, content)?;
    }
    println!("{report_json}");
    Ok(exit)
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("report serialization failed: {e}")))
}

fn write_out(dir: &PathBuf, name: &str, content: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })
}
