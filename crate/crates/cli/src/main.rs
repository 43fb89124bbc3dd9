use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lagflow_cli::error::{EXIT_FAILURE, EXIT_USAGE};
use lagflow_cli::{describe, run, CliError, RunConfig};

/// Scenario runner for the variable-density Navier-Stokes solver.
#[derive(Parser)]
#[command(name = "simulate", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts.
    Run {
        config: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory; overrides the config and SIM_OUTPUT_DIR.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// List the checks a run would perform, without running it.
    Validate { config: PathBuf },
}

fn output_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os("SIM_OUTPUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("output"))
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = RunConfig::load(&config)?;
            let (lines, warnings) = describe(&cfg);
            println!("scenario {}: {} checks", serde_json::to_string(&cfg.scenario).unwrap_or_default(), lines.len());
            for line in &lines {
                println!("  - {line}");
            }
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            Ok(0)
        }
        Command::Run { config, threads, output } => {
            let cfg = RunConfig::load(&config)?;
            if let Some(n) = threads {
                if n == 0 {
                    return Err(CliError::Config("--threads must be at least 1".into()));
                }
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            }
            let out = output_dir(output, &cfg);
            let summary = run(&cfg, &out)?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            for o in &summary.outcomes {
                println!("{} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.citation, o.detail);
            }
            println!("artifacts written to {}", summary.output_dir.display());
            Ok(if summary.passed() { 0 } else { EXIT_FAILURE })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
