use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lyapunov_core::experiments::{self, ExperimentConfig, ExperimentError, Scenario};

/// Output directory override; the run name is appended.
const OUTPUT_ENV: &str = "LYAP_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "lyaplab", version, about = "Lyapunov exponent laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Only print failing checks.
        #[arg(long, short)]
        quiet: bool,
    },
    /// Run the solver inequality suite over a potential corpus.
    PropsSuite {
        #[arg(long, default_value = "default")]
        corpus: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        quiet: bool,
    },
    /// List the available scenarios.
    ListScenarios,
}

fn execute(cfg: &ExperimentConfig, quiet: bool) -> Result<bool, ExperimentError> {
    let outcome = experiments::run(cfg)?;
    let override_dir = std::env::var_os(OUTPUT_ENV).map(PathBuf::from);
    let dir = experiments::resolve_output_dir(cfg, override_dir.as_deref());
    experiments::write_outputs(&outcome, &dir)?;
    let v = &outcome.verdict;
    for c in &v.checks {
        if !quiet || !c.pass {
            println!("{c}");
        }
    }
    for n in &v.notes {
        println!("note: {n}");
    }
    let failed = v.failures().count();
    println!(
        "{}: {} checks, {} failed; outputs in {}",
        cfg.name,
        v.checks.len(),
        failed,
        dir.display()
    );
    Ok(failed == 0)
}

fn finish(result: Result<bool, ExperimentError>) -> ExitCode {
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed, quiet } => finish(ExperimentConfig::from_file(&config).and_then(|mut cfg| {
            if let Some(s) = seed {
                cfg.seed = s;
            }
            execute(&cfg, quiet)
        })),
        Command::PropsSuite { corpus, seed, quiet } => {
            if corpus != "default" {
                eprintln!("error: unknown corpus {corpus:?}; only \"default\" is available");
                return ExitCode::from(2);
            }
            let mut cfg = ExperimentConfig::new("props-suite", Scenario::PropsSuite);
            if let Some(s) = seed {
                cfg.seed = s;
            }
            finish(execute(&cfg, quiet))
        }
        Command::ListScenarios => {
            for s in Scenario::ALL {
                println!("{:<20} {}", s.as_str(), s.description());
            }
            ExitCode::SUCCESS
        }
    }
}
