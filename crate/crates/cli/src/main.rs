use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use adaptlab_cli::config::{parse_config, OutputFormat};
use adaptlab_cli::error::RunError;
use adaptlab_cli::runner;
use adaptlab_core::diagnostics::telescoping_verify;
use adaptlab_core::scenarios::{build_scenario, list_scenarios};

#[derive(Parser)]
#[command(
    name = "adaptlab",
    about = "Convergence diagnostics for adaptive Markov chains on finite state spaces",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in scenarios.
    List,
    /// Run the full diagnostic suite from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the output formats, e.g. "json,csv".
        #[arg(long, value_delimiter = ',')]
        format: Option<Vec<String>>,
        /// Override replicate parallelism.
        #[arg(long)]
        parallel: Option<bool>,
    },
    /// One-off frozen-kernel convergence time query.
    Meps {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        x: usize,
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 100_000)]
        cap: u64,
    },
    /// One-off adaptive convergence time at a visited pair.
    Adaptime {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        x: usize,
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 100_000)]
        cap: u64,
        /// Estimate with this many replicate chains instead of exact
        /// propagation.
        #[arg(long)]
        estimate: Option<u32>,
        #[arg(long, default_value_t = 1729)]
        seed: u64,
    },
    /// Check the product-vs-power telescoping bound along a parameter
    /// sequence of the scenario's kernel family.
    Telescope {
        #[arg(long)]
        scenario: String,
        #[arg(long, value_delimiter = ',', required = true)]
        thetas: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        base: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), RunError> {
    match command {
        Command::List => {
            for (id, description) in list_scenarios() {
                println!("{id}: {description}");
            }
            Ok(())
        }
        Command::Run {
            config,
            seed,
            out,
            format,
            parallel,
        } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| RunError::Config(format!("{}: {e}", config.display())))?;
            let mut run_config = parse_config(&text)?;
            if let Some(seed) = seed {
                run_config.seed = seed;
            }
            if let Some(out) = out {
                run_config.out_dir = out;
            }
            if let Some(parallel) = parallel {
                run_config.parallel = parallel;
            }
            if let Some(format) = format {
                run_config.formats = format
                    .iter()
                    .map(|f| match f.as_str() {
                        "json" => Ok(OutputFormat::Json),
                        "csv" => Ok(OutputFormat::Csv),
                        other => Err(RunError::Config(format!(
                            "formats: unknown format `{other}`"
                        ))),
                    })
                    .collect::<Result<_, _>>()?;
            }
            let outcome = runner::run(&run_config)?;
            let verdicts = outcome.report.verdicts;
            println!(
                "verdicts: diminishing_ok={} containment_ok={} adapt_fail={}",
                verdicts.diminishing_ok, verdicts.containment_ok, verdicts.adapt_fail
            );
            for file in &outcome.files {
                println!("{}  {}", file.sha256, file.path.display());
            }
            Ok(())
        }
        Command::Meps {
            scenario,
            x,
            theta,
            eps,
            cap,
        } => {
            let time = runner::frozen_time_query(&scenario, x, theta, eps, cap)?;
            println!("{time}");
            Ok(())
        }
        Command::Adaptime {
            scenario,
            x,
            theta,
            eps,
            cap,
            estimate,
            seed,
        } => {
            let time = runner::adaptive_time_query(
                &scenario,
                x,
                theta,
                eps,
                cap,
                estimate.map(|r| (r, seed)),
            )?;
            println!("{time}");
            Ok(())
        }
        Command::Telescope {
            scenario,
            thetas,
            base,
        } => {
            let s = build_scenario(&scenario, &Default::default())?;
            let check = telescoping_verify(&s.family, &thetas, base)?;
            println!(
                "lhs={:.12e} eta={:.12e} bound={:.12e} ok={}",
                check.lhs, check.eta, check.bound, check.ok
            );
            Ok(())
        }
    }
}
