use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;

use commands::CliError;

/// Simulation and count-distribution analytics for the marked Cox claim model.
#[derive(Debug, Parser)]
#[command(name = "coxclaims", version, about)]
struct Cli {
    /// JSON run configuration (keys: model, delay, valuation, seed).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Root seed; overrides the `seed` key of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistKind {
    Reported,
    Ibnr,
    PeriodMarginal,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate claim sets and write them as CSV.
    Simulate {
        /// Number of periods to simulate; defaults to the valuation period.
        #[arg(long)]
        k: Option<usize>,
        /// Replications; more than one adds a leading `replication` column.
        #[arg(long, default_value_t = 1)]
        replications: u64,
    },
    /// Count distribution of the total reported or IBNR claims at the
    /// valuation date, or of a single period count.
    Dist {
        #[arg(long, value_enum)]
        which: DistKind,
        /// Period for `period-marginal`.
        #[arg(long, default_value_t = 1)]
        period: usize,
        /// Largest count to tabulate; chosen from the tail bound when omitted.
        #[arg(long)]
        n_max: Option<usize>,
        /// Bound on the probability mass left out of the table.
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        /// Monte Carlo replications, used when the exact law misses `eps`
        /// and as the reference for `--verify`.
        #[arg(long)]
        mc: Option<u64>,
        /// Cross-check the exact pmf against Monte Carlo bin by bin.
        #[arg(long)]
        verify: bool,
    },
    /// Stationary autocorrelation of the period counts.
    Acf {
        #[arg(long, default_value_t = 10)]
        max_lag: usize,
    },
    /// Run the built-in diagnostics on the configured model.
    Verify {
        #[arg(long, default_value_t = 100_000)]
        replications: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = commands::load(cli.config.as_deref()).and_then(|config| {
        let output = match cli.command {
            Command::Simulate { k, replications } => {
                commands::simulate(&config, cli.seed, k, replications)
            }
            Command::Dist {
                which,
                period,
                n_max,
                eps,
                mc,
                verify,
            } => commands::dist(
                &config,
                cli.seed,
                &commands::DistArgs {
                    which,
                    period,
                    n_max,
                    eps,
                    mc,
                    verify,
                },
            ),
            Command::Acf { max_lag } => commands::acf(&config, max_lag),
            Command::Verify { replications } => commands::verify(&config, cli.seed, replications),
        }?;
        commands::emit(cli.out.as_deref(), &output)?;
        match output.failure {
            Some(f) => Err(f),
            None => Ok(()),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Precondition(_) => 3,
            CliError::Accuracy(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}
