//! `decaylab`: compute expansions, verify them numerically, report thresholds.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "decaylab", version, about = "Asymptotic expansions of decaying ODE solutions")]
struct Cli {
    /// error, warn, info, debug or trace
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Problem spec (JSON)
    spec: PathBuf,
    /// Write the output document here instead of stdout
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Use floating point even when the spec is exactly rational
    #[arg(long)]
    float: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute the first N expansion terms and write the expansion document
    Expand {
        #[command(flatten)]
        common: Common,
        /// Number of terms
        #[arg(short = 'n', long, value_parser = clap::value_parser!(u32).range(1..))]
        order: u32,
    },
    /// Integrate the system and check the remainder decay of each truncation
    Verify {
        #[command(flatten)]
        common: Common,
        /// Expansion document written by `expand`
        expansion: PathBuf,
        /// End of the integration interval
        #[arg(long)]
        t_max: Option<f64>,
        /// Number of sample times
        #[arg(long)]
        samples: Option<usize>,
        /// Required decay beyond the predicted exponent
        #[arg(long)]
        margin: Option<f64>,
        /// Write per-order remainders to this CSV file
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Perturb y(t0) off the expansion by up to AMPLITUDE per component
        #[arg(long, value_name = "AMPLITUDE", num_args = 0..=1, default_missing_value = "1e-3")]
        random_y0: Option<f64>,
        /// Seed for --random-y0
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fail on uncalibrated resonant constants instead of fitting them
        #[arg(long)]
        no_calibrate: bool,
    },
    /// Print the smallness thresholds for global decay
    Thresholds {
        #[command(flatten)]
        common: Common,
        /// Radius of the ball on which |G(y)| ≤ c*|y|² is estimated
        #[arg(long, default_value_t = 1.0)]
        r_star: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Expand { common, order } => {
            commands::expand(&common.spec, order as usize, common.output.as_deref(), common.float)
        }
        Command::Verify {
            common,
            expansion,
            t_max,
            samples,
            margin,
            trace,
            random_y0,
            seed,
            no_calibrate,
        } => commands::verify(&commands::VerifyArgs {
            spec: common.spec,
            expansion,
            output: common.output,
            float: common.float,
            t_max,
            samples,
            margin,
            trace,
            random_y0,
            seed,
            calibrate: !no_calibrate,
        }),
        Command::Thresholds { common, r_star } => {
            commands::thresholds(&common.spec, r_star, common.output.as_deref(), common.float)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
