//! `mskit`: command-line frontend for the mixed Schur transform library.
//!
//! Every command is deterministic: identical arguments (including `--seed`)
//! produce byte-identical stdout and output files. Exit codes are `0` on
//! success, `1` when a computation or validation fails (including cap
//! breaches and malformed input files), and `2` for usage errors.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mskit::bratteli::FactorOrder;
use mskit::staircase::Staircase;

#[derive(Debug, Parser)]
#[command(name = "mskit", version, about = "Construct, verify and apply the mixed Schur transform")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// The tensor-space shape shared by most commands.
#[derive(Debug, Clone, Copy, Args)]
struct Shape {
    /// Number of defining factors `U`.
    n: usize,
    /// Number of dual factors `Ū`.
    m: usize,
    /// Local dimension.
    #[arg(value_parser = clap::value_parser!(u64).range(1..))]
    d: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the irrep census of `U^⊗n ⊗ Ū^⊗m` as JSON.
    Census {
        #[command(flatten)]
        shape: Shape,
    },
    /// Print the Bratteli diagram (JSON levels, or Graphviz with `--dot`).
    Bratteli {
        #[command(flatten)]
        shape: Shape,
        /// Factor order as a string of '+' (defining) and '-' (dual).
        #[arg(long)]
        order: Option<FactorOrder>,
        /// Emit Graphviz DOT instead of JSON.
        #[arg(long)]
        dot: bool,
    },
    /// Build the mixed Schur transform and write it as a matrix file.
    Schur {
        #[command(flatten)]
        shape: Shape,
        /// Factor order as a string of '+' (defining) and '-' (dual).
        #[arg(long)]
        order: Option<FactorOrder>,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the verification battery on a built or loaded transform.
    Verify(VerifyArgs),
    /// Channel analysis and simulation.
    #[command(subcommand)]
    Channel(ChannelCommand),
    /// Transition probability under a Hamiltonian of walled Brauer diagrams.
    Ptpqp(PtpqpArgs),
    /// Dump one block of the reduced Wigner operator for the dual irrep.
    Wigner {
        /// Source staircase, e.g. "[1,0,-1]".
        mu: Staircase,
        /// Target second row (length d-1), e.g. "[1,0]" or "[]".
        nu_prime: String,
    },
    /// Dump a Clebsch-Gordan transform as labelled blocks.
    Cg {
        /// Input staircase, e.g. "[1,0]".
        staircase: Staircase,
        /// Which elementary irrep is tensored on.
        #[arg(long, value_enum, default_value_t = CgKindArg::Dual)]
        kind: CgKindArg,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CgKindArg {
    Dual,
    Defining,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Number of defining factors (omit with --transform).
    n: Option<usize>,
    /// Number of dual factors (omit with --transform).
    m: Option<usize>,
    /// Local dimension (omit with --transform).
    #[arg(value_parser = clap::value_parser!(u64).range(1..))]
    d: Option<u64>,
    /// Factor order for a freshly built transform.
    #[arg(long, conflicts_with = "transform")]
    order: Option<FactorOrder>,
    /// Verify a transform read from a matrix file instead of building one.
    #[arg(long)]
    transform: Option<PathBuf>,
    /// Number of Haar-random unitaries (and random weight probes).
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Pass threshold for every residual.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Seed for the random unitaries.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct PtpqpArgs {
    #[command(flatten)]
    shape: Shape,
    /// Factor order as a string of '+' (defining) and '-' (dual).
    #[arg(long)]
    order: Option<FactorOrder>,
    /// Hamiltonian term "COEFF:DIAGRAM", e.g. "0.5:t1-b2,t2-b1,t3-b3" (repeatable).
    #[arg(long = "term", required = true)]
    terms: Vec<String>,
    /// Evolution time.
    #[arg(long, default_value_t = 1.0)]
    time: f64,
    /// Initial Schur label, e.g. "γ=[1,0] q=0 p=0".
    #[arg(long)]
    from: String,
    /// Final Schur label.
    #[arg(long)]
    to: String,
}

#[derive(Debug, Subcommand)]
enum ChannelCommand {
    /// Choi matrix of the one-parameter-family example on (1 in, 2 out, d = 2).
    #[command(allow_negative_numbers = true)]
    Example {
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        #[arg(long, default_value_t = 0.0)]
        u: f64,
        #[arg(long, default_value_t = 0.0)]
        v: f64,
        #[arg(long, default_value_t = 0.0)]
        w: f64,
        /// Print the Schur-basis coefficients A..E instead of the Choi file.
        #[arg(long)]
        schur: bool,
        /// Output file for the Choi matrix (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Project a Choi matrix onto the unitary-equivariant channels.
    Twirl {
        #[arg(long)]
        choi: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply a channel to a state directly.
    Apply {
        #[arg(long)]
        choi: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply an equivariant m = 1 channel through the teleportation protocol.
    Teleport {
        #[arg(long)]
        choi: PathBuf,
        #[arg(long)]
        state: PathBuf,
        /// Sample this many outcomes instead of enumerating all of them.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        shots: Option<u64>,
        /// Seed for outcome sampling.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Success probability and POVM checks of the m = 2 protocol.
    M2prob {
        #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
        d: u64,
    },
    /// Choi matrix of the single-qudit identity channel.
    Identity {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        d: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// A seeded random CPTP map from m input to n output qudits.
    Random {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        d: u64,
        /// Kraus rank (default d^(m+n)).
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        kraus: Option<u64>,
        /// Skip the twirl, producing a generic (non-equivariant) channel.
        #[arg(long)]
        no_twirl: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// A seeded random density matrix on `qudits` qudits.
    State {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        d: u64,
        #[arg(long, default_value_t = 1)]
        qudits: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report CPTP residuals, equivariance and the Schur-basis structure.
    Analyze {
        #[arg(long)]
        choi: PathBuf,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::output::CliError;
    use clap::CommandFactory;

    #[test]
    fn argument_definitions_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn order_flag_is_parsed_before_running() {
        let cli = Cli::try_parse_from(["mskit", "schur", "2", "1", "2", "--order", "++-"]).unwrap();
        match cli.command {
            Command::Schur { order: Some(order), .. } => assert_eq!(order.to_string(), "++-"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(Cli::try_parse_from(["mskit", "schur", "2", "1", "2", "--order", "+x-"]).is_err());
    }

    #[test]
    fn zero_dimension_is_a_usage_error() {
        let err = Cli::try_parse_from(["mskit", "census", "1", "1", "0"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn negative_channel_parameters_parse() {
        let cli = Cli::try_parse_from(["mskit", "channel", "example", "--t", "-0.1", "--schur"]).unwrap();
        match cli.command {
            Command::Channel(ChannelCommand::Example { t, schur, .. }) => {
                assert_eq!(t, -0.1);
                assert!(schur);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cli_errors_map_to_exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::Failed("x".into()).exit_code(), 1);
    }
}
