//! Command-line front end: exponent classification, cross-section
//! eigenvalue, single solves, extremal-amplitude bisection, branch
//! tracing, and the verification suite.
//!
//! Exit codes: 0 success, 2 validation failure, 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use conefold::config::RunConfig;
use conefold::exponents::RangeCase;
use conefold::pipeline::{
    exit_code_for, run_branch, run_eigen_cap, run_exponents, run_kappa_star, run_solve, run_verify,
};
use conefold::solver::IterationStatus;

#[derive(Parser)]
#[command(name = "conefold", version, about = "Minimal solutions, extremal amplitudes, and fold continuation for Lane-Emden and Henon equations on infinite cones")]
struct Cli {
    /// Configuration file (JSON); the built-in canonical configuration
    /// is used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Halve both grid spacings this many times.
    #[arg(long, global = true, default_value_t = 0)]
    refine: u32,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exponent classification: gamma, critical exponents, cubic roots,
    /// admissible intervals.
    Exponents,
    /// Cross-section eigenvalue at two resolutions with extrapolation.
    EigenCap,
    /// One monotone-iteration run (at the certified amplitude when the
    /// configuration leaves kappa unset).
    Solve,
    /// Bisect the extremal amplitude between converged and diverged runs.
    KappaStar,
    /// Trace the bifurcation diagram through the fold.
    Branch,
    /// Run the verification suite (manufactured solutions, maximum
    /// principle, barrier run, Hardy ratios, truncation sensitivity).
    Verify,
}

fn load_config(cli: &Cli) -> conefold::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::canonical(),
    };
    if cli.refine > 0 {
        cfg.refine(cli.refine);
    }
    Ok(cfg)
}

fn fail(err: conefold::Error) -> ExitCode {
    let kind = if exit_code_for(&err) == 2 { "validation" } else { "numerical" };
    eprintln!("{}", serde_json::json!({ "error": err.to_string(), "kind": kind }));
    ExitCode::from(exit_code_for(&err) as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };

    match cli.command {
        Command::Exponents => match run_exponents(&cfg, &cli.out) {
            Ok(report) => {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
                if report.range_case == RangeCase::Iv {
                    eprintln!(
                        "note: empty admissible range (case iv); the multiplicity machinery does not apply, only small-amplitude existence above p* = {}",
                        report.p_star
                    );
                    ExitCode::from(2)
                } else {
                    ExitCode::SUCCESS
                }
            }
            Err(e) => fail(e),
        },
        Command::EigenCap => match run_eigen_cap(&cfg, &cli.out) {
            Ok(report) => {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Solve => match run_solve(&cfg, &cli.out) {
            Ok(summary) => {
                println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
                match summary.status {
                    IterationStatus::Converged | IterationStatus::Diverged => ExitCode::SUCCESS,
                    IterationStatus::MaxIter => {
                        eprintln!("note: undecided after {} iterations; refine or widen thresholds", summary.j_reached);
                        ExitCode::from(3)
                    }
                }
            }
            Err(e) => fail(e),
        },
        Command::KappaStar => match run_kappa_star(&cfg, &cli.out) {
            Ok(result) => {
                println!("{}", serde_json::to_string_pretty(&result).expect("result serializes"));
                if result.undecided.is_some() {
                    eprintln!("note: bracket contains an undecided gap");
                    ExitCode::from(3)
                } else {
                    ExitCode::SUCCESS
                }
            }
            Err(e) => fail(e),
        },
        Command::Branch => match run_branch(&cfg, &cli.out) {
            Ok(summary) => {
                println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
                if summary.fold_kappa.is_none() {
                    eprintln!("note: no fold found within the step budget");
                    ExitCode::from(3)
                } else {
                    ExitCode::SUCCESS
                }
            }
            Err(e) => fail(e),
        },
        Command::Verify => match run_verify(&cfg, &cli.out) {
            Ok(report) => {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
                if report.pass {
                    ExitCode::SUCCESS
                } else {
                    eprintln!("verification failed");
                    ExitCode::from(3)
                }
            }
            Err(e) => fail(e),
        },
    }
}
