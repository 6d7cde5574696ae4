mod commands;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "pchsat", version, about = "Satisfiability of linear probability formulas over causal models")]
pub struct Cli {
    /// Cap on enumerated objects: LP columns, function tuples, joint assignments.
    #[arg(long, global = true, env = "PCHSAT_CAP")]
    pub cap: Option<usize>,
    /// Exit with 10 (SAT) and 20 (UNSAT) instead of 0 and 1.
    #[arg(long, global = true)]
    pub dimacs_exit: bool,
    /// Omit timing fields so output is byte-for-byte reproducible.
    #[arg(long, global = true)]
    pub no_timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decide satisfiability of a formula file.
    Solve(SolveArgs),
    /// Check a certificate against a formula.
    Verify(VerifyArgs),
    /// Run a brute-force decider.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Generate formulas from 3-SAT or clique instances.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Print a tree decomposition of a formula's primal graph.
    Decomp(DecompArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Fragment {
    Auto,
    ProbLin,
    CfLin,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum DecompChoice {
    Greedy,
    Exact,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Formula file, or `-` for stdin.
    pub formula: PathBuf,
    #[arg(long, value_enum, default_value_t = Fragment::Auto)]
    pub fragment: Fragment,
    /// Re-check the certificate before reporting.
    #[arg(long)]
    pub verify: bool,
    #[arg(long, value_enum, default_value_t = DecompChoice::Greedy)]
    pub decomp: DecompChoice,
    /// Write the certificate (SAT model or UNSAT refutation) as JSON.
    #[arg(long, value_name = "PATH")]
    pub certificate: Option<PathBuf>,
    /// Write a satisfying structural causal model as JSON.
    #[arg(long, value_name = "PATH")]
    pub scm: Option<PathBuf>,
    /// Keep values that no constraint mentions.
    #[arg(long)]
    pub keep_domain: bool,
    /// Run on a single thread.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    pub formula: PathBuf,
    pub certificate: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum OracleCommand {
    /// LP over the full joint distribution (intervention-free formulas).
    Joint {
        formula: PathBuf,
        #[arg(long, value_name = "PATH")]
        certificate: Option<PathBuf>,
    },
    /// Truth-table check of a DIMACS CNF.
    Cnf { cnf: PathBuf },
    /// Search for a clique with one vertex per color.
    Clique {
        graph: PathBuf,
        #[arg(long)]
        k: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum GenCommand {
    /// Intervention-free base formula from a DIMACS CNF.
    ThreesatBase { cnf: PathBuf },
    /// Intervention-free base formula from a colored graph.
    Clique {
        graph: PathBuf,
        #[arg(long)]
        k: usize,
    },
    /// Interventional linear formula over two variables per CNF variable.
    ThreesatCausal { cnf: PathBuf },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum DecompFormat {
    /// PACE `.td` text.
    Td,
    /// Nice decomposition with node kinds.
    NiceJson,
}

#[derive(Args, Debug)]
pub struct DecompArgs {
    pub formula: PathBuf,
    #[arg(long, value_enum, default_value_t = DecompChoice::Greedy)]
    pub decomp: DecompChoice,
    #[arg(long, value_enum, default_value_t = DecompFormat::Td)]
    pub format: DecompFormat,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(status) => ExitCode::from(status.code(cli.dimacs_exit)),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
