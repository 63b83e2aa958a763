//! `frostree`: command-line experiments on uniform attachment trees with freezing.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use frostree_core::Error;

pub const GRAMMAR_HELP: &str = "\
Sequences are written with `+` (attach) and `-` (freeze):
  seq  := term+
  term := atom ['^' positive-int]
  atom := '+' | '-' | '(' seq ')'
Whitespace is ignored. Examples: `+^100`, `(+-)^3`, `+^5-^4+^5`.";

#[derive(Debug, Parser)]
#[command(name = "frostree", version, about = "Uniform attachment trees with freezing", after_help = GRAMMAR_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo height histogram of a sequence's tree.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also write the tree of replica 0 to this file.
        #[arg(long, value_name = "PATH")]
        dump_tree: Option<PathBuf>,
    },
    /// Exact height law on a small sequence.
    Exact {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Construction::Forward)]
        construction: Construction,
    },
    /// Coupled samples of two related constructions.
    Couple {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Which::Reduce)]
        which: Which,
        /// Edges of the shared base tree, for `--which i` and `--which ii`.
        #[arg(long, default_value_t = 1)]
        m: usize,
    },
    /// Stochastic dominance between two sequences, or the smallest floor over a family.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Newline-delimited sequences with `--n` attach steps each.
        #[arg(long, value_name = "PATH")]
        family: Option<PathBuf>,
        /// Tolerance band for empirical comparisons.
        #[arg(long, default_value_t = 0.01)]
        slack: f64,
    },
    /// Removes leading attach/freeze pairs.
    Reduce {
        #[command(flatten)]
        common: Common,
        /// Reduce until the sequence starts with this many attach steps.
        #[arg(long)]
        target: Option<usize>,
    },
    /// Bennett tail bound for a sum of independent Bernoulli variables.
    Bound {
        #[command(flatten)]
        common: Common,
        /// Sum of the Bernoulli parameters; defaults to that of the depth law of `--seq`.
        #[arg(long)]
        mean: Option<f64>,
        /// Deviation from the mean.
        #[arg(long)]
        t: f64,
    },
    /// Fraction of replicas reaching the height threshold `e ln n − 5 ln ln n`.
    Theorem {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long, default_value = "")]
    pub seq: String,
    #[arg(long)]
    pub seq2: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub replicas: u64,
    #[arg(long, env = "FROSTREE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write to this file instead of standard output.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Mc)]
    pub mode: Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Mc,
    Enumerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Construction {
    Forward,
    Reverse,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    Reduce,
    I,
    Ii,
    Iii,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Syntax { .. } => CliError::Usage(format!("{e}\n\n{GRAMMAR_HELP}")),
            other => CliError::Domain(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (common, output) = match commands::run(&cli.command) {
        Ok(pair) => pair,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
        Err(CliError::Domain(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let written = match &common.out {
        Some(path) => std::fs::write(path, &output),
        None => {
            print!("{output}");
            Ok(())
        }
    };
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: cannot write output: {e}");
            ExitCode::from(1)
        }
    }
}
