mod commands;
mod input;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use batchcode::Error;

/// Seed used by randomized sweeps when `--seed` is absent.
pub const DEFAULT_SEED: u64 = 20_211_129;

#[derive(Parser, Debug)]
#[command(name = "batchcode", version, about = "Serve and verify simplex batch-code requests")]
struct Cli {
    /// Write the JSON result to this file instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct KRequests {
    #[arg(long)]
    pub k: usize,
    /// JSON array of bit vectors, or `@file.json`.
    #[arg(long)]
    pub requests: String,
}

#[derive(Args, Debug, Clone)]
pub struct GroupRequests {
    /// Group such as `Z7`, `Z2^3` or `Z2xZ4`.
    #[arg(long)]
    pub group: String,
    /// JSON array of residue vectors (bare integers for cyclic groups), or
    /// `@file.json`.
    #[arg(long)]
    pub requests: String,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Serve up to 2^(k-1) odd-weight requests with sets of size at most two.
    ServeOdd(KRequests),
    /// Serve up to 2^(k-1) requests lying outside the hyperplane u^perp.
    ServeAffine {
        #[command(flatten)]
        req: KRequests,
        /// Normal vector of the hyperplane as a bit array, e.g. `[1,0,1]`.
        #[arg(long)]
        u: String,
    },
    /// Serve exactly 2^(k-1) nonzero requests through a special service.
    ServeFunctional(KRequests),
    /// Build a service (or, with --special, search for a special service).
    GroupService {
        #[command(flatten)]
        req: GroupRequests,
        #[arg(long)]
        special: bool,
    },
    /// Build a service of length |G| whose x's and y's cover the group.
    FullService(GroupRequests),
    /// Check special-service existence for all or sampled sequences of length m.
    CheckStrong {
        #[arg(long)]
        group: String,
        #[arg(long)]
        m: usize,
        /// Sample this many sequences instead of enumerating all of them.
        #[arg(long)]
        random: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Allow exhaustive sweeps above the size guard.
        #[arg(long)]
        force: bool,
        /// Include a witness for every solved sequence.
        #[arg(long)]
        witnesses: bool,
    },
    /// Number a set X so that the sums x_i + r_i are pairwise distinct.
    Snevily {
        #[command(flatten)]
        req: GroupRequests,
        /// JSON array of group elements forming X, or `@file.json`.
        #[arg(long)]
        set: String,
    },
    /// Decide servability by exhaustive search (k <= 4).
    Oracle {
        #[command(flatten)]
        req: KRequests,
        #[arg(long)]
        max_size: Option<usize>,
    },
    /// Coefficient of an x-monomial in the Nullstellensatz polynomial f.
    Coeff {
        #[arg(long)]
        m: usize,
        /// Exponents e1,...,em.
        #[arg(long, value_delimiter = ',')]
        monomial: Vec<u32>,
        /// Also reduce the coefficient modulo this prime.
        #[arg(long = "mod")]
        modulus: Option<u64>,
        /// Concrete requests r1,...,rm (needed below the top degree).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        r: Option<Vec<i64>>,
    },
    /// Re-verify JSON emitted by a serving or service command.
    Verify {
        /// Input file; standard input when absent.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

/// Result of a command: JSON body and exit status.
pub struct Outcome {
    pub body: Value,
    pub code: u8,
}

impl Outcome {
    pub fn ok(body: Value) -> Self {
        Outcome { body, code: 0 }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::ParseGroup { .. } => "parse_group",
        Error::FactorTooSmall(_) => "factor_too_small",
        Error::GroupTooLarge { .. } => "group_too_large",
        Error::DimensionMismatch { .. } => "dimension_mismatch",
        Error::CoordinateOutOfRange { .. } => "coordinate_out_of_range",
        Error::IndexOutOfRange { .. } => "index_out_of_range",
        Error::Precondition(_) => "precondition",
        Error::InvalidInput(_) => "invalid_input",
        Error::Internal(_) => "internal",
        Error::BudgetExceeded { .. } => "budget_exceeded",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match commands::run(&cli.command) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            Outcome {
                body: json!({ "error": error_kind(&e), "detail": e.to_string() }),
                code: 2,
            }
        }
    };
    let mut body = outcome.body;
    if let Value::Object(map) = &mut body {
        map.insert("schema".into(), json!(1));
    }
    let text = serde_json::to_string(&body).expect("JSON values serialize") + "\n";
    let written = match &cli.out {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(outcome.code)
}
