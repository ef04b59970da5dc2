use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "freelie", version, about = "Exact computations with relatively free Lie algebras and their automorphisms")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Emit a JSON report instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Omit the timestamp and timings so output is byte-identical across runs.
    #[arg(long, global = true)]
    pub reproducible: bool,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Run the randomized invariant suites behind this subcommand instead.
    #[arg(long, global = true)]
    pub selftest: bool,
    /// Random cases per property under --selftest.
    #[arg(long, global = true, default_value_t = 100)]
    pub cases: usize,
    /// Seed for --selftest and randomized suites.
    #[arg(long, global = true, default_value_t = 2024)]
    pub seed: u64,
    /// Lift the rank and degree caps (n <= 6, degree <= 9).
    #[arg(long, global = true)]
    pub allow_large: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlgebraArg {
    Free,
    Metabelian,
    #[value(name = "Cn")]
    Cn,
    #[value(name = "Rn")]
    Rn,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifySuite {
    #[value(name = "lemma-3.4")]
    Permutation,
    #[value(name = "lemma-3.6")]
    Kernel,
    #[value(name = "eq-3.23")]
    DegreeFive,
    #[value(name = "eq-3.24")]
    HigherDegree,
    #[value(name = "lemma-4.1")]
    Nested,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecompSuite {
    #[value(name = "eq-3.1")]
    SecondDerived,
    #[value(name = "lemma-3.3")]
    Kernel,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyArg {
    Phi,
    Omega,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeArg {
    Group,
    Lie,
    Both,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Evaluate a Lie expression such as "(b y1 (b y2 y3))" in a quotient algebra.
    Eval {
        #[arg(long)]
        expr: Option<String>,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, value_enum, default_value = "Rn")]
        algebra: AlgebraArg,
        #[arg(long, default_value_t = 6)]
        maxdeg: usize,
    },
    /// Verify a named identity suite, or "LHS = RHS" for two compositions.
    Verify {
        #[arg(long, value_enum)]
        suite: Option<VerifySuite>,
        #[arg(long)]
        expr: Option<String>,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        maxdeg: Option<usize>,
        #[arg(long, value_enum, default_value = "Rn")]
        algebra: AlgebraArg,
    },
    /// Compare the module generated by the two seed tuples with the whole kernel.
    Density {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
    },
    /// Dimension checks of module decompositions, or a Schur/LR computation.
    Decomp {
        #[arg(long, value_enum)]
        suite: Option<DecompSuite>,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long)]
        k: Option<usize>,
        /// Partition such as 3,2^2,1.
        #[arg(long)]
        lambda: Option<String>,
        /// Second tensor factor.
        #[arg(long)]
        mu: Option<String>,
        /// Determinant twist exponent.
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        det: i32,
    },
    /// Emit a non-tameness certificate.
    Nontame {
        #[arg(long, value_enum, default_value = "phi")]
        family: FamilyArg,
        #[arg(long)]
        kappa: Option<usize>,
        /// Defaults to Cn for phi and Rn for omega.
        #[arg(long, value_enum)]
        algebra: Option<AlgebraArg>,
    },
    /// Per-degree dimensions of a quotient algebra.
    Dims {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 6)]
        maxdeg: usize,
        #[arg(long, value_enum, default_value = "Rn")]
        algebra: AlgebraArg,
    },
}

impl Cmd {
    fn name(&self) -> &'static str {
        match self {
            Cmd::Eval { .. } => "eval",
            Cmd::Verify { .. } => "verify",
            Cmd::Density { .. } => "density",
            Cmd::Decomp { .. } => "decomp",
            Cmd::Nontame { .. } => "nontame",
            Cmd::Dims { .. } => "dims",
        }
    }
}

/// Outcome of a subcommand: `ok` drives the exit code.
pub struct Report {
    pub ok: bool,
    pub text: String,
    pub data: Value,
}

pub enum Failure {
    /// Bad flags or malformed input: exit 2.
    Usage(String),
    /// Computation error: exit 1.
    Runtime(String),
}

impl From<freelie::Error> for Failure {
    fn from(e: freelie::Error) -> Self {
        match e {
            freelie::Error::Parse(_) | freelie::Error::Precondition(_) | freelie::Error::IndexOutOfRange { .. } => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.common.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = if cli.common.selftest { commands::selftest(&cli.cmd, &cli.common) } else { commands::run(&cli.cmd, &cli.common) };
    match result {
        Ok(report) => {
            if cli.common.json {
                let mut out = json!({ "command": cli.cmd.name(), "ok": report.ok, "result": report.data });
                if !cli.common.reproducible {
                    let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
                    out["timestamp"] = json!(ts);
                }
                println!("{}", serde_json::to_string_pretty(&out).expect("values serialize"));
            } else {
                print!("{}", report.text);
            }
            if report.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
