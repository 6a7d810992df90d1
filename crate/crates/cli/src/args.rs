use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "eom", version, about = "Bernstein Galerkin solver for Emden-Fowler equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem at one degree and print a summary.
    Solve(SolveArgs),
    /// Sweep a range of degrees in one or more modes and write report files.
    Sweep(SweepArgs),
    /// Print an operational matrix in exact rational arithmetic.
    Matrices(MatrixArgs),
    /// Tabulate the reference solution of a problem.
    Reference(ReferenceArgs),
    /// List the built-in problems.
    Problems,
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// Name of a built-in problem.
    #[arg(long, conflicts_with = "problem_file", required_unless_present = "problem_file")]
    pub problem: Option<String>,
    /// JSON problem description.
    #[arg(long, value_name = "PATH")]
    pub problem_file: Option<PathBuf>,
    /// Series degree for non-polynomial g.
    #[arg(long = "N", value_name = "N")]
    pub series_degree: Option<usize>,
    /// Domain truncation, overriding the problem default.
    #[arg(long = "M", value_name = "M")]
    pub truncation: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TextOrJson {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Basis degree.
    #[arg(long, default_value_t = 8)]
    pub m: usize,
    #[arg(long, default_value = "eom")]
    pub mode: String,
    /// Newton tolerance.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = TextOrJson::Text)]
    pub format: TextOrJson,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Degrees: `2..8`, `5`, or `2,4,6`.
    #[arg(long, default_value = "2..8")]
    pub m: String,
    /// Comma-separated modes.
    #[arg(long, default_value = "eom,oom")]
    pub modes: String,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Comma-separated output formats: csv, json, plotdata.
    #[arg(long, default_value = "csv,json,plotdata")]
    pub format: String,
    /// Write zero wall times so repeated runs give identical files.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatrixKind {
    /// Bernstein-to-monomial matrix A.
    A,
    /// Inverse of A.
    AInv,
    /// Differentiation matrix D.
    D,
    /// Integration matrix P.
    P,
    /// Galerkin matrix Q(big, small).
    Q,
    /// Degree-elevation matrix from m to m + gap.
    E,
    /// Shift matrices K and K'.
    K,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    #[arg(long, value_enum, ignore_case = true)]
    pub kind: MatrixKind,
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    /// Row degree of Q.
    #[arg(long)]
    pub big: Option<usize>,
    /// Column degree of Q.
    #[arg(long)]
    pub small: Option<usize>,
    /// Elevation gap for E, padding for K.
    #[arg(long, default_value_t = 1)]
    pub gap: usize,
    /// Print floats instead of exact rationals.
    #[arg(long)]
    pub float: bool,
}

#[derive(Debug, Args)]
pub struct ReferenceArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Number of table rows.
    #[arg(long, default_value_t = 21)]
    pub points: usize,
    /// Integrator tolerance when no closed form exists.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}
