use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "febvp",
    version,
    about = "Two-point boundary-value dependence maps, functional-law checks and geodesics",
    after_help = "The sampling seed defaults to $FEBVP_SEED when set. Exit codes: 0 ok, 1 usage or config error, 2 numeric failure."
)]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectionKind {
    Flat,
    #[value(name = "half_plane")]
    HalfPlane,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one boundary-value or initial-value problem and print (tau, x, v) rows.
    Solve(SolveArgs),
    /// Check functional laws on sampled inputs and print one report per law.
    Verify(VerifyArgs),
    /// Recover f(tau, x, v) from the extension S by finite differences.
    Reconstruct(ReconstructArgs),
    /// Evaluate G(a, b, rho) along the geodesic of a built-in connection.
    Geodesic(GeodesicArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct OdeArgs {
    /// Built-in equation: free_fall, conic, linear_basis, linear_zero, oscillator.
    #[arg(long, conflicts_with = "ode")]
    pub catalog: Option<String>,

    /// Right-hand side of one component in tau, x, v (x1.., v1.. for n > 1); repeat per component.
    #[arg(long = "ode", value_name = "EXPR", allow_hyphen_values = true)]
    pub ode: Vec<String>,

    /// Catalog override or expression parameter.
    #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_param, allow_hyphen_values = true)]
    pub params: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ToleranceArgs {
    #[arg(long)]
    pub newton_tol: Option<f64>,
    #[arg(long)]
    pub max_newton_iters: Option<usize>,
    #[arg(long)]
    pub jacobian_fd_step: Option<f64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SamplingArgs {
    /// Samples per law.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    pub tau_range: Option<Vec<f64>>,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    pub ab_range: Option<Vec<f64>>,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    pub alpha_beta_range: Option<Vec<f64>>,
    #[arg(long)]
    pub min_separation: Option<f64>,
    #[arg(long)]
    pub max_separation: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub ode: OdeArgs,

    /// Two-point conditions: ALPHA BETA A.. B..
    #[arg(long, num_args = 4.., value_name = "VALUES", allow_negative_numbers = true, conflicts_with_all = ["integral", "cauchy"])]
    pub neumann: Option<Vec<f64>>,

    /// Integral conditions: ALPHA BETA A.. V.. (mean velocity V over [alpha, beta]).
    #[arg(long, num_args = 3.., value_name = "VALUES", allow_negative_numbers = true, conflicts_with = "cauchy")]
    pub integral: Option<Vec<f64>>,

    /// Initial-value conditions: ALPHA A.. V..
    #[arg(long, num_args = 3.., value_name = "VALUES", allow_negative_numbers = true)]
    pub cauchy: Option<Vec<f64>>,

    /// Output abscissae; repeatable.
    #[arg(long, num_args = 1.., allow_negative_numbers = true)]
    pub tau: Vec<f64>,

    #[command(flatten)]
    pub tolerances: ToleranceArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub ode: OdeArgs,

    /// Comma-separated subset of composition, boundary, extension, lemma1, klapka, jensen, angelesco.
    #[arg(long, value_delimiter = ',')]
    pub laws: Vec<String>,

    /// Use the catalog entry's closed form instead of numeric shooting.
    #[arg(long)]
    pub closed_form: bool,

    /// Connection for klapka and jensen.
    #[arg(long, value_enum)]
    pub connection: Option<ConnectionKind>,

    /// Dimension of the flat connection.
    #[arg(long)]
    pub dim: Option<usize>,

    /// Per-law pass threshold on max_residual; repeatable.
    #[arg(long, value_name = "LAW=VALUE", value_parser = parse_param)]
    pub threshold: Vec<(String, f64)>,

    #[command(flatten)]
    pub sampling: SamplingArgs,

    #[command(flatten)]
    pub tolerances: ToleranceArgs,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub ode: OdeArgs,

    /// TAU,X..,V.. ; repeatable.
    #[arg(long, value_name = "TAU,X,V", allow_hyphen_values = true)]
    pub point: Vec<String>,

    /// Differentiate the closed-form S of the catalog entry.
    #[arg(long)]
    pub closed_form: bool,

    /// Base finite-difference step (raised to the solver noise level for numeric S).
    #[arg(long)]
    pub fd_step: Option<f64>,

    /// Pass threshold on abs_err when f is known.
    #[arg(long)]
    pub threshold: Option<f64>,

    #[command(flatten)]
    pub tolerances: ToleranceArgs,
}

#[derive(Debug, Args)]
pub struct GeodesicArgs {
    #[arg(long, value_enum)]
    pub connection: Option<ConnectionKind>,

    /// Dimension of the flat connection.
    #[arg(long)]
    pub dim: Option<usize>,

    /// Start point, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<String>,

    /// End point, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<String>,

    #[arg(long, num_args = 1.., allow_negative_numbers = true)]
    pub rho: Vec<f64>,

    #[command(flatten)]
    pub tolerances: ToleranceArgs,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got '{s}'"))?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|_| format!("'{}' is not a number", value.trim()))?;
    Ok((name.trim().to_string(), value))
}

/// Comma-separated reals.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("'{}' is not a number", p.trim())))
        .collect()
}
