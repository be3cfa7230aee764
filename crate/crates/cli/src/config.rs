//! JSON run configuration and its merge with command-line flags.
//!
//! ```json
//! {
//!   "ode": {"catalog": "conic", "params": {"k": 2.0}},
//!   "conditions": {"neumann": {"alpha": 0, "beta": 1, "a": [0], "b": [1]}},
//!   "taus": [0.25, 0.5],
//!   "sampling": {"count": 200, "alpha_beta_range": {"lo": -1, "hi": 1}},
//!   "tolerances": {"newton_tol": 1e-11},
//!   "output_format": "json",
//!   "seed": 7
//! }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use febvp::catalog::{self, CatalogOde};
use febvp::expr::{ode_from_exprs, Expr};
use febvp::{ClosedForm, Config, Interval, Ode, Samples};
use serde::Deserialize;

use crate::args::{ConnectionKind, Format, OdeArgs, SamplingArgs, ToleranceArgs};
use crate::error::{parse_error, CliError};

pub const SEED_ENV: &str = "FEBVP_SEED";
const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub ode: Option<OdeSource>,
    pub conditions: Option<Conditions>,
    pub taus: Option<Vec<f64>>,
    pub sampling: Option<Samples>,
    pub tolerances: Tolerances,
    pub output_format: Option<Format>,
    pub seed: Option<u64>,
    pub laws: Option<Vec<String>>,
    pub thresholds: BTreeMap<String, f64>,
    pub closed_form: Option<bool>,
    /// `[tau, x.., v..]` rows for reconstruct.
    pub points: Option<Vec<Vec<f64>>>,
    pub fd_step: Option<f64>,
    pub threshold: Option<f64>,
    pub connection: Option<ConnectionKind>,
    pub dim: Option<usize>,
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub rho: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdeSource {
    pub catalog: Option<String>,
    pub exprs: Option<Vec<String>>,
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Conditions {
    Neumann { alpha: f64, beta: f64, a: Vec<f64>, b: Vec<f64> },
    Integral { alpha: f64, beta: f64, a: Vec<f64>, v: Vec<f64> },
    Cauchy { alpha: f64, a: Vec<f64>, v: Vec<f64> },
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub newton_tol: Option<f64>,
    pub max_newton_iters: Option<usize>,
    pub jacobian_fd_step: Option<f64>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_steps: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::config("config_unreadable", format!("cannot read {}: {e}", path.display()))
                .with("path", path.display().to_string())
        })?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::config("config_invalid", format!("{}: {e}", path.display()))
                .with("path", path.display().to_string())
                .with("line", e.line())
                .with("column", e.column())
        })
    }
}

/// Seed precedence: flag, config file, `$FEBVP_SEED`, 42.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(raw) => raw.trim().parse().map_err(|_| {
            CliError::config("invalid_seed", format!("{SEED_ENV}='{raw}' is not an unsigned integer"))
                .with("variable", SEED_ENV)
                .with("value", raw)
        }),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

pub fn shooting_config(file: &Tolerances, flags: &ToleranceArgs) -> Result<Config, CliError> {
    let mut cfg = Config::default();
    if let Some(x) = flags.newton_tol.or(file.newton_tol) {
        cfg.newton_tol = x;
    }
    if let Some(x) = flags.max_newton_iters.or(file.max_newton_iters) {
        cfg.max_newton_iters = x;
    }
    if let Some(x) = flags.jacobian_fd_step.or(file.jacobian_fd_step) {
        cfg.jacobian_fd_step = x;
    }
    if let Some(x) = flags.rel_tol.or(file.rel_tol) {
        cfg.integrator.rel_tol = x;
    }
    if let Some(x) = flags.abs_tol.or(file.abs_tol) {
        cfg.integrator.abs_tol = x;
    }
    if let Some(x) = flags.max_steps.or(file.max_steps) {
        cfg.integrator.max_steps = x;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn sample_spec(file: Option<Samples>, flags: &SamplingArgs, seed: u64) -> Result<Samples, CliError> {
    let mut spec = file.unwrap_or_default();
    spec.seed = seed;
    if let Some(n) = flags.samples {
        spec.count = n;
    }
    let range = |v: &Vec<f64>| Interval::new(v[0], v[1]);
    if let Some(r) = &flags.tau_range {
        spec.tau_range = range(r);
    }
    if let Some(r) = &flags.ab_range {
        spec.ab_range = range(r);
    }
    if let Some(r) = &flags.alpha_beta_range {
        spec.alpha_beta_range = range(r);
    }
    if let Some(m) = flags.min_separation {
        spec.min_separation = m;
    }
    if let Some(m) = flags.max_separation {
        spec.max_separation = Some(m);
    }
    spec.validate()?;
    Ok(spec)
}

/// The equation to work on, with its closed form when it comes from the catalog.
pub struct ResolvedOde {
    pub ode: Ode,
    pub catalog: Option<CatalogOde<f64>>,
}

impl ResolvedOde {
    pub fn dim(&self) -> usize {
        self.ode.dim()
    }

    pub fn closed_form(&self) -> Result<&ClosedForm<f64>, CliError> {
        self.catalog
            .as_ref()
            .map(|c| &c.closed_form)
            .ok_or_else(|| CliError::config("no_closed_form", "closed forms are only available for --catalog equations"))
    }
}

/// Flags replace the file's source; parameters merge with flags winning.
pub fn resolve_ode(file: Option<&OdeSource>, flags: &OdeArgs) -> Result<Option<ResolvedOde>, CliError> {
    let mut params = file.map(|f| f.params.clone()).unwrap_or_default();
    for (k, v) in &flags.params {
        params.insert(k.clone(), *v);
    }
    let (catalog_name, exprs) = if flags.catalog.is_some() || !flags.ode.is_empty() {
        (flags.catalog.clone(), flags.ode.clone())
    } else if let Some(f) = file {
        (f.catalog.clone(), f.exprs.clone().unwrap_or_default())
    } else {
        (None, Vec::new())
    };
    match (catalog_name, exprs.is_empty()) {
        (Some(_), false) => Err(CliError::config(
            "conflicting_ode_source",
            "give either a catalog name or expressions, not both",
        )),
        (Some(name), true) => {
            let entry = catalog::lookup(&name, &params)?;
            Ok(Some(ResolvedOde {
                ode: entry.ode.clone(),
                catalog: Some(entry),
            }))
        }
        (None, false) => {
            let names: Vec<&str> = params.keys().map(String::as_str).collect();
            let dim = exprs.len();
            let mut parsed = Vec::with_capacity(dim);
            for (i, text) in exprs.iter().enumerate() {
                let e = Expr::parse(text, dim, &names).map_err(|e| parse_error(e, &format!("ode[{i}]"), text))?;
                parsed.push(e);
            }
            let label = exprs.join("; ");
            let values: Vec<f64> = params.values().copied().collect();
            Ok(Some(ResolvedOde {
                ode: ode_from_exprs(label, parsed, values),
                catalog: None,
            }))
        }
        (None, true) => Ok(None),
    }
}

pub fn require_ode(ode: Option<ResolvedOde>) -> Result<ResolvedOde, CliError> {
    ode.ok_or_else(|| CliError::config("missing_ode", "an equation is required: use --catalog NAME or --ode EXPR"))
}
