use febvp::{CatalogError, GeodesicError, LawError, OdeError, ParseError, ReconstructionError, ShootingError};
use serde_json::{json, Map, Value};

/// Exit status for invalid flags, config files, or inputs.
pub const EXIT_CONFIG: u8 = 1;
/// Exit status for solver failures and breached thresholds.
pub const EXIT_NUMERIC: u8 = 2;

/// An error as printed on stderr: `{"code", "message", "context"}`.
#[derive(Debug, Clone)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
    pub context: Map<String, Value>,
    pub exit: u8,
}

impl CliError {
    pub fn config(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            context: Map::new(),
            exit: EXIT_CONFIG,
        }
    }

    pub fn numeric(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            exit: EXIT_NUMERIC,
            ..Self::config(code, message)
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.context.insert(key.to_string(), value.into());
        self
    }

    pub fn to_json(&self) -> Value {
        json!({
            "code": self.code,
            "message": self.message,
            "context": self.context,
        })
    }
}

impl From<ShootingError> for CliError {
    fn from(e: ShootingError) -> Self {
        let message = e.to_string();
        match e {
            ShootingError::ConjugatePoint { condition, alpha, beta } => CliError::numeric("conjugate_point", message)
                .with("alpha", alpha)
                .with("beta", beta)
                .with("condition", condition),
            ShootingError::NoConvergence { iterations, residual } => CliError::numeric("no_convergence", message)
                .with("iterations", iterations)
                .with("residual", residual),
            ShootingError::InvalidConditions(_) => CliError::config("invalid_conditions", message),
            ShootingError::InvalidConfig(_) => CliError::config("invalid_tolerances", message),
            ShootingError::Integrator(e) => e.into(),
        }
    }
}

impl From<OdeError> for CliError {
    fn from(e: OdeError) -> Self {
        let message = e.to_string();
        match e {
            OdeError::InvalidConfig(_) => CliError::config("invalid_tolerances", message),
            OdeError::InvalidState(_) => CliError::config("invalid_conditions", message),
            OdeError::RhsFailed { tau, .. } | OdeError::NonFiniteRhs { tau } => {
                CliError::numeric("evaluation_error", message).with("tau", tau)
            }
            OdeError::StepSizeUnderflow { tau, .. } | OdeError::MaxStepsExceeded { tau, .. } => {
                CliError::numeric("integrator_failure", message).with("tau", tau)
            }
            OdeError::OutOfSpan { tau, .. } => CliError::numeric("integrator_failure", message).with("tau", tau),
        }
    }
}

impl From<CatalogError> for CliError {
    fn from(e: CatalogError) -> Self {
        let message = e.to_string();
        match e {
            CatalogError::UnknownEntry { name } => CliError::config("unknown_catalog_entry", message)
                .with("name", name)
                .with("available", febvp::catalog::NAMES.to_vec()),
            CatalogError::UnknownParameter { entry, name, allowed } => CliError::config("unknown_parameter", message)
                .with("entry", entry)
                .with("name", name)
                .with("allowed", allowed),
            CatalogError::NonFiniteParameter { name } => {
                CliError::config("invalid_parameter", message).with("name", name)
            }
        }
    }
}

impl From<LawError> for CliError {
    fn from(e: LawError) -> Self {
        match e {
            LawError::InvalidSpec(_) => CliError::config("invalid_sampling", e.to_string()),
            LawError::MissingExtension(_) => CliError::config("missing_extension", e.to_string()),
        }
    }
}

impl From<ReconstructionError> for CliError {
    fn from(e: ReconstructionError) -> Self {
        let message = e.to_string();
        match e {
            ReconstructionError::InvalidConfig(_) => CliError::config("invalid_reconstruction", message),
            ReconstructionError::MidpointViolation { deviation } => {
                CliError::numeric("midpoint_violation", message).with("deviation", deviation)
            }
            ReconstructionError::EvaluationFailure { tau, .. } => {
                CliError::numeric("evaluation_error", message).with("tau", tau)
            }
        }
    }
}

impl From<GeodesicError> for CliError {
    fn from(e: GeodesicError) -> Self {
        match e {
            GeodesicError::Shooting(s) => s.into(),
            GeodesicError::DimensionMismatch { expected, got } => CliError::config("dimension_mismatch", e.to_string())
                .with("expected", expected)
                .with("got", got),
            GeodesicError::Asymmetric { .. } => CliError::config("asymmetric_connection", e.to_string()),
        }
    }
}

/// A parse error in `input`, with the offending position.
pub fn parse_error(e: ParseError, source: &str, input: &str) -> CliError {
    CliError::config("parse_error", format!("{source}: {e}"))
        .with("source", source)
        .with("input", input)
        .with("position", e.position)
        .with("expected", e.expected)
}
