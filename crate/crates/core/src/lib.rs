//! Dependence maps `F(tau, alpha, beta, a, b)` of two-point boundary-value
//! solutions of `x'' = f(tau, x, x')`, their smooth extension `S`, and
//! randomized checks of the functional equations they satisfy.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`.
//!
//! ```
//! use febvp::{Ode, NeumannConditions, ShootingConfig, ShootingEvaluator};
//!
//! let ode = Ode::new(1, "free_fall", |_, _, _, out: &mut [f64]| out[0] = -9.8);
//! let eval = ShootingEvaluator::new(ode, ShootingConfig::default());
//! let cond = NeumannConditions::new(0.0, 1.0, vec![0.0], vec![0.0]).unwrap();
//! let x = eval.eval_f(0.5, &cond).unwrap();
//! assert!((x[0] - 1.225).abs() < 1e-9);
//! ```

pub mod catalog;
pub mod closed_forms;
pub mod expr;
pub mod geodesics;
pub mod laws;
pub mod linalg;
pub mod ode;
pub mod quadrature;
pub mod reconstruction;
pub mod rng;
pub mod scalar;
pub mod shooting;

mod dopri;

use thiserror::Error;

pub use catalog::{CatalogError, CatalogOde};
pub use closed_forms::{ClosedForm, ClosedFormError, ConicParams, LinearBasis};
pub use expr::{EvalError, Expr, ParseError};
pub use geodesics::{Connection, GeodesicError, GeodesicMap};
pub use laws::{DependenceEvaluator, EvaluatorFailure, LawError, LawReport, SampleSpec};
pub use ode::{IntegratorConfig, OdeError, SecondOrderOde, StatePoint, Trajectory};
pub use reconstruction::{ReconstructionConfig, ReconstructionError};
pub use scalar::{Interval, Real};
pub use shooting::{
    IntegralConditions, NeumannConditions, ShootingConfig, ShootingError, ShootingEvaluator, ShootingResult,
};

/// Any error raised by this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Shooting(#[from] ShootingError),
    #[error(transparent)]
    ClosedForm(#[from] ClosedFormError),
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Reconstruction(#[from] ReconstructionError),
    #[error(transparent)]
    Geodesic(#[from] GeodesicError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

pub type Ode = SecondOrderOde<f64>;
pub type Neumann = NeumannConditions<f64>;
pub type Integral = IntegralConditions<f64>;
pub type Config = ShootingConfig<f64>;
pub type Integrator = IntegratorConfig<f64>;
pub type Evaluator = ShootingEvaluator<f64>;
pub type Samples = SampleSpec<f64>;
pub type Reconstruction = ReconstructionConfig<f64>;
pub type Geodesics = GeodesicMap<f64>;
