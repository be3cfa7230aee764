//! Second-order ODEs `x'' = f(tau, x, x')` and their initial-value problems.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::dopri::{self, Segment};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at tau = {tau} (h = {h:e}); stiff or blowing up")]
    StepSizeUnderflow { tau: f64, h: f64 },
    #[error("step budget of {max_steps} exhausted at tau = {tau}")]
    MaxStepsExceeded { tau: f64, max_steps: usize },
    #[error("right-hand side returned a non-finite value at tau = {tau}")]
    NonFiniteRhs { tau: f64 },
    #[error("right-hand side failed at tau = {tau}: {message}")]
    RhsFailed { tau: f64, message: String },
    #[error("tau = {tau} outside the integrated span [{lo}, {hi}]")]
    OutOfSpan { tau: f64, lo: f64, hi: f64 },
    #[error("invalid initial state: {0}")]
    InvalidState(String),
    #[error("invalid integrator config: {0}")]
    InvalidConfig(String),
}

/// Error reported by a fallible right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsError(pub String);

impl fmt::Display for RhsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

type RhsFn<T> = dyn Fn(T, &[T], &[T], &mut [T]) -> Result<(), RhsError> + Send + Sync;

/// A second-order system `x'' = f(tau, x, v)` with `x, v` in `R^n`.
#[derive(Clone)]
pub struct SecondOrderOde<T> {
    dim: usize,
    label: String,
    rhs: Arc<RhsFn<T>>,
}

impl<T> fmt::Debug for SecondOrderOde<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SecondOrderOde")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

impl<T: Real> SecondOrderOde<T> {
    /// Wraps an infallible right-hand side writing `f(tau, x, v)` into its last argument.
    pub fn new<F>(dim: usize, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(T, &[T], &[T], &mut [T]) + Send + Sync + 'static,
    {
        Self::try_new(dim, label, move |t, x, v, out| {
            f(t, x, v, out);
            Ok(())
        })
    }

    pub fn try_new<F>(dim: usize, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(T, &[T], &[T], &mut [T]) -> Result<(), RhsError> + Send + Sync + 'static,
    {
        assert!(dim >= 1, "ODE dimension must be at least 1");
        Self {
            dim,
            label: label.into(),
            rhs: Arc::new(f),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval_rhs_into(&self, tau: T, x: &[T], v: &[T], out: &mut [T]) -> Result<(), OdeError> {
        (self.rhs)(tau, x, v, out).map_err(|e| OdeError::RhsFailed {
            tau: tau.as_f64(),
            message: e.0,
        })?;
        if out.iter().any(|y| !y.is_finite()) {
            return Err(OdeError::NonFiniteRhs { tau: tau.as_f64() });
        }
        Ok(())
    }

    pub fn eval_rhs(&self, tau: T, x: &[T], v: &[T]) -> Result<Vec<T>, OdeError> {
        let mut out = vec![T::zero(); self.dim];
        self.eval_rhs_into(tau, x, v, &mut out)?;
        Ok(out)
    }

    /// First-order form on the stacked state `y = (x, v)`.
    pub(crate) fn first_order(&self, tau: T, y: &[T], dy: &mut [T]) -> Result<(), OdeError> {
        let n = self.dim;
        let (x, v) = y.split_at(n);
        dy[..n].copy_from_slice(v);
        self.eval_rhs_into(tau, x, v, &mut dy[n..])
    }
}

/// Position and velocity at time `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePoint<T> {
    pub tau: T,
    pub x: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Real> StatePoint<T> {
    pub fn new(tau: T, x: Vec<T>, v: Vec<T>) -> Self {
        Self { tau, x, v }
    }

    pub fn is_finite(&self) -> bool {
        self.tau.is_finite()
            && self.x.iter().all(|c| c.is_finite())
            && self.v.iter().all(|c| c.is_finite())
    }

    fn from_stacked(tau: T, y: Vec<T>, n: usize) -> Self {
        let mut x = y;
        let v = x.split_off(n);
        Self { tau, x, v }
    }

    fn stacked(&self) -> Vec<T> {
        let mut y = self.x.clone();
        y.extend_from_slice(&self.v);
        y
    }
}

/// Tolerances and budgets for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub h_init: T,
    pub h_min: T,
    pub max_steps: usize,
}

impl<T: Real> Default for IntegratorConfig<T> {
    /// `rel_tol = 1e-10`, `abs_tol = 1e-12` for `f64`; raised to a few
    /// hundred ulps for scalar types too coarse to honor those.
    fn default() -> Self {
        let eps = T::epsilon();
        Self {
            rel_tol: T::lit(1e-10).max(eps * T::lit(100.0)),
            abs_tol: T::lit(1e-12).max(eps * T::lit(10.0)),
            h_init: T::lit(1e-3),
            h_min: T::lit(1e-12),
            max_steps: 1_000_000,
        }
    }
}

impl<T: Real> IntegratorConfig<T> {
    pub fn validate(&self) -> Result<(), OdeError> {
        let positive = |name: &str, x: T| {
            if x > T::zero() && x.is_finite() {
                Ok(())
            } else {
                Err(OdeError::InvalidConfig(format!("{name} must be positive, got {x}")))
            }
        };
        positive("rel_tol", self.rel_tol)?;
        positive("abs_tol", self.abs_tol)?;
        positive("h_init", self.h_init)?;
        positive("h_min", self.h_min)?;
        if self.h_min > self.h_init {
            return Err(OdeError::InvalidConfig("h_min must not exceed h_init".into()));
        }
        if self.max_steps == 0 {
            return Err(OdeError::InvalidConfig("max_steps must be at least 1".into()));
        }
        Ok(())
    }

    /// Same config with both tolerances scaled by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            ..*self
        }
    }
}

/// Dense solution of an initial-value problem over a closed span.
///
/// Immutable once built; evaluation is `&self` and thread-safe.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    dim: usize,
    lo: T,
    hi: T,
    start: StatePoint<T>,
    /// ascending in time regardless of integration direction
    segments: Vec<Segment<T>>,
    ode_label: String,
}

impl<T: Real> Trajectory<T> {
    pub fn span(&self) -> (T, T) {
        (self.lo, self.hi)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ode_label(&self) -> &str {
        &self.ode_label
    }

    /// The initial state the trajectory was integrated from.
    pub fn start(&self) -> &StatePoint<T> {
        &self.start
    }

    /// State at the far end of the integration.
    pub fn end(&self) -> StatePoint<T> {
        let far = if self.start.tau == self.lo { self.hi } else { self.lo };
        self.eval(far).expect("endpoint inside span")
    }

    pub fn num_steps(&self) -> usize {
        self.segments.len()
    }

    /// Step boundaries in ascending order.
    pub fn knots(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        out.push(self.lo);
        out.extend(self.segments.iter().map(|s| s.hi()));
        out
    }

    pub fn contains(&self, tau: T) -> bool {
        self.lo <= tau && tau <= self.hi
    }

    /// Interpolated state at `tau`; knots return the stored states unchanged.
    pub fn eval(&self, tau: T) -> Result<StatePoint<T>, OdeError> {
        if !self.contains(tau) {
            return Err(OdeError::OutOfSpan {
                tau: tau.as_f64(),
                lo: self.lo.as_f64(),
                hi: self.hi.as_f64(),
            });
        }
        if self.segments.is_empty() || tau == self.start.tau {
            return Ok(StatePoint {
                tau,
                ..self.start.clone()
            });
        }
        let idx = self
            .segments
            .partition_point(|s| s.hi() < tau)
            .min(self.segments.len() - 1);
        let y = self.segments[idx].eval(tau);
        Ok(StatePoint::from_stacked(tau, y, self.dim))
    }
}

/// Solves `x'' = f`, `x(start.tau) = start.x`, `x'(start.tau) = start.v` up to
/// `tau_end`, integrating backward when `tau_end < start.tau`.
pub fn integrate_ivp<T: Real>(
    ode: &SecondOrderOde<T>,
    start: &StatePoint<T>,
    tau_end: T,
    config: &IntegratorConfig<T>,
) -> Result<Trajectory<T>, OdeError> {
    config.validate()?;
    let n = ode.dim();
    if start.x.len() != n || start.v.len() != n {
        return Err(OdeError::InvalidState(format!(
            "expected {n} position and velocity components, got {} and {}",
            start.x.len(),
            start.v.len()
        )));
    }
    if !start.is_finite() || !tau_end.is_finite() {
        return Err(OdeError::InvalidState("non-finite start or end".into()));
    }

    let sol = dopri::integrate_system(
        |t, y, dy| ode.first_order(t, y, dy),
        start.tau,
        &start.stacked(),
        tau_end,
        config,
        true,
    )?;
    let mut segments = sol.segments;
    if tau_end < start.tau {
        segments.reverse();
    }
    Ok(Trajectory {
        dim: n,
        lo: start.tau.min(tau_end),
        hi: start.tau.max(tau_end),
        start: start.clone(),
        segments,
        ode_label: ode.label().to_string(),
    })
}

/// Dense-output evaluation; see [`Trajectory::eval`].
pub fn eval_trajectory<T: Real>(traj: &Trajectory<T>, tau: T) -> Result<StatePoint<T>, OdeError> {
    traj.eval(tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn free_fall() -> SecondOrderOde<f64> {
        SecondOrderOde::new(1, "free_fall", |_, _, _, out: &mut [f64]| out[0] = -9.8)
    }

    fn oscillator() -> SecondOrderOde<f64> {
        SecondOrderOde::new(1, "oscillator", |_, x: &[f64], _, out| out[0] = -x[0])
    }

    fn start(tau: f64, x: f64, v: f64) -> StatePoint<f64> {
        StatePoint::new(tau, vec![x], vec![v])
    }

    #[test]
    fn constant_acceleration() {
        let traj = integrate_ivp(&free_fall(), &start(0.0, 0.0, 1.0), 1.0, &Default::default())
            .unwrap();
        let end = traj.eval(1.0).unwrap();
        assert!((end.x[0] - -3.9).abs() < 1e-12);
        assert!((end.v[0] - -8.8).abs() < 1e-12);
        let mid = traj.eval(0.5).unwrap();
        assert!((mid.x[0] - -0.725).abs() < 1e-12);
    }

    #[test]
    fn zero_width() {
        let s = start(0.3, 1.0, 2.0);
        let traj = integrate_ivp(&oscillator(), &s, 0.3, &Default::default()).unwrap();
        assert_eq!(traj.span(), (0.3, 0.3));
        assert_eq!(traj.eval(0.3).unwrap(), s);
        assert!(traj.eval(0.4).is_err());
    }

    #[test]
    fn sine_quarter_period() {
        let traj =
            integrate_ivp(&oscillator(), &start(0.0, 0.0, 1.0), PI / 2.0, &Default::default())
                .unwrap();
        let end = traj.eval(PI / 2.0).unwrap();
        assert!((end.x[0] - 1.0).abs() < 1e-9);
        assert!(end.v[0].abs() < 1e-9);
    }

    #[test]
    fn straight_line_dense_output() {
        let ode = SecondOrderOde::new(1, "zero", |_, _, _, out: &mut [f64]| out[0] = 0.0);
        let traj = integrate_ivp(&ode, &start(0.0, 2.0, 3.0), 1.0, &Default::default()).unwrap();
        let p = eval_trajectory(&traj, 0.5).unwrap();
        assert!((p.x[0] - 3.5).abs() < 1e-14);
        assert!((p.v[0] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn endpoints_are_stored_states() {
        let traj =
            integrate_ivp(&oscillator(), &start(0.0, 0.2, -1.0), -2.0, &Default::default())
                .unwrap();
        assert_eq!(traj.span(), (-2.0, 0.0));
        assert_eq!(traj.eval(0.0).unwrap().x, vec![0.2]);
        let far = traj.end();
        assert_eq!(far.tau, -2.0);
        let knots = traj.knots();
        assert_eq!(knots.first(), Some(&-2.0));
        assert_eq!(knots.last(), Some(&0.0));
        assert!(knots.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn continuity_at_knots() {
        let cfg = IntegratorConfig::default();
        let traj = integrate_ivp(&oscillator(), &start(0.0, 1.0, 0.0), 10.0, &cfg).unwrap();
        for s in traj.segments.windows(2) {
            let left = s[0].eval_theta(1.0);
            let right = s[1].eval(s[1].t_a);
            for (l, r) in left.iter().zip(&right) {
                assert!((l - r).abs() <= 10.0 * cfg.abs_tol);
            }
        }
    }

    #[test]
    fn rejects_mismatched_state() {
        let err = integrate_ivp(
            &oscillator(),
            &StatePoint::new(0.0, vec![1.0, 2.0], vec![0.0]),
            1.0,
            &Default::default(),
        )
        .unwrap_err();
        assert!(matches!(err, OdeError::InvalidState(_)));
    }

    #[test]
    fn config_validation() {
        let bad = IntegratorConfig {
            h_min: 1.0,
            h_init: 0.1,
            ..IntegratorConfig::<f64>::default()
        };
        assert!(bad.validate().is_err());
        let bad = IntegratorConfig {
            rel_tol: 0.0,
            ..IntegratorConfig::<f64>::default()
        };
        assert!(bad.validate().is_err());
        assert!(IntegratorConfig::<f64>::default().validate().is_ok());
    }

    #[test]
    fn single_precision_free_fall() {
        let ode = SecondOrderOde::new(1, "free_fall32", |_, _, _, out: &mut [f32]| out[0] = -9.8);
        let traj = integrate_ivp(
            &ode,
            &StatePoint::new(0.0f32, vec![0.0], vec![1.0]),
            1.0,
            &Default::default(),
        )
        .unwrap();
        assert!((traj.end().x[0] + 3.9).abs() < 1e-5);
    }

    #[test]
    fn fallible_rhs_propagates() {
        let ode = SecondOrderOde::try_new(1, "bad", |_, x: &[f64], _, out| {
            if x[0] > 0.5 {
                Err(RhsError("outside domain".into()))
            } else {
                out[0] = 0.0;
                Ok(())
            }
        });
        let err = integrate_ivp(&ode, &start(0.0, 0.0, 1.0), 1.0, &Default::default())
            .unwrap_err();
        assert!(matches!(err, OdeError::RhsFailed { .. }));
    }
}
