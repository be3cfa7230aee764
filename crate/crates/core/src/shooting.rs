//! Newton shooting for two-point ("Neumann") and integral boundary conditions.
//!
//! The dependence map `F(tau, alpha, beta, a, b)` is the value at `tau` of the
//! solution through `x(alpha) = a`, `x(beta) = b`. Its extension
//! `S(tau, alpha, beta, a, v)` reparametrizes the second condition by the mean
//! velocity `v` and stays defined on the diagonal `alpha == beta`, where it is
//! the Cauchy solution with `x'(alpha) = v`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use thiserror::Error;

use crate::dopri;
use crate::linalg::Matrix;
use crate::ode::{integrate_ivp, IntegratorConfig, OdeError, SecondOrderOde, StatePoint, Trajectory};
use crate::scalar::{norm_inf, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShootingError {
    /// The shooting Jacobian is numerically singular: the boundary data sit
    /// at (or next to) a conjugate point and the solution is not locally unique.
    #[error("conjugate point: shooting Jacobian singular (condition estimate {condition:e}) for alpha = {alpha}, beta = {beta}")]
    ConjugatePoint {
        condition: f64,
        alpha: f64,
        beta: f64,
    },
    #[error("Newton shooting did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("invalid boundary conditions: {0}")]
    InvalidConditions(String),
    #[error("invalid shooting config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Integrator(#[from] OdeError),
}

/// Two-point conditions `x(alpha) = a`, `x(beta) = b` with `alpha != beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeumannConditions<T> {
    pub alpha: T,
    pub beta: T,
    pub a: Vec<T>,
    pub b: Vec<T>,
}

impl<T: Real> NeumannConditions<T> {
    pub fn new(alpha: T, beta: T, a: Vec<T>, b: Vec<T>) -> Result<Self, ShootingError> {
        let cond = Self { alpha, beta, a, b };
        cond.validate()?;
        Ok(cond)
    }

    pub fn validate(&self) -> Result<(), ShootingError> {
        if self.a.len() != self.b.len() || self.a.is_empty() {
            return Err(ShootingError::InvalidConditions(format!(
                "a and b must be non-empty and of equal length (got {} and {})",
                self.a.len(),
                self.b.len()
            )));
        }
        let finite = self.alpha.is_finite()
            && self.beta.is_finite()
            && self.a.iter().chain(&self.b).all(|c| c.is_finite());
        if !finite {
            return Err(ShootingError::InvalidConditions("non-finite value".into()));
        }
        if (self.alpha - self.beta).abs() <= T::zero() {
            return Err(ShootingError::InvalidConditions(format!(
                "alpha and beta must differ (both {})",
                self.alpha
            )));
        }
        Ok(())
    }

    fn cache_key(&self) -> Vec<u64> {
        let mut key = Vec::with_capacity(2 + 2 * self.a.len());
        key.push(self.alpha.key_bits());
        key.push(self.beta.key_bits());
        key.extend(self.a.iter().chain(&self.b).map(|c| c.key_bits()));
        key
    }
}

/// `x(alpha) = a` and mean velocity `v` over `[alpha, beta]`; `alpha == beta`
/// degenerates to the Cauchy data `x'(alpha) = v`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralConditions<T> {
    pub alpha: T,
    pub beta: T,
    pub a: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Real> IntegralConditions<T> {
    pub fn new(alpha: T, beta: T, a: Vec<T>, v: Vec<T>) -> Result<Self, ShootingError> {
        let cond = Self { alpha, beta, a, v };
        cond.validate()?;
        Ok(cond)
    }

    pub fn validate(&self) -> Result<(), ShootingError> {
        if self.a.len() != self.v.len() || self.a.is_empty() {
            return Err(ShootingError::InvalidConditions(
                "a and v must be non-empty and of equal length".into(),
            ));
        }
        let finite = self.alpha.is_finite()
            && self.beta.is_finite()
            && self.a.iter().chain(&self.v).all(|c| c.is_finite());
        if !finite {
            return Err(ShootingError::InvalidConditions("non-finite value".into()));
        }
        Ok(())
    }

    /// The equivalent two-point data `b = a + v (beta - alpha)`, if off the diagonal.
    pub fn to_neumann(&self) -> Option<NeumannConditions<T>> {
        if self.alpha == self.beta {
            return None;
        }
        let span = self.beta - self.alpha;
        Some(NeumannConditions {
            alpha: self.alpha,
            beta: self.beta,
            a: self.a.clone(),
            b: mean_velocity_endpoint(&self.a, &self.v, span),
        })
    }
}

fn mean_velocity_endpoint<T: Real>(a: &[T], v: &[T], span: T) -> Vec<T> {
    a.iter().zip(v).map(|(a, v)| *a + *v * span).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingConfig<T> {
    /// Convergence threshold on `|x(beta) - b|_inf`.
    pub newton_tol: T,
    pub max_newton_iters: usize,
    /// Relative perturbation of the initial velocity for Jacobian columns.
    pub jacobian_fd_step: T,
    /// Halving line search on the residual norm.
    pub damping: bool,
    pub max_halvings: usize,
    /// Condition estimate above which the Jacobian counts as singular.
    /// Capped further by [`ShootingConfig::effective_cond_limit`].
    pub cond_limit: T,
    pub integrator: IntegratorConfig<T>,
}

impl<T: Real> Default for ShootingConfig<T> {
    fn default() -> Self {
        let eps = T::epsilon();
        Self {
            newton_tol: T::lit(1e-10).max(eps * T::lit(1000.0)),
            max_newton_iters: 50,
            jacobian_fd_step: T::lit(1e-6).max(eps.sqrt()),
            damping: true,
            max_halvings: 20,
            cond_limit: T::lit(1e12),
            integrator: IntegratorConfig::default(),
        }
    }
}

impl<T: Real> ShootingConfig<T> {
    pub fn validate(&self) -> Result<(), ShootingError> {
        if !(self.newton_tol > T::zero()) {
            return Err(ShootingError::InvalidConfig("newton_tol must be positive".into()));
        }
        if self.max_newton_iters == 0 {
            return Err(ShootingError::InvalidConfig(
                "max_newton_iters must be at least 1".into(),
            ));
        }
        if !(self.jacobian_fd_step > T::zero()) || !(self.cond_limit > T::one()) {
            return Err(ShootingError::InvalidConfig(
                "jacobian_fd_step must be positive and cond_limit above 1".into(),
            ));
        }
        self.integrator.validate()?;
        Ok(())
    }

    /// The Jacobian is only resolved to about `integrator.rel_tol`, so a
    /// condition estimate beyond `0.01 / rel_tol` cannot be told apart from
    /// a singular one.
    pub fn effective_cond_limit(&self) -> T {
        self.cond_limit.min(T::lit(0.01) / self.integrator.rel_tol)
    }

    /// Separation below which `S` switches to the Cauchy branch.
    pub fn diag_switch(alpha: T) -> T {
        T::lit(1e-8) * alpha.abs().max(T::one())
    }
}

/// Converged shooting solve.
#[derive(Debug, Clone)]
pub struct ShootingResult<T> {
    /// The solved initial velocity `u = x'(alpha)`.
    pub initial_velocity: Vec<T>,
    pub trajectory: Trajectory<T>,
    pub iterations: usize,
    pub final_residual: T,
    /// Scaled condition estimate of the last Jacobian (1 on the Cauchy branch).
    pub condition_estimate: T,
}

impl<T: Real> ShootingResult<T> {
    /// State at any `tau`, integrating past the solved span from its nearest end.
    pub fn state_at(
        &self,
        ode: &SecondOrderOde<T>,
        tau: T,
        cfg: &IntegratorConfig<T>,
    ) -> Result<StatePoint<T>, OdeError> {
        let traj = &self.trajectory;
        if traj.contains(tau) {
            return traj.eval(tau);
        }
        let (lo, hi) = traj.span();
        let from = if tau < lo { traj.eval(lo)? } else { traj.eval(hi)? };
        let ext = integrate_ivp(ode, &from, tau, cfg)?;
        ext.eval(tau)
    }
}

/// Solves `x'' = f` with `x(alpha) = a`, `x(beta) = b` by Newton iteration on
/// the initial velocity.
///
/// The default guess is the secant slope `(b - a) / (beta - alpha)`. The
/// Jacobian `d x(beta) / d u` is checked at every iterate, including the
/// converged one, so a non-unique solution is reported as
/// [`ShootingError::ConjugatePoint`] rather than returned.
pub fn solve_neumann<T: Real>(
    ode: &SecondOrderOde<T>,
    cond: &NeumannConditions<T>,
    cfg: &ShootingConfig<T>,
    guess: Option<&[T]>,
) -> Result<ShootingResult<T>, ShootingError> {
    cond.validate()?;
    cfg.validate()?;
    let n = ode.dim();
    if cond.a.len() != n {
        return Err(ShootingError::InvalidConditions(format!(
            "expected {n} components, got {}",
            cond.a.len()
        )));
    }
    let span = cond.beta - cond.alpha;
    let mut u: Vec<T> = match guess {
        Some(g) if g.len() == n => g.to_vec(),
        Some(g) => {
            return Err(ShootingError::InvalidConditions(format!(
                "guess has {} components, expected {n}",
                g.len()
            )))
        }
        None => cond
            .a
            .iter()
            .zip(&cond.b)
            .map(|(a, b)| (*b - *a) / span)
            .collect(),
    };

    let shoot = |u: &[T]| -> Result<(Trajectory<T>, Vec<T>), OdeError> {
        let start = StatePoint::new(cond.alpha, cond.a.clone(), u.to_vec());
        let traj = integrate_ivp(ode, &start, cond.beta, &cfg.integrator)?;
        let end = traj.end();
        let r = end.x.iter().zip(&cond.b).map(|(x, b)| *x - *b).collect();
        Ok((traj, r))
    };

    let (mut traj, mut r) = shoot(&u)?;
    let mut rnorm = norm_inf(&r);
    let mut iterations = 0;
    loop {
        let jac = shooting_jacobian(ode, cond, &u, cfg)?;
        let singular = |condition: T| ShootingError::ConjugatePoint {
            condition: condition.as_f64(),
            alpha: cond.alpha.as_f64(),
            beta: cond.beta.as_f64(),
        };
        let lu = match jac.lu() {
            Some(lu) if jac.is_finite() => lu,
            _ => return Err(singular(T::infinity())),
        };
        let condition = jac.norm_inf().max(span.abs()) * lu.inverse().norm_inf();
        if !condition.is_finite() || condition > cfg.effective_cond_limit() {
            return Err(singular(condition));
        }
        if rnorm <= cfg.newton_tol {
            return Ok(ShootingResult {
                initial_velocity: u,
                trajectory: traj,
                iterations,
                final_residual: rnorm,
                condition_estimate: condition,
            });
        }
        if iterations == cfg.max_newton_iters {
            return Err(ShootingError::NoConvergence {
                iterations,
                residual: rnorm.as_f64(),
            });
        }
        iterations += 1;

        let delta = lu.solve(&r);
        let mut lambda = T::one();
        let mut halvings = 0;
        loop {
            let trial: Vec<T> = u.iter().zip(&delta).map(|(u, d)| *u - lambda * *d).collect();
            match shoot(&trial) {
                Ok((t, rt)) => {
                    let nt = norm_inf(&rt);
                    if !cfg.damping || nt < rnorm || nt <= cfg.newton_tol {
                        u = trial;
                        traj = t;
                        r = rt;
                        rnorm = nt;
                        break;
                    }
                }
                Err(e) if !cfg.damping => return Err(e.into()),
                Err(_) => {}
            }
            halvings += 1;
            if halvings > cfg.max_halvings {
                return Err(ShootingError::NoConvergence {
                    iterations,
                    residual: rnorm.as_f64(),
                });
            }
            lambda = lambda * T::lit(0.5);
        }
    }
}

/// `d x(beta) / d u` by forward differences.
///
/// Column `j` perturbs `u_j` by `jacobian_fd_step * max(1, |u_j|)`. The
/// perturbed solutions are advanced on the same step sequence as the base
/// solution (the difference quotients ride along as extra state components),
/// so step-size adaptation does not leak into the quotients.
fn shooting_jacobian<T: Real>(
    ode: &SecondOrderOde<T>,
    cond: &NeumannConditions<T>,
    u: &[T],
    cfg: &ShootingConfig<T>,
) -> Result<Matrix<T>, OdeError> {
    let n = ode.dim();
    let m = 2 * n;
    let steps: Vec<T> = u
        .iter()
        .map(|uj| cfg.jacobian_fd_step * uj.abs().max(T::one()))
        .collect();

    let mut y0 = vec![T::zero(); m * (n + 1)];
    y0[..n].copy_from_slice(&cond.a);
    y0[n..m].copy_from_slice(u);
    for j in 0..n {
        // d/du_j of (x, v) at alpha is (0, e_j)
        y0[m * (j + 1) + n + j] = T::one();
    }

    let mut f0 = vec![T::zero(); n];
    let mut f1 = vec![T::zero(); n];
    let mut xp = vec![T::zero(); n];
    let mut vp = vec![T::zero(); n];
    let rhs = |t: T, y: &[T], dy: &mut [T]| -> Result<(), OdeError> {
        let (x, v) = (&y[..n], &y[n..m]);
        dy[..n].copy_from_slice(v);
        ode.eval_rhs_into(t, x, v, &mut f0)?;
        dy[n..m].copy_from_slice(&f0);
        for j in 0..n {
            let d = &y[m * (j + 1)..m * (j + 2)];
            let h = steps[j];
            for i in 0..n {
                xp[i] = x[i] + h * d[i];
                vp[i] = v[i] + h * d[n + i];
            }
            ode.eval_rhs_into(t, &xp, &vp, &mut f1)?;
            let out = &mut dy[m * (j + 1)..m * (j + 2)];
            out[..n].copy_from_slice(&d[n..]);
            for i in 0..n {
                out[n + i] = (f1[i] - f0[i]) / h;
            }
        }
        Ok(())
    };

    let sol = dopri::integrate_system(rhs, cond.alpha, &y0, cond.beta, &cfg.integrator, false)?;
    let mut jac = Matrix::zeros(n);
    for j in 0..n {
        jac.set_column(j, &sol.y_end[m * (j + 1)..m * (j + 1) + n]);
    }
    Ok(jac)
}

/// Solves the integral-condition problem: off the diagonal via the two-point
/// data `b = a + v (beta - alpha)`, on it as the Cauchy problem `u = v`.
pub fn solve_integral<T: Real>(
    ode: &SecondOrderOde<T>,
    cond: &IntegralConditions<T>,
    cfg: &ShootingConfig<T>,
) -> Result<ShootingResult<T>, ShootingError> {
    cond.validate()?;
    match cond.to_neumann() {
        Some(neumann) => solve_neumann(ode, &neumann, cfg, None),
        None => {
            cfg.validate()?;
            let start = StatePoint::new(cond.alpha, cond.a.clone(), cond.v.clone());
            let trajectory = integrate_ivp(ode, &start, cond.alpha, &cfg.integrator)?;
            Ok(ShootingResult {
                initial_velocity: cond.v.clone(),
                trajectory,
                iterations: 0,
                final_residual: T::zero(),
                condition_estimate: T::one(),
            })
        }
    }
}

/// `F(tau, alpha, beta, a, b)`; solves afresh on every call.
/// Use [`ShootingEvaluator`] for repeated evaluation.
pub fn eval_f<T: Real>(
    ode: &SecondOrderOde<T>,
    tau: T,
    cond: &NeumannConditions<T>,
    cfg: &ShootingConfig<T>,
) -> Result<Vec<T>, ShootingError> {
    let res = solve_neumann(ode, cond, cfg, None)?;
    Ok(res.state_at(ode, tau, &cfg.integrator)?.x)
}

/// `S(tau, alpha, beta, a, v)`; uncached, see [`ShootingEvaluator::eval_s`].
pub fn eval_s<T: Real>(
    ode: &SecondOrderOde<T>,
    tau: T,
    alpha: T,
    beta: T,
    a: &[T],
    v: &[T],
    cfg: &ShootingConfig<T>,
) -> Result<Vec<T>, ShootingError> {
    ShootingEvaluator::new(ode.clone(), *cfg)
        .without_cache()
        .eval_s(tau, alpha, beta, a, v)
}

type Cache<T> = RwLock<HashMap<Vec<u64>, Arc<ShootingResult<T>>>>;

/// Numeric dependence map of one ODE with a per-conditions result cache.
///
/// Cache keys are the exact bit patterns of `(alpha, beta, a, b)`, and solves
/// never warm-start from cached neighbors, so results do not depend on call
/// order.
pub struct ShootingEvaluator<T> {
    ode: SecondOrderOde<T>,
    cfg: ShootingConfig<T>,
    cache: Option<Cache<T>>,
}

impl<T: Real> ShootingEvaluator<T> {
    pub fn new(ode: SecondOrderOde<T>, cfg: ShootingConfig<T>) -> Self {
        Self {
            ode,
            cfg,
            cache: Some(RwLock::new(HashMap::new())),
        }
    }

    pub fn without_cache(mut self) -> Self {
        self.cache = None;
        self
    }

    pub fn ode(&self) -> &SecondOrderOde<T> {
        &self.ode
    }

    pub fn config(&self) -> &ShootingConfig<T> {
        &self.cfg
    }

    pub fn cached_solves(&self) -> usize {
        self.cache
            .as_ref()
            .map_or(0, |c| c.read().expect("cache lock").len())
    }

    pub fn solve(&self, cond: &NeumannConditions<T>) -> Result<Arc<ShootingResult<T>>, ShootingError> {
        let Some(cache) = &self.cache else {
            return Ok(Arc::new(solve_neumann(&self.ode, cond, &self.cfg, None)?));
        };
        let key = cond.cache_key();
        if let Some(hit) = cache.read().expect("cache lock").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let res = Arc::new(solve_neumann(&self.ode, cond, &self.cfg, None)?);
        cache
            .write()
            .expect("cache lock")
            .entry(key)
            .or_insert_with(|| Arc::clone(&res));
        Ok(res)
    }

    pub fn eval_f(&self, tau: T, cond: &NeumannConditions<T>) -> Result<Vec<T>, ShootingError> {
        let res = self.solve(cond)?;
        Ok(res.state_at(&self.ode, tau, &self.cfg.integrator)?.x)
    }

    pub fn eval_s(
        &self,
        tau: T,
        alpha: T,
        beta: T,
        a: &[T],
        v: &[T],
    ) -> Result<Vec<T>, ShootingError> {
        if a.len() != v.len() || a.len() != self.ode.dim() {
            return Err(ShootingError::InvalidConditions(
                "a and v must match the ODE dimension".into(),
            ));
        }
        let span = beta - alpha;
        if span.abs() <= ShootingConfig::diag_switch(alpha) {
            let start = StatePoint::new(alpha, a.to_vec(), v.to_vec());
            if !start.is_finite() || !tau.is_finite() {
                return Err(ShootingError::InvalidConditions("non-finite value".into()));
            }
            let traj = integrate_ivp(&self.ode, &start, tau, &self.cfg.integrator)?;
            return Ok(traj.eval(tau)?.x);
        }
        let cond = NeumannConditions::new(alpha, beta, a.to_vec(), mean_velocity_endpoint(a, v, span))?;
        self.eval_f(tau, &cond)
    }
}
