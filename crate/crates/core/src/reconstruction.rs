//! Recovers the right-hand side `f(tau, x, v)` as the second `tau`-derivative
//! of the extension `S` on the diagonal, `S(tau, tau, tau, x, v)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::laws::{run_law, Args, DependenceEvaluator, Domain, EvaluatorFailure, LawError, LawReport, SampleSpec};
use crate::ode::SecondOrderOde;
use crate::scalar::{diff_inf, Real};
use crate::shooting::{ShootingConfig, ShootingEvaluator};

/// `|S(tau, tau, tau, x, v) - x|` above which `S` is rejected.
pub const MIDPOINT_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReconstructionError {
    #[error("S failed at tau = {tau}: {message}")]
    EvaluationFailure { tau: f64, message: String },
    #[error("S(tau, tau, tau, x, v) deviates from x by {deviation:e}")]
    MidpointViolation { deviation: f64 },
    #[error("invalid reconstruction config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconstructionConfig<T> {
    pub fd_step: T,
    /// Combine steps `h` and `h/2` into a fourth-order estimate.
    pub richardson: bool,
}

impl<T: Real> Default for ReconstructionConfig<T> {
    fn default() -> Self {
        Self {
            fd_step: T::lit(1e-3),
            richardson: true,
        }
    }
}

impl<T: Real> ReconstructionConfig<T> {
    pub fn validate(&self) -> Result<(), ReconstructionError> {
        if !(self.fd_step > T::zero()) || !self.fd_step.is_finite() {
            return Err(ReconstructionError::InvalidConfig(
                "fd_step must be positive and finite".into(),
            ));
        }
        Ok(())
    }

    /// Step for a numeric `S` with accuracy about `solver_tol`:
    /// `max(fd_step, solver_tol^(1/4))`.
    pub fn noise_aware_step(&self, solver_tol: T) -> T {
        self.fd_step.max(solver_tol.powf(T::lit(0.25)))
    }

    pub fn with_step(mut self, fd_step: T) -> Self {
        self.fd_step = fd_step;
        self
    }
}

/// `(tau, alpha, beta, a, v) -> S`.
pub trait Extension<T>: Fn(T, T, T, &[T], &[T]) -> Result<Vec<T>, EvaluatorFailure> + Sync {}

impl<T, F> Extension<T> for F where F: Fn(T, T, T, &[T], &[T]) -> Result<Vec<T>, EvaluatorFailure> + Sync {}

fn eval_at<T: Real>(s: &impl Extension<T>, t: T, tau: T, x: &[T], v: &[T]) -> Result<Vec<T>, ReconstructionError> {
    let out = s(t, tau, tau, x, v).map_err(|e| ReconstructionError::EvaluationFailure {
        tau: t.as_f64(),
        message: e.0,
    })?;
    if out.len() != x.len() || out.iter().any(|y| !y.is_finite()) {
        return Err(ReconstructionError::EvaluationFailure {
            tau: t.as_f64(),
            message: "non-finite or mis-sized value".into(),
        });
    }
    Ok(out)
}

/// Central second difference of `t -> S(t, tau, tau, x, v)` at `t = tau`,
/// Richardson-extrapolated when `cfg.richardson` is set.
pub fn reconstruct_f<T: Real>(
    s: &impl Extension<T>,
    tau: T,
    x: &[T],
    v: &[T],
    cfg: &ReconstructionConfig<T>,
) -> Result<Vec<T>, ReconstructionError> {
    cfg.validate()?;
    let mid = eval_at(s, tau, tau, x, v)?;
    let deviation = diff_inf(&mid, x);
    if !(deviation <= T::lit(MIDPOINT_LIMIT)) {
        return Err(ReconstructionError::MidpointViolation {
            deviation: deviation.as_f64(),
        });
    }
    let second_difference = |h: T| -> Result<Vec<T>, ReconstructionError> {
        let plus = eval_at(s, tau + h, tau, x, v)?;
        let minus = eval_at(s, tau - h, tau, x, v)?;
        let h2 = h * h;
        Ok(plus
            .iter()
            .zip(&minus)
            .zip(&mid)
            .map(|((p, m), c)| (*p - T::lit(2.0) * *c + *m) / h2)
            .collect())
    };
    let coarse = second_difference(cfg.fd_step)?;
    if !cfg.richardson {
        return Ok(coarse);
    }
    let fine = second_difference(cfg.fd_step * T::lit(0.5))?;
    let three = T::lit(3.0);
    Ok(fine
        .iter()
        .zip(&coarse)
        .map(|(f, c)| (T::lit(4.0) * *f - *c) / three)
        .collect())
}

/// Central first difference of `t -> S(t, alpha, alpha, a, v)` at `t = alpha`;
/// approximates `v`.
pub fn initial_slope<T: Real>(
    s: &impl Extension<T>,
    alpha: T,
    a: &[T],
    v: &[T],
    h: T,
) -> Result<Vec<T>, ReconstructionError> {
    let plus = eval_at(s, alpha + h, alpha, a, v)?;
    let minus = eval_at(s, alpha - h, alpha, a, v)?;
    let two_h = T::lit(2.0) * h;
    Ok(plus.iter().zip(&minus).map(|(p, m)| (*p - *m) / two_h).collect())
}

fn extension_of<T: Real>(f: &dyn DependenceEvaluator<T>) -> impl Extension<T> + '_ {
    move |t: T, alpha: T, beta: T, a: &[T], v: &[T]| f.eval_s(t, alpha, beta, a, v)
}

struct PointSample<T> {
    tau: T,
    x: Vec<T>,
    v: Vec<T>,
}

fn point_samples<T: Real>(spec: &SampleSpec<T>, n: usize) -> Result<Vec<PointSample<T>>, LawError> {
    let mut sampler = spec.sampler(Domain::default())?;
    Ok((0..spec.count)
        .map(|_| {
            let tau = sampler.tau();
            let x = sampler.vector(n);
            let v = sampler.vector(n);
            PointSample { tau, x, v }
        })
        .collect())
}

fn point_args<T: Real>(s: &PointSample<T>) -> Args {
    Args::new().scalar("tau", s.tau).vector("x", &s.x).vector("v", &s.v)
}

/// Reconstructs `f` from `f_map`'s extension at sampled `(tau, x, v)` and
/// compares with `truth`. `tau` comes from `tau_range`, `x` and `v` from
/// `ab_range`.
pub fn roundtrip_with<T: Real>(
    law: &str,
    f_map: &dyn DependenceEvaluator<T>,
    truth: impl Fn(T, &[T], &[T]) -> Result<Vec<T>, EvaluatorFailure> + Sync,
    cfg: &ReconstructionConfig<T>,
    spec: &SampleSpec<T>,
) -> Result<LawReport, LawError> {
    if !f_map.has_extension() {
        return Err(LawError::MissingExtension(f_map.label()));
    }
    cfg.validate().map_err(|e| LawError::InvalidSpec(e.to_string()))?;
    let samples = point_samples(spec, f_map.dim())?;
    let ext = extension_of(f_map);
    Ok(run_law(law, &samples, point_args, |s| {
        let got = reconstruct_f(&ext, s.tau, &s.x, &s.v, cfg).map_err(|e| EvaluatorFailure(e.to_string()))?;
        let want = truth(s.tau, &s.x, &s.v)?;
        Ok(diff_inf(&got, &want))
    }))
}

/// Builds `S` numerically for `ode`, reconstructs `f` and compares it with
/// the right-hand side. The step is raised to the noise-aware value for the
/// solver tolerance `max(newton_tol, rel_tol)`.
pub fn roundtrip_check<T: Real>(
    ode: &SecondOrderOde<T>,
    cfg: &ReconstructionConfig<T>,
    shooting_cfg: &ShootingConfig<T>,
    spec: &SampleSpec<T>,
) -> Result<LawReport, LawError> {
    shooting_cfg
        .validate()
        .map_err(|e| LawError::InvalidSpec(e.to_string()))?;
    let solver_tol = shooting_cfg.newton_tol.max(shooting_cfg.integrator.rel_tol);
    let numeric_cfg = cfg.with_step(cfg.noise_aware_step(solver_tol));
    let eval = ShootingEvaluator::new(ode.clone(), *shooting_cfg).without_cache();
    roundtrip_with(
        "reconstruct",
        &eval,
        |tau, x, v| Ok(ode.eval_rhs(tau, x, v)?),
        &numeric_cfg,
        spec,
    )
}

/// `|(S(alpha+h, alpha, alpha, a, v) - S(alpha-h, alpha, alpha, a, v)) / 2h - v|_inf`
/// over sampled `(alpha, a, v)`; `alpha` from `alpha_beta_range`.
pub fn check_initial_derivative<T: Real>(
    f_map: &dyn DependenceEvaluator<T>,
    spec: &SampleSpec<T>,
    h: T,
) -> Result<LawReport, LawError> {
    if !f_map.has_extension() {
        return Err(LawError::MissingExtension(f_map.label()));
    }
    let mut shifted = *spec;
    shifted.tau_range = spec.alpha_beta_range;
    let samples = point_samples(&shifted, f_map.dim())?;
    let ext = extension_of(f_map);
    Ok(run_law(
        "initial_derivative",
        &samples,
        |s| Args::new().scalar("alpha", s.tau).vector("a", &s.x).vector("v", &s.v),
        |s| {
            let slope = initial_slope(&ext, s.tau, &s.x, &s.v, h).map_err(|e| EvaluatorFailure(e.to_string()))?;
            Ok(diff_inf(&slope, &s.v))
        },
    ))
}

/// Reconstructs `f` at each point; points are evaluated in parallel and
/// returned in input order.
pub fn reconstruct_points<T: Real>(
    f_map: &dyn DependenceEvaluator<T>,
    points: &[(T, Vec<T>, Vec<T>)],
    cfg: &ReconstructionConfig<T>,
) -> Vec<Result<Vec<T>, ReconstructionError>> {
    let ext = extension_of(f_map);
    points
        .par_iter()
        .map(|(tau, x, v)| reconstruct_f(&ext, *tau, x, v, cfg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::{ClosedForm, ConicParams};
    use crate::scalar::Interval;

    fn closed_s(family: ClosedForm<f64>) -> impl Extension<f64> {
        move |t: f64, alpha: f64, beta: f64, a: &[f64], v: &[f64]| {
            Ok(vec![family.S(t, alpha, beta, a[0], v[0]).unwrap()])
        }
    }

    #[test]
    fn free_fall_is_exact() {
        let s = closed_s(ClosedForm::FreeFall { g: -9.8 });
        for (tau, x, v) in [(0.0, 0.0, 0.0), (0.7, -1.3, 2.0), (-3.0, 5.0, -4.0)] {
            let f = reconstruct_f(&s, tau, &[x], &[v], &ReconstructionConfig::default()).unwrap();
            assert!((f[0] + 9.8).abs() < 1e-7, "{f:?}");
        }
    }

    #[test]
    fn affine_extension_gives_zero() {
        let s = |t: f64, alpha: f64, _beta: f64, a: &[f64], v: &[f64]| Ok(vec![a[0] + v[0] * (t - alpha)]);
        let f = reconstruct_f(&s, 0.4, &[1.0], &[2.0], &ReconstructionConfig::default()).unwrap();
        assert!(f[0].abs() < 1e-9);
    }

    #[test]
    fn conic_extension() {
        let s = closed_s(ClosedForm::Conic(ConicParams::new(1.0, 0.0)));
        let f = reconstruct_f(&s, 0.0, &[2.0], &[0.0], &ReconstructionConfig::default()).unwrap();
        assert!((f[0] - 2.0).abs() < 1e-8, "{f:?}");
        let p = ConicParams::new(2.0, -2.0);
        let s = closed_s(ClosedForm::Conic(p));
        let f = reconstruct_f(&s, 0.3, &[0.5], &[-1.0], &ReconstructionConfig::default()).unwrap();
        assert!((f[0] - p.rhs(0.5)).abs() < 1e-8, "{f:?}");
    }

    #[test]
    fn second_order_convergence_without_richardson() {
        let p = ConicParams::new(1.0, 0.5);
        let s = closed_s(ClosedForm::Conic(p));
        let want = p.rhs(1.0);
        let err = |h: f64| {
            let cfg = ReconstructionConfig { fd_step: h, richardson: false };
            (reconstruct_f(&s, 0.2, &[1.0], &[0.3], &cfg).unwrap()[0] - want).abs()
        };
        let ratio = err(0.04) / err(0.02);
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn corrupted_extension_is_rejected() {
        let base = closed_s(ClosedForm::FreeFall { g: -9.8 });
        let shifted = move |t: f64, alpha: f64, beta: f64, a: &[f64], v: &[f64]| {
            Ok(base(t, alpha, beta, a, v)?.into_iter().map(|y| y + 0.01).collect())
        };
        let err = reconstruct_f(&shifted, 0.0, &[1.0], &[0.0], &ReconstructionConfig::default()).unwrap_err();
        assert!(matches!(err, ReconstructionError::MidpointViolation { deviation } if (deviation - 0.01).abs() < 1e-12));
    }

    #[test]
    fn failing_extension_is_reported() {
        let s = |t: f64, _: f64, _: f64, a: &[f64], _: &[f64]| {
            if t > 0.0 {
                Err(EvaluatorFailure("boom".into()))
            } else {
                Ok(a.to_vec())
            }
        };
        let err = reconstruct_f(&s, 0.0, &[1.0], &[0.0], &ReconstructionConfig::default()).unwrap_err();
        assert!(matches!(err, ReconstructionError::EvaluationFailure { .. }));
        let bad = ReconstructionConfig { fd_step: 0.0, richardson: true };
        assert!(reconstruct_f(&s, 0.0, &[1.0], &[0.0], &bad).is_err());
    }

    #[test]
    fn noise_aware_step() {
        let cfg = ReconstructionConfig::<f64>::default();
        assert!((cfg.noise_aware_step(1e-16) - 1e-3).abs() < 1e-18);
        assert!((cfg.noise_aware_step(1e-8) - 1e-2).abs() < 1e-15);
    }

    fn cube() -> SampleSpec<f64> {
        let iv = Interval::new(-1.0, 1.0);
        SampleSpec::new(25, 4).with_ranges(iv, iv, iv)
    }

    #[test]
    fn numeric_roundtrips() {
        let shooting = ShootingConfig::default();
        let cfg = ReconstructionConfig::default();
        let ff = SecondOrderOde::new(1, "free_fall", |_, _, _, out: &mut [f64]| out[0] = -9.8);
        let r = roundtrip_check(&ff, &cfg, &shooting, &cube()).unwrap();
        assert!(r.within(1e-6), "{r:?}");
        let zero = SecondOrderOde::new(1, "zero", |_, _, _, out: &mut [f64]| out[0] = 0.0);
        let r = roundtrip_check(&zero, &cfg, &shooting, &cube()).unwrap();
        assert!(r.within(1e-8), "{r:?}");
        let osc = SecondOrderOde::new(1, "oscillator", |_, x: &[f64], _, out: &mut [f64]| out[0] = -x[0]);
        let r = roundtrip_check(&osc, &cfg, &shooting, &cube()).unwrap();
        assert!(r.within(1e-4), "{r:?}");
    }

    #[test]
    fn initial_derivative_law() {
        let f = ClosedForm::Conic(ConicParams::new(2.0, 2.0));
        let r = check_initial_derivative(&f, &cube(), 1e-4).unwrap();
        assert!(r.within(1e-6), "{r:?}");
    }
}
