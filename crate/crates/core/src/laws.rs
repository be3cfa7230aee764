//! Randomized residual checks of the functional equations a dependence map
//! must satisfy: composition, boundary, extension and the equivalence of
//! two-point and integral (mean-velocity) conditions.
//!
//! Sample tuples are drawn sequentially from one [`SplitMix64`] stream, then
//! evaluated in parallel; aggregation runs in sample order, so reports depend
//! only on the seed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::closed_forms::{angelesco_relative_values, ClosedForm, ClosedFormError};
use crate::linalg::Matrix;
use crate::ode::{integrate_ivp, OdeError, SecondOrderOde, StatePoint, Trajectory};
use crate::quadrature;
use crate::rng::SplitMix64;
use crate::scalar::{diff_inf, norm_inf, Interval, Real};
use crate::shooting::{
    solve_neumann, NeumannConditions, ShootingConfig, ShootingError, ShootingEvaluator,
};

/// One evaluation that did not produce a finite value.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct EvaluatorFailure(pub String);

impl From<ShootingError> for EvaluatorFailure {
    fn from(e: ShootingError) -> Self {
        Self(e.to_string())
    }
}

impl From<ClosedFormError> for EvaluatorFailure {
    fn from(e: ClosedFormError) -> Self {
        Self(e.to_string())
    }
}

impl From<OdeError> for EvaluatorFailure {
    fn from(e: OdeError) -> Self {
        Self(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LawError {
    #[error("invalid sample spec: {0}")]
    InvalidSpec(String),
    #[error("evaluator {0} has no extension S")]
    MissingExtension(String),
}

/// Separation constraints on `(alpha, beta)` under which an evaluator is defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain<T> {
    pub min_separation: T,
    pub max_separation: Option<T>,
}

impl<T: Real> Default for Domain<T> {
    fn default() -> Self {
        Self {
            min_separation: T::zero(),
            max_separation: None,
        }
    }
}

/// An evaluable dependence map `F(tau, alpha, beta, a, b)`, optionally with
/// its extension `S(tau, alpha, beta, a, v)`.
pub trait DependenceEvaluator<T: Real>: Sync {
    fn dim(&self) -> usize;

    fn label(&self) -> String;

    fn eval_f(&self, tau: T, alpha: T, beta: T, a: &[T], b: &[T]) -> Result<Vec<T>, EvaluatorFailure>;

    fn has_extension(&self) -> bool {
        false
    }

    fn eval_s(&self, _tau: T, _alpha: T, _beta: T, _a: &[T], _v: &[T]) -> Result<Vec<T>, EvaluatorFailure> {
        Err(EvaluatorFailure(format!("{} has no extension", self.label())))
    }

    fn domain(&self) -> Domain<T> {
        Domain::default()
    }
}

impl<T: Real> DependenceEvaluator<T> for ShootingEvaluator<T> {
    fn dim(&self) -> usize {
        self.ode().dim()
    }

    fn label(&self) -> String {
        format!("shooting[{}]", self.ode().label())
    }

    fn eval_f(&self, tau: T, alpha: T, beta: T, a: &[T], b: &[T]) -> Result<Vec<T>, EvaluatorFailure> {
        let cond = NeumannConditions::new(alpha, beta, a.to_vec(), b.to_vec())?;
        Ok(ShootingEvaluator::eval_f(self, tau, &cond)?)
    }

    fn has_extension(&self) -> bool {
        true
    }

    fn eval_s(&self, tau: T, alpha: T, beta: T, a: &[T], v: &[T]) -> Result<Vec<T>, EvaluatorFailure> {
        Ok(ShootingEvaluator::eval_s(self, tau, alpha, beta, a, v)?)
    }
}

impl<T: Real> DependenceEvaluator<T> for ClosedForm<T> {
    fn dim(&self) -> usize {
        1
    }

    fn label(&self) -> String {
        ClosedForm::label(self)
    }

    fn eval_f(&self, tau: T, alpha: T, beta: T, a: &[T], b: &[T]) -> Result<Vec<T>, EvaluatorFailure> {
        scalar_args(a, b)?;
        Ok(vec![self.F(tau, alpha, beta, a[0], b[0])?])
    }

    fn has_extension(&self) -> bool {
        ClosedForm::has_extension(self)
    }

    fn eval_s(&self, tau: T, alpha: T, beta: T, a: &[T], v: &[T]) -> Result<Vec<T>, EvaluatorFailure> {
        scalar_args(a, v)?;
        self.S(tau, alpha, beta, a[0], v[0])
            .map(|s| vec![s])
            .ok_or_else(|| EvaluatorFailure(format!("{} has no extension", self.label())))
    }

    fn domain(&self) -> Domain<T> {
        match self {
            ClosedForm::CosSin => Domain {
                min_separation: T::zero(),
                max_separation: Some(T::lit(3.0)),
            },
            _ => Domain::default(),
        }
    }
}

fn scalar_args<T>(a: &[T], b: &[T]) -> Result<(), EvaluatorFailure> {
    if a.len() != 1 || b.len() != 1 {
        return Err(EvaluatorFailure("closed forms are scalar (n = 1)".into()));
    }
    Ok(())
}

/// What to sample and how many.
///
/// `a`, `b`, `v` components are drawn from `ab_range`, `tau` from
/// `tau_range`, and `alpha`, `beta` (and `gamma`, `delta`) from
/// `alpha_beta_range` subject to the separation bounds. With
/// `include_corner`, sample 0 uses the range endpoints as `(alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleSpec<T> {
    pub count: usize,
    pub seed: u64,
    pub tau_range: Interval<T>,
    pub ab_range: Interval<T>,
    pub alpha_beta_range: Interval<T>,
    pub min_separation: T,
    pub max_separation: Option<T>,
    pub include_corner: bool,
}

impl<T: Real> Default for SampleSpec<T> {
    fn default() -> Self {
        let unit = Interval::new(-T::one(), T::one());
        Self {
            count: 100,
            seed: 42,
            tau_range: unit,
            ab_range: unit,
            alpha_beta_range: unit,
            min_separation: T::lit(0.05),
            max_separation: None,
            include_corner: true,
        }
    }
}

impl<T: Real> SampleSpec<T> {
    pub fn new(count: usize, seed: u64) -> Self {
        Self {
            count,
            seed,
            ..Self::default()
        }
    }

    pub fn with_ranges(mut self, tau: Interval<T>, ab: Interval<T>, alpha_beta: Interval<T>) -> Self {
        self.tau_range = tau;
        self.ab_range = ab;
        self.alpha_beta_range = alpha_beta;
        self
    }

    pub fn validate(&self) -> Result<(), LawError> {
        let bad = |m: &str| Err(LawError::InvalidSpec(m.into()));
        if self.count < 1 {
            return bad("count must be at least 1");
        }
        if !(self.min_separation > T::zero()) {
            return bad("min_separation must be positive");
        }
        for (name, iv) in [
            ("tau_range", self.tau_range),
            ("ab_range", self.ab_range),
            ("alpha_beta_range", self.alpha_beta_range),
        ] {
            if !iv.is_valid() || !iv.lo.is_finite() || !iv.hi.is_finite() {
                return bad(&format!("{name} must be a finite interval with lo <= hi"));
            }
        }
        if let Some(max) = self.max_separation {
            if !(max >= self.min_separation) {
                return bad("max_separation must be at least min_separation");
            }
        }
        if self.alpha_beta_range.width() < self.min_separation {
            return bad("alpha_beta_range is narrower than min_separation");
        }
        Ok(())
    }

    pub(crate) fn sampler(&self, domain: Domain<T>) -> Result<Sampler<T>, LawError> {
        self.validate()?;
        let min_sep = self.min_separation.max(domain.min_separation);
        let max_sep = match (self.max_separation, domain.max_separation) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        if let Some(m) = max_sep {
            if m < min_sep {
                return Err(LawError::InvalidSpec(
                    "evaluator domain leaves no admissible separation".into(),
                ));
            }
        }
        if self.alpha_beta_range.width() < min_sep {
            return Err(LawError::InvalidSpec(
                "alpha_beta_range is narrower than the evaluator's min_separation".into(),
            ));
        }
        Ok(Sampler {
            spec: *self,
            rng: SplitMix64::new(self.seed),
            min_sep,
            max_sep,
        })
    }
}

pub(crate) struct Sampler<T> {
    spec: SampleSpec<T>,
    rng: SplitMix64,
    min_sep: T,
    max_sep: Option<T>,
}

impl<T: Real> Sampler<T> {
    pub(crate) fn count(&self) -> usize {
        self.spec.count
    }

    pub(crate) fn real(&mut self, iv: Interval<T>) -> T {
        T::lit(self.rng.uniform(iv.lo.as_f64(), iv.hi.as_f64()))
    }

    pub(crate) fn tau(&mut self) -> T {
        self.real(self.spec.tau_range)
    }

    pub(crate) fn unit(&mut self) -> T {
        T::lit(self.rng.next_f64())
    }

    pub(crate) fn vector(&mut self, n: usize) -> Vec<T> {
        (0..n).map(|_| self.real(self.spec.ab_range)).collect()
    }

    pub(crate) fn vector_in(&mut self, boxes: &[Interval<T>]) -> Vec<T> {
        boxes.iter().map(|iv| self.real(*iv)).collect()
    }

    fn admissible(&self, alpha: T, beta: T) -> bool {
        let sep = (beta - alpha).abs();
        sep >= self.min_sep && self.max_sep.is_none_or(|m| sep <= m)
    }

    /// `(alpha, beta)` within the separation bounds; the corner pair when
    /// `corner` is set and admissible.
    pub(crate) fn pair(&mut self, corner: bool) -> Result<(T, T), LawError> {
        let iv = self.spec.alpha_beta_range;
        if corner && self.spec.include_corner && self.admissible(iv.lo, iv.hi) {
            return Ok((iv.lo, iv.hi));
        }
        for _ in 0..10_000 {
            let alpha = self.real(iv);
            let beta = self.real(iv);
            if self.admissible(alpha, beta) {
                return Ok((alpha, beta));
            }
        }
        Err(LawError::InvalidSpec(
            "could not draw an (alpha, beta) pair within the separation bounds".into(),
        ))
    }
}

/// Aggregated residuals of one law over a sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawReport {
    pub law: String,
    pub samples: usize,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub worst_case: Option<Map<String, Value>>,
    pub failures: usize,
    /// Message of the first failed sample, for diagnostics.
    #[serde(skip)]
    pub first_failure: Option<String>,
}

impl LawReport {
    /// No failures and `max_residual <= threshold`.
    pub fn within(&self, threshold: f64) -> bool {
        self.failures == 0 && self.max_residual <= threshold
    }
}

/// Named arguments of one sample, recorded as the worst case.
#[derive(Debug, Clone)]
pub(crate) struct Args(Vec<(&'static str, Value)>);

impl Args {
    pub(crate) fn new() -> Self {
        Self(Vec::new())
    }

    pub(crate) fn scalar<T: Real>(mut self, name: &'static str, x: T) -> Self {
        self.0.push((name, number(x)));
        self
    }

    pub(crate) fn vector<T: Real>(mut self, name: &'static str, x: &[T]) -> Self {
        self.0.push((name, Value::Array(x.iter().map(|c| number(*c)).collect())));
        self
    }

    fn into_map(self) -> Map<String, Value> {
        self.0.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

fn number<T: Real>(x: T) -> Value {
    serde_json::Number::from_f64(x.as_f64()).map_or(Value::Null, Value::Number)
}

/// Evaluates `residual` on every sample in parallel and aggregates in order.
pub(crate) fn run_law<T, S, R>(law: &str, samples: &[S], args: impl Fn(&S) -> Args, residual: R) -> LawReport
where
    T: Real,
    S: Sync,
    R: Fn(&S) -> Result<T, EvaluatorFailure> + Sync,
{
    let outcomes: Vec<Result<f64, EvaluatorFailure>> = samples
        .par_iter()
        .map(|s| {
            let r = residual(s)?.as_f64();
            if r.is_finite() {
                Ok(r)
            } else {
                Err(EvaluatorFailure("non-finite residual".into()))
            }
        })
        .collect();
    aggregate(law, samples, args, outcomes)
}

fn aggregate<S>(
    law: &str,
    samples: &[S],
    args: impl Fn(&S) -> Args,
    outcomes: Vec<Result<f64, EvaluatorFailure>>,
) -> LawReport {
    let mut max = 0.0f64;
    let mut sum = 0.0f64;
    let mut ok = 0usize;
    let mut worst = None;
    let mut failures = 0;
    let mut first_failure = None;
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(r) => {
                if worst.is_none() || r > max {
                    max = r;
                    worst = Some(i);
                }
                sum += r;
                ok += 1;
            }
            Err(e) => {
                failures += 1;
                first_failure.get_or_insert(e.0);
            }
        }
    }
    LawReport {
        law: law.to_string(),
        samples: samples.len(),
        max_residual: max,
        mean_residual: if ok > 0 { (sum / ok as f64).min(max) } else { 0.0 },
        worst_case: worst.map(|i| args(&samples[i]).into_map()),
        failures,
        first_failure,
    }
}

struct CompositionSample<T> {
    tau: T,
    alpha: T,
    beta: T,
    gamma: T,
    delta: T,
    a: Vec<T>,
    b: Vec<T>,
}

/// `|F(tau,alpha,beta,a,b) - F(tau,gamma,delta,F(gamma,alpha,beta,a,b),F(delta,alpha,beta,a,b))|_inf`.
pub fn check_composition<T: Real>(
    f: &dyn DependenceEvaluator<T>,
    spec: &SampleSpec<T>,
) -> Result<LawReport, LawError> {
    let n = f.dim();
    let mut sampler = spec.sampler(f.domain())?;
    let mut samples = Vec::with_capacity(sampler.count());
    for i in 0..sampler.count() {
        let tau = sampler.tau();
        let (alpha, beta) = sampler.pair(i == 0)?;
        let (gamma, delta) = sampler.pair(false)?;
        let a = sampler.vector(n);
        let b = sampler.vector(n);
        samples.push(CompositionSample {
            tau,
            alpha,
            beta,
            gamma,
            delta,
            a,
            b,
        });
    }
    Ok(run_law(
        "composition",
        &samples,
        |s| {
            Args::new()
                .scalar("tau", s.tau)
                .scalar("alpha", s.alpha)
                .scalar("beta", s.beta)
                .scalar("gamma", s.gamma)
                .scalar("delta", s.delta)
                .vector("a", &s.a)
                .vector("b", &s.b)
        },
        |s| {
            let direct = f.eval_f(s.tau, s.alpha, s.beta, &s.a, &s.b)?;
            let c = f.eval_f(s.gamma, s.alpha, s.beta, &s.a, &s.b)?;
            let d = f.eval_f(s.delta, s.alpha, s.beta, &s.a, &s.b)?;
            let composed = f.eval_f(s.tau, s.gamma, s.delta, &c, &d)?;
            Ok(diff_inf(&direct, &composed))
        },
    ))
}

struct PairSample<T> {
    tau: T,
    alpha: T,
    beta: T,
    a: Vec<T>,
    b: Vec<T>,
}

fn pair_samples<T: Real>(
    sampler: &mut Sampler<T>,
    n: usize,
) -> Result<Vec<PairSample<T>>, LawError> {
    let mut samples = Vec::with_capacity(sampler.count());
    for i in 0..sampler.count() {
        let tau = sampler.tau();
        let (alpha, beta) = sampler.pair(i == 0)?;
        let a = sampler.vector(n);
        let b = sampler.vector(n);
        samples.push(PairSample { tau, alpha, beta, a, b });
    }
    Ok(samples)
}

fn pair_args<T: Real>(s: &PairSample<T>, second: &'static str) -> Args {
    Args::new()
        .scalar("tau", s.tau)
        .scalar("alpha", s.alpha)
        .scalar("beta", s.beta)
        .vector("a", &s.a)
        .vector(second, &s.b)
}

/// `max(|F(alpha,alpha,beta,a,b) - a|, |F(beta,alpha,beta,a,b) - b|)_inf`.
pub fn check_boundary<T: Real>(
    f: &dyn DependenceEvaluator<T>,
    spec: &SampleSpec<T>,
) -> Result<LawReport, LawError> {
    let mut sampler = spec.sampler(f.domain())?;
    let samples = pair_samples(&mut sampler, f.dim())?;
    Ok(run_law(
        "boundary",
        &samples,
        |s| {
            Args::new()
                .scalar("alpha", s.alpha)
                .scalar("beta", s.beta)
                .vector("a", &s.a)
                .vector("b", &s.b)
        },
        |s| {
            let at_alpha = f.eval_f(s.alpha, s.alpha, s.beta, &s.a, &s.b)?;
            let at_beta = f.eval_f(s.beta, s.alpha, s.beta, &s.a, &s.b)?;
            Ok(diff_inf(&at_alpha, &s.a).max(diff_inf(&at_beta, &s.b)))
        },
    ))
}

struct AngelescoSample<T> {
    pair: PairSample<T>,
    delta: T,
}

/// Angelesco identity along `t -> F(t, alpha, beta, a, b)`, per component,
/// relative to the squared spread of the five values (see
/// [`angelesco_relative`](crate::closed_forms::angelesco_relative)).
/// The step `delta` is drawn from `[0.05, 0.5]`.
pub fn check_angelesco<T: Real>(
    f: &dyn DependenceEvaluator<T>,
    spec: &SampleSpec<T>,
) -> Result<LawReport, LawError> {
    let mut sampler = spec.sampler(f.domain())?;
    let pairs = pair_samples(&mut sampler, f.dim())?;
    let steps = Interval::new(T::lit(0.05), T::lit(0.5));
    let samples: Vec<AngelescoSample<T>> = pairs
        .into_iter()
        .map(|pair| AngelescoSample {
            pair,
            delta: sampler.real(steps),
        })
        .collect();
    Ok(run_law(
        "angelesco",
        &samples,
        |s| pair_args(&s.pair, "b").scalar("delta", s.delta),
        |s| {
            let p = &s.pair;
            let mut vals = Vec::with_capacity(5);
            for m in 0..5 {
                let t = p.tau + T::lit(m as f64) * s.delta;
                vals.push(f.eval_f(t, p.alpha, p.beta, &p.a, &p.b)?);
            }
            let worst = (0..f.dim())
                .map(|i| angelesco_relative_values([vals[0][i], vals[1][i], vals[2][i], vals[3][i], vals[4][i]]))
                .fold(T::zero(), T::max);
            Ok(worst)
        },
    ))
}

/// Offsets `beta - alpha` probed by the diagonal continuity check.
pub const DIAGONAL_EPS: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Sample maxima at or below this level count as already converged when
/// judging monotonicity of the diagonal check.
pub const DIAGONAL_NOISE_FLOOR: f64 = 1e-9;

/// Result of [`check_extension`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionReport {
    /// `|S(tau,alpha,beta,a,v) - F(tau,alpha,beta,a,a+v(beta-alpha))|_inf`.
    pub off_diagonal: LawReport,
    /// `|S(tau,alpha,alpha+eps,a,v) - S(tau,alpha,alpha,a,v)|_inf` per entry of [`DIAGONAL_EPS`].
    pub diagonal: Vec<(f64, LawReport)>,
}

impl ExtensionReport {
    /// Each diagonal maximum is strictly below the previous one, or both sit
    /// under [`DIAGONAL_NOISE_FLOOR`].
    pub fn is_monotone(&self) -> bool {
        self.diagonal.windows(2).all(|w| {
            let (prev, next) = (w[0].1.max_residual, w[1].1.max_residual);
            next < prev || prev.max(next) <= DIAGONAL_NOISE_FLOOR
        })
    }

    pub fn failures(&self) -> usize {
        self.off_diagonal.failures + self.diagonal.iter().map(|(_, r)| r.failures).sum::<usize>()
    }

    pub fn reports(&self) -> Vec<LawReport> {
        std::iter::once(self.off_diagonal.clone())
            .chain(self.diagonal.iter().map(|(_, r)| r.clone()))
            .collect()
    }
}

struct DiagonalSample<T> {
    tau: T,
    alpha: T,
    a: Vec<T>,
    v: Vec<T>,
}

pub fn check_extension<T: Real>(
    f: &dyn DependenceEvaluator<T>,
    spec: &SampleSpec<T>,
) -> Result<ExtensionReport, LawError> {
    if !f.has_extension() {
        return Err(LawError::MissingExtension(f.label()));
    }
    let n = f.dim();
    let mut sampler = spec.sampler(f.domain())?;
    let samples = pair_samples(&mut sampler, n)?;
    let off_diagonal = run_law(
        "extension",
        &samples,
        |s| pair_args(s, "v"),
        |s| {
            let span = s.beta - s.alpha;
            let b: Vec<T> = s.a.iter().zip(&s.b).map(|(a, v)| *a + *v * span).collect();
            let ext = f.eval_s(s.tau, s.alpha, s.beta, &s.a, &s.b)?;
            let dep = f.eval_f(s.tau, s.alpha, s.beta, &s.a, &b)?;
            Ok(diff_inf(&ext, &dep))
        },
    );

    let mut diag_samples = Vec::with_capacity(sampler.count());
    for _ in 0..sampler.count() {
        let tau = sampler.tau();
        let alpha = sampler.real(spec.alpha_beta_range);
        let a = sampler.vector(n);
        let v = sampler.vector(n);
        diag_samples.push(DiagonalSample { tau, alpha, a, v });
    }
    let diagonal = DIAGONAL_EPS
        .iter()
        .map(|&eps| {
            let name = format!("extension_diagonal_{eps:e}");
            let report = run_law(
                &name,
                &diag_samples,
                |s| {
                    Args::new()
                        .scalar("tau", s.tau)
                        .scalar("alpha", s.alpha)
                        .scalar("eps", eps)
                        .vector("a", &s.a)
                        .vector("v", &s.v)
                },
                |s| {
                    let near = f.eval_s(s.tau, s.alpha, s.alpha + T::lit(eps), &s.a, &s.v)?;
                    let on = f.eval_s(s.tau, s.alpha, s.alpha, &s.a, &s.v)?;
                    Ok(diff_inf(&near, &on))
                },
            );
            (eps, report)
        })
        .collect();
    Ok(ExtensionReport {
        off_diagonal,
        diagonal,
    })
}

/// Number of evenly spaced points on `[alpha, beta]` where the two
/// trajectories of the equivalence check are compared.
pub const LEMMA1_POINTS: usize = 20;

/// Result of [`check_lemma1_equivalence`].
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    /// Largest state difference between the integral-condition and the
    /// two-point solutions.
    pub agreement: LawReport,
    /// `|integral_0^1 x'((1-g) alpha + g beta) dg - v|_inf` on the two-point solution.
    pub quadrature: LawReport,
}

impl EquivalenceReport {
    pub fn reports(&self) -> Vec<LawReport> {
        vec![self.agreement.clone(), self.quadrature.clone()]
    }
}

/// Solves `x(alpha) = a`, mean velocity `v` on `[alpha, beta]` directly:
/// Newton on the initial velocity with the mean velocity computed by
/// Gauss–Legendre quadrature of `x'` along the trajectory.
pub fn solve_integral_quadrature<T: Real>(
    ode: &SecondOrderOde<T>,
    alpha: T,
    beta: T,
    a: &[T],
    v: &[T],
    cfg: &ShootingConfig<T>,
) -> Result<Trajectory<T>, ShootingError> {
    cfg.validate()?;
    let n = ode.dim();
    if a.len() != n || v.len() != n {
        return Err(ShootingError::InvalidConditions(
            "a and v must match the ODE dimension".into(),
        ));
    }
    if alpha == beta {
        return Ok(integrate_ivp(ode, &StatePoint::new(alpha, a.to_vec(), v.to_vec()), alpha, &cfg.integrator)?);
    }
    let residual = |u: &[T]| -> Result<(Trajectory<T>, Vec<T>), ShootingError> {
        let traj = integrate_ivp(ode, &StatePoint::new(alpha, a.to_vec(), u.to_vec()), beta, &cfg.integrator)?;
        let mean = mean_velocity(&traj, alpha, beta)?;
        let r = mean.iter().zip(v).map(|(m, v)| *m - *v).collect();
        Ok((traj, r))
    };
    let mut u = v.to_vec();
    let (mut traj, mut r) = residual(&u)?;
    let scale = T::one().max(norm_inf(v));
    for iteration in 0..cfg.max_newton_iters {
        let mut jac = Matrix::zeros(n);
        for j in 0..n {
            let h = cfg.jacobian_fd_step * T::one().max(u[j].abs());
            let mut up = u.clone();
            up[j] = up[j] + h;
            let (_, rp) = residual(&up)?;
            let col: Vec<T> = rp.iter().zip(&r).map(|(p, q)| (*p - *q) / h).collect();
            jac.set_column(j, &col);
        }
        let lu = jac.lu().ok_or(ShootingError::ConjugatePoint {
            condition: f64::INFINITY,
            alpha: alpha.as_f64(),
            beta: beta.as_f64(),
        })?;
        let kappa = jac.norm_inf().max(T::one()) * lu.inverse().norm_inf();
        if !(kappa <= cfg.effective_cond_limit()) {
            return Err(ShootingError::ConjugatePoint {
                condition: kappa.as_f64(),
                alpha: alpha.as_f64(),
                beta: beta.as_f64(),
            });
        }
        if norm_inf(&r) <= T::lit(1e-2) * cfg.newton_tol * scale {
            return Ok(traj);
        }
        let step = lu.solve(&r);
        let mut accepted = false;
        let mut lambda = T::one();
        for _ in 0..=cfg.max_halvings {
            let trial: Vec<T> = u.iter().zip(&step).map(|(u, s)| *u - lambda * *s).collect();
            if let Ok((t, rt)) = residual(&trial) {
                if norm_inf(&rt) < norm_inf(&r) || !cfg.damping {
                    u = trial;
                    traj = t;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            lambda = lambda * T::lit(0.5);
        }
        if !accepted {
            // no further decrease: accept if already at the noise level
            if norm_inf(&r) <= cfg.newton_tol * scale {
                return Ok(traj);
            }
            return Err(ShootingError::NoConvergence {
                iterations: iteration + 1,
                residual: norm_inf(&r).as_f64(),
            });
        }
    }
    if norm_inf(&r) <= cfg.newton_tol * scale {
        return Ok(traj);
    }
    Err(ShootingError::NoConvergence {
        iterations: cfg.max_newton_iters,
        residual: norm_inf(&r).as_f64(),
    })
}

/// `integral_0^1 x'((1-g) alpha + g beta) dg` along `traj`.
pub fn mean_velocity<T: Real>(traj: &Trajectory<T>, alpha: T, beta: T) -> Result<Vec<T>, OdeError> {
    let n = traj.dim();
    let mut out = vec![T::zero(); n];
    for (j, slot) in out.iter_mut().enumerate() {
        *slot = quadrature::integrate(T::zero(), T::one(), |g| {
            let tau = (T::one() - g) * alpha + g * beta;
            Ok::<_, OdeError>(traj.eval(tau)?.v[j])
        })?;
    }
    Ok(out)
}

struct Lemma1Sample<T> {
    alpha: T,
    beta: T,
    a: Vec<T>,
    v: Vec<T>,
}

/// Compares the integral-condition solution with the two-point solution for
/// `b = a + v (beta - alpha)` at [`LEMMA1_POINTS`] points, and checks the
/// mean-velocity integral of the latter by quadrature.
pub fn check_lemma1_equivalence<T: Real>(
    ode: &SecondOrderOde<T>,
    spec: &SampleSpec<T>,
    cfg: &ShootingConfig<T>,
) -> Result<EquivalenceReport, LawError> {
    cfg.validate()
        .map_err(|e| LawError::InvalidSpec(e.to_string()))?;
    let n = ode.dim();
    let mut sampler = spec.sampler(Domain::default())?;
    let mut samples = Vec::with_capacity(sampler.count());
    for i in 0..sampler.count() {
        let (alpha, beta) = sampler.pair(i == 0)?;
        let a = sampler.vector(n);
        let v = sampler.vector(n);
        samples.push(Lemma1Sample { alpha, beta, a, v });
    }
    let args = |s: &Lemma1Sample<T>| {
        Args::new()
            .scalar("alpha", s.alpha)
            .scalar("beta", s.beta)
            .vector("a", &s.a)
            .vector("v", &s.v)
    };
    type Pair<T> = (T, T);
    let outcomes: Vec<Result<Pair<T>, EvaluatorFailure>> = samples
        .par_iter()
        .map(|s| {
            let span = s.beta - s.alpha;
            let b: Vec<T> = s.a.iter().zip(&s.v).map(|(a, v)| *a + *v * span).collect();
            let cond = NeumannConditions::new(s.alpha, s.beta, s.a.clone(), b)?;
            let two_point = solve_neumann(ode, &cond, cfg, None)?;
            let integral = solve_integral_quadrature(ode, s.alpha, s.beta, &s.a, &s.v, cfg)?;
            let mut agreement = T::zero();
            for k in 0..LEMMA1_POINTS {
                let frac = T::lit(k as f64 / (LEMMA1_POINTS - 1) as f64);
                let tau = if k == LEMMA1_POINTS - 1 { s.beta } else { s.alpha + frac * span };
                let p = two_point.trajectory.eval(tau)?;
                let q = integral.eval(tau)?;
                agreement = agreement.max(diff_inf(&p.x, &q.x)).max(diff_inf(&p.v, &q.v));
            }
            let mean = mean_velocity(&two_point.trajectory, s.alpha, s.beta)?;
            Ok((agreement, diff_inf(&mean, &s.v)))
        })
        .collect();
    let split = |pick: fn(&Pair<T>) -> T| -> Vec<Result<f64, EvaluatorFailure>> {
        outcomes
            .iter()
            .map(|o| match o {
                Ok(p) if pick(p).is_finite() => Ok(pick(p).as_f64()),
                Ok(_) => Err(EvaluatorFailure("non-finite residual".into())),
                Err(e) => Err(e.clone()),
            })
            .collect()
    };
    Ok(EquivalenceReport {
        agreement: aggregate("lemma1", &samples, args, split(|p| p.0)),
        quadrature: aggregate("lemma1_quadrature", &samples, args, split(|p| p.1)),
    })
}
