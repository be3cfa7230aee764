//! Closed-form dependence maps and identities: the linear family built from a
//! solution basis, free fall, the conic family `x'' = k^2 x + g`, and the
//! Angelesco five-point identity.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClosedFormError {
    #[error("degenerate basis: x1(alpha) x2(beta) - x1(beta) x2(alpha) = {wronskian:e} for alpha = {alpha}, beta = {beta}")]
    DegenerateBasis {
        wronskian: f64,
        alpha: f64,
        beta: f64,
    },
}

type ScalarFn<T> = dyn Fn(T) -> T + Send + Sync;

/// Two functions spanning the solutions of a scalar linear second-order ODE.
#[derive(Clone)]
pub struct LinearBasis<T> {
    x1: Arc<ScalarFn<T>>,
    x2: Arc<ScalarFn<T>>,
    labels: [String; 2],
}

impl<T> fmt::Debug for LinearBasis<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearBasis")
            .field("labels", &self.labels)
            .finish_non_exhaustive()
    }
}

impl<T: Real> LinearBasis<T> {
    pub fn new(
        label1: impl Into<String>,
        x1: impl Fn(T) -> T + Send + Sync + 'static,
        label2: impl Into<String>,
        x2: impl Fn(T) -> T + Send + Sync + 'static,
    ) -> Self {
        Self {
            x1: Arc::new(x1),
            x2: Arc::new(x2),
            labels: [label1.into(), label2.into()],
        }
    }

    /// Solutions of `x'' = -x`.
    pub fn cos_sin() -> Self {
        Self::new("cos", T::cos, "sin", T::sin)
    }

    /// Solutions of `x'' = 0`.
    pub fn affine() -> Self {
        Self::new("1", |_| T::one(), "tau", |t| t)
    }

    pub fn labels(&self) -> (&str, &str) {
        (&self.labels[0], &self.labels[1])
    }

    pub fn x1(&self, tau: T) -> T {
        (self.x1)(tau)
    }

    pub fn x2(&self, tau: T) -> T {
        (self.x2)(tau)
    }

    /// `x1(alpha) x2(beta) - x1(beta) x2(alpha)`.
    pub fn wronskian(&self, alpha: T, beta: T) -> T {
        self.x1(alpha) * self.x2(beta) - self.x1(beta) * self.x2(alpha)
    }

    /// Errors when the two-point problem on `[alpha, beta]` is not uniquely
    /// solvable in this basis. The test is relative to the size of the two
    /// products being subtracted.
    pub fn check_nondegenerate(&self, alpha: T, beta: T) -> Result<T, ClosedFormError> {
        let p = self.x1(alpha) * self.x2(beta);
        let q = self.x1(beta) * self.x2(alpha);
        let w = p - q;
        let scale = p.abs().max(q.abs()).max(T::one());
        if w.abs() <= T::lit(1e-14) * scale || !w.is_finite() {
            return Err(ClosedFormError::DegenerateBasis {
                wronskian: w.as_f64(),
                alpha: alpha.as_f64(),
                beta: beta.as_f64(),
            });
        }
        Ok(w)
    }
}

/// Dependence map of the linear family spanned by `basis`.
#[allow(non_snake_case)]
pub fn linear_F<T: Real>(
    basis: &LinearBasis<T>,
    tau: T,
    alpha: T,
    beta: T,
    a: T,
    b: T,
) -> Result<T, ClosedFormError> {
    let w = basis.check_nondegenerate(alpha, beta)?;
    let (x1t, x2t) = (basis.x1(tau), basis.x2(tau));
    let (x1a, x2a) = (basis.x1(alpha), basis.x2(alpha));
    let (x1b, x2b) = (basis.x1(beta), basis.x2(beta));
    Ok(((x1t * x2b - x1b * x2t) * a + (x1a * x2t - x1t * x2a) * b) / w)
}

/// Determinant of the rows `(x1, x2, value)` at `alpha`, `beta`, `tau` with
/// values `a`, `b`, `f_val`. Vanishes exactly when `f_val` lies in the span.
pub fn neuman_det<T: Real>(
    basis: &LinearBasis<T>,
    tau: T,
    alpha: T,
    beta: T,
    a: T,
    b: T,
    f_val: T,
) -> T {
    let (p, q) = (basis.x1(alpha), basis.x2(alpha));
    let (r, s) = (basis.x1(beta), basis.x2(beta));
    let (t, u) = (basis.x1(tau), basis.x2(tau));
    a * (r * u - s * t) - b * (p * u - q * t) + f_val * (p * s - q * r)
}

/// `F` for `x'' = g`.
#[allow(non_snake_case)]
pub fn free_fall_F<T: Real>(g: T, tau: T, alpha: T, beta: T, a: T, b: T) -> T {
    // weight form of ((tau-beta) a + (alpha-tau) b) / (alpha-beta), exact at both ends
    let w = (tau - alpha) / (beta - alpha);
    (T::one() - w) * a + w * b + T::lit(0.5) * g * (tau - alpha) * (tau - beta)
}

/// Extension `S` for `x'' = g`, defined on the diagonal as well.
#[allow(non_snake_case)]
pub fn free_fall_S<T: Real>(g: T, tau: T, alpha: T, beta: T, a: T, v: T) -> T {
    a + v * (tau - alpha) + T::lit(0.5) * g * (tau - alpha) * (tau - beta)
}

/// `|k (beta - alpha)|` below which [`conic_F`] uses its series branch.
pub const SERIES_SWITCH: f64 = 1e-4;

/// Parameters of `x'' = k^2 x + g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConicParams<T> {
    pub k: T,
    pub g: T,
}

impl<T: Real> ConicParams<T> {
    pub fn new(k: T, g: T) -> Self {
        Self { k, g }
    }

    /// `K = k^2`, computed through `powf` like a parsed `k^2`. The exponent
    /// is opaque to the optimizer, which would otherwise emit `k * k`.
    pub fn stiffness(&self) -> T {
        self.k.powf(std::hint::black_box(T::lit(2.0)))
    }

    /// The right-hand side `K x + g`.
    pub fn rhs(&self, x: T) -> T {
        self.stiffness() * x + self.g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConicBranch {
    Hyperbolic,
    Series,
}

impl ConicBranch {
    pub fn select<T: Real>(k: T, alpha: T, beta: T) -> Self {
        if (k * (beta - alpha)).abs() >= T::lit(SERIES_SWITCH) {
            ConicBranch::Hyperbolic
        } else {
            ConicBranch::Series
        }
    }
}

/// `F` for the conic family `x'' = k^2 x + g`.
///
/// The quotient of hyperbolic sines is evaluated in product form
/// (`sinh p + sinh q - sinh(p + q) = -4 sinh(p/2) sinh(q/2) sinh((p+q)/2)`),
/// which removes the `g / k^2` cancellation. Below [`SERIES_SWITCH`] the
/// hyperbolic functions are replaced by their expansions through `k^4`,
/// whose leading term is [`free_fall_F`].
#[allow(non_snake_case)]
pub fn conic_F<T: Real>(p: &ConicParams<T>, tau: T, alpha: T, beta: T, a: T, b: T) -> T {
    conic_F_branch(p, ConicBranch::select(p.k, alpha, beta), tau, alpha, beta, a, b)
}

/// [`conic_F`] with an explicit branch.
#[allow(non_snake_case)]
pub fn conic_F_branch<T: Real>(
    p: &ConicParams<T>,
    branch: ConicBranch,
    tau: T,
    alpha: T,
    beta: T,
    a: T,
    b: T,
) -> T {
    let k = p.k;
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    // s(z) = sinh(k z) / k, and cosh
    let (s, ch): (Box<dyn Fn(T) -> T>, Box<dyn Fn(T) -> T>) = match branch {
        ConicBranch::Hyperbolic => (
            Box::new(move |z: T| (k * z).sinh() / k),
            Box::new(move |z: T| (k * z).cosh()),
        ),
        ConicBranch::Series => (
            Box::new(move |z: T| z * sinhc_series(k * z)),
            Box::new(move |z: T| cosh_series(k * z)),
        ),
    };
    let linear = (a * s(tau - beta) + b * s(alpha - tau)) / s(alpha - beta);
    let forcing = -two * p.g * s(half * (tau - beta)) * s(half * (alpha - tau)) / ch(half * (alpha - beta));
    linear + forcing
}

/// Extension `S` of the conic family, smooth across `alpha == beta`.
#[allow(non_snake_case)]
pub fn conic_S<T: Real>(p: &ConicParams<T>, tau: T, alpha: T, beta: T, a: T, v: T) -> T {
    let k = p.k;
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let span = beta - alpha;
    let mid = half * (alpha + beta);
    let s = |z: T| z * sinhc(k * z);
    let ch_half = (k * half * span).cosh();
    a * (k * (tau - mid)).cosh() / ch_half + v * s(tau - alpha) / sinhc(k * span)
        - two * p.g * s(half * (tau - beta)) * s(half * (alpha - tau)) / ch_half
}

/// Extension `S` of `x'' = -x` (basis cos, sin), valid for `|beta - alpha| < pi`.
#[allow(non_snake_case)]
pub fn harmonic_S<T: Real>(tau: T, alpha: T, beta: T, a: T, v: T) -> T {
    let half = T::lit(0.5);
    let span = beta - alpha;
    a * (tau - half * (alpha + beta)).cos() / (half * span).cos() + v * (tau - alpha).sin() / sinc(span)
}

/// A closed-form scalar family usable as an exact dependence map.
#[derive(Debug, Clone)]
pub enum ClosedForm<T> {
    /// `x'' = g`.
    FreeFall { g: T },
    /// `x'' = k^2 x + g`.
    Conic(ConicParams<T>),
    /// `x'' = -x` in the basis (cos, sin); carries the extension [`harmonic_S`].
    CosSin,
    /// Any basis; no extension.
    Linear(LinearBasis<T>),
}

impl<T: Real> ClosedForm<T> {
    pub fn label(&self) -> String {
        match self {
            ClosedForm::FreeFall { g } => format!("free_fall{{g={g}}}"),
            ClosedForm::Conic(p) => format!("conic{{k={},g={}}}", p.k, p.g),
            ClosedForm::CosSin => "linear_basis{cos_sin}".into(),
            ClosedForm::Linear(b) => {
                let (l1, l2) = b.labels();
                format!("linear_basis{{{l1},{l2}}}")
            }
        }
    }

    #[allow(non_snake_case)]
    pub fn F(&self, tau: T, alpha: T, beta: T, a: T, b: T) -> Result<T, ClosedFormError> {
        match self {
            ClosedForm::FreeFall { g } => Ok(free_fall_F(*g, tau, alpha, beta, a, b)),
            ClosedForm::Conic(p) => Ok(conic_F(p, tau, alpha, beta, a, b)),
            ClosedForm::CosSin => linear_F(&LinearBasis::cos_sin(), tau, alpha, beta, a, b),
            ClosedForm::Linear(basis) => linear_F(basis, tau, alpha, beta, a, b),
        }
    }

    /// The extension, when the family has one in closed form.
    #[allow(non_snake_case)]
    pub fn S(&self, tau: T, alpha: T, beta: T, a: T, v: T) -> Option<T> {
        match self {
            ClosedForm::FreeFall { g } => Some(free_fall_S(*g, tau, alpha, beta, a, v)),
            ClosedForm::Conic(p) => Some(conic_S(p, tau, alpha, beta, a, v)),
            ClosedForm::CosSin => Some(harmonic_S(tau, alpha, beta, a, v)),
            ClosedForm::Linear(_) => None,
        }
    }

    pub fn has_extension(&self) -> bool {
        !matches!(self, ClosedForm::Linear(_))
    }

    /// The generating right-hand side `f(tau, x, v)`, when known.
    pub fn rhs(&self, _tau: T, x: T, _v: T) -> Option<T> {
        match self {
            ClosedForm::FreeFall { g } => Some(*g),
            ClosedForm::Conic(p) => Some(p.rhs(x)),
            ClosedForm::CosSin => Some(-x),
            ClosedForm::Linear(_) => None,
        }
    }
}

fn sinhc_series<T: Real>(z: T) -> T {
    let z2 = z * z;
    T::one() + z2 / T::lit(6.0) + z2 * z2 / T::lit(120.0)
}

fn cosh_series<T: Real>(z: T) -> T {
    let z2 = z * z;
    T::one() + z2 / T::lit(2.0) + z2 * z2 / T::lit(24.0)
}

/// `sinh(z) / z`, continuous at 0.
pub fn sinhc<T: Real>(z: T) -> T {
    if z.abs() < T::lit(SERIES_SWITCH) {
        sinhc_series(z)
    } else {
        z.sinh() / z
    }
}

/// `sin(z) / z`, continuous at 0.
pub fn sinc<T: Real>(z: T) -> T {
    if z.abs() < T::lit(SERIES_SWITCH) {
        let z2 = z * z;
        T::one() - z2 / T::lit(6.0) + z2 * z2 / T::lit(120.0)
    } else {
        z.sin() / z
    }
}

/// The two products of the Angelesco identity for the samples
/// `x(t + m d)`, `m = 0..4`, and their squared spread, which bounds both.
fn angelesco_products<T: Real>(vals: [T; 5]) -> (T, T, T) {
    let [x0, x1, x2, x3, x4] = vals;
    let hi = vals.iter().copied().fold(T::neg_infinity(), T::max);
    let lo = vals.iter().copied().fold(T::infinity(), T::min);
    ((x4 - x1) * (x2 - x1), (x3 - x0) * (x3 - x2), (hi - lo) * (hi - lo))
}

fn angelesco_samples<T: Real>(x: impl Fn(T) -> T, tau: T, delta: T) -> [T; 5] {
    [0.0, 1.0, 2.0, 3.0, 4.0].map(|m| x(tau + T::lit(m) * delta))
}

/// `(x(t+4d) - x(t+d))(x(t+2d) - x(t+d)) - (x(t+3d) - x(t))(x(t+3d) - x(t+2d))`.
///
/// Vanishes identically for solutions of `x'' = k^2 x + g`.
pub fn angelesco_residual<T: Real>(x: impl Fn(T) -> T, tau: T, delta: T) -> T {
    let (p, q, _) = angelesco_products(angelesco_samples(x, tau, delta));
    p - q
}

/// [`angelesco_residual`] relative to the squared spread of the five values
/// `x(t + m d)`, an upper bound for either product. Zero for constant `x`.
pub fn angelesco_relative<T: Real>(x: impl Fn(T) -> T, tau: T, delta: T) -> T {
    angelesco_relative_values(angelesco_samples(x, tau, delta))
}

/// [`angelesco_relative`] on precomputed samples `x(t + m d)`, `m = 0..4`.
pub fn angelesco_relative_values<T: Real>(vals: [T; 5]) -> T {
    let (p, q, scale) = angelesco_products(vals);
    if scale == T::zero() {
        return (p - q).abs();
    }
    (p - q).abs() / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn linear_cos_sin() {
        let basis = LinearBasis::<f64>::cos_sin();
        let f = linear_F(&basis, PI / 3.0, 0.0, PI / 2.0, 1.0, 0.0).unwrap();
        assert!((f - 0.5).abs() < 1e-15);
        assert_eq!(linear_F(&basis, 0.3, 0.3, 1.7, 2.0, -1.0).unwrap(), 2.0);
        let at_beta = linear_F(&basis, 1.7, 0.3, 1.7, 2.0, -1.0).unwrap();
        assert!((at_beta + 1.0).abs() < 1e-15);
    }

    #[test]
    fn linear_affine_basis_interpolates() {
        let f = linear_F(&LinearBasis::<f64>::affine(), 0.25, 0.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(f, 0.25);
    }

    #[test]
    fn degenerate_basis_at_half_period() {
        let basis = LinearBasis::<f64>::cos_sin();
        for alpha in [0.0, 0.4, -1.1, 2.5] {
            let err = linear_F(&basis, 0.1, alpha, alpha + PI, 1.0, 2.0).unwrap_err();
            assert!(matches!(err, ClosedFormError::DegenerateBasis { .. }));
        }
        assert!(linear_F(&basis, 0.1, 0.0, PI - 1e-6, 1.0, 2.0).is_ok());
    }

    #[test]
    fn determinant_identity() {
        let basis = LinearBasis::<f64>::cos_sin();
        let (tau, alpha, beta, a, b) = (0.7, -0.2, 1.3, 0.5, -1.5);
        let f = linear_F(&basis, tau, alpha, beta, a, b).unwrap();
        assert!(neuman_det(&basis, tau, alpha, beta, a, b, f).abs() <= 1e-12);
        let shifted = neuman_det(&basis, tau, alpha, beta, a, b, f + 1.0);
        assert!((shifted.abs() - basis.wronskian(alpha, beta).abs()).abs() <= 1e-12);
        assert_eq!(neuman_det(&basis, tau, alpha, beta, 0.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn free_fall_values() {
        assert!((free_fall_F(-9.8f64, 0.5, 0.0, 1.0, 0.0, 0.0) - 1.225).abs() < 1e-15);
        assert_eq!(free_fall_F(0.0f64, 0.25, 0.0, 1.0, 0.0, 1.0), 0.25);
        assert_eq!(free_fall_F(2.0f64, 0.5, 0.0, 1.0, 0.0, 0.0), -0.25);
        assert!((free_fall_S(-9.8f64, 1.0, 0.0, 0.0, 0.0, 1.0) + 3.9).abs() < 1e-15);
        assert_eq!(free_fall_S(-9.8f64, 0.3, 0.3, 1.0, 7.0, 2.0), 7.0);
        let s = free_fall_S(-9.8f64, 0.5, 0.0, 1.0, 0.0, 4.9);
        let f = free_fall_F(-9.8f64, 0.5, 0.0, 1.0, 0.0, 4.9);
        assert!((s - 3.675).abs() < 1e-14);
        assert!((f - 3.675).abs() < 1e-14);
    }

    #[test]
    fn conic_values() {
        let p = ConicParams::new(1.0f64, 0.0);
        let f = conic_F(&p, 0.5, 0.0, 1.0, 1.0, 2.0);
        // 3 sinh(0.5) / sinh(1)
        assert!((f - 3.0 * 0.5f64.sinh() / 1f64.sinh()).abs() < 1e-15);
        assert!((f - 1.3302287).abs() < 1e-6);
        let p = ConicParams::new(2.0f64, -2.0);
        assert!((conic_F(&p, 0.3, 0.3, 1.5, 0.7, -0.2) - 0.7).abs() < 1e-15);
        assert!((conic_F(&p, 1.5, 0.3, 1.5, 0.7, -0.2) + 0.2).abs() < 1e-14);
    }

    #[test]
    fn conic_small_k_is_free_fall() {
        let p = ConicParams::new(1e-5f64, 2.0);
        assert_eq!(ConicBranch::select(p.k, 0.0, 1.0), ConicBranch::Series);
        assert!((conic_F(&p, 0.5, 0.0, 1.0, 0.0, 0.0) + 0.25).abs() < 1e-9);
        let p = ConicParams::new(0.0f64, -9.8);
        let f = conic_F(&p, 0.5, 0.0, 1.0, 0.0, 0.0);
        assert!((f - free_fall_F(-9.8f64, 0.5, 0.0, 1.0, 0.0, 0.0)).abs() < 1e-15);
    }

    #[test]
    fn conic_literal_quotient_agrees_away_from_zero() {
        // the textbook quotient of sinh terms, fine when k is O(1)
        let literal = |k: f64, g: f64, tau: f64, alpha: f64, beta: f64, a: f64, b: f64| {
            ((k * k * a + g) * (k * (tau - beta)).sinh() + (k * k * b + g) * (k * (alpha - tau)).sinh()
                - g * (k * (alpha - beta)).sinh())
                / (k * k * (k * (alpha - beta)).sinh())
        };
        for (k, g) in [(0.5, 2.0), (1.0, -2.0), (2.0, 0.0), (2.0, 2.0)] {
            let p = ConicParams::new(k, g);
            for (tau, alpha, beta, a, b) in [(0.3, -1.0, 1.0, 0.5, 1.5), (1.7, 0.2, 0.9, -1.0, 2.0)] {
                let want = literal(k, g, tau, alpha, beta, a, b);
                let got = conic_F(&p, tau, alpha, beta, a, b);
                assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{k} {g}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn conic_extension_matches_cauchy_solution() {
        // on the diagonal S is -g/k^2 + (a + g/k^2) cosh(k t) + v sinh(k t) / k
        let p = ConicParams::new(1.5f64, 0.7);
        let (k, g) = (p.k, p.g);
        for (tau, alpha, a, v) in [(0.4, 0.0, 1.0, -2.0), (-1.0, 0.5, 0.3, 0.8)] {
            let t = tau - alpha;
            let want = -g / (k * k) + (a + g / (k * k)) * (k * t).cosh() + v * (k * t).sinh() / k;
            assert!((conic_S(&p, tau, alpha, alpha, a, v) - want).abs() < 1e-13);
        }
        // off the diagonal S(.., a, v) = F(.., a, a + v (beta - alpha))
        let (tau, alpha, beta, a, v) = (0.9, -0.4, 0.6, 0.2, 1.3);
        let s = conic_S(&p, tau, alpha, beta, a, v);
        let f = conic_F(&p, tau, alpha, beta, a, a + v * (beta - alpha));
        assert!((s - f).abs() < 1e-13);
    }

    #[test]
    fn harmonic_extension() {
        let basis = LinearBasis::<f64>::cos_sin();
        let (tau, alpha, beta, a, v) = (0.9, -0.4, 1.6, 0.2, 1.3);
        let s = harmonic_S(tau, alpha, beta, a, v);
        let f = linear_F(&basis, tau, alpha, beta, a, a + v * (beta - alpha)).unwrap();
        assert!((s - f).abs() < 1e-14);
        let diag = harmonic_S(1.0, 0.2, 0.2, 0.5, -1.0);
        assert!((diag - (0.5 * 0.8f64.cos() - 0.8f64.sin())).abs() < 1e-15);
    }

    #[test]
    fn angelesco() {
        let cubic = angelesco_residual(|t: f64| t * t * t, 0.0, 1.0);
        assert_eq!(cubic, -72.0);
        assert_eq!(angelesco_residual(|t: f64| 2.0 * t + 1.0, 0.3, 0.25), 0.0);
        for (tau, delta) in [(-1.0, 0.1), (0.2, 0.5), (0.9, 0.3)] {
            assert!(angelesco_relative(f64::cosh, tau, delta) <= 1e-12);
            assert!(angelesco_relative(|t: f64| 3.0 + t - 0.5 * t * t, tau, delta) <= 1e-12);
        }
        assert!(angelesco_relative(|t: f64| t.powi(3), 0.0, 1.0) > 1e-2);
        assert_eq!(angelesco_relative(|_: f64| 2.0, 0.3, 0.1), 0.0);
    }

    #[test]
    fn sinc_functions_are_continuous() {
        assert_eq!(sinhc(0.0f64), 1.0);
        assert_eq!(sinc(0.0f64), 1.0);
        let z = SERIES_SWITCH * 0.999;
        assert!((sinhc(z) - z.sinh() / z).abs() < 1e-15);
        assert!((sinc(z) - z.sin() / z).abs() < 1e-15);
    }
}
