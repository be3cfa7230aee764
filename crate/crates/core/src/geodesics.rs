//! Geodesics of a symmetric linear connection in one chart, the interpolation
//! map `G(a, b, rho)`, and its functional equations.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::laws::{run_law, Args, Domain, EvaluatorFailure, LawError, LawReport, SampleSpec};
use crate::ode::SecondOrderOde;
use crate::rng::SplitMix64;
use crate::scalar::{diff_inf, Interval, Real};
use crate::shooting::{NeumannConditions, ShootingConfig, ShootingError, ShootingEvaluator};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeodesicError {
    #[error("connection {label} is not symmetric at {point:?}: |G^{k}_{i}{j} - G^{k}_{j}{i}| = {gap:e}")]
    Asymmetric {
        label: String,
        point: Vec<f64>,
        k: usize,
        i: usize,
        j: usize,
        gap: f64,
    },
    #[error("points must have dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Shooting(#[from] ShootingError),
}

type SymbolFn<T> = dyn Fn(&[T], &mut [T]) + Send + Sync;

/// Christoffel symbols `Gamma^k_ij(p)` on a chart of `R^n`, stored flat at
/// index `k n^2 + i n + j`.
#[derive(Clone)]
pub struct Connection<T> {
    dim: usize,
    label: String,
    gamma: Arc<SymbolFn<T>>,
    sample_box: Vec<Interval<T>>,
}

impl<T> fmt::Debug for Connection<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Connection")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

impl<T: Real> Connection<T> {
    /// `gamma(p, out)` writes all `n^3` symbols at `p`; `sample_box` is where
    /// law checks draw points.
    pub fn new(
        dim: usize,
        label: impl Into<String>,
        gamma: impl Fn(&[T], &mut [T]) + Send + Sync + 'static,
        sample_box: Vec<Interval<T>>,
    ) -> Self {
        assert!(dim >= 1, "connection dimension must be at least 1");
        assert_eq!(sample_box.len(), dim, "sample box must have one interval per coordinate");
        Self {
            dim,
            label: label.into(),
            gamma: Arc::new(gamma),
            sample_box,
        }
    }

    /// `Gamma = 0` on `R^n`.
    pub fn flat(dim: usize) -> Self {
        let unit = Interval::new(-T::one(), T::one());
        Self::new(dim, "flat", |_, out: &mut [T]| out.fill(T::zero()), vec![unit; dim])
    }

    /// Upper half-plane `y > 0` with the hyperbolic metric `(dx^2 + dy^2) / y^2`:
    /// `Gamma^x_xy = Gamma^x_yx = -1/y`, `Gamma^y_xx = 1/y`, `Gamma^y_yy = -1/y`.
    pub fn poincare_half_plane() -> Self {
        Self::new(
            2,
            "half_plane",
            |p: &[T], out: &mut [T]| {
                let inv = p[1].recip();
                out.fill(T::zero());
                out[1] = -inv; // x; x y
                out[2] = -inv; // x; y x
                out[4] = inv; // y; x x
                out[7] = -inv; // y; y y
            },
            vec![Interval::new(T::lit(-0.5), T::lit(0.5)), Interval::new(T::lit(0.5), T::lit(2.0))],
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn sample_box(&self) -> &[Interval<T>] {
        &self.sample_box
    }

    pub fn symbols(&self, p: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim.pow(3)];
        (self.gamma)(p, &mut out);
        out
    }

    /// Checks `Gamma^k_ij = Gamma^k_ji` to `1e-12` at `samples` points of the
    /// sample box.
    pub fn check_symmetric(&self, samples: usize, seed: u64) -> Result<(), GeodesicError> {
        let n = self.dim;
        let mut rng = SplitMix64::new(seed);
        for _ in 0..samples {
            let p: Vec<T> = self
                .sample_box
                .iter()
                .map(|iv| T::lit(rng.uniform(iv.lo.as_f64(), iv.hi.as_f64())))
                .collect();
            let g = self.symbols(&p);
            for k in 0..n {
                for i in 0..n {
                    for j in i + 1..n {
                        let gap = (g[k * n * n + i * n + j] - g[k * n * n + j * n + i]).abs();
                        if !(gap <= T::lit(1e-12)) {
                            return Err(GeodesicError::Asymmetric {
                                label: self.label.clone(),
                                point: p.iter().map(|c| c.as_f64()).collect(),
                                k,
                                i,
                                j,
                                gap: gap.as_f64(),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// `x''^k = -Gamma^k_ij(x) v^i v^j`.
pub fn geodesic_ode<T: Real>(conn: &Connection<T>) -> SecondOrderOde<T> {
    let n = conn.dim;
    let gamma = Arc::clone(&conn.gamma);
    SecondOrderOde::new(n, format!("geodesic[{}]", conn.label), move |_, x: &[T], v: &[T], out: &mut [T]| {
        let mut g = vec![T::zero(); n * n * n];
        gamma(x, &mut g);
        for (k, slot) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            for i in 0..n {
                for j in 0..n {
                    acc = acc + g[k * n * n + i * n + j] * v[i] * v[j];
                }
            }
            *slot = -acc;
        }
    })
}

/// `G(a, b, rho)`: the geodesic through `a` at `rho = 0` and `b` at `rho = 1`.
pub struct GeodesicMap<T> {
    connection: Connection<T>,
    evaluator: ShootingEvaluator<T>,
}

impl<T: Real> GeodesicMap<T> {
    pub fn new(connection: Connection<T>, shooting_cfg: ShootingConfig<T>) -> Self {
        let evaluator = ShootingEvaluator::new(geodesic_ode(&connection), shooting_cfg);
        Self {
            connection,
            evaluator,
        }
    }

    pub fn connection(&self) -> &Connection<T> {
        &self.connection
    }

    pub fn shooting_config(&self) -> &ShootingConfig<T> {
        self.evaluator.config()
    }

    pub fn evaluator(&self) -> &ShootingEvaluator<T> {
        &self.evaluator
    }

    pub fn eval(&self, a: &[T], b: &[T], rho: T) -> Result<Vec<T>, GeodesicError> {
        let n = self.connection.dim;
        for p in [a, b] {
            if p.len() != n {
                return Err(GeodesicError::DimensionMismatch {
                    expected: n,
                    got: p.len(),
                });
            }
        }
        let cond = NeumannConditions::new(T::zero(), T::one(), a.to_vec(), b.to_vec())?;
        Ok(self.evaluator.eval_f(rho, &cond)?)
    }
}

/// `G(a, b, rho) = F(rho, 0, 1, a, b)` on the geodesic equation.
#[allow(non_snake_case)]
pub fn geodesic_G<T: Real>(gmap: &GeodesicMap<T>, a: &[T], b: &[T], rho: T) -> Result<Vec<T>, GeodesicError> {
    gmap.eval(a, b, rho)
}

/// Hyperbolic geodesic of the upper half-plane through `a` (`rho = 0`) and `b`
/// (`rho = 1`), parametrized proportionally to arc length.
///
/// Off the vertical case the geodesic is the semicircle centred at
/// `c = (|b|^2 - |a|^2) / (2 (b_x - a_x))` on the x-axis, traced as
/// `(c + R tanh t, R / cosh t)` with `t` linear in `rho`.
pub fn half_plane_geodesic(a: [f64; 2], b: [f64; 2], rho: f64) -> [f64; 2] {
    if a[0] == b[0] {
        let ln_y = (1.0 - rho) * a[1].ln() + rho * b[1].ln();
        return [a[0], ln_y.exp()];
    }
    let (c, r) = semicircle(a, b);
    let ta = ((a[0] - c) / r).atanh();
    let tb = ((b[0] - c) / r).atanh();
    let t = (1.0 - rho) * ta + rho * tb;
    [c + r * t.tanh(), r / t.cosh()]
}

/// Centre on the x-axis and radius of the semicircle through `a` and `b`.
pub fn semicircle(a: [f64; 2], b: [f64; 2]) -> (f64, f64) {
    let c = (b[0] * b[0] + b[1] * b[1] - a[0] * a[0] - a[1] * a[1]) / (2.0 * (b[0] - a[0]));
    (c, (a[0] - c).hypot(a[1]))
}

struct KlapkaSample<T> {
    a: Vec<T>,
    b: Vec<T>,
    zeta: T,
    eta: T,
    rho: T,
}

fn klapka_samples<T: Real>(conn: &Connection<T>, spec: &SampleSpec<T>) -> Result<Vec<KlapkaSample<T>>, LawError> {
    let mut sampler = spec.sampler(Domain::default())?;
    Ok((0..spec.count)
        .map(|_| {
            let a = sampler.vector_in(&conn.sample_box);
            let b = sampler.vector_in(&conn.sample_box);
            let zeta = sampler.unit();
            let eta = sampler.unit();
            let rho = sampler.unit();
            KlapkaSample { a, b, zeta, eta, rho }
        })
        .collect())
}

fn klapka_args<T: Real>(s: &KlapkaSample<T>) -> Args {
    Args::new()
        .vector("a", &s.a)
        .vector("b", &s.b)
        .scalar("zeta", s.zeta)
        .scalar("eta", s.eta)
        .scalar("rho", s.rho)
}

fn g<T: Real>(gmap: &GeodesicMap<T>, a: &[T], b: &[T], rho: T) -> Result<Vec<T>, EvaluatorFailure> {
    gmap.eval(a, b, rho).map_err(|e| EvaluatorFailure(e.to_string()))
}

/// Largest of `|G(a,b,0) - a|`, `|G(a,b,1) - b|`, `|G(a,a,rho) - a|` and
/// `|G(a,b,(1-rho) zeta + rho eta) - G(G(a,b,zeta), G(a,b,eta), rho)|` per
/// sample. Points come from the connection's sample box, `zeta, eta, rho`
/// from `[0, 1)`; only `count` and `seed` of `spec` are used.
pub fn check_klapka<T: Real>(gmap: &GeodesicMap<T>, spec: &SampleSpec<T>) -> Result<LawReport, LawError> {
    let samples = klapka_samples(&gmap.connection, spec)?;
    Ok(run_law("klapka", &samples, klapka_args, |s| {
        let start = diff_inf(&g(gmap, &s.a, &s.b, T::zero())?, &s.a);
        let end = diff_inf(&g(gmap, &s.a, &s.b, T::one())?, &s.b);
        let constant = diff_inf(&g(gmap, &s.a, &s.a, s.rho)?, &s.a);
        let mixed = (T::one() - s.rho) * s.zeta + s.rho * s.eta;
        let direct = g(gmap, &s.a, &s.b, mixed)?;
        let p = g(gmap, &s.a, &s.b, s.zeta)?;
        let q = g(gmap, &s.a, &s.b, s.eta)?;
        let nested = g(gmap, &p, &q, s.rho)?;
        Ok(start.max(end).max(constant).max(diff_inf(&direct, &nested)))
    }))
}

/// With `Q(rho)(b) = G(0, b, rho)`: the largest of
/// `|Q((zeta+eta)/2)(b) - (Q(zeta)(b) + Q(eta)(b))/2|`,
/// `|G(a,b,1-rho) - G(b,a,rho)|` and `|Q(1/2)(a) - a/2|` per sample.
/// Meaningful for maps affine in the endpoints, such as the flat connection.
pub fn jensen_midpoint_check<T: Real>(gmap: &GeodesicMap<T>, spec: &SampleSpec<T>) -> Result<LawReport, LawError> {
    let samples = klapka_samples(&gmap.connection, spec)?;
    let origin = vec![T::zero(); gmap.connection.dim];
    let half = T::lit(0.5);
    Ok(run_law("jensen", &samples, klapka_args, |s| {
        let q = |rho: T, b: &[T]| g(gmap, &origin, b, rho);
        let mid = q(half * (s.zeta + s.eta), &s.b)?;
        let avg: Vec<T> = q(s.zeta, &s.b)?
            .iter()
            .zip(&q(s.eta, &s.b)?)
            .map(|(x, y)| half * (*x + *y))
            .collect();
        let reversed = diff_inf(&g(gmap, &s.a, &s.b, T::one() - s.rho)?, &g(gmap, &s.b, &s.a, s.rho)?);
        let halved: Vec<T> = s.a.iter().map(|x| half * *x).collect();
        let half_a = diff_inf(&q(half, &s.a)?, &halved);
        Ok(diff_inf(&mid, &avg).max(reversed).max(half_a))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_map() -> GeodesicMap<f64> {
        GeodesicMap::new(Connection::flat(2), ShootingConfig::default())
    }

    fn half_plane_map() -> GeodesicMap<f64> {
        GeodesicMap::new(Connection::poincare_half_plane(), ShootingConfig::default())
    }

    #[test]
    fn geodesic_rhs() {
        let flat = geodesic_ode(&Connection::<f64>::flat(3));
        assert_eq!(flat.eval_rhs(0.0, &[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap(), vec![0.0; 3]);
        let hp = geodesic_ode(&Connection::<f64>::poincare_half_plane());
        let (x, y, u, w) = (0.3, 1.5, 0.7, -0.4);
        let f = hp.eval_rhs(0.0, &[x, y], &[u, w]).unwrap();
        assert!((f[0] - 2.0 * u * w / y).abs() < 1e-15);
        assert!((f[1] - (w * w - u * u) / y).abs() < 1e-15);
        let f2 = hp.eval_rhs(0.0, &[x, y], &[2.0 * u, 2.0 * w]).unwrap();
        assert!((f2[0] - 4.0 * f[0]).abs() < 1e-15 && (f2[1] - 4.0 * f[1]).abs() < 1e-15);
    }

    #[test]
    fn symmetry_check() {
        assert!(Connection::<f64>::poincare_half_plane().check_symmetric(100, 1).is_ok());
        let skew = Connection::new(
            2,
            "skew",
            |_: &[f64], out: &mut [f64]| {
                out.fill(0.0);
                out[1] = 1.0;
            },
            vec![Interval::new(0.0, 1.0); 2],
        );
        assert!(matches!(skew.check_symmetric(3, 1), Err(GeodesicError::Asymmetric { k: 0, i: 0, j: 1, .. })));
    }

    #[test]
    fn flat_is_linear_interpolation() {
        let m = flat_map();
        let mid = geodesic_G(&m, &[0.0, 0.0], &[2.0, 4.0], 0.5).unwrap();
        assert!((mid[0] - 1.0).abs() < 1e-12 && (mid[1] - 2.0).abs() < 1e-12);
        assert_eq!(geodesic_G(&m, &[0.3, -0.2], &[1.0, 1.0], 0.0).unwrap(), vec![0.3, -0.2]);
        let end = geodesic_G(&m, &[0.3, -0.2], &[1.0, 1.0], 1.0).unwrap();
        assert!(diff_inf(&end, &[1.0, 1.0]) <= 1e-12);
    }

    #[test]
    fn half_plane_matches_oracle() {
        let m = half_plane_map();
        let (a, b) = ([-0.3, 1.0], [0.3, 1.0]);
        let got = geodesic_G(&m, &a, &b, 0.5).unwrap();
        let want = half_plane_geodesic(a, b, 0.5);
        assert!(diff_inf(&got, &want) <= 1e-6, "{got:?} vs {want:?}");
        assert!(want[0].abs() < 1e-15);
        // the top of the arc is the highest point
        assert!(want[1] > 1.0 && (want[1] - 0.3f64.hypot(1.0)).abs() < 1e-14);
        for rho in [0.1, 0.37, 0.9] {
            let (a, b) = ([-0.4, 0.6], [0.5, 1.8]);
            let got = geodesic_G(&m, &a, &b, rho).unwrap();
            assert!(diff_inf(&got, &half_plane_geodesic(a, b, rho)) <= 1e-6);
        }
        let (a, b) = ([0.1, 0.5], [0.1, 2.0]);
        let got = geodesic_G(&m, &a, &b, 0.5).unwrap();
        assert!(diff_inf(&got, &[0.1, 1.0]) <= 1e-6, "{got:?}");
    }

    #[test]
    fn oracle_properties() {
        let (a, b) = ([-0.4, 0.6], [0.5, 1.8]);
        assert!(diff_inf(&half_plane_geodesic(a, b, 0.0), &a) < 1e-14);
        assert!(diff_inf(&half_plane_geodesic(a, b, 1.0), &b) < 1e-14);
        let (c, r) = semicircle(a, b);
        let p = half_plane_geodesic(a, b, 0.3);
        assert!(((p[0] - c).hypot(p[1]) - r).abs() < 1e-14);
    }

    #[test]
    fn klapka_flat_and_half_plane() {
        let spec = SampleSpec::new(50, 42);
        let r = check_klapka(&flat_map(), &spec).unwrap();
        assert!(r.within(1e-12), "{r:?}");
        let r = check_klapka(&half_plane_map(), &SampleSpec::new(20, 42)).unwrap();
        assert!(r.within(1e-6), "{r:?}");
    }

    #[test]
    fn jensen_flat() {
        let r = jensen_midpoint_check(&flat_map(), &SampleSpec::new(100, 42)).unwrap();
        assert!(r.within(1e-12), "{r:?}");
        let half = geodesic_G(&flat_map(), &[0.0, 0.0], &[3.0, -1.0], 0.5).unwrap();
        assert!(diff_inf(&half, &[1.5, -0.5]) <= 1e-12);
    }

    #[test]
    fn affine_reparametrization() {
        let m = half_plane_map();
        let ode = geodesic_ode(m.connection());
        let eval = ShootingEvaluator::new(ode, ShootingConfig::default());
        let (a, b) = (vec![-0.2, 0.8], vec![0.4, 1.5]);
        for (tau, alpha, beta) in [(0.5, -1.0, 2.0), (0.0, 0.3, -0.4), (3.0, 1.0, 1.5)] {
            let cond = NeumannConditions::new(alpha, beta, a.clone(), b.clone()).unwrap();
            let f = eval.eval_f(tau, &cond).unwrap();
            let gv = geodesic_G(&m, &a, &b, (tau - alpha) / (beta - alpha)).unwrap();
            assert!(diff_inf(&f, &gv) <= 1e-8, "{f:?} vs {gv:?}");
        }
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            flat_map().eval(&[0.0], &[1.0, 2.0], 0.5),
            Err(GeodesicError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }
}
