//! 64-point Gauss–Legendre quadrature.

use std::sync::OnceLock;

use crate::scalar::Real;

pub const GL_POINTS: usize = 64;

/// Nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre_64() -> &'static ([f64; GL_POINTS], [f64; GL_POINTS]) {
    static RULE: OnceLock<([f64; GL_POINTS], [f64; GL_POINTS])> = OnceLock::new();
    RULE.get_or_init(|| legendre_rule::<GL_POINTS>())
}

fn legendre_rule<const N: usize>() -> ([f64; N], [f64; N]) {
    let mut nodes = [0.0; N];
    let mut weights = [0.0; N];
    let nf = N as f64;
    for i in 0..N.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=N {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[N - 1 - i] = z;
        weights[i] = w;
        weights[N - 1 - i] = w;
    }
    (nodes, weights)
}

/// `integral_lo^hi f` with the 64-point rule.
pub fn integrate<T: Real, E>(lo: T, hi: T, mut f: impl FnMut(T) -> Result<T, E>) -> Result<T, E> {
    let (nodes, weights) = gauss_legendre_64();
    let half = T::lit(0.5) * (hi - lo);
    let mid = T::lit(0.5) * (hi + lo);
    let mut acc = T::zero();
    for (z, w) in nodes.iter().zip(weights) {
        acc = acc + T::lit(*w) * f(mid + half * T::lit(*z))?;
    }
    Ok(acc * half)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn weights_sum_to_two() {
        let (nodes, weights) = gauss_legendre_64();
        assert!((weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        assert!(nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn exact_for_high_degree_polynomials() {
        for deg in [0, 1, 5, 40, 127] {
            let got = integrate(0.0, 1.0, |x: f64| Ok::<_, Infallible>(x.powi(deg))).unwrap();
            let want = 1.0 / (deg as f64 + 1.0);
            assert!((got - want).abs() < 1e-14, "degree {deg}: {got}");
        }
    }

    #[test]
    fn smooth_integrand() {
        let got = integrate(0.0, std::f64::consts::PI, |x: f64| Ok::<_, Infallible>(x.sin())).unwrap();
        assert!((got - 2.0).abs() < 1e-14);
    }
}
