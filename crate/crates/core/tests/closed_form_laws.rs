use febvp::closed_forms::{
    angelesco_relative, conic_F, conic_F_branch, conic_S, free_fall_F, free_fall_S, harmonic_S, linear_F,
    neuman_det, ConicBranch, SERIES_SWITCH,
};
use febvp::{ClosedForm, ConicParams, LinearBasis};
use proptest::prelude::*;

fn composed(f: &dyn Fn(f64, f64, f64, f64, f64) -> f64, s: [f64; 7]) -> f64 {
    let [tau, alpha, beta, gamma, delta, a, b] = s;
    let direct = f(tau, alpha, beta, a, b);
    let c = f(gamma, alpha, beta, a, b);
    let d = f(delta, alpha, beta, a, b);
    (direct - f(tau, gamma, delta, c, d)).abs()
}

// endpoints in [-1, 1] with lo <= |beta - alpha| <= hi
fn separated(lo: f64, hi: f64) -> impl Strategy<Value = (f64, f64)> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_filter("separation", move |(a, b)| (lo..=hi).contains(&(b - a).abs()))
}

fn conic_params() -> impl Strategy<Value = ConicParams<f64>> {
    (prop_oneof![Just(0.5), Just(1.0), Just(2.0)], prop_oneof![Just(0.0), Just(2.0), Just(-2.0)])
        .prop_map(|(k, g)| ConicParams::new(k, g))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn free_fall_boundary_and_composition(
        g in -10.0..10.0f64,
        tau in -1.0..1.0f64,
        (alpha, beta) in separated(0.05, 2.0),
        (gamma, delta) in separated(0.05, 2.0),
        a in -1.0..1.0f64,
        b in -1.0..1.0f64,
    ) {
        let f = |t, al, be, a, b| free_fall_F(g, t, al, be, a, b);
        prop_assert!((f(alpha, alpha, beta, a, b) - a).abs() <= 1e-9);
        prop_assert!((f(beta, alpha, beta, a, b) - b).abs() <= 1e-9);
        let r = composed(&f, [tau, alpha, beta, gamma, delta, a, b]);
        prop_assert!(r <= 1e-10, "residual {r}");
    }

    #[test]
    fn conic_boundary_and_composition(
        p in conic_params(),
        tau in -1.0..1.0f64,
        (alpha, beta) in separated(0.05, 2.0),
        (gamma, delta) in separated(0.05, 2.0),
        a in -1.0..1.0f64,
        b in -1.0..1.0f64,
    ) {
        let f = |t, al, be, a, b| conic_F(&p, t, al, be, a, b);
        prop_assert!((f(alpha, alpha, beta, a, b) - a).abs() <= 1e-9);
        prop_assert!((f(beta, alpha, beta, a, b) - b).abs() <= 1e-9);
        let r = composed(&f, [tau, alpha, beta, gamma, delta, a, b]);
        prop_assert!(r <= 1e-10, "residual {r}");
    }

    #[test]
    fn cos_sin_composition(
        tau in -1.0..1.0f64,
        (alpha, beta) in separated(0.05, 3.0),
        (gamma, delta) in separated(0.05, 3.0),
        a in -1.0..1.0f64,
        b in -1.0..1.0f64,
    ) {
        let basis = LinearBasis::cos_sin();
        let f = |t, al, be, a, b| linear_F(&basis, t, al, be, a, b).unwrap();
        prop_assert!((f(alpha, alpha, beta, a, b) - a).abs() <= 1e-9);
        prop_assert!((f(beta, alpha, beta, a, b) - b).abs() <= 1e-9);
        let r = composed(&f, [tau, alpha, beta, gamma, delta, a, b]);
        prop_assert!(r <= 1e-11, "residual {r}");
    }

    #[test]
    fn conic_shift_invariance(
        p in conic_params(),
        tau in -1.0..1.0f64,
        (alpha, beta) in separated(0.05, 2.0),
        shift in -2.0..2.0f64,
        a in -1.0..1.0f64,
        b in -1.0..1.0f64,
    ) {
        let base = conic_F(&p, tau, alpha, beta, a, b);
        let moved = conic_F(&p, tau + shift, alpha + shift, beta + shift, a, b);
        prop_assert!((base - moved).abs() <= 1e-12, "{base} vs {moved}");
    }

    #[test]
    fn conic_branches_agree_near_switch(
        k in 0.5..2.0f64,
        g in -2.0..2.0f64,
        ratio in prop_oneof![Just(0.9), Just(1.1)],
        u in 0.0..1.0f64,
        alpha in -1.0..1.0f64,
        a in -1.0..1.0f64,
        b in -1.0..1.0f64,
    ) {
        let span = ratio * SERIES_SWITCH / k;
        let beta = alpha + span;
        let tau = alpha + u * span;
        let p = ConicParams::new(k, g);
        let hyp = conic_F_branch(&p, ConicBranch::Hyperbolic, tau, alpha, beta, a, b);
        let ser = conic_F_branch(&p, ConicBranch::Series, tau, alpha, beta, a, b);
        prop_assert!((hyp - ser).abs() <= 1e-10, "{hyp} vs {ser}");
    }

    #[test]
    fn small_k_conic_is_free_fall(
        g in -2.0..2.0f64,
        tau in -1.0..1.0f64,
        (alpha, beta) in separated(0.05, 2.0),
        a in -1.0..1.0f64,
        b in -1.0..1.0f64,
    ) {
        let p = ConicParams::new(1e-7, g);
        let c = conic_F(&p, tau, alpha, beta, a, b);
        let f = free_fall_F(g, tau, alpha, beta, a, b);
        prop_assert!((c - f).abs() <= 1e-9, "{c} vs {f}");
    }

    #[test]
    fn extensions_match_dependence_maps(
        p in conic_params(),
        tau in -1.0..1.0f64,
        (alpha, beta) in separated(0.05, 2.0),
        a in -1.0..1.0f64,
        v in -1.0..1.0f64,
    ) {
        let b = a + v * (beta - alpha);
        let s = conic_S(&p, tau, alpha, beta, a, v);
        prop_assert!((s - conic_F(&p, tau, alpha, beta, a, b)).abs() <= 1e-8);
        let s = free_fall_S(p.g, tau, alpha, beta, a, v);
        prop_assert!((s - free_fall_F(p.g, tau, alpha, beta, a, b)).abs() <= 1e-8);
        if (beta - alpha).abs() <= 3.0 {
            let s = harmonic_S(tau, alpha, beta, a, v);
            let f = linear_F(&LinearBasis::cos_sin(), tau, alpha, beta, a, b).unwrap();
            prop_assert!((s - f).abs() <= 1e-8);
        }
    }

    #[test]
    fn neuman_determinant_vanishes(
        tau in -1.0..1.0f64,
        (alpha, beta) in separated(0.05, 3.0),
        a in -1.0..1.0f64,
        b in -1.0..1.0f64,
    ) {
        let basis = LinearBasis::cos_sin();
        let f = linear_F(&basis, tau, alpha, beta, a, b).unwrap();
        let det = neuman_det(&basis, tau, alpha, beta, a, b, f);
        prop_assert!(det.abs() <= 1e-12, "det {det}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn angelesco_on_conic_members(
        k in 0.1..2.0f64,
        g in -2.0..2.0f64,
        c1 in -1.0..1.0f64,
        c2 in -1.0..1.0f64,
        tau in -1.0..1.0f64,
        delta in 0.05..0.5f64,
    ) {
        let x = |t: f64| c1 * (k * t).cosh() + c2 * (k * t).sinh() - g / (k * k);
        let r = angelesco_relative(x, tau, delta);
        prop_assert!(r <= 1e-10, "relative residual {r}");
    }
}

#[test]
fn closed_form_dispatch_agrees_with_free_functions() {
    let p = ConicParams::new(2.0, -2.0);
    let cf = ClosedForm::Conic(p);
    assert_eq!(cf.F(0.3, -0.5, 0.9, 0.2, -0.4).unwrap(), conic_F(&p, 0.3, -0.5, 0.9, 0.2, -0.4));
    assert_eq!(cf.rhs(0.0, 1.5, 0.0), Some(4.0 * 1.5 - 2.0));
    assert!(ClosedForm::Linear(LinearBasis::<f64>::affine()).S(0.0, 0.0, 1.0, 0.0, 0.0).is_none());
}
