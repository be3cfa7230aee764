use std::collections::BTreeMap;
use std::f64::consts::PI;

use febvp::catalog::{self, CatalogOde};
use febvp::laws::{check_boundary, check_composition, check_extension, check_lemma1_equivalence};
use febvp::reconstruction::{check_initial_derivative, roundtrip_check, roundtrip_with};
use febvp::rng::SplitMix64;
use febvp::{
    ClosedForm, Config, DependenceEvaluator, Evaluator, Interval, Neumann, Reconstruction, Samples, ShootingError,
};
use proptest::prelude::*;

fn entry(name: &str, params: &[(&str, f64)]) -> CatalogOde<f64> {
    let map: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    catalog::lookup(name, &map).unwrap()
}

fn numeric(e: &CatalogOde<f64>) -> Evaluator {
    Evaluator::new(e.ode.clone(), Config::default())
}

#[test]
fn numeric_matches_closed_forms() {
    let families = [
        entry("free_fall", &[]),
        entry("conic", &[("k", 2.0), ("g", -2.0)]),
        entry("conic", &[("k", 0.5), ("g", 2.0)]),
        entry("oscillator", &[]),
    ];
    for fam in &families {
        let eval = numeric(fam);
        let mut rng = SplitMix64::new(11);
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let alpha = rng.uniform(-1.0, 1.0);
            let span = rng.uniform(0.05, 2.0) * if rng.next_f64() < 0.5 { -1.0 } else { 1.0 };
            let beta = alpha + span;
            let (tau, a, b) = (rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
            let got = DependenceEvaluator::eval_f(&eval, tau, alpha, beta, &[a], &[b]).unwrap()[0];
            let want = fam.closed_form.F(tau, alpha, beta, a, b).unwrap();
            worst = worst.max((got - want).abs());
        }
        assert!(worst <= 1e-8, "{}: {worst:e}", fam.name);
    }
}

#[test]
fn oscillator_conjugate_point() {
    let eval = numeric(&entry("oscillator", &[]));
    for _ in 0..3 {
        let cond = Neumann::new(0.0, PI, vec![0.0], vec![0.0]).unwrap();
        let err = eval.solve(&cond).unwrap_err();
        assert!(matches!(err, ShootingError::ConjugatePoint { .. }), "{err}");
    }
    let cond = Neumann::new(0.0, PI - 0.1, vec![0.3], vec![-0.2]).unwrap();
    let x = eval.solve(&cond).unwrap();
    let end = x.trajectory.eval(PI - 0.1).unwrap();
    assert!((x.trajectory.eval(0.0).unwrap().x[0] - 0.3).abs() <= 1e-8);
    assert!((end.x[0] + 0.2).abs() <= 1e-8);
}

#[test]
fn numeric_laws_on_free_fall() {
    let fam = entry("free_fall", &[]);
    let eval = numeric(&fam);
    let spec = Samples::new(60, 5);
    assert!(check_boundary(&eval, &spec).unwrap().within(1e-8));
    assert!(check_composition(&eval, &spec).unwrap().within(1e-7));
    let ext = check_extension(&eval, &spec).unwrap();
    assert!(ext.off_diagonal.within(1e-8), "{:?}", ext.off_diagonal);
    assert!(ext.is_monotone(), "{ext:?}");
    let lemma = check_lemma1_equivalence(&fam.ode, &Samples::new(20, 5), &Config::default()).unwrap();
    assert!(lemma.agreement.within(1e-9), "{:?}", lemma.agreement);
    assert!(lemma.quadrature.within(1e-8), "{:?}", lemma.quadrature);
}

#[test]
fn reconstruction_roundtrips() {
    let spec = Samples::new(40, 3).with_ranges(Interval::new(-1.0, 1.0), Interval::new(-1.0, 1.0), Interval::new(-1.0, 1.0));
    let ff = entry("free_fall", &[]);
    let r = roundtrip_check(&ff.ode, &Reconstruction::default(), &Config::default(), &spec).unwrap();
    assert!(r.within(1e-6), "{r:?}");
    for fam in [entry("conic", &[("k", 1.0), ("g", 0.0)]), entry("oscillator", &[])] {
        let cf = fam.closed_form.clone();
        let r = roundtrip_with(
            "reconstruct_closed",
            &fam.closed_form,
            move |t, x, v| Ok(vec![cf.rhs(t, x[0], v[0]).unwrap()]),
            &Reconstruction::default(),
            &spec,
        )
        .unwrap();
        assert!(r.within(1e-8), "{r:?}");
        let slope = check_initial_derivative(&fam.closed_form, &spec, 1e-4).unwrap();
        assert!(slope.within(1e-6), "{slope:?}");
    }
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let fam = entry("conic", &[("k", 1.0), ("g", 2.0)]);
    let run = || {
        let eval = numeric(&fam);
        let spec = Samples::new(30, 1234);
        serde_json::to_string(&vec![
            check_boundary(&eval, &spec).unwrap(),
            check_composition(&eval, &spec).unwrap(),
        ])
        .unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn wide_oscillator_range_reports_failures() {
    let eval = numeric(&entry("oscillator", &[]));
    let spec = Samples::new(20, 42).with_ranges(Interval::new(0.0, PI), Interval::new(-1.0, 1.0), Interval::new(0.0, PI));
    let r = check_composition(&eval, &spec).unwrap();
    assert!(r.failures > 0, "{r:?}");
    assert!(!r.within(1e-7));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn report_statistics_are_consistent(seed in any::<u64>(), count in 1usize..40, k in 0.5..2.0f64) {
        let cf = ClosedForm::Conic(febvp::ConicParams::new(k, 1.0));
        let r = check_composition(&cf, &Samples::new(count, seed)).unwrap();
        prop_assert_eq!(r.samples, count);
        prop_assert!(r.max_residual >= r.mean_residual && r.mean_residual >= 0.0);
        prop_assert!(r.worst_case.is_some());
        let again = check_composition(&cf, &Samples::new(count, seed)).unwrap();
        prop_assert_eq!(r, again);
        prop_assert!(cf.dim() == 1);
    }
}
