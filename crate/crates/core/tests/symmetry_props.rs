//! Group laws of the reflection operators and the orbit-average lemmas,
//! checked with property-based inputs and with exact rational arithmetic.

use num_rational::Ratio;
use prism_core::envs::{Env, LeanCraftParams, MirrorChainParams};
use prism_core::seeds::rng_from_seed;
use prism_core::symmetry::{
    mismatch, orbit_average, projection_distance, reflection_closure, sup_metric, symreg_loss, xi_bound,
    DeterministicPolicy, SymmetrySpec,
};
use proptest::prelude::*;

type Q = Ratio<i64>;

fn leancraft() -> SymmetrySpec {
    Env::LeanCraft(LeanCraftParams::default()).symmetry()
}

fn mirrorchain() -> SymmetrySpec {
    Env::MirrorChain(MirrorChainParams::default()).symmetry()
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// A smooth, deliberately asymmetric LeanCraft policy family.
fn lean_policy(c: [f64; 4]) -> impl Fn(&[f64]) -> Vec<f64> {
    move |s: &[f64]| {
        vec![
            (c[0] * s[1] + c[1] * s[2] + 0.3).tanh(),
            (c[2] * s[3] + c[3] * s[0] * 0.01 + 0.2 * s[2] * s[2]).tanh(),
        ]
    }
}

fn chain_policy(c: f64, d: f64) -> impl Fn(&[f64]) -> Vec<f64> {
    move |s: &[f64]| {
        let p = 1.0 / (1.0 + (-(c * s[0] + d)).exp());
        vec![p, 1.0 - p]
    }
}

fn lean_state() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn state_and_action_reflections_are_involutions(s in lean_state(), a in prop::collection::vec(-1.0f64..1.0, 2)) {
        let spec = leancraft();
        prop_assert_eq!(spec.reflect_state(&spec.reflect_state(&s).unwrap()).unwrap(), s);
        prop_assert_eq!(spec.reflect_action(&spec.reflect_action(&a).unwrap()).unwrap(), a);
    }

    #[test]
    fn permutation_reflection_is_an_l1_isometry(p in 0.0f64..1.0, q in 0.0f64..1.0) {
        let spec = mirrorchain();
        let (a, b) = (vec![p, 1.0 - p], vec![q, 1.0 - q]);
        let ka = spec.reflect_action(&a).unwrap();
        let kb = spec.reflect_action(&b).unwrap();
        prop_assert!((l1(&ka, &kb) - l1(&a, &b)).abs() <= 1e-12);
        prop_assert_eq!(spec.reflect_action(&ka).unwrap(), a);
    }

    #[test]
    fn orbit_average_lemmas(s in lean_state(), c in prop::array::uniform4(-2.0f64..2.0)) {
        let spec = leancraft();
        let pi = lean_policy(c);
        let q = orbit_average(&pi, &spec);
        // Equivariance of the image.
        let lhs = q.head(&spec.reflect_state(&s).unwrap());
        let rhs = spec.reflect_action(&q.head(&s)).unwrap();
        prop_assert!(l1(&lhs, &rhs) <= 1e-12);
        // Idempotence.
        let qq = orbit_average(&q, &spec);
        prop_assert!(l1(&qq.head(&s), &q.head(&s)) <= 1e-12);
        // The image has zero mismatch, so it is a fixed point.
        prop_assert!(mismatch(&q, &spec, &s).unwrap().iter().all(|d| d.abs() <= 1e-12));
    }

    #[test]
    fn orbit_average_is_non_expansive(
        c1 in prop::array::uniform4(-2.0f64..2.0),
        c2 in prop::array::uniform4(-2.0f64..2.0),
        seed in 0u64..1000,
    ) {
        use rand::Rng;
        let spec = leancraft();
        let mut rng = rng_from_seed(seed);
        let raw: Vec<Vec<f64>> = (0..16).map(|_| (0..4).map(|_| rng.gen_range(-10.0..10.0)).collect()).collect();
        let sample: Vec<Vec<f64>> = reflection_closure(&spec, &raw).unwrap();
        let (p1, p2) = (lean_policy(c1), lean_policy(c2));
        let before: f64 = sup_metric(&p1, &p2, &sample).unwrap();
        let after: f64 = sup_metric(&orbit_average(&p1, &spec), &orbit_average(&p2, &spec), &sample).unwrap();
        prop_assert!(after <= before + 1e-9);
    }

    #[test]
    fn projection_distance_equals_distance_to_projection(c in -3.0f64..3.0, d in -3.0f64..3.0) {
        let spec = mirrorchain();
        let pi = chain_policy(c, d);
        let states: Vec<Vec<f64>> = (-3..=3).map(|i| vec![i as f64]).collect();
        let pd: f64 = projection_distance(&pi, &spec, &states).unwrap();
        let direct: f64 = sup_metric(&pi, &orbit_average(&pi, &spec), &states).unwrap();
        prop_assert!((pd - direct).abs() <= 1e-12);
        let eps: f64 = symreg_loss(&pi, &spec, &states).unwrap();
        prop_assert!(pd <= xi_bound(eps, 1.0 / 7.0).unwrap() + 1e-12);
    }
}

/// With rational policies every lemma holds with exact equality.
#[test]
fn exact_rational_lemmas() {
    let spec = leancraft();
    let pi = |s: &[Q]| vec![s[1] * Q::new(1, 3) + s[2] * s[2], s[3] * Q::new(2, 5) + s[0] + Q::new(1, 7)];
    let q = orbit_average(&pi, &spec);
    for k in -5i64..=5 {
        let s = vec![Q::new(k, 2), Q::new(3, 1), Q::new(-k, 3), Q::new(k * k, 11)];
        let ls = spec.reflect_state(&s).unwrap();
        assert_eq!(q.head(&ls), spec.reflect_action(&q.head(&s)).unwrap());
        assert_eq!(orbit_average(&q, &spec).head(&s), q.head(&s));
        assert_eq!(spec.reflect_state(&ls).unwrap(), s);
    }
}

#[test]
fn symreg_loss_is_zero_exactly_for_equivariant_policies() {
    let spec = mirrorchain();
    let pi = chain_policy(1.3, 0.0);
    let states: Vec<Vec<f64>> = (-3..=3).map(|i| vec![i as f64]).collect();
    let loss: f64 = symreg_loss(&pi, &spec, &states).unwrap();
    assert!(loss < 1e-30);
    let biased = chain_policy(1.3, 0.5);
    let loss: f64 = symreg_loss(&biased, &spec, &states).unwrap();
    assert!(loss > 0.01);
}
