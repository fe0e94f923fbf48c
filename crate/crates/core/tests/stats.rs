mod common;

use pdac::training::{mann_whitney_u, mann_whitney_u_with, Alternative, PValueMethod};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn identical_samples_are_not_significant() {
    let a = [0.81, 0.79, 0.84, 0.80];
    let r = mann_whitney_u(&a, &a).unwrap();
    assert_eq!(r.p_value, 1.0);
    assert_eq!(r.u_a, 8.0);
}

#[test]
fn fully_separated_samples() {
    let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
    assert_eq!((r.u_a, r.u_b), (0.0, 9.0));
    // Two of the 20 assignments are as extreme.
    assert!((r.p_value - 0.1).abs() < 1e-12);
}

#[test]
fn exact_matches_enumeration_on_tied_accuracies() {
    // Accuracies over 128 items tie often.
    let a = [0.75, 0.78125, 0.75, 0.8125, 0.84375];
    let b = [0.5, 0.75, 0.5625, 0.78125, 0.5];
    let r = mann_whitney_u(&a, &b).unwrap();
    let (two, greater, less) = common::brute_force_p(&a, &b);
    assert_eq!(r.method, PValueMethod::Exact);
    assert!((r.p_value - two).abs() < 1e-12);
    assert!((mann_whitney_u_with(&a, &b, Alternative::Greater).unwrap().p_value - greater).abs() < 1e-12);
    assert!((mann_whitney_u_with(&a, &b, Alternative::Less).unwrap().p_value - less).abs() < 1e-12);
}

#[test]
fn normal_regime_tracks_enumeration_at_ten() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for shift in [0.0, 0.3, 0.8] {
        let a: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..1.0) + shift).collect();
        let b: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..1.0)).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(r.method, PValueMethod::Normal);
        let (two, _, _) = common::brute_force_p(&a, &b);
        assert!(
            (r.p_value - two).abs() < 0.02,
            "shift {shift}: {} vs {two}",
            r.p_value
        );
    }
}

proptest! {
    #[test]
    fn u_statistics_are_complementary(
        a in prop::collection::vec(0u8..6, 1..15),
        b in prop::collection::vec(0u8..6, 1..15),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let ab = mann_whitney_u(&a, &b).unwrap();
        let ba = mann_whitney_u(&b, &a).unwrap();
        prop_assert_eq!(ab.u_a + ab.u_b, (a.len() * b.len()) as f64);
        prop_assert_eq!(ab.u_a, common::pair_count_u(&a, &b));
        prop_assert_eq!(ab.u_a, ba.u_b);
        prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
        prop_assert!(ab.p_value > 0.0 && ab.p_value <= 1.0);
    }
}
