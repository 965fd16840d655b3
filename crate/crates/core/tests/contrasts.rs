mod common;

use cluster_orient::contrasts::{
    contrast_statistic, exact_mean, linearity_scan, mean_stderr, parse_test_function,
    BumpFactor, OddTestFunction, TransformFactor,
};
use cluster_orient::cumulant3::{invert_bispectrum, odd_part};
use cluster_orient::rng::Streams;
use cluster_orient::simulate::{simulate_window, Provenance, SimOptions};
use cluster_orient::{EventSeries, Kernel};
use common::{brute_force_statistic, exp_model, rel};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn derived(times: Vec<f64>, t: f64) -> EventSeries {
    EventSeries::new(times, t, Provenance::Derived { note: "test".into() }).unwrap()
}

fn random_series(seed: u64, n: usize, t: f64) -> EventSeries {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    derived((0..n).map(|_| t * r.random::<f64>()).collect(), t)
}

proptest! {
    #[test]
    fn test_functions_are_odd_bounded_and_supported(
        h in 0.5f64..10.0,
        pts in prop::collection::vec((-1.2f64..1.2, -1.2f64..1.2), 1000),
    ) {
        for f in [OddTestFunction::default_bump(h).unwrap(), OddTestFunction::quadrant(h).unwrap()] {
            for &(u, v) in &pts {
                let (a, b) = (u * h, v * h);
                prop_assert_eq!(f.eval(-a, -b), -f.eval(a, b));
                prop_assert!(f.eval(a, b).abs() <= f.bound());
                if a.abs() > h || b.abs() > h {
                    prop_assert_eq!(f.eval(a, b), 0.0);
                }
            }
        }
    }

    #[test]
    fn pruned_statistic_equals_triple_loop(seed in any::<u64>(), n in 0usize..200, h in 0.2f64..8.0) {
        let e = random_series(seed, n, 50.0);
        let f = OddTestFunction::default_bump(h).unwrap();
        prop_assert_eq!(contrast_statistic(&e, &f), brute_force_statistic(&e, &f));
        let q = OddTestFunction::quadrant(h).unwrap();
        prop_assert_eq!(contrast_statistic(&e, &q), brute_force_statistic(&e, &q));
    }
}

#[test]
fn antisymmetrize_builds_odd_part() {
    let f = OddTestFunction::antisymmetrize(|a, b| a * b * b + 1.0, 2.0, 9.0).unwrap();
    for &(a, b) in &[(0.5, 1.0), (-1.5, 0.25), (2.0, -2.0)] {
        assert!((f.eval(a, b) - 2.0 * a * b * b).abs() < 1e-15);
    }
    assert_eq!(f.bound(), 18.0);
    assert_eq!(f.eval(2.5, 0.0), 0.0);
    let g = OddTestFunction::antisymmetrize(|a, _| (a - 0.3).exp(), 1.0, 3.0).unwrap();
    assert!((g.eval(0.3, 0.9) - (1.0 - (-0.6f64).exp())).abs() < 1e-15);
    assert!(OddTestFunction::default_bump(0.0).is_err());
    assert!(OddTestFunction::default_bump(f64::NAN).is_err());
}

#[test]
fn parsing_test_functions() {
    assert_eq!(parse_test_function("bump:3", None).unwrap().support_radius(), 3.0);
    assert_eq!(parse_test_function("quadrant", Some(2.0)).unwrap().label(), "quadrant:2");
    assert!(parse_test_function("bump", None).is_err());
    assert!(parse_test_function("wedge:2", None).is_err());
    assert!(parse_test_function("bump:x", None).is_err());
}

#[test]
fn short_series_give_zero() {
    let f = OddTestFunction::default_bump(5.0).unwrap();
    assert_eq!(contrast_statistic(&derived(vec![], 10.0), &f), 0.0);
    assert_eq!(contrast_statistic(&derived(vec![1.0, 2.0], 10.0), &f), 0.0);
    let three = derived(vec![1.0, 2.0, 4.0], 10.0);
    assert_eq!(contrast_statistic(&three, &f), brute_force_statistic(&three, &f));
    assert_ne!(contrast_statistic(&three, &f), 0.0);
}

#[test]
fn reflection_negates_and_scaling_scales() {
    let p = exp_model(0.5);
    let f = OddTestFunction::default_bump(5.0).unwrap();
    for seed in 0..5 {
        let e = simulate_window(&p, 300.0, seed, &SimOptions::default()).unwrap();
        let o = contrast_statistic(&e, &f);
        let r = contrast_statistic(&e.reflect(), &f);
        assert!((o + r).abs() <= 1e-12 * o.abs(), "{o} vs {r}");
        for c in [-2.0, 0.5, 3.0] {
            let s = contrast_statistic(&e, &f.scaled(c));
            assert!((s - c * o).abs() <= 1e-11 * o.abs(), "{s} vs {}", c * o);
        }
    }
}

#[test]
fn reversible_null_has_zero_mean() {
    let p = exp_model(0.5).with_theta(0.0);
    let f = OddTestFunction::default_bump(5.0).unwrap();
    let stream = Streams::new(77);
    let xs: Vec<f64> = (0..200)
        .map(|r| {
            let e = simulate_window(&p, 500.0, stream.child(r).seed(), &SimOptions::default()).unwrap();
            contrast_statistic(&e, &f)
        })
        .collect();
    let (m, se) = mean_stderr(&xs);
    assert!(m.abs() <= 4.0 * se, "{m} ± {se}");
}

#[test]
fn exact_mean_window_gap() {
    let p = exp_model(0.5);
    let f = OddTestFunction::default_bump(5.0).unwrap();
    let g = invert_bispectrum(&p, 40.0, 512).unwrap();
    for t in [1e2, 1e3, 1e4] {
        let em = exact_mean(&p, &f, t, &g).unwrap();
        assert!((em.mu_t - em.mu_inf).abs() <= em.gap_bound, "T={t}");
        assert_eq!(em.mean, em.mu_t);
        let odd_l1 = odd_part(&g).abs_total();
        assert!(rel(em.gap_bound, 2.0 * 5.0 * odd_l1 / t) < 1e-12);
    }
    let em0 = exact_mean(&p.with_theta(0.0), &f, 1e3, &g).unwrap();
    assert_eq!(em0.mean, 0.0);
    // Grid of a sign-biased model gives the same per-unit-θ mean.
    let gh = invert_bispectrum(&p.with_theta(0.5), 40.0, 512).unwrap();
    let a = exact_mean(&p, &f, 1e3, &g).unwrap();
    let b = exact_mean(&p, &f, 1e3, &gh).unwrap();
    assert!(rel(a.mu_t, b.mu_t) < 1e-9);
    let gz = invert_bispectrum(&p.with_theta(0.0), 40.0, 512).unwrap();
    assert!(exact_mean(&p, &f, 1e3, &gz).is_err());
    assert!(exact_mean(&p, &f, 0.0, &g).is_err());
}

#[test]
fn matched_model_shows_no_orientation() {
    let k = Kernel::matched(Kernel::exponential(1.0).unwrap(), 0.5).unwrap();
    let p = exp_model(0.5).with_kernel(k);
    let f = OddTestFunction::default_bump(5.0).unwrap();
    let s = linearity_scan(&p, &f, 400.0, &[-1.0, 0.0, 1.0], 150, &Streams::new(5), &SimOptions::default())
        .unwrap();
    assert!(s.slope.abs() <= 4.0 * s.slope_stderr, "{} ± {}", s.slope, s.slope_stderr);
    assert!(s.intercept.abs() <= 4.0 * s.intercept_stderr);
}

#[test]
fn opposite_orientations_have_opposite_means() {
    let p = exp_model(0.5);
    let f = OddTestFunction::default_bump(5.0).unwrap();
    let s = linearity_scan(&p, &f, 400.0, &[-1.0, 0.0, 1.0], 150, &Streams::new(6), &SimOptions::default())
        .unwrap();
    let (lo, hi) = (s.per_theta[0], s.per_theta[2]);
    let se = (lo.stderr.powi(2) + hi.stderr.powi(2)).sqrt();
    assert!((lo.mean + hi.mean).abs() <= 4.0 * se);
    assert!(hi.mean < 0.0 && lo.mean > 0.0);
}

#[test]
fn stderr_shrinks_with_replicates() {
    let p = exp_model(0.5);
    let f = OddTestFunction::default_bump(5.0).unwrap();
    let run = |reps| {
        linearity_scan(&p, &f, 200.0, &[0.0, 0.5, 1.0], reps, &Streams::new(8), &SimOptions::default())
            .unwrap()
    };
    let (a, b) = (run(400), run(800));
    for (x, y) in a.per_theta.iter().zip(&b.per_theta) {
        let ratio = (x.stderr / y.stderr).powi(2);
        assert!((1.6..2.5).contains(&ratio), "θ={}: {ratio}", x.theta);
    }
}

/// `H_g = −∬ g(τ) sin(ω·τ) dτ` by a 2D Simpson rule.
#[test]
fn bump_factor_matches_quadrature() {
    let h = 4.0;
    let f = OddTestFunction::default_bump(h).unwrap();
    let factor = BumpFactor::new(0.5 * h, 0.5 * h);
    let n = 400;
    let step = 2.0 * h / n as f64;
    let w = |i: usize| if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
    for &(w1, w2) in &[(0.3, 0.7), (1.0, -0.4), (2.0, 1.5), (-0.8, -0.1)] {
        let mut s = 0.0;
        for i in 0..=n {
            let a = -h + i as f64 * step;
            for j in 0..=n {
                let b = -h + j as f64 * step;
                s += w(i) * w(j) * f.eval(a, b) * (w1 * a + w2 * b).sin();
            }
        }
        let quad = -s * step * step / 9.0;
        let closed = factor.eval(w1, w2);
        assert!((quad - closed).abs() < 1e-8 * closed.abs().max(1e-3), "{quad} vs {closed}");
        let via_fn = f.transform_factor().unwrap().eval(w1, w2);
        assert_eq!(via_fn, closed);
    }
}
