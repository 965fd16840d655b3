mod common;

use cluster_orient::montecarlo::cluster_size_moments;
use cluster_orient::rng::Streams;
use cluster_orient::simulate::{
    flip_cluster, parse_events, sample_cluster, simulate_clusters, simulate_window, ClusterCaps,
    SimOptions,
};
use cluster_orient::{Error, Kernel};
use common::*;
use rayon::prelude::*;

#[test]
fn cluster_size_moments_match_borel_pmf() {
    let k = Kernel::exponential(1.0).unwrap();
    let [e1, _, _, f3] = cluster_size_moments(0.5, &k, 1_000_000, &Streams::new(31)).unwrap();
    let (m1, _, _, mf3) = borel_moments_by_pmf(0.5);
    assert!((m1 - 2.0).abs() < 1e-9 && (mf3 - 44.0).abs() < 1e-7);
    assert!((e1.re - m1).abs() <= 3.0 * e1.stderr_re, "{e1:?}");
    assert!((f3.re - mf3).abs() <= 3.0 * f3.stderr_re, "{f3:?}");
}

#[test]
fn tiny_offspring_mean_gives_singletons() {
    let k = Kernel::exponential(1.0).unwrap();
    let mut r = Streams::new(1).rng(0);
    for _ in 0..10_000 {
        assert_eq!(sample_cluster(1e-9, &k, &mut r, ClusterCaps::default()).unwrap().size(), 1);
    }
}

#[test]
fn flips_are_involutions() {
    let k = Kernel::lomax(1.5).unwrap();
    let mut r = Streams::new(8).rng(0);
    for _ in 0..100 {
        let c = sample_cluster(0.7, &k, &mut r, ClusterCaps::default()).unwrap();
        assert_eq!(flip_cluster(&c, 1.0), c);
        let back = flip_cluster(&flip_cluster(&c, -1.0), -1.0);
        assert_eq!(back.times, c.times);
        assert_eq!(back.parent, c.parent);
    }
}

#[test]
fn one_sided_offspring_follow_their_parents() {
    let p = model("exp:1", 0.6);
    let clusters = simulate_clusters(&p, 200.0, &Streams::new(5), &SimOptions::default()).unwrap();
    for pc in &clusters {
        let c = &pc.cluster;
        assert_eq!(c.times[0], 0.0);
        for (i, parent) in c.parent.iter().enumerate().skip(1) {
            let j = parent.expect("non-root vertex has a parent");
            assert!(c.times[i] >= c.times[j]);
        }
    }
}

#[test]
fn intensity_is_lambda() {
    for theta in [-1.0, 0.0, 1.0] {
        let p = model("exp:1", 0.5).with_theta(theta);
        let t = 1e4;
        let e = simulate_window(&p, t, 12, &SimOptions::default()).unwrap();
        // Var N(T) ≈ Γ(0)·T = 8T.
        let se = (8.0 / t).sqrt();
        let rate = e.len() as f64 / t;
        assert!((rate - 2.0).abs() <= 3.0 * se, "θ={theta}: rate {rate}");
    }
}

#[test]
fn replicate_counts_are_theta_free() {
    let t = 1000.0;
    for (i, theta) in [-1.0, 0.0, 1.0].into_iter().enumerate() {
        let p = model("exp:1", 0.5).with_theta(theta);
        let counts: Vec<f64> = (0..200u64)
            .into_par_iter()
            .map(|r| {
                let seed = Streams::new(40 + i as u64).child(r).seed();
                simulate_window(&p, t, seed, &SimOptions::default()).unwrap().len() as f64
            })
            .collect();
        let (mean, se) = cluster_orient::contrasts::mean_stderr(&counts);
        assert!((mean - 2.0 * t).abs() <= 4.0 * se, "θ={theta}: {mean} ± {se}");
    }
}

/// Histogram of forward pair lags `x_j − x_i ∈ (0, 10]`, bin width 0.1.
fn pair_histogram(theta: f64, reps: u64) -> Vec<(f64, f64)> {
    let p = model("exp:1", 0.5).with_theta(theta);
    let per_rep: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let seed = Streams::new(77).child(r).seed();
            let e = simulate_window(&p, 1000.0, seed, &SimOptions::default()).unwrap();
            let mut h = vec![0.0; 100];
            let x = &e.times;
            for i in 0..x.len() {
                for j in i + 1..x.len() {
                    let d = x[j] - x[i];
                    if d > 10.0 {
                        break;
                    }
                    if d > 0.0 {
                        h[((d * 10.0).ceil() as usize - 1).min(99)] += 1.0;
                    }
                }
            }
            h
        })
        .collect();
    (0..100)
        .map(|b| {
            let xs: Vec<f64> = per_rep.iter().map(|h| h[b]).collect();
            cluster_orient::contrasts::mean_stderr(&xs)
        })
        .collect()
}

#[test]
fn second_order_structure_is_theta_free() {
    let fwd = pair_histogram(1.0, 200);
    let rev = pair_histogram(-1.0, 200);
    for (b, ((m1, s1), (m2, s2))) in fwd.iter().zip(&rev).enumerate() {
        let se = (s1 * s1 + s2 * s2).sqrt();
        assert!((m1 - m2).abs() <= 4.0 * se, "bin {b}: {m1} vs {m2} ± {se}");
    }
}

#[test]
fn simulation_is_byte_reproducible() {
    let p = model("lomax:1.5", 0.4).with_theta(0.3);
    let a = simulate_window(&p, 500.0, 9, &SimOptions::default()).unwrap();
    let b = simulate_window(&p, 500.0, 9, &SimOptions::default()).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    let c = simulate_window(&p, 500.0, 10, &SimOptions::default()).unwrap();
    assert_ne!(a.to_csv(), c.to_csv());
}

#[test]
fn size_cap_is_an_error() {
    let k = Kernel::exponential(1.0).unwrap();
    let caps = ClusterCaps {
        size: 3,
        ..ClusterCaps::default()
    };
    let mut r = Streams::new(0).rng(0);
    let hit = (0..1000).any(|_| {
        matches!(
            sample_cluster(0.9, &k, &mut r, caps),
            Err(Error::ClusterSizeCapExceeded { .. })
        )
    });
    assert!(hit);
}

#[test]
fn ingestion_examples() {
    let e = parse_events("1.0\n0.5\n2.5", None, "mem").unwrap();
    assert_eq!(e.times, vec![0.5, 1.0, 2.5]);
    assert_eq!(e.window_end, 2.5);
    let e = parse_events("t\n3\n3\n1\n", Some(4.0), "mem").unwrap();
    assert_eq!(e.times, vec![1.0, 3.0, 3.0]);
    let e = parse_events("", None, "mem").unwrap();
    assert!(e.is_empty());
    assert_eq!(e.window_end, 0.0);
    assert!(matches!(
        parse_events("abc", None, "mem"),
        Err(Error::Parse { line: 1, .. })
    ));
    assert!(matches!(
        parse_events("1\ninf\n", None, "mem"),
        Err(Error::NonFiniteTime { line: 2 })
    ));
}
