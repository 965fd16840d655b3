mod common;

use cluster_orient::kernels::TabulatedDensity;
use cluster_orient::rng::Streams;
use cluster_orient::{Kernel, KernelTailClass};
use common::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn builtins() -> Vec<Kernel> {
    vec![
        Kernel::exponential(1.3).unwrap(),
        Kernel::lomax(1.5).unwrap(),
        Kernel::lomax(0.8).unwrap(),
        Kernel::uniform_half(2.0).unwrap(),
        Kernel::symmetric_laplace(0.7).unwrap(),
    ]
}

#[test]
fn density_and_survival_point_values() {
    assert_eq!(Kernel::exponential(1.0).unwrap().density(1e-300), 1.0);
    assert!((Kernel::lomax(1.0).unwrap().density(1.0) - 0.25).abs() < 1e-15);
    assert_eq!(Kernel::uniform_half(2.0).unwrap().density(-0.5), 0.0);
    assert_eq!(Kernel::exponential(1.0).unwrap().survival(0.0), 1.0);
    assert!((Kernel::lomax(2.0).unwrap().survival(3.0) - 0.0625).abs() < 1e-15);
    assert_eq!(Kernel::uniform_half(1.0).unwrap().survival(2.0), 0.0);
}

#[test]
fn one_sided_families_vanish_on_negative_axis() {
    for k in builtins().into_iter().filter(|k| k.is_one_sided()) {
        for x in [-1e-9, -0.5, -3.0, -1e4] {
            assert_eq!(k.density(x), 0.0, "{k} at {x}");
        }
    }
}

#[test]
fn densities_integrate_to_one() {
    for k in builtins() {
        // s = ln(1 + |x|) flattens the algebraic tails.
        let sides = if k.is_one_sided() { 1.0 } else { 2.0 };
        let f = |s: f64| {
            let x = s.exp_m1();
            sides * k.density(x) * (1.0 + x)
        };
        // Split at the uniform edge so Simpson never straddles a jump.
        let cut = 3f64.ln();
        let total = simpson(f, 0.0, cut - 1e-13, 200_000) + simpson(f, cut + 1e-13, 60.0, 2_000_000);
        let tail = sides * k.survival(60f64.exp_m1());
        assert!((total + tail - 1.0).abs() < 1e-8, "{k}: {total}");
    }
}

#[test]
fn transform_values() {
    let z = Kernel::exponential(1.0).unwrap().transform(1.0).unwrap();
    assert!((z - Complex64::new(0.5, -0.5)).norm() < 1e-15);
    let mut all = builtins();
    all.push(Kernel::matched(Kernel::exponential(1.0).unwrap(), 0.5).unwrap());
    for k in all {
        assert!((k.transform(0.0).unwrap() - 1.0).norm() < 1e-10, "{k}");
    }
}

#[test]
fn lomax_transform_against_contour_and_brute_force() {
    let k = Kernel::lomax(1.5).unwrap();
    let got = k.transform(2.0).unwrap();
    let contour = lomax_transform_contour(1.5, 2.0);
    assert!((got - contour).norm() < 1e-9, "{got} vs {contour}");

    // Plain Simpson on [0, 10⁴]; the discarded tail is O(h(10⁴)/ω) ≈ 1e-10.
    let re = simpson(|x| k.density(x) * (2.0 * x).cos(), 0.0, 1e4, 20_000_000);
    let im = -simpson(|x| k.density(x) * (2.0 * x).sin(), 0.0, 1e4, 20_000_000);
    assert!((got - Complex64::new(re, im)).norm() < 1e-6);
}

#[test]
fn survival_differences_match_density_integrals() {
    let mut r = Streams::new(4).rng(0);
    use rand::Rng;
    for k in builtins() {
        for _ in 0..20 {
            let a: f64 = r.random_range(-3.0..5.0);
            let b: f64 = a + r.random_range(0.0..4.0);
            // Split at 0 and at the uniform edge, where the density jumps.
            let mut cuts = vec![a, b];
            for c in [0.0, 2.0] {
                if c > a && c < b {
                    cuts.push(c);
                }
            }
            cuts.sort_by(f64::total_cmp);
            let integral: f64 = cuts
                .windows(2)
                .map(|w| simpson(|x| k.density(x), w[0] + 1e-13, w[1] - 1e-13, 20_000))
                .sum();
            let diff = k.survival(a) - k.survival(b);
            assert!((diff - integral).abs() < 1e-8, "{k} on [{a}, {b}]: {diff} vs {integral}");
        }
    }
}

#[test]
fn samplers_match_their_laws() {
    for (i, k) in builtins().into_iter().enumerate() {
        let mut r = Streams::new(17).rng(i as u64);
        let xs: Vec<f64> = (0..100_000).map(|_| k.sample(&mut r).unwrap()).collect();
        let d = ks_distance(xs, |x| 1.0 - k.survival(x));
        assert!(d <= 0.01, "{k}: KS distance {d}");
    }
}

#[test]
fn sample_means() {
    for (k, mean) in [(Kernel::uniform_half(3.0).unwrap(), 1.5), (Kernel::lomax(3.0).unwrap(), 0.5)] {
        let mut r = Streams::new(2).rng(0);
        let xs: Vec<f64> = (0..1_000_000).map(|_| k.sample(&mut r).unwrap()).collect();
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!((m - mean).abs() <= 3.0 * se, "{k}: {m} ± {se}");
    }
}

#[test]
fn seeded_sampling_is_deterministic() {
    let k = Kernel::exponential(2.0).unwrap();
    let draw = || {
        let mut r = Streams::new(99).rng(3);
        (0..5).map(|_| k.sample(&mut r).unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(draw(), draw());
}

#[test]
fn tail_classes() {
    assert_eq!(
        Kernel::lomax(0.5).unwrap().tail_class(),
        KernelTailClass::RegularlyVarying { alpha: 0.5, c: 1.0 }
    );
    assert_eq!(
        Kernel::lomax(2.0).unwrap().tail_class(),
        KernelTailClass::RegularlyVarying { alpha: 2.0, c: 1.0 }
    );
    assert_eq!(Kernel::lomax(3.5).unwrap().tail_class(), KernelTailClass::FiniteThirdMoment);
}

#[test]
fn tabulated_kernel_from_csv() {
    // Laplace(1) sampled on a fine symmetric grid.
    let d = 0.01;
    let mut text = String::from("x,density\n");
    for i in -3000..=3000 {
        let x = i as f64 * d;
        text.push_str(&format!("{x},{}\n", 0.5 * (-x.abs()).exp()));
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("laplace.csv");
    std::fs::write(&path, text).unwrap();
    let t = TabulatedDensity::from_csv(&path).unwrap();
    let k: Kernel = format!("tab:{}", path.display()).parse().unwrap();
    assert!(k.is_symmetric());
    assert_eq!(k, Kernel::tabulated(t));
    for w in [0.5, 1.0, 3.0] {
        let z = k.transform(w).unwrap();
        assert!(z.im.abs() < 1e-12);
        // Hat interpolation of a kinked density: O(d) error near the kink.
        assert!((z.re - 1.0 / (1.0 + w * w)).abs() < 1e-4, "ω={w}: {}", z.re);
    }
    let hat = 0.5 * (0.5 + 0.5 * (-0.01f64).exp());
    assert!(rel(k.density(0.005), hat) < 1e-4);
}

#[test]
fn malformed_tabulated_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for (name, body) in [
        ("header.csv", "a,b\n0,1\n"),
        ("negative.csv", "x,density\n0,1\n1,-0.1\n"),
        ("order.csv", "x,density\n0,1\n2,0.5\n1,0.2\n"),
    ] {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        assert!(TabulatedDensity::from_csv(&p).is_err(), "{name}");
    }
}

#[test]
fn unknown_family_lists_valid_ones() {
    let e = "gauss:1".parse::<Kernel>().unwrap_err().to_string();
    for fam in ["exp", "lomax", "uhalf", "slap", "match", "tab"] {
        assert!(e.contains(fam), "{e}");
    }
}

fn kernel_strategy() -> impl Strategy<Value = Kernel> {
    prop_oneof![
        (0.1f64..5.0).prop_map(|b| Kernel::exponential(b).unwrap()),
        (0.3f64..5.0).prop_map(|a| Kernel::lomax(a).unwrap()),
        (0.1f64..5.0).prop_map(|a| Kernel::uniform_half(a).unwrap()),
        (0.1f64..5.0).prop_map(|b| Kernel::symmetric_laplace(b).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transforms_are_bounded_and_hermitian(k in kernel_strategy(), w in -50.0f64..50.0) {
        let a = k.transform(w).unwrap();
        let b = k.transform(-w).unwrap();
        prop_assert!(a.norm() <= 1.0 + 1e-12);
        prop_assert!((b - a.conj()).norm() <= 1e-12);
        if k.is_symmetric() {
            prop_assert!(a.im.abs() <= 1e-10);
        }
    }

    #[test]
    fn spec_strings_round_trip(k in kernel_strategy()) {
        let s = k.to_string();
        let back: Kernel = s.parse().unwrap();
        prop_assert_eq!(back, k);
    }

    #[test]
    fn symmetric_densities_are_even(b in 0.1f64..5.0, x in -20.0f64..20.0) {
        let k = Kernel::symmetric_laplace(b).unwrap();
        prop_assert_eq!(k.density(x), k.density(-x));
    }
}
