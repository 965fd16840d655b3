macro_rules! example {
    ($name:ident) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!("../examples/", stringify!($name), ".rs"));
        }
    };
}

example!(kernels_tour);
example!(simulate_hawkes);
example!(bispectrum_closed_form);
example!(spectral_match);
example!(invert_cumulant);
example!(orientation_contrast);
example!(mc_validation);
example!(small_frequency_limits);

#[test]
fn kernels_tour_runs() {
    let v = kernels_tour::run().unwrap();
    assert_eq!(v.len(), 5);
    // |ĥ(1)| of Exponential(1) is 1/√2.
    assert!((v[0].1 - 0.5f64.sqrt()).abs() < 1e-12);
    assert!(v.iter().all(|(_, x)| *x <= 1.0));
}

#[test]
fn simulate_hawkes_runs() {
    let (n, rate) = simulate_hawkes::run().unwrap();
    assert!(n > 0);
    assert!((rate - 2.0).abs() < 0.2, "{rate}");
}

#[test]
fn bispectrum_closed_form_runs() {
    assert!(bispectrum_closed_form::run().unwrap() < 1e-10);
}

#[test]
fn spectral_match_runs() {
    assert!(spectral_match::run().unwrap() < 1e-8);
}

#[test]
fn invert_cumulant_runs() {
    let total = invert_cumulant::run().unwrap();
    assert!((total - 44.0).abs() < 0.44, "{total}");
}

#[test]
fn orientation_contrast_runs() {
    let (fwd, rev) = orientation_contrast::run().unwrap();
    assert!((fwd + rev).abs() <= 1e-11 * fwd.abs());
}

#[test]
fn mc_validation_runs() {
    assert!(mc_validation::run().unwrap());
}

#[test]
fn small_frequency_limits_runs() {
    let f = small_frequency_limits::run().unwrap();
    assert_eq!(f.len(), 4);
    assert!((f[0].unwrap() - 1.0).abs() < 0.02);
    assert!((f[1].unwrap() - 1.0).abs() < 0.10);
    assert!(f[2].is_none() && f[3].is_none());
}
