use gbn::distributions::*;
use gbn::RngStream;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn partition_conserves_total(total in 0u64..5000, weights in prop::collection::vec(0.0f64..5.0, 1..12), seed: u64) {
        prop_assume!(weights.iter().sum::<f64>() > 0.0);
        let mut rng = RngStream::new(seed);
        let mut out = vec![0u64; weights.len()];
        sample_multinomial_partition(total, &weights, &mut out, &mut rng).unwrap();
        prop_assert_eq!(out.iter().sum::<u64>(), total);
        for (w, o) in weights.iter().zip(&out) {
            if *w == 0.0 {
                prop_assert_eq!(*o, 0);
            }
        }
    }

    #[test]
    fn crt_between_one_and_n(n in 0u64..2000, r in 1e-4f64..50.0, seed: u64) {
        let mut rng = RngStream::new(seed);
        let l = sample_crt(n, r, &mut rng).unwrap();
        prop_assert!(l <= n);
        prop_assert_eq!(l == 0, n == 0);
    }

    #[test]
    fn dirichlet_on_simplex(alpha in prop::collection::vec(1e-3f64..10.0, 1..30), seed: u64) {
        let mut rng = RngStream::new(seed);
        let mut out = vec![0.0; alpha.len()];
        sample_dirichlet(&alpha, &mut out, &mut rng).unwrap();
        prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(out.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn gamma_positive(shape in 1e-4f64..100.0, scale in 1e-3f64..100.0, seed: u64) {
        let mut rng = RngStream::new(seed);
        let x = sample_gamma(shape, scale, &mut rng).unwrap();
        prop_assert!(x > 0.0 && x.is_finite());
    }

    #[test]
    fn truncated_samplers_start_at_one(lambda in 1e-6f64..200.0, seed: u64) {
        let mut rng = RngStream::new(seed);
        prop_assert!(sample_truncated_poisson(lambda, &mut rng).unwrap() >= 1);
        prop_assert!(sample_truncated_bessel(lambda, &mut rng).unwrap() >= 1);
    }

    #[test]
    fn bivariate_tables_bounded_by_customers(r in 0.01f64..10.0, p in 0.01f64..0.95, seed: u64) {
        let mut rng = RngStream::new(seed);
        let (n, l) = sample_poisson_log_bivariate(r, p, &mut rng).unwrap();
        prop_assert!(l <= n);
        prop_assert_eq!(l == 0, n == 0);
    }

    #[test]
    fn prg_nonnegative(lambda in 1e-3f64..50.0, c in 0.01f64..10.0, seed: u64) {
        let mut rng = RngStream::new(seed);
        let y = sample_prg(lambda, c, &mut rng).unwrap();
        prop_assert!(y >= 0.0 && y.is_finite());
    }
}

#[test]
fn invalid_parameters_are_errors() {
    let mut rng = RngStream::new(0);
    assert!(sample_gamma(0.0, 1.0, &mut rng).is_err());
    assert!(sample_gamma(1.0, -1.0, &mut rng).is_err());
    assert!(sample_crt(3, 0.0, &mut rng).is_err());
    assert!(sample_log(1.0, &mut rng).is_err());
    assert!(sample_truncated_poisson(0.0, &mut rng).is_err());
    assert!(sample_dirichlet(&[1.0, 0.0], &mut [0.0, 0.0], &mut rng).is_err());
}

#[test]
fn crt_zero_customers_is_zero_tables() {
    let mut rng = RngStream::new(1);
    assert_eq!(sample_crt(0, 2.0, &mut rng).unwrap(), 0);
    assert_eq!(sample_crt(1, 2.0, &mut rng).unwrap(), 1);
}

#[test]
fn prg_zero_mass_matches_poisson_zero() {
    let mut rng = RngStream::new(2);
    let (lambda, n) = (0.7, 200_000);
    let zeros = (0..n).filter(|_| sample_prg(lambda, 2.0, &mut rng).unwrap() == 0.0).count();
    let p = (-lambda as f64).exp();
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!((zeros as f64 / n as f64 - p).abs() < 4.0 * se);
    assert!((prg_logdensity(0.0, lambda, 2.0).unwrap() + lambda).abs() < 1e-15);
}
