use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};
use tci_lab::concentration::{
    empirical_concentration_experiment, fernique_check, medians_decreasing, n1_tail_experiment, tail_fit,
    TailFunctional, TailVerdict,
};
use tci_lab::gaussian::{FiniteDimGaussian, GaussianSampler, GaussianSpec, PathGaussian, ProcessKind};
use tci_lab::roughlift::{chen_lift, n_alpha};
use tci_lab::{Interval, SeededRng};

#[test]
fn folded_normal_scales() {
    for sigma2 in [0.5, 1.0, 2.0, 4.0] {
        let normal = Normal::new(0.0, f64::sqrt(sigma2)).unwrap();
        let mut good = 0;
        for seed in 0..10 {
            let mut g = SeededRng::new(seed, 0).generator();
            let xs: Vec<f64> = (0..100_000).map(|_| normal.sample(&mut g).abs()).collect();
            let fit = tail_fit(&xs, 0.8).unwrap();
            if fit.verdict == TailVerdict::Gaussian && (fit.sigma2 / sigma2 - 1.0).abs() <= 0.15 {
                good += 1;
            }
        }
        assert!(good >= 9, "sigma2 = {sigma2}: {good}/10");
    }
}

#[test]
fn degenerate_process_is_bounded() {
    let spec = PathGaussian::new(ProcessKind::OrnsteinUhlenbeck { theta: 1.0, sigma: 0.0 }, 1.0, 33, 1).unwrap();
    let r = fernique_check(&spec, TailFunctional::SupNorm, 10_000, 0.8, SeededRng::new(0, 0)).unwrap();
    assert_eq!(r.mean, 0.0);
    assert_eq!(r.fit.verdict, TailVerdict::Bounded);
}

#[test]
fn lifted_norm_has_gaussian_tail() {
    let spec = PathGaussian::brownian(1.0, 129, 2);
    let r = fernique_check(&spec, TailFunctional::HomogLiftNorm { p: 2.5 }, 10_000, 0.8, SeededRng::new(0, 0)).unwrap();
    assert_eq!(r.fit.verdict, TailVerdict::Gaussian, "{:?}", r.fit);
}

#[test]
fn short_horizon_counts_vanish() {
    let spec = PathGaussian::brownian(0.01, 129, 2);
    let r = n1_tail_experiment(&spec, 2.5, 10_000, 0.8, SeededRng::new(0, 0)).unwrap();
    assert_eq!(r.max_count, 0);
    assert_eq!(r.fit.verdict, TailVerdict::Bounded);
}

#[test]
fn counts_grow_with_the_horizon() {
    let spec = PathGaussian::brownian(2.0, 257, 2);
    let sampler = GaussianSampler::for_path(&spec).unwrap();
    let (mut half, mut whole) = (0, 0);
    for i in 0..200 {
        let rp = chen_lift(&sampler.sample_path(SeededRng::new(1, i)).unwrap()).unwrap();
        let a = n_alpha(&rp, 1.0, 2.5, Interval::new(0, 128)).unwrap();
        let b = n_alpha(&rp, 1.0, 2.5, Interval::new(0, 256)).unwrap();
        assert!(a <= b);
        half += a;
        whole += b;
    }
    assert!(whole > half);
}

/// Median of `|Z - y0|` for standard normal `Z`, by bisection.
fn folded_median(y0: f64) -> f64 {
    let phi = StdNormal::standard();
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if phi.cdf(y0 + m) - phi.cdf(y0 - m) < 0.5 {
            lo = m;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn single_point_median() {
    let spec = FiniteDimGaussian::standard(1);
    let rng = SeededRng::new(6, 0);
    let rows = empirical_concentration_experiment(&spec, &[1], 4000, rng).unwrap();
    let sampler = GaussianSampler::new(&GaussianSpec::FiniteDim(spec)).unwrap();
    let y0 = sampler.sample_vectors(rng.substream(0).substream(0), 1).unwrap()[0][0];
    let expected = folded_median(y0);
    assert!((rows[0].median / expected - 1.0).abs() <= 0.1, "{} vs {expected}", rows[0].median);
}

#[test]
fn point_mass_never_exceeds() {
    let spec = FiniteDimGaussian::new(vec![1.0, 2.0], DMatrix::zeros(2, 2)).unwrap();
    let rows = empirical_concentration_experiment(&spec, &[4, 16], 50, SeededRng::new(0, 0)).unwrap();
    for row in rows {
        assert!(row.median < 1e-6);
        assert!(row.exceedance.iter().all(|e| e.p_hat == 0.0 && e.holds));
    }
}

#[test]
fn medians_shrink_with_sample_size() {
    let spec = FiniteDimGaussian::standard(2);
    let rows = empirical_concentration_experiment(&spec, &[8, 32, 128], 100, SeededRng::new(0, 0)).unwrap();
    assert!(medians_decreasing(&rows));
    assert!(rows.iter().all(|r| r.holds()));
}
