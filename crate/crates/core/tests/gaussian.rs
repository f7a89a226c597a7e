use approx::assert_relative_eq;
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use tci_lab::gaussian::{
    cm_norm, projection_lipschitz, projection_metric, sample_path, schauder_basis, schauder_coeffs,
    FiniteDimGaussian, GaussianSampler, GaussianSpec, PathGaussian, ProcessKind,
};
use tci_lab::paths::sup_distance;
use tci_lab::{SampledPath, SeededRng};

fn ks_statistic(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let std = Normal::standard();
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = std.cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn brownian_increments_are_standard_normal() {
    let spec = PathGaussian::brownian(2.0, 4097, 2);
    let x = sample_path(&spec, SeededRng::new(11, 0)).unwrap();
    let dt: f64 = 2.0 / 4096.0;
    for c in 0..2 {
        let col = x.component(c).unwrap();
        let z: Vec<f64> = col.values().windows(2).map(|w| (w[1] - w[0]) / dt.sqrt()).collect();
        let n = z.len() as f64;
        assert!(ks_statistic(z) <= 1.95 / n.sqrt());
    }
}

#[test]
fn fbm_sample_covariance() {
    let spec = PathGaussian::new(ProcessKind::FractionalBm { hurst: 0.3 }, 1.0, 9, 1).unwrap();
    let sampler = GaussianSampler::for_path(&spec).unwrap();
    let trials = 100_000;
    let root = SeededRng::new(5, 0);
    let paths: Vec<Vec<f64>> = (0..trials)
        .map(|i| sampler.sample_path(root.substream(i)).unwrap().values().to_vec())
        .collect();
    let times = spec.times();
    for (a, b) in [(1, 1), (2, 5), (4, 8), (8, 8), (3, 7)] {
        let emp = paths.iter().map(|p| p[a] * p[b]).sum::<f64>() / trials as f64;
        let cov = |i: usize, j: usize| spec.process.covariance(times[i], times[j], 1.0);
        let se = ((cov(a, a) * cov(b, b) + cov(a, b).powi(2)) / trials as f64).sqrt();
        assert!((emp - cov(a, b)).abs() <= 3.0 * se, "({a},{b}): {emp} vs {}", cov(a, b));
    }
}

#[test]
fn same_stream_same_sample() {
    for process in [
        ProcessKind::BrownianMotion,
        ProcessKind::BrownianBridge,
        ProcessKind::FractionalBm { hurst: 0.7 },
        ProcessKind::OrnsteinUhlenbeck { theta: 1.0, sigma: 0.5 },
    ] {
        let spec = PathGaussian::new(process, 1.0, 33, 2).unwrap();
        let a = sample_path(&spec, SeededRng::new(3, 9)).unwrap();
        let b = sample_path(&spec, SeededRng::new(3, 9)).unwrap();
        let c = sample_path(&spec, SeededRng::new(3, 10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}

#[test]
fn latin_sample_hits_every_stratum_once() {
    let count = 500;
    let sampler = GaussianSampler::new(&GaussianSpec::FiniteDim(FiniteDimGaussian::standard(3))).unwrap();
    let pts = sampler.sample_vectors_latin(SeededRng::new(1, 2), count).unwrap();
    let std = Normal::standard();
    for c in 0..3 {
        let mut seen = vec![false; count];
        for p in &pts {
            let s = (std.cdf(p[c]) * count as f64).floor() as usize;
            assert!(!seen[s]);
            seen[s] = true;
        }
        let mean = pts.iter().map(|p| p[c]).sum::<f64>() / count as f64;
        assert!(mean.abs() < 0.01);
    }
}

#[test]
fn schauder_basis_is_orthonormal() {
    let times = SampledPath::uniform_times(17, 2.0);
    for k in 0..16 {
        let e = schauder_basis(times.clone(), k).unwrap();
        assert_relative_eq!(cm_norm(&e).unwrap(), 1.0, epsilon = 1e-12);
        let coeffs = schauder_coeffs(&e, 16).unwrap();
        for (j, c) in coeffs.iter().enumerate() {
            assert_relative_eq!(*c, if j == k { 1.0 } else { 0.0 }, epsilon = 1e-12);
        }
    }
}

fn brownian_pair(seed: u64) -> (SampledPath, SampledPath) {
    let spec = PathGaussian::brownian(1.0, 65, 2);
    let root = SeededRng::new(seed, 0);
    (sample_path(&spec, root.substream(0)).unwrap(), sample_path(&spec, root.substream(1)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_grows_with_rank(seed in 0u64..1_000_000, scale in 0.01..1.0f64) {
        let (x, y) = brownian_pair(seed);
        let y = y.scale(scale);
        let d: Vec<f64> = (1..=64).map(|n| projection_metric(&x, &y, n).unwrap()).collect();
        for n in 1..64 {
            let uncapped_next = d[n] < (n + 1) as f64;
            if uncapped_next {
                prop_assert!(d[n] >= d[n - 1] - 1e-12);
            }
        }
    }

    #[test]
    fn projection_is_sup_lipschitz(seed in 0u64..1_000_000, n in 1usize..=64) {
        let (x, y) = brownian_pair(seed);
        let lhs = projection_metric(&x, &y, n).unwrap();
        let rhs = projection_lipschitz(&x, n).unwrap() * sup_distance(&x, &y).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn projected_shift_below_cm_norm(seed in 0u64..1_000_000, n in 1usize..=64, a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let (x, _) = brownian_pair(seed);
        let h = SampledPath::from_fn(x.times().to_vec(), 2, |t| vec![a * t * t, b * (3.0 * t).sin()]).unwrap();
        let lhs = projection_metric(&x.add(&h).unwrap(), &x, n).unwrap();
        prop_assert!(lhs <= cm_norm(&h).unwrap() * (1.0 + 1e-12) + 1e-12);
    }
}
