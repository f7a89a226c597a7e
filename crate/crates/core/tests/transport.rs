use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};
use tci_lab::assignment::{solve, solve_bruteforce, CostMatrix};
use tci_lab::gaussian::{sample_path, FiniteDimGaussian, GaussianSampler, GaussianSpec, PathGaussian};
use tci_lab::transport::{
    empirical_wasserstein, gaussian_kl, gaussian_w2, t2_check_finite_dim, wasserstein_bruteforce,
    wasserstein_sorted_1d, EmpiricalMeasure, GroundCost, TRIANGLE_TOL,
};
use tci_lab::SeededRng;

fn arb_cov(k: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, k * k)
        .prop_map(move |v| {
            let a = DMatrix::from_vec(k, k, v);
            &a * a.transpose() + DMatrix::identity(k, k) * 0.2
        })
}

fn arb_gaussian(k: usize) -> impl Strategy<Value = FiniteDimGaussian> {
    (prop::collection::vec(-2.0..2.0f64, k), arb_cov(k))
        .prop_map(|(m, c)| FiniteDimGaussian::new(m, c).unwrap())
}

fn arb_points(n: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0..3.0f64, dim), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn hungarian_matches_permutations(
        n in 1usize..=7,
        raw in prop::collection::vec((0.0..10.0f64, 0u8..10), 49),
    ) {
        let data: Vec<f64> = raw[..n * n]
            .iter()
            .map(|&(c, flag)| if flag == 0 { f64::INFINITY } else { c })
            .collect();
        let m = CostMatrix::new(n, data).unwrap();
        let fast = solve(&m).total;
        let slow = solve_bruteforce(&m).unwrap().total;
        if slow.is_infinite() {
            prop_assert!(fast.is_infinite());
        } else {
            prop_assert!((fast - slow).abs() <= 1e-10 * slow.max(1.0), "{fast} vs {slow}");
        }
    }

    #[test]
    fn empirical_w2_matches_enumeration(n in 1usize..=7, a in arb_points(7, 2), b in arb_points(7, 2)) {
        let mu = EmpiricalMeasure::new(a[..n].to_vec()).unwrap();
        let nu = EmpiricalMeasure::new(b[..n].to_vec()).unwrap();
        let fast = empirical_wasserstein(&mu, &nu, &GroundCost::Euclidean, 2.0).unwrap();
        let slow = wasserstein_bruteforce(&mu, &nu, &GroundCost::Euclidean, 2.0).unwrap();
        prop_assert!((fast - slow).abs() <= 1e-10 * slow.max(1.0));
    }

    #[test]
    fn sorted_coupling_is_optimal(a in prop::collection::vec(-3.0..3.0f64, 6), b in prop::collection::vec(-3.0..3.0f64, 6), p in 1.0..3.0f64) {
        let wrap = |v: &[f64]| EmpiricalMeasure::new(v.iter().map(|x| vec![*x]).collect::<Vec<_>>()).unwrap();
        let sorted = wasserstein_sorted_1d(&a, &b, p).unwrap();
        let slow = wasserstein_bruteforce(&wrap(&a), &wrap(&b), &GroundCost::Euclidean, p).unwrap();
        prop_assert!((sorted - slow).abs() <= 1e-10 * slow.max(1.0));
    }

    #[test]
    fn talagrand_holds_for_gaussians(nu in arb_gaussian(3), mu in arb_gaussian(3)) {
        let r = t2_check_finite_dim(&nu, &mu, 2.0).unwrap();
        prop_assert!(r.holds, "{r:?}");
    }

    #[test]
    fn talagrand_is_sharp_for_shifts(mu in arb_gaussian(3), m in prop::collection::vec(-2.0..2.0f64, 3)) {
        let nu = FiniteDimGaussian::new(m, mu.cov().clone()).unwrap();
        let r = t2_check_finite_dim(&nu, &mu, 2.0).unwrap();
        prop_assert!(r.equality_gap.abs() <= 1e-9 * r.rhs.max(1.0), "{r:?}");
    }
}

#[test]
fn gaussian_w2_examples() {
    let a = FiniteDimGaussian::new(vec![0.0, 0.0], DMatrix::identity(2, 2)).unwrap();
    let b = FiniteDimGaussian::new(vec![3.0, 4.0], DMatrix::identity(2, 2)).unwrap();
    assert_relative_eq!(gaussian_w2(&a, &b).unwrap(), 5.0, epsilon = 1e-12);
    let c = FiniteDimGaussian::new(vec![0.0, 0.0], DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]))).unwrap();
    assert_relative_eq!(gaussian_w2(&a, &c).unwrap(), 5f64.sqrt(), epsilon = 1e-12);
    let d = FiniteDimGaussian::new(vec![1.0], DMatrix::from_element(1, 1, 0.25)).unwrap();
    let e = FiniteDimGaussian::new(vec![-1.0], DMatrix::from_element(1, 1, 2.25)).unwrap();
    assert_relative_eq!(gaussian_w2(&d, &e).unwrap(), 5f64.sqrt(), epsilon = 1e-12);
}

fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    h * (0.5 * f(a) + 0.5 * f(b) + (1..n).map(|i| f(a + i as f64 * h)).sum::<f64>())
}

#[test]
fn scalar_kl_against_quadrature() {
    let pdf = |x: f64, m: f64, v: f64| (-(x - m).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
    for (m1, v1, m2, v2) in [(0.0, 1.0, 0.0, 1.0), (0.5, 2.0, -1.0, 0.7), (2.0, 0.3, 0.0, 3.0)] {
        let nu = FiniteDimGaussian::new(vec![m1], DMatrix::from_element(1, 1, v1)).unwrap();
        let mu = FiniteDimGaussian::new(vec![m2], DMatrix::from_element(1, 1, v2)).unwrap();
        let oracle = trapezoid(|x| {
            let p = pdf(x, m1, v1);
            if p == 0.0 { 0.0 } else { p * (p / pdf(x, m2, v2)).ln() }
        }, -30.0, 30.0, 200_000);
        assert_relative_eq!(gaussian_kl(&nu, &mu).unwrap(), oracle, epsilon = 1e-8);
    }
}

fn log_density(g: &FiniteDimGaussian, x: &DVector<f64>) -> f64 {
    let chol = g.cov().clone().cholesky().unwrap();
    let d = x - g.mean();
    let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    -0.5 * (d.dot(&chol.solve(&d)) + logdet + g.dim() as f64 * (2.0 * std::f64::consts::PI).ln())
}

#[test]
fn kl_against_monte_carlo() {
    let nu = FiniteDimGaussian::new(vec![0.3, -0.4], DMatrix::from_row_slice(2, 2, &[1.5, 0.4, 0.4, 0.8])).unwrap();
    let mu = FiniteDimGaussian::new(vec![-0.2, 0.1], DMatrix::from_row_slice(2, 2, &[1.0, -0.3, -0.3, 2.0])).unwrap();
    let l = nu.cov().clone().cholesky().unwrap().l();
    let mut g = SeededRng::new(4, 0).generator();
    let n = 1_000_000;
    let terms: Vec<f64> = (0..n)
        .map(|_| {
            let z = DVector::from_fn(2, |_, _| StandardNormal.sample(&mut g));
            let x = nu.mean() + &l * z;
            log_density(&nu, &x) - log_density(&mu, &x)
        })
        .collect();
    let mean = terms.iter().sum::<f64>() / n as f64;
    let var = terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let exact = gaussian_kl(&nu, &mu).unwrap();
    assert!((mean - exact).abs() <= 3.0 * se, "{mean} vs {exact} (se {se})");
}

#[test]
fn empirical_triangle_inequality() {
    let sampler = GaussianSampler::new(&GaussianSpec::FiniteDim(FiniteDimGaussian::standard(3))).unwrap();
    let root = SeededRng::new(8, 0);
    let m: Vec<EmpiricalMeasure<Vec<f64>>> = (0..3)
        .map(|i| EmpiricalMeasure::new(sampler.sample_vectors(root.substream(i), 50).unwrap()).unwrap())
        .collect();
    let w = |a: usize, b: usize| empirical_wasserstein(&m[a], &m[b], &GroundCost::Euclidean, 2.0).unwrap();
    assert!(w(0, 2) <= w(0, 1) + w(1, 2) + TRIANGLE_TOL);
    assert!(w(0, 0) <= TRIANGLE_TOL);
    assert_relative_eq!(w(0, 1), w(1, 0), epsilon = 1e-12);

    let spec = PathGaussian::brownian(1.0, 33, 2);
    let paths: Vec<EmpiricalMeasure<_>> = (0..3)
        .map(|i| {
            let pts = (0..20).map(|j| sample_path(&spec, root.substream(10 + i).substream(j)).unwrap()).collect();
            EmpiricalMeasure::new(pts).unwrap()
        })
        .collect();
    let cost = GroundCost::PVarDistance { p: 2.5 };
    let w = |a: usize, b: usize| empirical_wasserstein(&paths[a], &paths[b], &cost, 2.0).unwrap();
    assert!(w(0, 2) <= w(0, 1) + w(1, 2) + TRIANGLE_TOL);
    assert!(w(1, 1) <= TRIANGLE_TOL);
}
