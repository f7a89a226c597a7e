use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use tci_lab::gaussian::{sample_path, PathGaussian};
use tci_lab::roughlift::{
    chen_lift, homog_pvar_norm, homogeneous_gauge, n_alpha, n_alpha_shift_bound_check, rough_control, translate,
    translation_constant,
};
use tci_lab::{Interval, SampledPath, SeededRng};

fn arb_path(dim: usize) -> impl Strategy<Value = SampledPath> {
    (2usize..=24).prop_flat_map(move |n| {
        prop::collection::vec(-2.0..2.0f64, n * dim).prop_map(move |v| {
            SampledPath::new(SampledPath::uniform_times(n, 1.0), v, dim).unwrap()
        })
    })
}

fn arb_pair(dim: usize) -> impl Strategy<Value = (SampledPath, SampledPath)> {
    (2usize..=24).prop_flat_map(move |n| {
        (
            prop::collection::vec(-2.0..2.0f64, n * dim),
            prop::collection::vec(-2.0..2.0f64, n * dim),
        )
            .prop_map(move |(a, b)| {
                let t = SampledPath::uniform_times(n, 1.0);
                (SampledPath::new(t.clone(), a, dim).unwrap(), SampledPath::new(t, b, dim).unwrap())
            })
    })
}

fn brownian_lift(seed: u64, n: usize) -> tci_lab::RoughPath2 {
    let x = sample_path(&PathGaussian::brownian(1.0, n, 2), SeededRng::new(seed, 0)).unwrap();
    chen_lift(&x).unwrap()
}

#[test]
fn two_segment_lift() {
    let x = SampledPath::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0], 2).unwrap();
    let rp = chen_lift(&x).unwrap();
    let got = rp.level2(0, 2);
    for (g, e) in got.iter().zip([0.5, 1.0, 0.0, 0.5]) {
        assert_abs_diff_eq!(*g, e, epsilon = 1e-15);
    }
    assert_abs_diff_eq!(rp.chen_residual(0, 1, 2), 0.0, epsilon = 1e-15);
    assert_abs_diff_eq!(rp.weak_geometric_residual(0, 2), 0.0, epsilon = 1e-15);
}

#[test]
fn constant_base_path_shift_count() {
    let t = SampledPath::uniform_times(65, 1.0);
    let x = SampledPath::zeros(t.clone(), 2).unwrap();
    let h = SampledPath::from_fn(t, 2, |s| vec![3.0 * (6.0 * s).sin(), 2.0 * s * s]).unwrap();
    let rp = chen_lift(&x).unwrap();
    let lifted_h = chen_lift(&h).unwrap();
    let alpha = translation_constant(&rp, &h, 2.5, 1.0).unwrap().max(1.0);
    for a in [alpha, 2.0 * alpha] {
        let r = n_alpha_shift_bound_check(&rp, &h, 2.5, 1.0, a).unwrap();
        assert_eq!(r.n1, 0);
        assert_eq!(r.lhs as usize, n_alpha(&lifted_h, a, 2.5, Interval::full(65)).unwrap());
        assert!(r.holds, "{r:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn lift_and_translate_are_multiplicative_and_geometric((x, h) in arb_pair(2)) {
        let rp = chen_lift(&x).unwrap();
        let shifted = translate(&rp, &h).unwrap();
        let n = x.len();
        for r in [&rp, &shifted] {
            for s in 0..n {
                for t in s..n {
                    prop_assert!(r.weak_geometric_residual(s, t) <= 1e-12);
                    for u in s..=t {
                        prop_assert!(r.chen_residual(s, u, t) <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn translate_equals_lift_of_sum((x, h) in arb_pair(3)) {
        let shifted = translate(&chen_lift(&x).unwrap(), &h).unwrap();
        let direct = chen_lift(&x.add(&h).unwrap()).unwrap();
        let n = x.len();
        for s in 0..n {
            for t in s..n {
                for (a, b) in shifted.level2(s, t).iter().zip(direct.level2(s, t)) {
                    prop_assert!((a - b).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn homogeneous_norm_nonincreasing_in_p(x in arb_path(2)) {
        let rp = chen_lift(&x).unwrap();
        let v: Vec<f64> = [2.0, 2.25, 2.5, 2.75]
            .iter()
            .map(|&p| homog_pvar_norm(&rp, p, Interval::full(rp.len())).unwrap())
            .collect();
        for w in v.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn accumulation_count_bounds(seed in 0u64..1_000_000, p in 2.1..2.9f64) {
        let rp = brownian_lift(seed, 129);
        let full = Interval::full(rp.len());
        let omega = rough_control(&rp, p, 0, rp.len() - 1).unwrap();
        let mut prev = usize::MAX;
        for alpha in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let count = n_alpha(&rp, alpha, p, full).unwrap();
            prop_assert!(count <= prev);
            prop_assert!(count as f64 <= omega / alpha * (1.0 + 1e-12));
            prev = count;
        }
    }
}

#[test]
fn gauge_is_dilation_homogeneous() {
    let rp = brownian_lift(3, 65);
    let scaled = chen_lift(&rp.base().scale(3.0)).unwrap();
    let full = Interval::full(65);
    let g = homogeneous_gauge(&rp, 2.5, full).unwrap();
    assert_abs_diff_eq!(homogeneous_gauge(&scaled, 2.5, full).unwrap(), 3.0 * g, epsilon = 1e-10 * g);
}
