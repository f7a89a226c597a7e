use nalgebra::DMatrix;
use proptest::prelude::*;
use tci_lab::flows::{additive_lipschitz_ratio, ode_additive_solve, rde_shift_response, VectorFieldSpec};
use tci_lab::gaussian::{sample_path, PathGaussian};
use tci_lab::paths::p_variation;
use tci_lab::roughlift::chen_lift;
use tci_lab::{SampledPath, SeededRng};

fn tanh_drift() -> VectorFieldSpec {
    let a = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, -0.5, 0.3]);
    VectorFieldSpec::tanh_linear(a, vec![DMatrix::zeros(2, 2)], vec![vec![0.0, 0.0]]).unwrap()
}

#[test]
fn heun_is_second_order() {
    let b = tanh_drift();
    let driver = |t: f64| vec![(3.0 * t).sin(), t * t - 0.5 * t];
    let end = |n: usize| {
        let x = SampledPath::from_fn(SampledPath::uniform_times(n, 2.0), 2, driver).unwrap();
        ode_additive_solve(&x, &b, &[0.4, -0.2]).unwrap().value(n - 1).to_vec()
    };
    let reference = end(65_537);
    let err = |n: usize| {
        end(n).iter().zip(&reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    };
    let errors: Vec<f64> = [65, 129, 257, 513].iter().map(|&n| err(n)).collect();
    for w in errors.windows(2) {
        let rate = w[0] / w[1];
        assert!((3.5..4.5).contains(&rate), "{errors:?}");
    }
}

#[test]
fn constant_fields_shift_by_the_shift() {
    let t = SampledPath::uniform_times(129, 1.0);
    let x = sample_path(&PathGaussian::brownian(1.0, 129, 2), SeededRng::new(2, 0)).unwrap();
    let h = SampledPath::from_fn(t.clone(), 2, |s| vec![(4.0 * s).sin(), s * s]).unwrap();
    let c = [vec![1.0, 0.5, -2.0], vec![0.0, 3.0, 1.0]];
    let f = VectorFieldSpec::constant(c.to_vec()).unwrap();
    let r = rde_shift_response(&chen_lift(&x).unwrap(), &h, &f, &[0.0, 1.0, 2.0], 2.5, 1.0).unwrap();
    let expected = SampledPath::from_fn(t, 3, |s| {
        let hv = [(4.0 * s).sin(), s * s];
        (0..3).map(|k| c[0][k] * hv[0] + c[1][k] * hv[1]).collect()
    })
    .unwrap();
    let d = p_variation(&expected, 2.5, expected.full()).unwrap();
    assert!((r.d - d).abs() <= 1e-12 * d.max(1.0), "{} vs {d}", r.d);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn additive_flow_is_lipschitz_in_the_driver(
        entries in prop::collection::vec(-2.0..2.0f64, 4),
        seed in 0u64..1_000_000,
        scale in 0.01..5.0f64,
        q in 1.0..3.0f64,
        xi in prop::collection::vec(-1.0..1.0f64, 2),
    ) {
        let a = DMatrix::from_row_slice(2, 2, &entries);
        for b in [
            VectorFieldSpec::linear(a.clone(), vec![]).unwrap(),
            VectorFieldSpec::tanh_linear(a.clone(), vec![DMatrix::zeros(2, 2)], vec![vec![0.0, 0.0]]).unwrap(),
        ] {
            let root = SeededRng::new(seed, 0);
            let spec = PathGaussian::brownian(1.0, 257, 2);
            let x = sample_path(&spec, root.substream(0)).unwrap();
            let h = sample_path(&spec, root.substream(1)).unwrap().scale(scale);
            let r = additive_lipschitz_ratio(&x, &h, &b, &xi, q).unwrap();
            prop_assert!(r.holds, "{r:?}");
        }
    }
}
