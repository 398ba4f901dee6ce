use proptest::prelude::*;
use zfvertex::braid::{lexicographic, BraidWord};
use zfvertex::tensor::max_abs_distance;
use zfvertex::vertex::{
    closed_form_dual_first, closed_form_first, closed_form_second, CoefficientKind,
    InfinityCoupling, VertexEngine,
};
use zfvertex::{Error, RMatrixModel};

fn separated(n: usize) -> impl Strategy<Value = (f64, Vec<f64>)> {
    prop::collection::vec(-3.0f64..3.0, n + 1)
        .prop_filter("distinct", |ks| {
            ks.iter()
                .enumerate()
                .all(|(i, a)| ks[i + 1..].iter().all(|b| (a - b).abs() > 1e-3))
        })
        .prop_map(|mut ks| {
            let k_inf = ks.remove(0);
            (k_inf, ks)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn low_orders_match_closed_forms((k_inf, ks) in separated(2), g in 0.2f64..1.5) {
        let m = RMatrixModel::yangian(2, g).unwrap();
        let e = VertexEngine::new(m.clone());
        let t1 = e.t_coefficient(k_inf, &ks[..1]).unwrap();
        prop_assert!(max_abs_distance(&t1.op, &closed_form_first(&m, k_inf, ks[0]).unwrap()).unwrap() < 1e-12);
        let t2 = e.t_coefficient(k_inf, &ks).unwrap();
        let cf = closed_form_second(&m, k_inf, ks[0], ks[1]).unwrap();
        prop_assert!(max_abs_distance(&t2.op, &cf).unwrap() < 1e-12);
        let d1 = e.t_bar_coefficient(k_inf, &ks[..1]).unwrap();
        prop_assert!(max_abs_distance(&d1.op, &closed_form_dual_first(&m, k_inf, ks[0]).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn coefficients_are_covariant((k_inf, ks) in separated(3)) {
        let e = VertexEngine::new(RMatrixModel::yangian(2, 1.0).unwrap());
        for kind in [CoefficientKind::Direct, CoefficientKind::Dual] {
            let c = e.coefficient(kind, k_inf, &ks).unwrap();
            for sigma in lexicographic(3) {
                prop_assert!(e.check_covariance(&c, &BraidWord::new(sigma)).unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn exchange_with_the_next_oscillator((k_inf, ks) in separated(3)) {
        let e = VertexEngine::new(RMatrixModel::yangian(3, 0.6).unwrap());
        prop_assert!(e.check_characterization(k_inf, ks[0], &ks[1..2]).unwrap() < 1e-10);
        prop_assert!(e.check_characterization(k_inf, ks[0], &ks[1..]).unwrap() < 1e-10);
    }

    #[test]
    fn dual_is_the_adjoint_for_real_yangian((k_inf, ks) in separated(3)) {
        let e = VertexEngine::new(RMatrixModel::yangian(2, 1.0).unwrap());
        for n in 1..=3 {
            let t = e.t_coefficient(k_inf, &ks[..n]).unwrap();
            let d = e.t_bar_coefficient(k_inf, &ks[..n]).unwrap();
            prop_assert!(max_abs_distance(&d.op, &t.op.adjoint()).unwrap() < 1e-12, "order {}", n);
        }
    }
}

#[test]
fn order_four_is_covariant_for_the_trigonometric_model() {
    let e = VertexEngine::new(RMatrixModel::trigonometric(0.7).unwrap());
    let ks = [0.45, 1.9, 0.8, 2.6];
    let c = e.t_coefficient(1.25, &ks).unwrap();
    for sigma in [vec![1, 0, 2, 3], vec![3, 2, 1, 0], vec![2, 0, 3, 1]] {
        let w = BraidWord::new(zfvertex::braid::Permutation::new(sigma).unwrap());
        assert!(e.check_covariance(&c, &w).unwrap() < 1e-10);
    }
}

#[test]
fn identity_model_has_no_higher_coefficients() {
    let e = VertexEngine::new(RMatrixModel::identity(2));
    for n in 1..=4 {
        let ks: Vec<f64> = (0..n).map(|j| 0.5 + j as f64).collect();
        assert!(e.t_coefficient(-0.25, &ks).unwrap().op.is_zero());
        assert!(e.t_bar_coefficient(-0.25, &ks).unwrap().op.is_zero());
    }
}

#[test]
fn decoupled_infinity_makes_the_series_trivial() {
    let m = RMatrixModel::yangian(2, 1.0).unwrap();
    let scaled = VertexEngine::with_options(m.clone(), 3, InfinityCoupling::Scaled(0.0));
    let id = VertexEngine::with_options(m, 3, InfinityCoupling::Identity);
    for n in 1..=3 {
        let ks: Vec<f64> = (0..n).map(|j| j as f64 - 1.1).collect();
        let a = scaled.t_coefficient(0.4, &ks).unwrap().op;
        let b = id.t_coefficient(0.4, &ks).unwrap().op;
        assert!(b.max_abs() < 1e-12, "order {n}");
        let id_n = zfvertex::MultiSiteOperator::identity(2, n + 1);
        assert!(max_abs_distance(&a, &id_n).unwrap() < 1e-12, "order {n}");
    }
}

#[test]
fn rejects_bad_arguments() {
    let e = VertexEngine::new(RMatrixModel::yangian(2, 1.0).unwrap());
    assert!(matches!(
        e.t_coefficient(0.0, &[1.0, 1.0]),
        Err(Error::DegenerateRapidities(_))
    ));
    assert!(matches!(
        e.t_coefficient(1.0, &[1.0]),
        Err(Error::DegenerateRapidities(_))
    ));
    assert!(matches!(
        e.t_coefficient(0.0, &[1.0, 2.0, 3.0, 4.0, 5.0]),
        Err(Error::OrderTooLarge { .. })
    ));
}
