use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zfvertex::braid::{
    check_cocycle, covariance_residual, lexicographic, r_sigma, symmetrize, BraidWord, Permutation,
};
use zfvertex::tensor::{max_abs_distance, C64};
use zfvertex::{MultiSiteOperator, RMatrixModel};

fn distinct(ks: &[f64], gap: f64) -> bool {
    ks.iter()
        .enumerate()
        .all(|(i, a)| ks[i + 1..].iter().all(|b| (a - b).abs() > gap))
}

fn additive(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, n).prop_filter("distinct", |ks| distinct(ks, 1e-3))
}

/// Multiplicative rapidities kept away from the poles of `uq-gl2` at `q`.
fn multiplicative(n: usize, q: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.3f64..3.0, n).prop_filter("off poles", move |ks| {
        distinct(ks, 1e-3)
            && ks.iter().all(|a| {
                ks.iter()
                    .all(|b| a == b || (1.0 - q * q * (a / b).powi(2)).abs() > 0.05)
            })
    })
}

/// Random reduced word grown by inversion-increasing swaps.
fn reduced_walk(n: usize) -> impl Strategy<Value = (Permutation, Vec<usize>)> {
    prop::collection::vec(0usize..64, 0..8).prop_map(move |choices| {
        let mut w: Vec<usize> = (0..n).collect();
        let mut word = Vec::new();
        for c in choices {
            let up: Vec<usize> = (0..n - 1).filter(|&i| w[i] < w[i + 1]).collect();
            if up.is_empty() {
                break;
            }
            let i = up[c % up.len()];
            w.swap(i, i + 1);
            word.push(i);
        }
        (Permutation::new(w).unwrap(), word)
    })
}

fn gl_element(n: usize) -> impl Strategy<Value = MultiSiteOperator> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n).prop_map(move |xs| {
        let mut a = Array2::from_shape_vec(
            (n, n),
            xs.into_iter().map(|(r, i)| C64::new(r, i)).collect(),
        )
        .unwrap();
        for j in 0..n {
            a[[j, j]] += C64::new(2.0, 0.0);
        }
        // Kronecker square as a two-site operator.
        let mut k = Array2::zeros((n * n, n * n));
        for (i, j, p, q) in index_quads(n) {
            k[[i * n + p, j * n + q]] = a[[i, j]] * a[[p, q]];
        }
        MultiSiteOperator::new(n, 2, k).unwrap()
    })
}

fn index_quads(n: usize) -> impl Iterator<Item = (usize, usize, usize, usize)> {
    (0..n).flat_map(move |i| {
        (0..n).flat_map(move |j| (0..n).flat_map(move |p| (0..n).map(move |q| (i, j, p, q))))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn yangian_exchange_relations(ks in additive(3), g in 0.1f64..2.0, n in 2usize..=3) {
        let m = RMatrixModel::yangian(n, g).unwrap();
        prop_assert!(m.check_yang_baxter(ks[0], ks[1], ks[2]).unwrap() < 1e-12);
        prop_assert!(m.check_unitarity(ks[0], ks[1]).unwrap() < 1e-12);
    }

    #[test]
    fn trigonometric_exchange_relations(
        (q, ks) in (0.2f64..0.95).prop_flat_map(|q| (Just(q), multiplicative(3, q)))
    ) {
        let m = RMatrixModel::trigonometric(q).unwrap();
        prop_assert!(m.check_yang_baxter(ks[0], ks[1], ks[2]).unwrap() < 1e-10);
        prop_assert!(m.check_unitarity(ks[0], ks[1]).unwrap() < 1e-10);
    }

    #[test]
    fn yangian_commutes_with_group_action(ks in additive(2), a in gl_element(2)) {
        let r = RMatrixModel::yangian(2, 1.0).unwrap().evaluate(ks[0], ks[1]).unwrap();
        let d = max_abs_distance(&r.matmul(&a).unwrap(), &a.matmul(&r).unwrap()).unwrap();
        prop_assert!(d < 1e-12 * (1.0 + a.max_abs()));
    }

    #[test]
    fn yangian_tends_to_identity(k in -3.0f64..3.0, g in 0.1f64..2.0) {
        let r = RMatrixModel::yangian(2, g).unwrap().evaluate(k + 1e6, k).unwrap();
        let d = max_abs_distance(&r, &MultiSiteOperator::identity(2, 2)).unwrap();
        prop_assert!(d <= 2.0 * g / 1e6);
    }

    #[test]
    fn reduced_words_give_the_same_product((perm, word) in reduced_walk(4), ks in additive(4)) {
        let m = RMatrixModel::yangian(2, 1.0).unwrap();
        let via_walk = r_sigma(&m, &BraidWord::with_reduced_word(perm.clone(), word).unwrap(), &ks).unwrap();
        let via_sort = r_sigma(&m, &BraidWord::new(perm), &ks).unwrap();
        prop_assert!(max_abs_distance(&via_walk, &via_sort).unwrap() < 1e-12);
    }

    #[test]
    fn cocycle_on_three_labels(ks in additive(3), i in 0usize..6, j in 0usize..6) {
        let m = RMatrixModel::yangian(2, 0.8).unwrap();
        let perms: Vec<Permutation> = lexicographic(3).collect();
        let sigma = BraidWord::new(perms[i].clone());
        let mu = BraidWord::new(perms[j].clone());
        prop_assert!(check_cocycle(&m, &sigma, &mu, &ks).unwrap() < 1e-12);
    }

    #[test]
    fn symmetrized_operators_are_covariant_and_fixed(ks in additive(3)) {
        let m = RMatrixModel::yangian(2, 1.0).unwrap();
        // A non-covariant seed: R_{12} on the first two labels.
        let seed = |x: &[f64]| m.evaluate(x[0], x[1])?.embed((1, 2), 3);
        let avg = symmetrize(&m, &seed, &ks, 0).unwrap();
        let avg_rule = |x: &[f64]| symmetrize(&m, &seed, x, 0);
        for sigma in lexicographic(3) {
            let r = covariance_residual(&m, &avg_rule, &BraidWord::new(sigma), &ks, 0).unwrap();
            prop_assert!(r < 1e-12);
        }
        let twice = symmetrize(&m, &avg_rule, &ks, 0).unwrap();
        prop_assert!(max_abs_distance(&twice, &avg).unwrap() < 1e-12);
    }
}

#[test]
fn seeded_samples_are_reproducible() {
    let m = RMatrixModel::trigonometric(0.9).unwrap();
    let a = m
        .sampled_residuals(20, &mut ChaCha8Rng::seed_from_u64(5))
        .unwrap();
    let b = m
        .sampled_residuals(20, &mut ChaCha8Rng::seed_from_u64(5))
        .unwrap();
    assert_eq!(a, b);
}

#[test]
fn inverse_word_undoes_the_product() {
    let m = RMatrixModel::yangian(3, 0.7).unwrap();
    let ks = [0.3, -1.1, 2.4];
    for sigma in lexicographic(3) {
        let w = BraidWord::new(sigma);
        let fwd = r_sigma(&m, &w, &ks).unwrap();
        let back = w
            .chain()
            .inverse()
            .dense(&m, &zfvertex::braid::LabelLayout::contiguous(&ks, 0))
            .unwrap();
        let d = max_abs_distance(
            &fwd.matmul(&back).unwrap(),
            &MultiSiteOperator::identity(3, 3),
        )
        .unwrap();
        assert!(d < 1e-12, "{d}");
    }
}
