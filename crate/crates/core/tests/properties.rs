mod common;

use std::collections::BTreeSet;

use cubature_core::recomb::{reduce_streaming_with, reduce_with, Rescaling};
use cubature_core::{
    build_basis, cone_membership, feature_matrix, moment_vector, verify_cubature, DiscreteMeasure,
    FeasibilityStatus, Matrix, ReduceOptions,
};
use proptest::prelude::*;

fn degree_weights(n: usize) -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(1u32..=3, n)
}

fn measure_strategy(max_atoms: usize, n: usize) -> impl Strategy<Value = DiscreteMeasure> {
    (1..=max_atoms).prop_flat_map(move |m| {
        (prop::collection::vec(-10.0f64..10.0, m * n), prop::collection::vec(0.1f64..3.0, m))
            .prop_map(move |(x, w)| DiscreteMeasure::new(n, x, w).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn basis_matches_brute_force(
        (n, weights) in (1usize..=4).prop_flat_map(|n| (Just(n), degree_weights(n))),
        m in 0u32..=8,
    ) {
        let basis = build_basis(n, &weights, m).unwrap();
        let listed: Vec<Vec<u32>> = basis.indices().iter().map(|a| a.exponents().to_vec()).collect();
        let unique: BTreeSet<&Vec<u32>> = listed.iter().collect();
        prop_assert_eq!(unique.len(), listed.len());
        let expected: BTreeSet<Vec<u32>> = common::brute_force_exponents(&weights, m).into_iter().collect();
        let got: BTreeSet<Vec<u32>> = listed.iter().cloned().collect();
        prop_assert_eq!(got, expected);
        prop_assert_eq!(&listed[0], &vec![0; n]);
        // graded
        let degs: Vec<u64> = basis.indices().iter().map(|a| basis.degree_fn().degree_of(a)).collect();
        prop_assert!(degs.windows(2).all(|p| p[0] <= p[1]));
        let again = build_basis(n, &weights, m).unwrap();
        prop_assert_eq!(again.indices(), basis.indices());
    }

    #[test]
    fn embedding_matches_naive_powering(
        (n, m, point) in (1usize..=4, 0u32..=7).prop_flat_map(|(n, m)| (Just(n), Just(m), prop::collection::vec(-10.0f64..10.0, n))),
    ) {
        let basis = build_basis(n, &vec![1; n], m).unwrap();
        prop_assume!(basis.dimension() <= 500);
        let phi = basis.evaluate_embedding(&point).unwrap();
        for (alpha, &v) in basis.indices().iter().zip(&phi) {
            let naive = common::naive_monomial(alpha.exponents(), &point);
            prop_assert!((v - naive).abs() <= 1e-14 * naive.abs().max(f64::MIN_POSITIVE) || v == naive,
                "{:?}: {} vs {}", alpha, v, naive);
        }
    }

    #[test]
    fn moments_are_linear_and_carry_mass(
        mu in measure_strategy(40, 2),
        scale in 0.1f64..5.0,
    ) {
        let basis = build_basis(2, &[1, 2], 4).unwrap();
        let e = moment_vector(&mu, &basis).unwrap().values;
        let total: f64 = mu.weights().iter().sum();
        prop_assert!((e[0] - total).abs() <= 1e-13 * total);

        let w2: Vec<f64> = mu.weights().iter().map(|w| w * scale).collect();
        let sum: Vec<f64> = mu.weights().iter().zip(&w2).map(|(a, b)| a + b).collect();
        let e2 = moment_vector(&mu.reweighted(w2).unwrap(), &basis).unwrap().values;
        let es = moment_vector(&mu.reweighted(sum).unwrap(), &basis).unwrap().values;
        for j in 0..e.len() {
            let lhs = es[j];
            let rhs = e[j] + e2[j];
            let mag: f64 = mu.atoms().zip(mu.weights()).map(|(x, w)| (1.0 + scale) * w * common::naive_monomial(basis.indices()[j].exponents(), x).abs()).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * mag.max(f64::MIN_POSITIVE));
        }

        let y = feature_matrix(&mu, &basis).unwrap();
        for (a, atom) in mu.atoms().enumerate() {
            let phi = basis.evaluate_embedding(atom).unwrap();
            prop_assert_eq!(y.col(a), phi.as_slice());
        }
    }

    #[test]
    fn reduction_invariants(
        (n, weights, m, mu) in (1usize..=4).prop_flat_map(|n| (Just(n), degree_weights(n), 1u32..=6, measure_strategy(300, n))),
    ) {
        let basis = build_basis(n, &weights, m).unwrap();
        prop_assume!(basis.dimension() <= 120);
        let opts = ReduceOptions { polish: false, ..Default::default() };
        let (cub, report) = reduce_with(&mu, &basis, &opts).unwrap();
        let d = basis.dimension();
        prop_assert!(!cub.is_empty() && cub.len() <= d);
        prop_assert!(cub.len() <= report.detected_rank && report.detected_rank <= d);
        prop_assert!(cub.weights.iter().all(|&w| w > 0.0));
        for (&i, node) in cub.node_indices.iter().zip(&cub.nodes) {
            prop_assert_eq!(node.as_slice(), mu.atom(i));
        }
        prop_assert!(report.elimination_steps <= mu.len() - cub.len());

        // Conservation in the rescaled coordinates the engine works in.
        let r = Rescaling::fit(&mu);
        let scaled = r.apply_measure(&mu).unwrap();
        let e = moment_vector(&scaled, &basis).unwrap().values;
        let mut node = vec![0.0; n];
        let mut q = vec![0.0; d];
        for (x, &w) in cub.nodes.iter().zip(&cub.weights) {
            r.apply(x, &mut node);
            for (qj, v) in q.iter_mut().zip(basis.evaluate_embedding(&node).unwrap()) {
                *qj += w * v;
            }
        }
        for j in 0..d {
            prop_assert!((q[j] - e[j]).abs() <= 1e-8 * (1.0 + e[j].abs()), "feature {}: {} vs {}", j, q[j], e[j]);
        }
        let total: f64 = mu.weights().iter().sum();
        let got: f64 = cub.weights.iter().sum();
        prop_assert!((got - total).abs() <= 1e-12 * total);
    }

    #[test]
    fn streaming_meets_the_same_contract(
        (n, m, mu) in (1usize..=3).prop_flat_map(|n| (Just(n), 1u32..=4, measure_strategy(2000, n))),
        buffer_factor in 2usize..=8,
    ) {
        let basis = build_basis(n, &vec![1; n], m).unwrap();
        let (cub, report) = reduce_streaming_with(&mu, &basis, buffer_factor, &ReduceOptions::default()).unwrap();
        prop_assert!(report.streamed);
        let v = verify_cubature(&mu, &cub, &basis, 1e-8).unwrap();
        prop_assert!(v.passed, "{:?}", v);
        prop_assert!(v.mass_gap_rel <= 1e-12);
    }

    #[test]
    fn micro_oracle_equivalence(
        (n, m, pts) in prop_oneof![
            (Just(1usize), 1u32..=3),
            (Just(2usize), Just(1u32)),
        ].prop_flat_map(|(n, m)| (Just(n), Just(m), prop::collection::vec(prop::collection::vec(-3i32..=3, n), 1..=8))),
        weights in prop::collection::vec(1u32..=4, 8),
    ) {
        let basis = build_basis(n, &vec![1; n], m).unwrap();
        let points: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|&v| v as f64).collect()).collect();
        let w: Vec<f64> = weights[..points.len()].iter().map(|&v| v as f64).collect();
        let mu = DiscreteMeasure::from_points(&points, w.clone()).unwrap();
        let embed = |x: &[f64]| basis.indices().iter().map(|a| common::naive_monomial(a.exponents(), x)).collect::<Vec<_>>();
        let target: Vec<f64> = (0..basis.dimension())
            .map(|j| points.iter().zip(&w).map(|(x, wi)| wi * embed(x)[j]).sum())
            .collect();
        let valid = common::enumerate_cubatures(&points, embed, &target, basis.dimension());
        let (cub, _) = reduce_with(&mu, &basis, &ReduceOptions::default()).unwrap();
        let hit = valid.iter().any(|(nodes, vw)| {
            nodes == &cub.node_indices
                && vw.iter().zip(&cub.weights).all(|(a, b)| (a - b).abs() <= 1e-8 * a.abs().max(1.0))
        });
        prop_assert!(hit, "{:?} {:?} not among {:?}", cub.node_indices, cub.weights, valid);
    }

    #[test]
    fn membership_answers_are_sound(
        (n, grid) in (1usize..=2).prop_flat_map(|n| (Just(n), prop::collection::vec(prop::collection::vec(-2.0f64..2.0, n), 2..15))),
        target_raw in prop::collection::vec(-3.0f64..3.0, 6),
    ) {
        let basis = build_basis(n, &vec![1; n], 2).unwrap();
        let d = basis.dimension();
        let cols: Vec<Vec<f64>> = grid.iter().map(|p| basis.evaluate_embedding(p).unwrap()).collect();
        let y = Matrix::from_columns(d, &cols);
        let e = &target_raw[..d];
        let r = cone_membership(e, &y).unwrap();
        prop_assert!(r.weights.is_some() != r.certificate.is_some() || r.status == FeasibilityStatus::Indeterminate);
        match r.status {
            FeasibilityStatus::Feasible => {
                let fit = y.mul_vec(r.weights.as_ref().unwrap());
                let scale = 1.0 + e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                prop_assert!(fit.iter().zip(e).all(|(a, b)| (a - b).abs() <= 1e-9 * scale));
                prop_assert!(r.weights.as_ref().unwrap().iter().filter(|&&w| w > 0.0).count() <= d);
            }
            FeasibilityStatus::Infeasible => {
                prop_assert!(r.certificate.as_ref().unwrap().separates(e, &y, 1e-9));
            }
            FeasibilityStatus::Indeterminate => {}
        }
    }
}

#[test]
fn verification_is_a_pure_function() {
    let mu = common::random_measure(&mut common::rng(3), 500, 2, -1.0, 1.0);
    let basis = build_basis(2, &[1, 1], 3).unwrap();
    let (cub, _) = reduce_with(&mu, &basis, &ReduceOptions::default()).unwrap();
    let a = verify_cubature(&mu, &cub, &basis, 1e-8).unwrap();
    let b = verify_cubature(&mu, &cub, &basis, 1e-8).unwrap();
    assert_eq!(a, b);
    assert!(a.passed);
}
