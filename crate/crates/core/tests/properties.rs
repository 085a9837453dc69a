use hydro_duality::analysis::{campaign_case, sample_feasible_policy};
use hydro_duality::dual::{build_dual, dual_feasible, dual_objective, sample_certificate, DualCertificate};
use hydro_duality::generate::{generate_tree, GeneratorSpec, InflowModel, PriceModel};
use hydro_duality::lagrange::{lagrange_value, sup_over_policy, weak_duality_check};
use hydro_duality::model::{primal_objective, water_levels, water_levels_telescoped, DrainPolicy};
use hydro_duality::tree::ScenarioTree;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

fn random_policy(tree: &ScenarioTree, sys: &hydro_duality::model::DamSystem, rng: &mut ChaCha8Rng) -> DrainPolicy {
    let n = DrainPolicy::zero(tree, sys).to_flat().len();
    let flat: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..10.0)).collect();
    DrainPolicy::from_flat(tree, sys, &flat).unwrap()
}

/// Lifts per-atom values at stage `t` back to scenarios.
fn lift(tree: &ScenarioTree, per_atom: &[f64], t: usize) -> Vec<f64> {
    (0..tree.num_scenarios())
        .map(|k| per_atom[tree.manager().atom_of(t, k)])
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tower_property(seed in any::<u64>(), index in 0usize..1000) {
        let (tree, _) = campaign_case(seed, index).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..tree.num_scenarios()).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let mean: f64 = tree.probs().iter().zip(&x).map(|(p, v)| p * v).sum();
        for t in 0..tree.stages() {
            let inner = lift(&tree, &tree.conditional_expectation(&x, t).unwrap(), t);
            for s in 0..=t {
                let nested = tree.conditional_expectation(&inner, s).unwrap();
                let direct = tree.conditional_expectation(&x, s).unwrap();
                for (a, b) in nested.iter().zip(&direct) {
                    prop_assert!(close(*a, *b, 1e-12), "t={t} s={s}: {a} vs {b}");
                }
            }
            let outer: f64 = tree.probs().iter().zip(&inner).map(|(p, v)| p * v).sum();
            prop_assert!(close(outer, mean, 1e-12));
        }
    }

    #[test]
    fn water_balance_recursion_matches_telescoped_sum(seed in any::<u64>(), index in 0usize..1000) {
        let (tree, sys) = campaign_case(seed, index).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = random_policy(&tree, &sys, &mut rng);
        let a = water_levels(&policy, &tree, &sys).unwrap();
        let b = water_levels_telescoped(&policy, &tree, &sys).unwrap();
        for (x, y) in a.iter().flatten().flatten().zip(b.iter().flatten().flatten()) {
            prop_assert!((x - y).abs() <= 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn lagrange_value_is_affine_in_the_policy(seed in any::<u64>(), index in 0usize..1000, w in 0.0f64..1.0) {
        let (tree, sys) = campaign_case(seed, index).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dual = build_dual(&tree, &sys).unwrap();
        let cert = sample_certificate(&dual, &tree, &sys, &mut rng, 2.0);
        let p = random_policy(&tree, &sys, &mut rng);
        let q = random_policy(&tree, &sys, &mut rng);
        let mixed = lagrange_value(&p.blend(&q, w), &cert, &tree, &sys).unwrap();
        let kp = lagrange_value(&p, &cert, &tree, &sys).unwrap();
        let kq = lagrange_value(&q, &cert, &tree, &sys).unwrap();
        prop_assert!(close(mixed, w * kp + (1.0 - w) * kq, 1e-10));
    }

    #[test]
    fn lagrange_at_zero_multipliers_is_the_primal_objective(seed in any::<u64>(), index in 0usize..1000) {
        let (tree, sys) = campaign_case(seed, index).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = random_policy(&tree, &sys, &mut rng);
        let k = lagrange_value(&policy, &DualCertificate::zero(&tree, &sys), &tree, &sys).unwrap();
        let f = primal_objective(&policy, &tree, &sys).unwrap();
        prop_assert!(close(k, f, 1e-12), "{k} vs {f}");
    }

    #[test]
    fn sampled_certificates_agree_in_both_forms(seed in any::<u64>(), index in 0usize..1000, scale in 0.1f64..5.0) {
        let (tree, sys) = campaign_case(seed, index).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dual = build_dual(&tree, &sys).unwrap();
        let cert = sample_certificate(&dual, &tree, &sys, &mut rng, scale);
        let feas = dual_feasible(&cert, &tree, &sys).unwrap();
        prop_assert!(feas.feasible, "max residual {}", feas.max_residual);
        prop_assert!(feas.form_disagreement <= 1e-12, "{}", feas.form_disagreement);
        let g = sup_over_policy(&cert, &tree, &sys).unwrap().finite().unwrap();
        prop_assert!(close(g, dual_objective(&cert, &tree, &sys).unwrap(), 1e-9));
    }

    #[test]
    fn weak_duality_chain(seed in any::<u64>(), index in 0usize..1000) {
        let (tree, sys) = campaign_case(seed, index).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dual = build_dual(&tree, &sys).unwrap();
        let cert = sample_certificate(&dual, &tree, &sys, &mut rng, 2.0);
        let policy = sample_feasible_policy(&tree, &sys, &mut rng);
        let r = weak_duality_check(&policy, &cert, &tree, &sys).unwrap();
        prop_assert!(r.holds, "{r:?}");
    }

    #[test]
    fn generation_is_deterministic(seed in any::<u64>(), stages in 2usize..5, dams in 1usize..4) {
        let spec = GeneratorSpec::new(
            stages,
            dams,
            vec![2; stages - 1],
            PriceModel::IidLognormalDiscretized,
            InflowModel::Seasonal,
        );
        let a = generate_tree(&spec, seed).unwrap();
        let b = generate_tree(&spec, seed).unwrap();
        prop_assert_eq!(a.to_json(), b.to_json());
    }
}
