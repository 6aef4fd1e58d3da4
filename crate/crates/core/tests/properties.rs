mod common;

use common::{positive_distribution, random_distribution, random_space};
use proptest::prelude::*;
use rand::Rng;
use wvaml::learner::{analytic_kl_gradient, finite_difference_gradient, planning_gap, LossKind, ModelClass, ModelParams};
use wvaml::mdp::{kernel_lipschitz_of, BaseMap, GeneratorConfig};
use wvaml::planner::gvi_observed;
use wvaml::rng::cell_rng;
use wvaml::transport::{kl_divergence, wasserstein_dual, wasserstein_primal};
use wvaml::vaml::{pointwise_model_error, vaml_loss, ValueClassBound};
use wvaml::{
    generate_lipschitz_mdp, gvi, kernel_lipschitz, lipschitz_constant, solve_lp, uniform_lipschitz_constant,
    BackupOperator, GviConfig, LpProblem, Relation, TransitionTensor,
};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn operators() -> Vec<BackupOperator> {
    let mut ops = vec![BackupOperator::Max, BackupOperator::Mean];
    ops.extend([0.0, 0.3, 1.0].map(BackupOperator::EpsGreedy));
    ops.extend([0.1, 1.0, 10.0, 100.0].map(BackupOperator::Mellowmax));
    ops
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn lipschitz_is_relabeling_invariant(seed in any::<u64>(), n in 2usize..12) {
        let mut rng = cell_rng(seed, 0);
        let space = random_space(&mut rng, n);
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.reverse();
        let g: Vec<f64> = perm.iter().map(|&i| f[i]).collect();
        let a = lipschitz_constant(&f, &space).unwrap().constant;
        let b = lipschitz_constant(&g, &space.permuted(&perm)).unwrap().constant;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn lipschitz_scales_with_absolute_factor(seed in any::<u64>(), n in 2usize..12, c in -8.0f64..8.0, k in -4i32..4) {
        let mut rng = cell_rng(seed, 1);
        let space = random_space(&mut rng, n);
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let base = lipschitz_constant(&f, &space).unwrap();
        let scaled: Vec<f64> = f.iter().map(|x| c * x).collect();
        let got = lipschitz_constant(&scaled, &space).unwrap().constant;
        prop_assert!((got - c.abs() * base.constant).abs() <= 1e-12 * (1.0 + got));
        // Power-of-two factors are exact in floating point.
        let p = 2f64.powi(k);
        let exact: Vec<f64> = f.iter().map(|x| p * x).collect();
        let r = lipschitz_constant(&exact, &space).unwrap();
        prop_assert_eq!(r.constant, p * base.constant);
        prop_assert_eq!(r.witness, base.witness);
    }

    #[test]
    fn lp_duals_price_out_the_objective(seed in any::<u64>(), nv in 2usize..7, nc in 1usize..7) {
        let mut rng = cell_rng(seed, 2);
        let mut lp = LpProblem::maximize((0..nv).map(|_| rng.gen_range(-1.0..3.0)).collect());
        for _ in 0..nc {
            lp.add_constraint((0..nv).map(|_| rng.gen_range(0.1..2.0)).collect(), Relation::Le, rng.gen_range(1.0..5.0));
        }
        let sol = solve_lp(&lp).unwrap();
        prop_assert!(sol.is_optimal());
        let (p, d) = (sol.objective_value.unwrap(), sol.dual_objective.unwrap());
        prop_assert!((p - d).abs() <= 1e-8 * (1.0 + p.abs()));
        let again = solve_lp(&lp.clone()).unwrap();
        prop_assert_eq!(format!("{sol:?}"), format!("{again:?}"));
    }

    #[test]
    fn wasserstein_metric_axioms(seed in any::<u64>(), n in 2usize..10) {
        let mut rng = cell_rng(seed, 3);
        let space = random_space(&mut rng, n);
        let (p, q, r) = (
            random_distribution(&mut rng, n, true),
            random_distribution(&mut rng, n, true),
            random_distribution(&mut rng, n, true),
        );
        let w = |a, b| wasserstein_primal(a, b, &space).unwrap().cost;
        prop_assert!((w(&p, &q) - w(&q, &p)).abs() <= 1e-9);
        prop_assert!(w(&p, &p) <= 1e-12);
        prop_assert!(w(&p, &r) <= w(&p, &q) + w(&q, &r) + 1e-8);
    }

    #[test]
    fn dual_scales_linearly_and_certifies_its_potential(seed in any::<u64>(), n in 2usize..10) {
        let mut rng = cell_rng(seed, 4);
        let space = random_space(&mut rng, n);
        let (p, q) = (random_distribution(&mut rng, n, true), random_distribution(&mut rng, n, true));
        let one = wasserstein_dual(&p, &q, &space, 1.0).unwrap().value;
        for c in [0.5, 2.0, 10.0] {
            let d = wasserstein_dual(&p, &q, &space, c).unwrap();
            prop_assert!((d.value - c * one).abs() <= 1e-6);
            let k = lipschitz_constant(&d.potential.f, &space).unwrap().constant;
            prop_assert!(k <= c * (1.0 + 1e-9) + 1e-9);
        }
    }

    #[test]
    fn pinsker_holds(seed in any::<u64>(), n in 2usize..12) {
        let mut rng = cell_rng(seed, 5);
        let (p, q) = (positive_distribution(&mut rng, n), positive_distribution(&mut rng, n));
        prop_assert!(p.l1_distance(&q) <= (2.0 * kl_divergence(&p, &q).unwrap()).sqrt() + 1e-9);
    }

    #[test]
    fn kernel_expectation_is_bounded_by_kernel_constant(seed in any::<u64>(), n in 2usize..9, m in 1usize..4) {
        let mut rng = cell_rng(seed, 6);
        let space = random_space(&mut rng, n);
        let t = TransitionTensor::from_fn(n, m, |_, _| random_distribution(&mut rng, n, true)).unwrap();
        // A 1-Lipschitz f: distance to a random anchor, scaled into [0, 1].
        let anchor = rng.gen_range(0..n);
        let scale = rng.gen_range(0.0..1.0);
        let f: Vec<f64> = (0..n).map(|s| scale * space.dist(anchor, s)).collect();
        let cols: Vec<Vec<f64>> = (0..m).map(|a| (0..n).map(|s| t.expectation(s, a, &f)).collect()).collect();
        let measured = uniform_lipschitz_constant(&cols, &space).unwrap().constant;
        prop_assert!(measured <= kernel_lipschitz_of(&t, &space).unwrap().constant + 1e-9);
    }

    #[test]
    fn kernel_constant_survives_relabeling(seed in any::<u64>(), n in 2usize..8) {
        let g = generate_lipschitz_mdp(n, 2, 0.9, 0.3, seed).unwrap();
        let mut rng = cell_rng(seed, 7);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let space = g.mdp.space().permuted(&perm);
        let t = g.mdp.transition();
        let relabeled = TransitionTensor::from_fn(n, 2, |s, a| {
            let row = t.row(perm[s], a);
            wvaml::Distribution::new((0..n).map(|k| row[perm[k]]).collect()).unwrap()
        }).unwrap();
        let k = kernel_lipschitz_of(&relabeled, &space).unwrap().constant;
        prop_assert!((k - g.kernel.constant).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn operators_are_nonexpansions(
        x in prop::collection::vec(-10.0f64..10.0, 1..8),
        noise in prop::collection::vec(-1.0f64..1.0, 8),
        scale in 1e-6f64..5.0,
    ) {
        let y: Vec<f64> = x.iter().zip(&noise).map(|(a, b)| a + scale * b).collect();
        let dist = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        for op in operators() {
            let (fx, fy) = (op.apply(&x).unwrap(), op.apply(&y).unwrap());
            prop_assert!((fx - fy).abs() <= dist + 1e-12, "{op}: {fx} {fy} {dist}");
        }
    }
}

#[test]
fn mellowmax_limits() {
    let mut rng = cell_rng(9, 0);
    for _ in 0..200 {
        let n = rng.gen_range(2..8);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = x.iter().sum::<f64>() / n as f64;
        let high = BackupOperator::Mellowmax(1000.0).apply(&x).unwrap();
        assert!((high - max).abs() <= 1e-2);
        let low = BackupOperator::Mellowmax(1e-6).apply(&x).unwrap();
        assert!((low - mean).abs() <= 1e-6);
    }
}

#[test]
fn gvi_diffs_have_geometric_envelope() {
    for seed in 0..10 {
        let mdp = generate_lipschitz_mdp(8, 3, 0.9, 0.3, seed).unwrap().mdp;
        for op in operators() {
            let mut qs = Vec::new();
            gvi_observed(&mdp, op, &GviConfig::default(), |_, q| qs.push(q.clone())).unwrap();
            let diffs: Vec<f64> = qs.windows(2).map(|w| w[1].max_abs_diff(&w[0])).collect();
            for (k, d) in diffs.iter().enumerate() {
                assert!(*d <= diffs[0] * mdp.gamma().powi(k as i32) * (1.0 + 1e-9) + 1e-12, "seed {seed} {op} sweep {k}");
            }
        }
    }
}

#[test]
fn lipschitz_recursion_holds_along_sweeps() {
    for seed in 0..10 {
        let mut cfg = GeneratorConfig::new(9, 2, 0.95, 0.2, seed);
        cfg.base_map = BaseMap::RandomWalk { max_step: 1 };
        let g = wvaml::mdp::generate(&cfg).unwrap();
        let (kr, kw) = (g.reward.constant, g.kernel.constant);
        for op in operators() {
            let mut ks = Vec::new();
            gvi_observed(&g.mdp, op, &GviConfig::default(), |_, q| {
                ks.push(uniform_lipschitz_constant(&q.columns(), g.mdp.space()).unwrap().constant)
            })
            .unwrap();
            for w in ks.windows(2) {
                assert!(w[1] <= kr + g.mdp.gamma() * kw * w[0] + 1e-9);
            }
        }
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn vaml_dominates_realized_value_errors(seed in any::<u64>(), n in 2usize..8) {
        let g = generate_lipschitz_mdp(n, 2, 0.9, 0.3, seed).unwrap();
        let mdp = &g.mdp;
        let mut rng = cell_rng(seed, 10);
        let that = TransitionTensor::from_fn(n, 2, |_, _| random_distribution(&mut rng, n, true)).unwrap();
        let c = wvaml::theorem_bound(mdp).unwrap().c;
        let gamma = mdp.gamma();
        for op in operators() {
            let v = gvi(mdp, op, &GviConfig::default()).unwrap().v;
            for s in 0..n {
                for a in 0..2 {
                    let l = pointwise_model_error(mdp, &that, &v, s, a).unwrap();
                    let big = vaml_loss(mdp, &that, c, s, a).unwrap().value;
                    prop_assert!(l * l <= gamma * gamma * big + 1e-9);
                }
            }
        }
    }

    #[test]
    fn worst_potential_maximizes_the_square(seed in any::<u64>(), n in 2usize..8) {
        let mdp = generate_lipschitz_mdp(n, 1, 0.5, 0.4, seed).unwrap().mdp;
        let mut rng = cell_rng(seed, 11);
        let that = TransitionTensor::from_fn(n, 1, |_, _| random_distribution(&mut rng, n, false)).unwrap();
        let c = ValueClassBound::new(rng.gen_range(0.1..4.0)).unwrap();
        let loss = vaml_loss(&mdp, &that, c, 0, 0).unwrap();
        let (p, q) = (mdp.transition().row(0, 0), that.row(0, 0));
        for sign in [1.0, -1.0] {
            let obj: f64 = (0..n).map(|k| (p[k] - q[k]) * sign * loss.worst_v[k]).sum();
            prop_assert!((obj * obj - loss.value).abs() <= 1e-9 * (1.0 + loss.value));
        }
    }

    #[test]
    fn vaml_is_quadratic_in_radius(seed in any::<u64>(), n in 2usize..8) {
        let mdp = generate_lipschitz_mdp(n, 1, 0.5, 0.4, seed).unwrap().mdp;
        let mut rng = cell_rng(seed, 12);
        let that = TransitionTensor::from_fn(n, 1, |_, _| random_distribution(&mut rng, n, true)).unwrap();
        let at = |c: f64| vaml_loss(&mdp, &that, ValueClassBound::new(c).unwrap(), 0, 0).unwrap().value;
        let one = at(1.0);
        let mut prev = 0.0;
        for c in [0.25, 0.5, 1.0, 2.0, 7.0] {
            let v = at(c);
            prop_assert!(v >= prev);
            prop_assert!((v - c * c * one).abs() <= 1e-9 * (1.0 + v));
            prev = v;
        }
    }

    #[test]
    fn fd_gradient_matches_analytic_kl(seed in any::<u64>()) {
        let mdp = generate_lipschitz_mdp(5, 2, 0.9, 0.4, seed % 1000).unwrap().mdp;
        let model = ModelParams::random(5, 2, ModelClass::Full, 2.0, seed).unwrap();
        let a = analytic_kl_gradient(&mdp, &model).unwrap();
        let f = finite_difference_gradient(&mdp, &model, LossKind::Kl, 1e-5).unwrap();
        let norm = a.iter().map(|x| x.abs()).fold(0.0, f64::max);
        for (x, y) in a.iter().zip(&f) {
            prop_assert!((x - y).abs() <= 1e-5 * (norm + 1e-12), "{x} vs {y}");
        }
    }

    #[test]
    fn planning_gap_ignores_reward_shift(seed in any::<u64>(), shift in -50.0f64..50.0) {
        let mdp = generate_lipschitz_mdp(6, 3, 0.9, 0.3, seed).unwrap().mdp;
        let mut rng = cell_rng(seed, 13);
        let that = TransitionTensor::from_fn(6, 3, |_, _| random_distribution(&mut rng, 6, true)).unwrap();
        let a = planning_gap(&mdp, &that).unwrap();
        let b = planning_gap(&mdp.with_reward_shift(shift), &that).unwrap();
        prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }
}

#[test]
fn kernel_constant_of_generated_mdp_is_reported() {
    let g = generate_lipschitz_mdp(6, 2, 0.9, 0.3, 5).unwrap();
    assert_eq!(kernel_lipschitz(&g.mdp).unwrap(), g.kernel);
}
