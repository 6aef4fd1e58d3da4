//! Cross-checks against independently coded reference computations.

mod common;

use common::{line_w1, positive_distribution, random_distribution, random_space};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use wvaml::learner::{cell_losses, LossKind};
use wvaml::mdp::{generate, BaseMap, GeneratorConfig, StateLayout};
use wvaml::planner::{evaluate_policy, greedy_policy, gvi, BackupOperator, GviConfig, QFunction};
use wvaml::rng::cell_rng;
use wvaml::transport::{kl_divergence, wasserstein_primal, Distribution};
use wvaml::vaml::{holder_pinsker_bounds, pointwise_model_error, theorem_bound, verify_equivalence, ValueClassBound};
use wvaml::{
    generate_lipschitz_mdp, kernel_lipschitz, lipschitz_constant, reward_lipschitz, solve_lp, FiniteMdp,
    LpProblem, MetricSpace, Relation, TransitionTensor,
};

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Minimum cost over every basic feasible solution of a balanced 4x4
/// transportation problem. One demand row is dropped since the system has rank 7.
fn transportation_by_vertices(supply: &[f64], demand: &[f64], cost: &[f64]) -> f64 {
    let mut a = DMatrix::<f64>::zeros(7, 16);
    let mut b = DVector::<f64>::zeros(7);
    for i in 0..4 {
        for j in 0..4 {
            a[(i, i * 4 + j)] = 1.0;
        }
        b[i] = supply[i];
    }
    for j in 0..3 {
        for i in 0..4 {
            a[(4 + j, i * 4 + j)] = 1.0;
        }
        b[4 + j] = demand[j];
    }
    let mut best = f64::INFINITY;
    for cols in combinations(16, 7) {
        let sub = DMatrix::from_fn(7, 7, |r, c| a[(r, cols[c])]);
        if sub.determinant().abs() < 1e-9 {
            continue;
        }
        let Some(x) = sub.lu().solve(&b) else { continue };
        if x.iter().all(|&v| v >= -1e-12) {
            let c: f64 = cols.iter().zip(x.iter()).map(|(&k, &v)| cost[k] * v).sum();
            best = best.min(c);
        }
    }
    best
}

#[test]
fn transportation_lp_matches_vertex_enumeration() {
    for seed in 0..6 {
        let mut rng = cell_rng(71, seed);
        let supply = random_distribution(&mut rng, 4, false);
        let demand = random_distribution(&mut rng, 4, false);
        let cost: Vec<f64> = (0..16).map(|_| rng.gen_range(0.0..5.0)).collect();
        let mut lp = LpProblem::maximize(cost.iter().map(|c| -c).collect());
        for i in 0..4 {
            let mut row = vec![0.0; 16];
            (0..4).for_each(|j| row[i * 4 + j] = 1.0);
            lp.add_constraint(row, Relation::Eq, supply[i]);
        }
        for j in 0..4 {
            let mut row = vec![0.0; 16];
            (0..4).for_each(|i| row[i * 4 + j] = 1.0);
            lp.add_constraint(row, Relation::Eq, demand[j]);
        }
        let sol = solve_lp(&lp).unwrap();
        let lp_cost = -sol.objective_value.unwrap();
        let oracle = transportation_by_vertices(&supply, &demand, &cost);
        assert!((lp_cost - oracle).abs() <= 1e-9, "seed {seed}: {lp_cost} vs {oracle}");
    }
}

#[test]
fn line_wasserstein_matches_cdf_integral() {
    let space = MetricSpace::unit_line(3);
    let p = Distribution::new(vec![0.5, 0.5, 0.0]).unwrap();
    let q = Distribution::new(vec![0.0, 0.5, 0.5]).unwrap();
    assert!((wasserstein_primal(&p, &q, &space).unwrap().cost - 1.0).abs() < 1e-12);

    for seed in 0..40 {
        let mut rng = cell_rng(72, seed);
        let n = rng.gen_range(2..=12);
        let coords: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let space = MetricSpace::line(coords.clone()).unwrap();
        let p = random_distribution(&mut rng, n, true);
        let q = random_distribution(&mut rng, n, true);
        let w = wasserstein_primal(&p, &q, &space).unwrap().cost;
        let oracle = line_w1(&coords, &p, &q);
        assert!((w - oracle).abs() <= 1e-9, "seed {seed}: {w} vs {oracle}");
    }
}

#[test]
fn two_point_kl_matches_direct_sum() {
    let p = Distribution::new(vec![0.3, 0.7]).unwrap();
    let q = Distribution::new(vec![0.6, 0.4]).unwrap();
    let oracle = 0.3 * (0.3f64 / 0.6).ln() + 0.7 * (0.7f64 / 0.4).ln();
    assert!((kl_divergence(&p, &q).unwrap() - oracle).abs() < 1e-15);
}

fn brute_kernel_lipschitz(mdp: &FiniteMdp) -> f64 {
    let mut best = 0.0_f64;
    for a in 0..mdp.actions() {
        for i in 0..mdp.states() {
            for j in 0..mdp.states() {
                if i != j {
                    let t = mdp.transition();
                    let w = wasserstein_primal(t.row(i, a), t.row(j, a), mdp.space()).unwrap().cost;
                    best = best.max(w / mdp.space().dist(i, j));
                }
            }
        }
    }
    best
}

#[test]
fn kernel_lipschitz_matches_double_loop() {
    for seed in 0..8 {
        let mut cfg = GeneratorConfig::new(6, 2, 0.9, 0.3, seed);
        cfg.base_map = BaseMap::RandomWalk { max_step: 2 };
        if seed % 2 == 1 {
            cfg.layout = StateLayout::Circle;
        }
        let g = generate(&cfg).unwrap();
        let oracle = brute_kernel_lipschitz(&g.mdp);
        assert!((g.kernel.constant - oracle).abs() <= 1e-9, "seed {seed}");
    }
}

#[test]
fn reward_lipschitz_is_max_over_columns() {
    let mut rng = cell_rng(73, 0);
    let space = random_space(&mut rng, 5);
    let reward: Vec<Vec<f64>> = (0..5).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let t = TransitionTensor::from_fn(5, 3, |_, _| Distribution::uniform(5)).unwrap();
    let mdp = FiniteMdp::new(space.clone(), reward.clone(), t, 0.5).unwrap();
    let oracle = (0..3)
        .map(|a| {
            let col: Vec<f64> = reward.iter().map(|r| r[a]).collect();
            lipschitz_constant(&col, &space).unwrap().constant
        })
        .fold(0.0, f64::max);
    assert_eq!(reward_lipschitz(&mdp).constant, oracle);
}

#[test]
fn deterministic_kernel_has_map_constant() {
    let space = MetricSpace::unit_line(6);
    let g = [0usize, 2, 2, 5, 4, 1];
    let t = TransitionTensor::from_fn(6, 1, |s, _| Distribution::point_mass(6, g[s])).unwrap();
    let mdp = FiniteMdp::new(space.clone(), vec![vec![0.0]; 6], t, 0.5).unwrap();
    let coords: Vec<f64> = g.iter().map(|&x| x as f64).collect();
    let oracle = lipschitz_constant(&coords, &space).unwrap().constant;
    assert!((kernel_lipschitz(&mdp).unwrap().constant - oracle).abs() < 1e-9);
}

#[test]
fn smoothing_halves_identity_kernel_constant() {
    for seed in 0..4 {
        let mut cfg = GeneratorConfig::new(7, 2, 0.9, 0.5, seed);
        cfg.base_map = BaseMap::Identity;
        let g = generate(&cfg).unwrap();
        assert!(g.kernel.constant <= 0.5 * 1.0 + 1e-9);
    }
}

fn naive_value_iteration(mdp: &FiniteMdp, sweeps: usize) -> Vec<Vec<f64>> {
    let (n, m) = (mdp.states(), mdp.actions());
    let mut q = vec![vec![0.0; m]; n];
    for _ in 0..sweeps {
        let v: Vec<f64> = q.iter().map(|r| r.iter().cloned().fold(f64::NEG_INFINITY, f64::max)).collect();
        q = (0..n)
            .map(|s| {
                (0..m)
                    .map(|a| {
                        let row = mdp.transition().row(s, a);
                        mdp.reward(s, a) + mdp.gamma() * (0..n).map(|k| row[k] * v[k]).sum::<f64>()
                    })
                    .collect()
            })
            .collect();
    }
    q
}

#[test]
fn chain_gvi_matches_naive_iteration() {
    let space = MetricSpace::unit_line(3);
    // Action 0 stays, action 1 moves right; reward only in the last state.
    let t = TransitionTensor::from_fn(3, 2, |s, a| {
        let next = if a == 1 { (s + 1).min(2) } else { s };
        Distribution::point_mass(3, next).mix(&Distribution::uniform(3), 0.1)
    })
    .unwrap();
    let reward = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 0.5]];
    let mdp = FiniteMdp::new(space, reward, t, 0.9).unwrap();
    let res = gvi(&mdp, BackupOperator::Max, &GviConfig::default()).unwrap();
    let oracle = naive_value_iteration(&mdp, 2000);
    for s in 0..3 {
        for a in 0..2 {
            assert!((res.q.get(s, a) - oracle[s][a]).abs() < 1e-8);
        }
    }
}

#[test]
fn greedy_policy_matches_row_scan() {
    let mut rng = cell_rng(74, 0);
    let rows: Vec<Vec<f64>> = (0..20).map(|_| (0..4).map(|_| rng.gen_range(0..4) as f64).collect()).collect();
    let q = QFunction::from_rows(rows.clone()).unwrap();
    let oracle: Vec<usize> = rows
        .iter()
        .map(|r| {
            let best = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            r.iter().position(|&x| x == best).unwrap()
        })
        .collect();
    assert_eq!(greedy_policy(&q), oracle);
}

#[test]
fn exact_policy_evaluation_matches_iteration() {
    for seed in 0..5 {
        let mdp = generate_lipschitz_mdp(7, 3, 0.9, 0.2, seed).unwrap().mdp;
        let mut rng = cell_rng(75, seed);
        let pi: Vec<usize> = (0..7).map(|_| rng.gen_range(0..3)).collect();
        let exact = evaluate_policy(&mdp, &pi).unwrap();
        let mut v = vec![0.0; 7];
        loop {
            let next: Vec<f64> =
                (0..7).map(|s| mdp.reward(s, pi[s]) + mdp.gamma() * mdp.transition().expectation(s, pi[s], &v)).collect();
            let diff = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = next;
            if diff < 1e-13 {
                break;
            }
        }
        for s in 0..7 {
            assert!((exact[s] - v[s]).abs() < 1e-9);
        }
    }
}

fn random_model(rng: &mut wvaml::rng::CellRng, n: usize, m: usize) -> TransitionTensor {
    TransitionTensor::from_fn(n, m, |_, _| positive_distribution(rng, n)).unwrap()
}

#[test]
fn pointwise_error_and_bounds_match_direct_formulas() {
    for seed in 0..20 {
        let mut rng = cell_rng(76, seed);
        let mdp = generate_lipschitz_mdp(6, 2, 0.85, 0.4, seed).unwrap().mdp;
        let that = random_model(&mut rng, 6, 2);
        let v: Vec<f64> = (0..6).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let (s, a) = (rng.gen_range(0..6), rng.gen_range(0..2));
        let (p, q) = (mdp.transition().row(s, a), that.row(s, a));
        let direct = mdp.gamma() * (0..6).map(|k| p[k] * v[k] - q[k] * v[k]).sum::<f64>();
        let got = pointwise_model_error(&mdp, &that, &v, s, a).unwrap();
        assert!((got - direct).abs() < 1e-12);

        let sup = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let l1: f64 = (0..6).map(|k| (p[k] - q[k]).abs()).sum();
        let kl: f64 = (0..6).map(|k| p[k] * (p[k] / q[k]).ln()).sum();
        let hp = holder_pinsker_bounds(&mdp, &that, &v, s, a).unwrap();
        assert!((hp.error - direct.abs()).abs() < 1e-12);
        assert!((hp.l1_bound - mdp.gamma() * l1 * sup).abs() < 1e-12);
        assert!((hp.kl_bound.unwrap() - mdp.gamma() * (2.0 * kl).sqrt() * sup).abs() < 1e-12);
    }
}

#[test]
fn theorem_radius_from_independent_constants() {
    for seed in 0..5 {
        let mdp = generate_lipschitz_mdp(6, 2, 0.9, 0.3, seed).unwrap().mdp;
        let kr = (0..2)
            .map(|a| lipschitz_constant(&mdp.reward_column(a), mdp.space()).unwrap().constant)
            .fold(0.0, f64::max);
        let kw = brute_kernel_lipschitz(&mdp);
        let c = kr / (1.0 - mdp.gamma() * kw);
        let b = theorem_bound(&mdp).unwrap();
        assert!((b.c.value() - c).abs() <= 1e-9 * (1.0 + c));
    }
}

#[test]
fn vaml_aggregate_is_scaled_squared_wasserstein() {
    let mut rng = cell_rng(77, 0);
    let mdp = generate_lipschitz_mdp(5, 2, 0.8, 0.5, 3).unwrap().mdp;
    let that = random_model(&mut rng, 5, 2);
    let c = 2.5;
    let vaml = cell_losses(&mdp, &that, LossKind::Vaml(c)).unwrap();
    let w = cell_losses(&mdp, &that, LossKind::Wasserstein).unwrap();
    let report = verify_equivalence(&mdp, &that, ValueClassBound::new(c).unwrap()).unwrap();
    for (k, r) in report.records.iter().enumerate() {
        assert!((vaml[k] - r.vaml).abs() <= 1e-12 * (1.0 + r.vaml));
        assert!((vaml[k] - (c * w[k]).powi(2)).abs() <= 1e-6 * (1.0 + vaml[k]));
    }
}
