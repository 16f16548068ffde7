//! Ridge solves against a dense linear-algebra oracle, plus optimality and
//! monotonicity properties.

mod common;

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

use common::{bin_data, planted, random_data, rng};
use regscore::binarize::BinDataset;
use regscore::ridge::{objective, ridge_solve, RidgeConfig, RidgeProblem, SupportSolution};

/// Normal equations with a column of ones for the unpenalized bias, solved by
/// LU decomposition.
fn dense_oracle(data: &BinDataset, support: &[usize], lambda: f64) -> (f64, Vec<f64>) {
    let p = data.n_rows();
    let m = support.len() + 1;
    let a = DMatrix::from_fn(p, m, |r, c| {
        if c == 0 {
            1.0
        } else {
            f64::from(data.matrix.get(r, support[c - 1]))
        }
    });
    let y = DVector::from_vec(data.target.clone());
    let mut lhs = a.transpose() * &a;
    for i in 1..m {
        lhs[(i, i)] += lambda;
    }
    let theta = lhs.lu().solve(&(a.transpose() * y)).expect("nonsingular");
    (theta[0], theta.iter().skip(1).copied().collect())
}

#[test]
fn matches_dense_oracle_at_default_penalty() {
    let d = planted(300, 12, 4, 0.3, 21);
    let cfg = RidgeConfig::default();
    for support in [vec![0], vec![2, 5, 7], vec![0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11]] {
        let s = ridge_solve(&d, &support, &cfg).unwrap();
        let (bias, beta) = dense_oracle(&d, &support, cfg.lambda2);
        assert_relative_eq!(s.bias, bias, epsilon = 1e-9, max_relative = 1e-9);
        for (a, b) in s.beta.iter().zip(&beta) {
            assert_relative_eq!(*a, *b, epsilon = 1e-9, max_relative = 1e-9);
        }
    }
}

#[test]
fn optimum_survives_random_perturbations() {
    let d = planted(200, 10, 3, 0.5, 5);
    let cfg = RidgeConfig::default();
    let s = ridge_solve(&d, &[1, 4, 6, 8], &cfg).unwrap();
    let mut r = rng(99);
    for i in 0..1000 {
        let scale = 10f64.powi(-(i % 6) as i32);
        let moved = SupportSolution {
            beta: s.beta.iter().map(|b| b + scale * r.random_range(-1.0..1.0)).collect(),
            bias: s.bias + scale * r.random_range(-1.0..1.0),
            ..s.clone()
        };
        let f = objective(&d, &moved, &cfg).unwrap();
        assert!(f >= s.objective - 1e-9 * s.objective.max(1.0), "perturbation {i} improved the optimum");
    }
}

#[test]
fn finetune_never_increases_objective() {
    let d = planted(150, 8, 3, 0.5, 8);
    let cfg = RidgeConfig::new(0.5).unwrap();
    let problem = RidgeProblem::new(&d);
    let start = SupportSolution {
        support: vec![0, 3, 5],
        beta: vec![4.0, -2.0, 0.0],
        bias: -1.0,
        objective: f64::NAN,
    };
    let mut trace = Vec::new();
    let tuned = problem.finetune(&start, &cfg, 500, 1e-12, Some(&mut trace)).unwrap();
    assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0)));
    let exact = problem.solve(&[0, 3, 5], &cfg).unwrap();
    assert_relative_eq!(tuned.objective, exact.objective, max_relative = 1e-9);
}

#[test]
fn bias_only_fit_is_the_mean() {
    let d = bin_data(&[vec![0], vec![1], vec![1]], &[1.0, 2.0, 6.0]);
    let s = ridge_solve(&d, &[], &RidgeConfig::default()).unwrap();
    assert_relative_eq!(s.bias, 3.0, epsilon = 1e-12);
    assert_relative_eq!(s.objective, 14.0, epsilon = 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn solve_agrees_with_oracle(seed in any::<u64>(), p in 8usize..40, d in 1usize..6, lambda in prop::sample::select(vec![1e-3, 0.1, 1.0, 10.0])) {
        let data = random_data(&mut rng(seed), p, d);
        let support: Vec<usize> = (0..d).collect();
        let cfg = RidgeConfig::new(lambda).unwrap();
        let s = ridge_solve(&data, &support, &cfg).unwrap();
        let (bias, beta) = dense_oracle(&data, &support, lambda);
        prop_assert!((s.bias - bias).abs() <= 1e-7 * (1.0 + bias.abs()));
        for (a, b) in s.beta.iter().zip(&beta) {
            prop_assert!((a - b).abs() <= 1e-7 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn penalty_raises_the_optimum(seed in any::<u64>(), l1 in 0.0f64..5.0, extra in 0.0f64..5.0) {
        let data = random_data(&mut rng(seed), 30, 4);
        let support = [0, 1, 2, 3];
        let low = ridge_solve(&data, &support, &RidgeConfig::new(l1 + 1e-6).unwrap()).unwrap();
        let high = ridge_solve(&data, &support, &RidgeConfig::new(l1 + 1e-6 + extra).unwrap()).unwrap();
        prop_assert!(high.objective >= low.objective - 1e-9 * low.objective.max(1.0));
    }

    #[test]
    fn adding_a_column_never_hurts(seed in any::<u64>(), j in 0usize..5) {
        let data = random_data(&mut rng(seed), 30, 6);
        let cfg = RidgeConfig::new(1e-3).unwrap();
        let base: Vec<usize> = (0..5).filter(|&c| c != j).collect();
        let mut more = base.clone();
        more.push(5);
        let a = ridge_solve(&data, &base, &cfg).unwrap();
        let b = ridge_solve(&data, &more, &cfg).unwrap();
        prop_assert!(b.objective <= a.objective + 1e-9 * a.objective.max(1.0));
    }
}
