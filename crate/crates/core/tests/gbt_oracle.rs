mod support {
    pub mod gbt_exhaustive;
}

use persona_signal::gbt::{fit, logistic_grad_hess, GBTParams};
use persona_signal::matrix::Matrix;
use persona_signal::seed::rng_for;
use rand::Rng;
use support::gbt_exhaustive::{best_score, Reg};

struct Fixture {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
}

fn random_fixture(seed: u64) -> Fixture {
    let mut rng = rng_for(seed, 100, 0);
    loop {
        let n = rng.random_range(2..=8);
        let d = rng.random_range(1..=2);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| f64::from(rng.random_range(0..5u8))).collect()).collect();
        let y: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect();
        let pos = y.iter().sum::<f64>();
        if pos > 0.0 && pos < n as f64 {
            return Fixture { x, y };
        }
    }
}

/// First-tree structure score of the fitted model and the exhaustive optimum
/// at the same starting gradients.
fn scores(f: &Fixture, reg: &Reg, depth: usize) -> (f64, f64) {
    let params = GBTParams {
        rounds: 1,
        learning_rate: 1.0,
        max_depth: depth,
        lambda: reg.lambda,
        gamma: reg.gamma,
        alpha: reg.alpha,
        min_child_hessian: 0.0,
        seed: 0,
    };
    let names: Vec<String> = (0..f.x[0].len()).map(|j| format!("f{j}")).collect();
    let model = fit(&Matrix::from_rows(&f.x).unwrap(), &f.y, &names, &params).unwrap();
    let (g, h): (Vec<f64>, Vec<f64>) = f.y.iter().map(|&y| logistic_grad_hess(y, model.base_score)).unzip();
    let rows: Vec<usize> = (0..f.y.len()).collect();
    let greedy = model.trees[0].structure_score(reg.lambda, reg.gamma, reg.alpha);
    (greedy, best_score(&f.x, &g, &h, &rows, depth, reg))
}

#[test]
fn depth_one_greedy_is_exhaustive_optimum() {
    for seed in 0..300 {
        let f = random_fixture(seed);
        for reg in [Reg { lambda: 1.0, gamma: 0.0, alpha: 0.0 }, Reg { lambda: 0.5, gamma: 0.1, alpha: 0.2 }] {
            let (greedy, best) = scores(&f, &reg, 1);
            assert!((greedy - best).abs() < 1e-9, "seed {seed}: greedy {greedy} vs optimum {best}");
        }
    }
}

#[test]
fn greedy_never_beats_optimum_at_depth_two() {
    let reg = Reg { lambda: 1.0, gamma: 0.0, alpha: 0.0 };
    for seed in 0..300 {
        let f = random_fixture(seed);
        let (greedy, best) = scores(&f, &reg, 2);
        assert!(greedy >= best - 1e-9, "seed {seed}: greedy {greedy} below optimum {best}");
    }
}

#[test]
fn xor_root_has_no_positive_gain() {
    let f = Fixture {
        x: vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
        y: vec![0.0, 1.0, 1.0, 0.0],
    };
    let (greedy, best) = scores(&f, &Reg { lambda: 1.0, gamma: 0.0, alpha: 0.0 }, 2);
    assert_eq!(greedy, 0.0);
    assert!(best < -0.1);
}
