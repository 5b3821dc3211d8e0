use qgpart::decision::cost_density;
use qgpart::transport::{default_bounds, discretize, integer_assignment, objective, solve_assignment_lp, Grid};
use qgpart::{optimal_rule, HypothesisFamily, QuasiGaussian1D, WeightMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

fn gauss_pair() -> HypothesisFamily {
    HypothesisFamily::new(vec![
        QuasiGaussian1D::gaussian(0.0, 1.0).unwrap(),
        QuasiGaussian1D::gaussian(2.0, 1.0).unwrap(),
    ])
    .unwrap()
}

fn pointwise_minimum(grid: &Grid, costs: &[Vec<f64>]) -> f64 {
    grid.cell_weights
        .iter()
        .zip(costs)
        .map(|(w, row)| w * row.iter().copied().fold(f64::INFINITY, f64::min))
        .sum()
}

#[test]
fn eleven_points_on_a_ten_unit_interval() {
    let w = WeightMatrix::unit(2).unwrap();
    let (grid, costs) = discretize(&w, &gauss_pair(), &[(-5.0, 5.0)], 11).unwrap();
    assert_eq!(grid.len(), 11);
    assert_eq!(costs.len(), 11);
    for (i, (p, dw)) in grid.points.iter().zip(&grid.cell_weights).enumerate() {
        assert!((p[0] - (-5.0 + i as f64)).abs() < 1e-15);
        assert!((dw - 1.0).abs() < 1e-15);
    }
}

#[test]
fn cost_table_matches_cost_density() {
    let family = gauss_pair();
    let w = WeightMatrix::new(vec![vec![0.0, 2.5], vec![0.7, 0.0]]).unwrap();
    let (grid, costs) = discretize(&w, &family, &default_bounds(&family), 64).unwrap();
    for (p, row) in grid.points.iter().zip(&costs) {
        for (j, &c) in row.iter().enumerate() {
            let direct = cost_density(&w, &family, j, p).unwrap();
            assert!((c - direct).abs() <= 1e-12 * direct.abs());
        }
    }
}

#[test]
fn grid_risk_converges_to_the_continuous_optimum() {
    let family = gauss_pair();
    let w = WeightMatrix::unit(2).unwrap();
    let exact = 2.0 * Normal::standard().cdf(-1.0);
    let mut previous = f64::INFINITY;
    for resolution in [50, 200, 1000, 2000] {
        let (grid, costs) = discretize(&w, &family, &default_bounds(&family), resolution).unwrap();
        let assignment = integer_assignment(&grid, &costs).unwrap();
        let err = (objective(&grid, &costs, &assignment) - exact).abs() / exact;
        assert!(err < previous, "resolution {resolution}: {err} >= {previous}");
        previous = err;
    }
    assert!(previous < 0.01);
}

#[test]
fn lp_and_integer_objectives_agree_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..20 {
        let n_labels = rng.random_range(2..=5);
        let n_points = rng.random_range(1..=120);
        let grid = Grid {
            points: (0..n_points).map(|r| vec![r as f64]).collect(),
            cell_weights: (0..n_points).map(|_| rng.random_range(0.1..2.0)).collect(),
        };
        let costs: Vec<Vec<f64>> = (0..n_points)
            .map(|_| (0..n_labels).map(|_| rng.random_range(0.0..5.0)).collect())
            .collect();
        let lp = solve_assignment_lp(&grid, &costs).unwrap();
        let int = integer_assignment(&grid, &costs).unwrap();
        lp.validate().unwrap();
        int.validate().unwrap();
        let target = pointwise_minimum(&grid, &costs);
        let a = objective(&grid, &costs, &lp);
        let b = objective(&grid, &costs, &int);
        assert!((a - target).abs() <= 1e-9 * target, "{a} vs {target}");
        assert!((b - target).abs() <= 1e-9 * target, "{b} vs {target}");
        assert!(int.phi.iter().flatten().all(|&p| p == 0.0 || p == 1.0));
    }
}

#[test]
fn lp_labels_match_the_optimal_rule() {
    let family = gauss_pair();
    let w = WeightMatrix::unit(2).unwrap();
    let (grid, costs) = discretize(&w, &family, &default_bounds(&family), 301).unwrap();
    let lp = solve_assignment_lp(&grid, &costs).unwrap();
    let rule = optimal_rule(&w, &family).unwrap();
    for ((p, row), label) in grid.points.iter().zip(&costs).zip(lp.labels()) {
        if row[0] != row[1] {
            assert_eq!(Some(label), rule.classify(p), "{p:?}");
        }
    }
}

#[test]
fn equal_costs_choose_label_zero() {
    let grid = Grid {
        points: vec![vec![0.0]],
        cell_weights: vec![1.0],
    };
    let int = integer_assignment(&grid, &vec![vec![2.0, 2.0, 2.0]]).unwrap();
    assert_eq!(int.phi, vec![vec![1.0, 0.0, 0.0]]);
}
