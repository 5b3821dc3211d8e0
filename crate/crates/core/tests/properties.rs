use proptest::prelude::*;
use qgpart::decision::cost_densities;
use qgpart::transport::{integer_assignment, objective, solve_assignment_lp, Grid};
use qgpart::{
    half_moment, model_from_json, model_to_json, optimal_rule, solve_normalization, HypothesisFamily, MixtureModel,
    ProductDensity, QuasiGaussian1D, WeightMatrix,
};

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

fn law() -> impl Strategy<Value = QuasiGaussian1D> {
    (-5.0..5.0f64, -0.9..6.0f64, -0.9..6.0f64, 0.05..5.0f64, 0.0..=1.0f64)
        .prop_map(|(a, an, ap, s, p)| QuasiGaussian1D::from_mass_split(a, an, ap, s, p).unwrap())
}

fn weights(n: usize) -> impl Strategy<Value = WeightMatrix> {
    prop::collection::vec(0.01..10.0f64, n * n).prop_map(move |flat| {
        let v = (0..n)
            .map(|i| (0..n).map(|k| if i == k { 0.0 } else { flat[i * n + k] }).collect())
            .collect();
        WeightMatrix::new(v).unwrap()
    })
}

proptest! {
    #[test]
    fn half_moment_recurrence(alpha in -0.95..20.0f64, sigma in 0.01..20.0f64) {
        let lower = half_moment(alpha, sigma).unwrap();
        let upper = half_moment(alpha + 2.0, sigma).unwrap();
        let expected = sigma * sigma * (alpha + 1.0) * lower;
        prop_assert!((upper - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn normalization_holds(an in -0.95..8.0f64, ap in -0.95..8.0f64, sigma in 0.01..10.0f64, p in 0.0..=1.0f64) {
        let (c_neg, c_pos) = solve_normalization(an, ap, sigma, p).unwrap();
        let lhs = c_neg * half_moment(an, sigma).unwrap() + c_pos * half_moment(ap, sigma).unwrap();
        prop_assert!((lhs - sigma * SQRT_2PI).abs() <= 1e-12 * sigma * SQRT_2PI);
        let law = QuasiGaussian1D::new(0.0, an, ap, sigma, c_neg, c_pos).unwrap();
        prop_assert!((law.negative_mass() - p).abs() < 1e-12);
    }

    #[test]
    fn log_density_agrees_with_density(law in law(), x in -20.0..20.0f64) {
        let p = law.pdf(x);
        prop_assert!(p >= 0.0);
        let lp = law.ln_pdf(x);
        if p.is_normal() {
            prop_assert!((lp - p.ln()).abs() <= 1e-12 * lp.abs().max(1.0));
        } else if p < f64::MIN_POSITIVE {
            // Zero or subnormal: the log still resolves the value.
            prop_assert!(lp < f64::MIN_POSITIVE.ln() + 1e-9);
        }
    }

    #[test]
    fn optimal_rule_is_the_pointwise_argmin(
        laws in prop::collection::vec(law(), 3),
        w in weights(3),
        xs in prop::collection::vec(-8.0..8.0f64, 20),
        c in 0.001..1000.0f64,
    ) {
        let family = HypothesisFamily::new(laws).unwrap();
        let rule = optimal_rule(&w, &family).unwrap();
        let scaled = optimal_rule(&w.scaled(c).unwrap(), &family).unwrap();
        for x in xs {
            let g = cost_densities(&w, &family, &[x]).unwrap();
            let label = rule.classify(&[x]).unwrap();
            prop_assert!(g.iter().all(|&v| g[label] <= v));
            prop_assert!(g[..label].iter().all(|&v| v > g[label]));
            prop_assert_eq!(Some(label), scaled.classify(&[x]));
        }
    }

    #[test]
    fn model_json_round_trips(laws in prop::collection::vec(law(), 4), raw in prop::collection::vec(0.05..1.0f64, 2)) {
        let comps = vec![
            ProductDensity::new(laws[..2].to_vec()).unwrap(),
            ProductDensity::new(laws[2..].to_vec()).unwrap(),
        ];
        let total: f64 = raw.iter().sum();
        let model = MixtureModel::new(vec![raw[0] / total, 1.0 - raw[0] / total], comps, None).unwrap();
        let back = model_from_json(&model_to_json(&model)).unwrap();
        prop_assert_eq!(back, model);
    }

    #[test]
    fn sampling_is_deterministic(law in law(), seed in any::<u64>()) {
        let model = MixtureModel::from(law);
        prop_assert_eq!(model.sample(50, seed), model.sample(50, seed));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lp_matches_integer_assignment(
        n_labels in 2usize..=5,
        rows in prop::collection::vec((0.1..2.0f64, prop::collection::vec(0.0..10.0f64, 5)), 1..60),
    ) {
        let grid = Grid {
            points: (0..rows.len()).map(|r| vec![r as f64]).collect(),
            cell_weights: rows.iter().map(|r| r.0).collect(),
        };
        let costs: Vec<Vec<f64>> = rows.iter().map(|r| r.1[..n_labels].to_vec()).collect();
        let lp = solve_assignment_lp(&grid, &costs).unwrap();
        let int = integer_assignment(&grid, &costs).unwrap();
        prop_assert!(lp.validate().is_ok());
        prop_assert!(int.validate().is_ok());
        let a = objective(&grid, &costs, &lp);
        let b = objective(&grid, &costs, &int);
        prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1e-300));
    }
}
