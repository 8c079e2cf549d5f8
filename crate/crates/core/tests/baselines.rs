use nalgebra::{DMatrix, DVector};
use pacreg::baselines::{erm_box_fit, normal_equations, ols_fit, projection_fit, ridge_fit, truncate_predictor};
use pacreg::synthetic::{DistributionSpec, Noise, PartitionBasis};
use pacreg::{empirical_risk, Dataset, FeatureMap, Input, LeastSquares, LinearModel, ParamBox};
use proptest::prelude::*;

fn points(rows: &[Vec<f64>], ys: &[f64]) -> (Dataset, FeatureMap) {
    let d = rows[0].len();
    let sup = (0..d).map(|j| rows.iter().map(|r| r[j].abs()).fold(1.0, f64::max)).collect();
    let data = Dataset::new(rows.iter().cloned().map(Input::Point).collect(), ys.to_vec()).unwrap();
    (data, FeatureMap::raw_coordinates(sup).unwrap())
}

fn design() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (2usize..4).prop_flat_map(|d| {
        (12usize..30).prop_flat_map(move |n| {
            (prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), n), prop::collection::vec(-5.0f64..5.0, n))
        })
    })
}

#[test]
fn ols_on_a_hand_example() {
    // y = 1 + 2x through three exact points
    let rows = vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]];
    let (data, fmap) = points(&rows, &[1.0, 3.0, 5.0]);
    let fit = ols_fit(&data, &fmap).unwrap();
    assert_eq!(fit.rank, 2);
    assert!((fit.model.theta[0] - 1.0).abs() < 1e-12 && (fit.model.theta[1] - 2.0).abs() < 1e-12);
}

#[test]
fn rank_deficient_design_gives_minimal_norm() {
    // duplicated column: every split of the coefficient fits, the minimal one splits evenly
    let rows = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![-1.0, -1.0]];
    let (data, fmap) = points(&rows, &[2.0, 4.0, -2.0]);
    let fit = ols_fit(&data, &fmap).unwrap();
    assert!(fit.is_rank_deficient());
    assert!((fit.model.theta[0] - 1.0).abs() < 1e-12 && (fit.model.theta[1] - 1.0).abs() < 1e-12);
}

#[test]
fn projection_is_cell_mean_times_root_probability() {
    let probs = vec![0.25, 0.75];
    let fmap = FeatureMap::scaled_indicators(probs.clone()).unwrap();
    let data = Dataset::new(
        vec![Input::Label(0), Input::Label(1), Input::Label(1), Input::Label(0)],
        vec![2.0, 1.0, 3.0, 4.0],
    )
    .unwrap();
    let theta = projection_fit(&data, &fmap).unwrap().theta;
    // (1/n) Σ Y φ_j with φ_j = 1_{A_j}/√p_j
    assert!((theta[0] - 6.0 / 4.0 / 0.5).abs() < 1e-12);
    assert!((theta[1] - 4.0 / 4.0 / 0.75f64.sqrt()).abs() < 1e-12);
    assert!(projection_fit(&data, &FeatureMap::partition_indicators(2).unwrap()).is_err());
}

#[test]
fn projection_is_unbiased_on_the_scaled_partition() {
    let law = DistributionSpec::PartitionDesign {
        probs: vec![0.1, 0.2, 0.3, 0.4],
        theta0: 0.7,
        noise: Noise::Gaussian { sd: 1.0 },
        basis: PartitionBasis::Scaled,
    };
    let fmap = law.feature_map().unwrap();
    let reps = 2000;
    let mut sum = [0.0; 4];
    for rep in 0..reps {
        let theta = projection_fit(&law.sample(50, rep).unwrap(), &fmap).unwrap().theta;
        for j in 0..4 {
            sum[j] += theta[j];
        }
    }
    // E θ̂_j = E[Y φ_j] = 0.7 √p_j; per-replication sd ≤ √((1 + 0.49)/50)
    let se = ((1.49f64) / 50.0 / reps as f64).sqrt();
    for (j, p) in [0.1f64, 0.2, 0.3, 0.4].into_iter().enumerate() {
        assert!((sum[j] / reps as f64 - 0.7 * p.sqrt()).abs() < 4.0 * se, "coordinate {j}");
    }
}

#[test]
fn truncated_predictor_clips() {
    let fmap = FeatureMap::partition_indicators(2).unwrap();
    let t = truncate_predictor(LinearModel::new(vec![5.0, -0.5]), 1.0).unwrap();
    assert_eq!(t.predict(&fmap, &Input::Label(0)).unwrap(), 1.0);
    assert_eq!(t.predict(&fmap, &Input::Label(1)).unwrap(), -0.5);
    assert!(truncate_predictor(LinearModel::zeros(2), 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ols_solves_the_normal_equations((rows, ys) in design()) {
        let (data, fmap) = points(&rows, &ys);
        let (gram, cross) = normal_equations(&data, &fmap).unwrap();
        prop_assume!(gram.clone().symmetric_eigenvalues().min() > 1e-3);
        let fit = ols_fit(&data, &fmap).unwrap();
        let direct = gram.clone().lu().solve(&cross).unwrap();
        for (a, b) in fit.model.theta.iter().zip(direct.iter()) {
            prop_assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn ridge_gradient_vanishes((rows, ys) in design(), lambda in 1e-3f64..10.0) {
        let (data, fmap) = points(&rows, &ys);
        let theta = DVector::from_vec(ridge_fit(&data, &fmap, lambda).unwrap().theta);
        let x = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
        let y = DVector::from_column_slice(&ys);
        let n = rows.len() as f64;
        let grad = x.transpose() * (&x * &theta - y) / n + &theta * lambda;
        prop_assert!(grad.amax() <= 1e-9 * (1.0 + theta.amax()));
        // shrinks towards zero as the penalty grows
        let heavier = ridge_fit(&data, &fmap, 10.0 * lambda).unwrap().theta;
        let norm = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>();
        prop_assert!(norm(&heavier) <= norm(theta.as_slice()) + 1e-12);
    }

    #[test]
    fn erm_beats_every_sampled_box_point((rows, ys) in design(), seed in any::<u64>()) {
        use rand::SeedableRng;
        let (data, fmap) = points(&rows, &ys);
        let bx = ParamBox::cube(rows[0].len(), -0.5, 0.5).unwrap();
        let fit = erm_box_fit(&data, &fmap, &bx, 1e-10).unwrap();
        prop_assert!(bx.contains(&fit.theta));
        let best = empirical_risk(&fit, &fmap, &data, &LeastSquares).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let other = LinearModel::new(bx.sample_uniform(&mut rng));
            prop_assert!(best <= empirical_risk(&other, &fmap, &data, &LeastSquares).unwrap() + 1e-9);
        }
        for v in bx.vertices() {
            prop_assert!(best <= empirical_risk(&LinearModel::new(v), &fmap, &data, &LeastSquares).unwrap() + 1e-9);
        }
    }
}
