use std::path::Path;

use pacreg::harness::report::strip_timing;
use pacreg::harness::seed::{derive, stable_hash};
use pacreg::harness::{
    emit_report, fit_estimator, load_report, parse_dataset_csv, run_experiment, write_dataset_csv, EstimatorId,
    ExperimentConfig, PosteriorSettings,
};
use pacreg::synthetic::{DistributionSpec, Noise, PartitionBasis};
use pacreg::{Dataset, Input, ParamBox};
use proptest::prelude::*;

fn shipped(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::from_path(&path).unwrap()
}

#[test]
fn shipped_configs_load_and_round_trip() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ExperimentConfig::from_path(&path).unwrap();
            let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
            assert_eq!(again, cfg, "{}", path.display());
            seen += 1;
        }
    }
    assert!(seen >= 4);
}

#[test]
fn config_errors_are_reported() {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/quick.toml")).unwrap();
    for (from, to) in
        [("reps = 8", "reps = 0"), ("\"ols\"", "\"olss\""), ("n = [20, 80]", "n = []"), ("[output]", "[outputs]")]
    {
        assert!(ExperimentConfig::from_toml_str(&text.replace(from, to)).is_err(), "{to}");
    }
}

#[test]
fn quick_report_survives_disk() {
    let report = run_experiment(&shipped("quick.toml"), Some(1)).unwrap();
    assert_eq!(report.replications.len(), 6 * 2 * 8);
    assert!(report.replications.iter().all(|r| r.excess_risk >= -1e-9));
    let dir = tempfile::tempdir().unwrap();
    let written = emit_report(&report, dir.path()).unwrap();
    assert_eq!(written.len(), 4);
    let loaded = load_report(dir.path()).unwrap();
    assert_eq!(loaded.replications.len(), report.replications.len());
    assert_eq!(loaded.aggregates, report.aggregates);
    assert_eq!(loaded.manifest.master_seed, 99);
    let text = std::fs::read_to_string(dir.path().join("replications.csv")).unwrap();
    let stripped = strip_timing(&text);
    assert!(stripped.lines().all(|l| l.split(',').count() == 5));
    assert!(stripped.starts_with("estimator,n,rep,excess_risk,accept_rate\n"));
}

#[test]
fn mean_of_posterior_is_more_stable_than_a_draw() {
    let law = DistributionSpec::PartitionDesign {
        probs: vec![1.0],
        theta0: 0.2,
        noise: Noise::StudentT { nu: 3.0, scale: 1.0 },
        basis: PartitionBasis::Indicators,
    };
    let fmap = law.feature_map().unwrap();
    let bx = ParamBox::cube(1, -3.0, 3.0).unwrap();
    let settings = PosteriorSettings { m: 32, chain_length: 800, burn_in: 200, ..Default::default() };
    let data = law.sample(100, 1).unwrap();
    let draw: EstimatorId = "trunc-pacbayes(0.05)".parse().unwrap();
    let mean: EstimatorId = "trunc-pacbayes-mean(0.05)".parse().unwrap();
    let (mut spread_draw, mut spread_mean) = (Vec::new(), Vec::new());
    for seed in 0..20 {
        spread_draw
            .push(fit_estimator(&draw, &data, &fmap, &bx, &settings, draw.lambda(), seed).unwrap().fitted.theta()[0]);
        spread_mean
            .push(fit_estimator(&mean, &data, &fmap, &bx, &settings, mean.lambda(), seed).unwrap().fitted.theta()[0]);
    }
    let var = |v: &[f64]| pacreg::numeric::variance(v);
    assert!(var(&spread_mean) < var(&spread_draw));
}

#[test]
fn seed_streams_are_distinct() {
    let mut seen = std::collections::HashSet::new();
    for stream in ["data", "ols", "erm-box"] {
        for n in [10, 20] {
            for rep in 0..50 {
                assert!(seen.insert(derive(7, stream, n, rep)));
            }
        }
    }
    assert_ne!(stable_hash("data"), stable_hash("data:plus"));
}

fn dataset() -> impl Strategy<Value = Dataset> {
    let labelled = prop::collection::vec((0usize..5, -1e6f64..1e6), 0..20).prop_map(|rows| {
        let (x, y): (Vec<_>, Vec<_>) = rows.into_iter().map(|(k, y)| (Input::Label(k), y)).unzip();
        Dataset::new(x, y).unwrap()
    });
    let points = (1usize..4).prop_flat_map(|d| {
        prop::collection::vec((prop::collection::vec(-1e3f64..1e3, d), -1e3f64..1e3), 1..20).prop_map(|rows| {
            let (x, y): (Vec<_>, Vec<_>) = rows.into_iter().map(|(p, y)| (Input::Point(p), y)).unzip();
            Dataset::new(x, y).unwrap()
        })
    });
    prop_oneof![labelled, points]
}

proptest! {
    #[test]
    fn datasets_round_trip(data in dataset()) {
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &data).unwrap();
        let back = parse_dataset_csv(&buf[..]).unwrap();
        prop_assert_eq!(back.outputs(), data.outputs());
        if !data.is_empty() {
            prop_assert_eq!(back.inputs(), data.inputs());
        }
    }

    #[test]
    fn estimator_ids_round_trip(lambda in 1e-6f64..1e3, k in 0usize..8) {
        let text = match k {
            0 => "ols".to_string(),
            1 => format!("ols-trunc({lambda:?})"),
            2 => format!("ridge({lambda:?})"),
            3 => "projection".to_string(),
            4 => "erm-box".to_string(),
            5 => format!("gibbs({lambda:?})"),
            6 => format!("trunc-pacbayes({lambda:?})"),
            _ => format!("trunc-pacbayes-mean({lambda:?})"),
        };
        let id: EstimatorId = text.parse().unwrap();
        prop_assert_eq!(id.to_string(), text.clone());
        prop_assert_eq!(id.to_string().parse::<EstimatorId>().unwrap(), id);
    }
}
