//! The whole pipeline also runs in `f32`.

use lcmicp::conformal::{prediction_set, uniform};
use lcmicp::data::calibration_split;
use lcmicp::evaluation::{run_experiment, ExperimentConfig};
use lcmicp::synthetic::GaussianSpec;
use lcmicp::{BinaryLabel, Dataset32, ForestParams, PerClass, RfLcmicp32, RngSeed};

fn data() -> Dataset32 {
    GaussianSpec {
        dimension: 3,
        separation: 1.0,
        counts: PerClass::new(240, 120),
    }
    .generate(RngSeed(4))
    .unwrap()
}

#[test]
fn f32_pipeline_produces_valid_pvalues() {
    let data = data();
    let plan = calibration_split(&data, 0.2, RngSeed(1)).unwrap();
    let model = RfLcmicp32::fit(
        &data.subset(&plan.proper_training),
        &data.subset(&plan.calibration),
        &ForestParams {
            trees: 10,
            ..Default::default()
        },
        Default::default(),
        RngSeed(2),
    )
    .unwrap();
    for pred in model.predict_all(&data).unwrap() {
        let sum = pred.posterior.benign + pred.posterior.malicious;
        assert!((sum - 1.0).abs() <= 1e-5);
        for l in BinaryLabel::ALL {
            let p = pred.p_values.get(l);
            assert!(p > 0.0 && p <= 1.0);
        }
        assert_eq!(prediction_set(&pred.p_values, uniform(0.0f32)).len(), 2);
    }
}

#[test]
fn f32_experiment_runs() {
    let cfg = ExperimentConfig {
        feature_kind: None,
        train_counts: PerClass::new(150, 60),
        test_counts: PerClass::new(40, 40),
        repetitions: 2,
        forest: ForestParams {
            trees: 10,
            ..Default::default()
        },
        ..Default::default()
    };
    let report = run_experiment(&cfg, &data()).unwrap();
    assert_eq!(report.repetitions.len(), 2);
    assert!(report.lcmicp.metrics.accuracy.unwrap() > 0.5);
}
