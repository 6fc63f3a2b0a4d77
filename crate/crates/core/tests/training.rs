use polydepth::baselines::fit_linear;
use polydepth::eval::{mae_rmse, Unit};
use polydepth::network::{nominal, predict_coefficients, predict_depth, ModelParams, NetConfig};
use polydepth::polytransform::{eval_derivative, SlopeMap};
use polydepth::synthgen::{generate_scenes, misalignment_fixture, SceneSpec};
use polydepth::training::{compute_loss, train, LossConfig, TrainConfig};
use polydepth::{DepthKind, DepthMap, PolyCoefficients, SceneSample};

fn small(degree: usize) -> NetConfig {
    NetConfig {
        c_r: 16,
        c_z: 16,
        c_v: 16,
        c_s: 16,
        prototypes: 8,
        degree,
        ..NetConfig::default()
    }
}

fn slope_term(m: &ModelParams, s: &SceneSample) -> f64 {
    let c = predict_coefficients(m, &s.scaleless, &s.cloud).unwrap();
    let slopes = eval_derivative(&c, &nominal(&s.scaleless, m.config().d_scale).unwrap()).unwrap();
    slopes.values.iter().map(|v| (1.0 - v).abs()).sum::<f64>() / slopes.values.len() as f64
}

#[test]
fn loss_terms_on_a_worked_example() {
    let row = |v: Vec<f64>, k| DepthMap::new(1, 3, v, k).unwrap();
    let pred = row(vec![1.0, 2.0, 3.0], DepthKind::Metric);
    let gt = row(vec![1.0, 4.0, 0.0], DepthKind::GroundTruth);
    let mask = gt.valid_mask();
    let slope = SlopeMap {
        height: 1,
        width: 3,
        values: vec![1.0, 0.5, -1.0],
    };
    let t = compute_loss(&pred, &gt, &mask, &slope, &LossConfig::default()).unwrap();
    assert_eq!((t.l1, t.l2), (1.0, 2.0));
    // The slope term covers unmasked pixels too.
    assert!((t.slope - 2.5 / 3.0).abs() < 1e-15);
    assert!((t.total - (1.0 + 2.0 + 0.1 * 2.5 / 3.0)).abs() < 1e-15);
}

#[test]
fn identity_transform_has_zero_slope_penalty() {
    let z = DepthMap::new(2, 2, vec![0.0, 0.25, 0.5, 1.0], DepthKind::Scaleless).unwrap();
    for degree in [1, 3, 8] {
        let c = PolyCoefficients::identity(degree, 80.0).unwrap();
        let slope = eval_derivative(&c, &nominal(&z, 80.0).unwrap()).unwrap();
        let t = compute_loss(&z, &z, &z.valid_mask(), &slope, &LossConfig::default()).unwrap();
        assert_eq!(t.slope, 0.0);
    }
}

#[test]
fn slope_only_training_reaches_unit_slope() {
    let scenes = generate_scenes(
        &SceneSpec {
            height: 16,
            width: 16,
            points: 20,
            ..SceneSpec::default()
        },
        12,
        3,
    )
    .unwrap();
    let cfg = TrainConfig {
        epochs: 100,
        cosine: true,
        ..TrainConfig::default()
    };
    let loss = LossConfig {
        lambda1: 0.0,
        lambda2: 0.0,
        lambda3: 1.0,
        ..LossConfig::default()
    };
    let out = train(ModelParams::init(small(8)).unwrap(), &scenes[..8], &scenes[8..], &cfg, &loss).unwrap();
    for s in &scenes {
        let t = slope_term(&out.last, s);
        assert!(t < 1e-3, "{}: slope term {t:e}", s.id);
    }
}

#[test]
fn single_scene_overfit_beats_the_linear_fit() {
    let (s, _) = misalignment_fixture().unwrap();
    let cfg = TrainConfig {
        epochs: 500,
        cosine: true,
        ..TrainConfig::default()
    };
    let out = train(
        ModelParams::init(small(8)).unwrap(),
        std::slice::from_ref(&s),
        &[],
        &cfg,
        &LossConfig::default(),
    )
    .unwrap();
    let pred = predict_depth(&out.best, &s.scaleless, &s.cloud).unwrap();
    let net = mae_rmse(&pred.depth, &s.ground_truth, &s.mask, f64::INFINITY, Unit::Meters).unwrap().mae;
    let lin = fit_linear(&s.scaleless, &s.ground_truth, &s.mask).unwrap();
    let lin_pred = DepthMap::new(
        s.scaleless.height(),
        s.scaleless.width(),
        s.scaleless.values().iter().map(|z| (lin.scale * z + lin.shift).max(0.0)).collect(),
        DepthKind::Metric,
    )
    .unwrap();
    let linear = mae_rmse(&lin_pred, &s.ground_truth, &s.mask, f64::INFINITY, Unit::Meters).unwrap().mae;
    assert!(net < linear, "network {net} vs linear {linear}");
}

#[test]
fn log_has_one_row_per_epoch_and_best_is_retained() {
    let scenes = generate_scenes(
        &SceneSpec {
            height: 16,
            width: 16,
            points: 20,
            ..SceneSpec::default()
        },
        4,
        9,
    )
    .unwrap();
    let cfg = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    let out = train(ModelParams::init(small(4)).unwrap(), &scenes[..3], &scenes[3..], &cfg, &LossConfig::default()).unwrap();
    assert_eq!(out.log.len(), 5);
    let best = out.log.iter().map(|e| e.val_mae).fold(f64::INFINITY, f64::min);
    assert_eq!(out.log[out.best_epoch - 1].val_mae, best);
    assert!(out.diverged.is_none());
}
