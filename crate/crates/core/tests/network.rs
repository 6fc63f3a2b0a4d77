use polydepth::network::{
    aggregate_prototypes, encode_depth, encode_radar, fuse, predict_coefficients, read_checkpoint, write_checkpoint,
    ModelParams, NetConfig, Param,
};
use polydepth::synthgen::{generate_scenes, SceneSpec};
use polydepth::RadarCloud;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scenes(n: usize) -> Vec<polydepth::SceneSample> {
    generate_scenes(
        &SceneSpec {
            height: 16,
            width: 16,
            points: 20,
            ..SceneSpec::default()
        },
        n,
        3,
    )
    .unwrap()
}

fn small(seed: u64) -> NetConfig {
    NetConfig {
        c_r: 16,
        c_z: 16,
        c_v: 16,
        c_s: 16,
        prototypes: 8,
        seed,
        ..NetConfig::default()
    }
}

#[test]
fn coefficients_ignore_radar_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0_f64;
    for (k, s) in scenes(10).iter().enumerate() {
        let m = ModelParams::init(small(k as u64)).unwrap();
        let base = predict_coefficients(&m, &s.scaleless, &s.cloud).unwrap();
        let mut order: Vec<usize> = (0..s.cloud.len()).collect();
        for _ in 0..100 {
            order.shuffle(&mut rng);
            let c = predict_coefficients(&m, &s.scaleless, &s.cloud.permuted(&order)).unwrap();
            for (a, b) in base.coeffs().iter().zip(c.coeffs()) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    assert!(worst < 1e-10, "max coefficient change {worst:e}");
}

#[test]
fn attention_rows_are_distributions() {
    for (k, s) in scenes(5).iter().enumerate() {
        let m = ModelParams::init(small(k as u64)).unwrap();
        let f = encode_radar(&m, &s.cloud).unwrap();
        let agg = aggregate_prototypes(&m, &f).unwrap();
        let w = agg.weights.unwrap();
        assert_eq!(w.shape(), &[8, s.cloud.len()]);
        for row in w.data().chunks(s.cloud.len()) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|v| *v >= 0.0));
        }
        let tokens = encode_depth(&m, &s.scaleless).unwrap();
        let fused = fuse(&m, &tokens, &agg.output).unwrap();
        let fw = fused.weights.unwrap();
        assert_eq!(fw.shape(), &[16, 8]);
        for row in fw.data().chunks(8) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn single_point_and_single_prototype_degenerate_cases() {
    let s = &scenes(1)[0];
    let one = RadarCloud::new(vec![s.cloud.points()[0]]).unwrap();
    let m = ModelParams::init(small(1)).unwrap();
    let f = encode_radar(&m, &one).unwrap();
    let agg = aggregate_prototypes(&m, &f).unwrap();
    // Softmax over one item: every prototype returns that point's value row.
    let value = {
        let w = m.get(Param::ValueW);
        let c = 16;
        (0..c)
            .map(|j| (0..c).map(|i| f.data()[i] * w.data()[i * c + j]).sum::<f64>())
            .collect::<Vec<_>>()
    };
    for row in agg.output.data().chunks(16) {
        for (a, b) in row.iter().zip(&value) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    let m1 = ModelParams::init(NetConfig {
        prototypes: 1,
        ..small(2)
    })
    .unwrap();
    let f = encode_radar(&m1, &s.cloud).unwrap();
    let agg = aggregate_prototypes(&m1, &f).unwrap();
    let tokens = encode_depth(&m1, &s.scaleless).unwrap();
    let fused = fuse(&m1, &tokens, &agg.output).unwrap();
    let first = fused.output.data()[..16].to_vec();
    for row in fused.output.data().chunks(16) {
        assert_eq!(row, &first[..]);
    }
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let s = &scenes(1)[0];
    let m = ModelParams::init(small(5)).unwrap();
    let back = read_checkpoint(&write_checkpoint(&m)).unwrap();
    assert_eq!(back, m);
    assert_eq!(
        predict_coefficients(&m, &s.scaleless, &s.cloud).unwrap(),
        predict_coefficients(&back, &s.scaleless, &s.cloud).unwrap()
    );
}

#[test]
fn ablations_change_the_function_not_the_shapes() {
    let s = &scenes(1)[0];
    let base = small(7);
    for cfg in [
        NetConfig {
            disable_prototypes: true,
            ..base
        },
        NetConfig {
            disable_fusion: true,
            ..base
        },
    ] {
        let m = ModelParams::init(cfg).unwrap();
        assert_eq!(m.num_parameters(), ModelParams::init(base).unwrap().num_parameters());
        assert_eq!(predict_coefficients(&m, &s.scaleless, &s.cloud).unwrap().degree(), 8);
    }
}
