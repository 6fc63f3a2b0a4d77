//! Overfit one scene and compare with the closed-form linear alignment.

use polydepth::eval::{evaluate_method, Method, Unit};
use polydepth::network::{ModelParams, NetConfig};
use polydepth::synthgen::misalignment_fixture;
use polydepth::training::{train, LossConfig, TrainConfig};

fn main() -> polydepth::Result<()> {
    let (s, _) = misalignment_fixture()?;
    let scenes = std::slice::from_ref(&s);
    let net = NetConfig {
        c_r: 16,
        c_z: 16,
        c_v: 16,
        c_s: 16,
        prototypes: 8,
        ..NetConfig::default()
    };
    let cfg = TrainConfig {
        epochs: 500,
        cosine: true,
        ..TrainConfig::default()
    };
    let out = train(ModelParams::init(net)?, scenes, &[], &cfg, &LossConfig::default())?;
    for e in out.log.iter().step_by(50) {
        println!("step {:4}  L1 {:8.4}  slope {:.4}", e.epoch, e.terms.l1, e.terms.slope);
    }
    for m in [Method::Linear, Method::Network(Box::new(out.best))] {
        let r = evaluate_method(&m, scenes, &[f64::INFINITY], Unit::Meters)?;
        println!("{:>10}  MAE {:.3} m", m.label(), r.mean_at(&m.label(), f64::INFINITY).expect("row").mae);
    }
    Ok(())
}
