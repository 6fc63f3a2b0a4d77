use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_chacha::ChaCha8Rng;

use super::loss::{loss_graph, LossConfig, SceneTensors};
use crate::autodiff::gradcheck::{noise_floor, relative_error, GradCheckReport, FD_STEP};
use crate::autodiff::Graph;
use crate::datamodel::SceneSample;
use crate::error::Result;
use crate::network::{forward, ModelParams, NetConfig, Param};
use crate::synthgen::{generate_scene, SceneSpec};

/// Entries per parameter tensor compared against finite differences.
pub const PIPELINE_SAMPLES_PER_TENSOR: usize = 24;

/// Standard deviation of the offset added to the initial parameters.
const JITTER: f64 = 0.05;

fn total_loss(params: &ModelParams, sample: &SceneSample, scene: &SceneTensors, cfg: &LossConfig) -> Result<f64> {
    let mut g = Graph::new();
    let nodes = params.bind(&mut g, false);
    let out = forward(&mut g, &nodes, params.config(), &sample.scaleless, &sample.cloud)?;
    let loss = loss_graph(&mut g, out.head, scene, cfg)?;
    Ok(g.value(loss.total).item())
}

/// Full three-term loss through the complete network on a 16×16 scene with
/// five radar points, at jittered initial parameters: backward gradients against central differences on a
/// seeded sample of entries of every parameter tensor.
pub fn pipeline_gradcheck(seed: u64, net: NetConfig) -> Result<Vec<GradCheckReport>> {
    let spec = SceneSpec {
        height: 16,
        width: 16,
        points: 5,
        seed,
        ..SceneSpec::default()
    };
    let sample = generate_scene(&spec)?;
    let mut params = ModelParams::init(NetConfig { seed, ..net })?;
    // The initial transform is the identity, where every pixel sits on the
    // kink of |1 − slope|; check at a nearby generic point instead.
    let mut jitter_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1172);
    for t in params.tensors_mut() {
        for w in t.data_mut() {
            *w += JITTER * jitter_rng.sample::<f64, _>(StandardNormal);
        }
    }
    let cfg = LossConfig::default();
    let scene = SceneTensors::for_network(&sample, &net)?;

    let mut g = Graph::new();
    let nodes = params.bind(&mut g, true);
    let out = forward(&mut g, &nodes, params.config(), &sample.scaleless, &sample.cloud)?;
    let loss = loss_graph(&mut g, out.head, &scene, &cfg)?;
    let f0 = g.value(loss.total).item();
    g.backward(loss.total)?;
    let floor = noise_floor(f0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut reports = Vec::new();
    for p in Param::ALL {
        let analytic = g.grad(nodes.get(p));
        let n = analytic.numel();
        let picks = index::sample(&mut rng, n, PIPELINE_SAMPLES_PER_TENSOR.min(n));
        let mut worst = 0.0_f64;
        let mut probe = params.clone();
        for i in picks {
            let x = params.get(p).data()[i];
            probe.get_mut(p).data_mut()[i] = x + FD_STEP;
            let plus = total_loss(&probe, &sample, &scene, &cfg)?;
            probe.get_mut(p).data_mut()[i] = x - FD_STEP;
            let minus = total_loss(&probe, &sample, &scene, &cfg)?;
            probe.get_mut(p).data_mut()[i] = x;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let re = relative_error(analytic.data()[i], numeric, floor);
            worst = worst.max(re);
        }
        reports.push(GradCheckReport {
            name: format!("pipeline/{}", p.name()),
            max_rel_error: worst,
            checked: PIPELINE_SAMPLES_PER_TENSOR.min(n),
        });
    }
    Ok(reports)
}
