//! Central finite-difference gradient checks.
//!
//! The numeric side only ever evaluates forward passes, so it stays independent
//! of the backward rules it verifies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Graph, NodeId, Tensor};
use crate::error::Result;

/// Default finite-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Gradient components smaller than this fraction of `max(|f|, 1)` are
/// compared against the floor instead of their own magnitude.
pub const FLOOR_FRACTION: f64 = 1e-5;

/// Acceptance threshold on the relative gradient error.
pub const MAX_REL_ERROR: f64 = 1e-4;

/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate.
pub fn central_difference<F>(mut f: F, point: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut x = point.to_vec();
    (0..point.len())
        .map(|i| {
            x[i] = point[i] + h;
            let plus = f(&x);
            x[i] = point[i] - h;
            let minus = f(&x);
            x[i] = point[i];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Magnitude below which a gradient component is compared absolutely.
///
/// Rounding noise in a deep forward pass is amplified by `1/h` in a central
/// difference; components much smaller than the function value carry mostly
/// that noise.
pub fn noise_floor(f_scale: f64) -> f64 {
    FLOOR_FRACTION * f_scale.abs().max(1.0)
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub name: String,
    pub max_rel_error: f64,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < MAX_REL_ERROR
    }
}

/// Compares backward gradients of `build` against central differences for
/// every element of every input.
///
/// `build` receives the input nodes and must return a scalar node.
pub fn check_graph_fn<F>(name: &str, inputs: &[Tensor], build: F, h: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    let mut g = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let loss = build(&mut g, &ids)?;
    let f0 = g.value(loss).item();
    g.backward(loss)?;
    let analytic: Vec<Tensor> = ids.iter().map(|&id| g.grad(id)).collect();

    let eval = |values: &[Tensor]| -> f64 {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = values.iter().map(|t| g.constant(t.clone())).collect();
        let loss = build(&mut g, &ids).expect("forward succeeded once already");
        g.value(loss).item()
    };

    let floor = noise_floor(f0);
    let mut worst = 0.0_f64;
    let mut checked = 0;
    for (k, input) in inputs.iter().enumerate() {
        let numeric = central_difference(
            |x| {
                let mut values = inputs.to_vec();
                values[k] = Tensor::new(input.shape().to_vec(), x.to_vec()).expect("same shape");
                eval(&values)
            },
            input.data(),
            h,
        );
        for (a, n) in analytic[k].data().iter().zip(&numeric) {
            worst = worst.max(relative_error(*a, *n, floor));
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        name: name.to_string(),
        max_rel_error: worst,
        checked,
    })
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .expect("shape matches")
}

/// Reduces a non-scalar node to a scalar with fixed random weights so every
/// output element contributes to the checked gradient.
fn weighted_sum(g: &mut Graph, x: NodeId, rng: &mut ChaCha8Rng) -> Result<NodeId> {
    let w = random_tensor(rng, g.value(x).shape());
    let w = g.constant(w);
    let p = g.mul(x, w)?;
    Ok(g.sum(p))
}

type Builder = Box<dyn Fn(&mut Graph, &[NodeId]) -> Result<NodeId>>;

/// Gradient checks for every registered operation on random inputs with all
/// dimensions ≤ 8.
pub fn op_suite(seed: u64) -> Result<Vec<GradCheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = |rng: &mut ChaCha8Rng| rng.random_range(2..=8usize);
    let (m, k, n) = (dim(&mut rng), dim(&mut rng), dim(&mut rng));
    let wseed: u64 = rng.random();

    let reduce = move |g: &mut Graph, x: NodeId| -> Result<NodeId> {
        let mut r = ChaCha8Rng::seed_from_u64(wseed);
        weighted_sum(g, x, &mut r)
    };

    let mut cases: Vec<(&str, Vec<Tensor>, Builder)> = Vec::new();
    cases.push((
        "matmul",
        vec![random_tensor(&mut rng, &[m, k]), random_tensor(&mut rng, &[k, n])],
        Box::new(move |g, x| {
            let y = g.matmul(x[0], x[1])?;
            reduce(g, y)
        }),
    ));
    cases.push((
        "add",
        vec![random_tensor(&mut rng, &[m, n]), random_tensor(&mut rng, &[m, n])],
        Box::new(move |g, x| {
            let y = g.add(x[0], x[1])?;
            reduce(g, y)
        }),
    ));
    cases.push((
        "add_scalar_broadcast",
        vec![random_tensor(&mut rng, &[m, n]), random_tensor(&mut rng, &[1])],
        Box::new(move |g, x| {
            let y = g.add(x[0], x[1])?;
            reduce(g, y)
        }),
    ));
    cases.push((
        "mul",
        vec![random_tensor(&mut rng, &[m, n]), random_tensor(&mut rng, &[m, n])],
        Box::new(move |g, x| {
            let y = g.mul(x[0], x[1])?;
            reduce(g, y)
        }),
    ));
    cases.push((
        "mul_scalar_broadcast",
        vec![random_tensor(&mut rng, &[1]), random_tensor(&mut rng, &[m, n])],
        Box::new(move |g, x| {
            let y = g.mul(x[0], x[1])?;
            reduce(g, y)
        }),
    ));
    cases.push((
        "scalar_mul",
        vec![random_tensor(&mut rng, &[m, n])],
        Box::new(move |g, x| {
            let y = g.scalar_mul(x[0], -2.5);
            reduce(g, y)
        }),
    ));
    for e in [0u32, 1, 2, 5, 8] {
        cases.push((
            match e {
                0 => "power_0",
                1 => "power_1",
                2 => "power_2",
                5 => "power_5",
                _ => "power_8",
            },
            vec![random_tensor(&mut rng, &[m, n])],
            Box::new(move |g, x| {
                let y = g.power(x[0], e);
                reduce(g, y)
            }),
        ));
    }
    cases.push((
        "relu",
        vec![random_tensor(&mut rng, &[m, n])],
        Box::new(move |g, x| {
            let y = g.relu(x[0]);
            reduce(g, y)
        }),
    ));
    cases.push(("sum", vec![random_tensor(&mut rng, &[m, n])], Box::new(|g, x| Ok(g.sum(x[0])))));
    cases.push(("mean", vec![random_tensor(&mut rng, &[m, n])], Box::new(|g, x| Ok(g.mean(x[0])))));
    cases.push((
        "abs_sum",
        vec![random_tensor(&mut rng, &[m, n])],
        Box::new(|g, x| Ok(g.abs_sum(x[0]))),
    ));
    cases.push((
        "square_sum",
        vec![random_tensor(&mut rng, &[m, n])],
        Box::new(|g, x| Ok(g.square_sum(x[0]))),
    ));
    cases.push((
        "softmax_rows",
        vec![random_tensor(&mut rng, &[m, n])],
        Box::new(move |g, x| {
            let y = g.softmax_rows(x[0])?;
            reduce(g, y)
        }),
    ));
    let (h, w, cin, cout) = (dim(&mut rng), dim(&mut rng), dim(&mut rng).min(3), dim(&mut rng).min(4));
    for stride in [1usize, 2] {
        cases.push((
            if stride == 1 { "conv2d_stride1" } else { "conv2d_stride2" },
            vec![
                random_tensor(&mut rng, &[h, w, cin]),
                random_tensor(&mut rng, &[3, 3, cin, cout]),
            ],
            Box::new(move |g, x| {
                let y = g.conv2d(x[0], x[1], stride)?;
                reduce(g, y)
            }),
        ));
    }
    cases.push((
        "add_bias",
        vec![random_tensor(&mut rng, &[m, n]), random_tensor(&mut rng, &[1, n])],
        Box::new(move |g, x| {
            let y = g.add_bias(x[0], x[1])?;
            reduce(g, y)
        }),
    ));
    cases.push((
        "transpose",
        vec![random_tensor(&mut rng, &[m, n])],
        Box::new(move |g, x| {
            let y = g.transpose(x[0])?;
            reduce(g, y)
        }),
    ));
    cases.push((
        "reshape",
        vec![random_tensor(&mut rng, &[m, n])],
        Box::new(move |g, x| {
            let y = g.reshape(x[0], &[n, m])?;
            reduce(g, y)
        }),
    ));
    cases.push((
        "mean_rows",
        vec![random_tensor(&mut rng, &[m, n])],
        Box::new(move |g, x| {
            let y = g.mean_rows(x[0])?;
            reduce(g, y)
        }),
    ));

    cases
        .into_iter()
        .map(|(name, inputs, build)| check_graph_fn(name, &inputs, build, FD_STEP))
        .collect()
}
