//! Coefficient-prediction network.
//!
//! ```text
//! radar (N_C×3) ─ψ_r→ F_r ─┐
//!                          ├ R = softmax(P (F_r W_K)ᵀ / √c_r) (F_r W_V)       N_P × c_r
//! z (H×W) ─f_z→ Z (T×c_z) ─┤
//!                          └ S = softmax(Z (R W_RK)ᵀ / √c_r) (R W_RV)        T × c_v
//! S ─reshape→ H/4×W/4×c_v ─f_s→ GAP → c_s ─ψ_s→ ĉ ∈ ℝ^(N+1)
//! ```
//!
//! Coefficients are expressed in nominal units: the network predicts
//! coefficients with `z_max = d_scale`, to be applied to the scaleless raster
//! multiplied by `d_scale` (see [`nominal`]). In those units the untrained head
//! output `(0, d_scale, 0, …)` is the identity with slope exactly 1.

mod checkpoint;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};

use crate::autodiff::{Graph, NodeId, Tensor};
use crate::datamodel::{DepthKind, DepthMap, PolyCoefficients, RadarCloud};
use crate::error::{Error, Result};
use crate::polytransform::{eval_poly, Evaluated};

/// Lateral radar coordinates are divided by this many meters.
pub const LATERAL_SCALE: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetConfig {
    pub c_r: usize,
    pub c_z: usize,
    pub c_v: usize,
    pub c_s: usize,
    pub prototypes: usize,
    pub degree: usize,
    pub seed: u64,
    /// Metric scale of the nominal input: radar depth is divided by it and
    /// the head output is multiplied by it.
    pub d_scale: f64,
    /// Replace prototype attention by mean pooling of the value rows.
    pub disable_prototypes: bool,
    /// Replace depth-radar attention by broadcasting pooled radar values.
    pub disable_fusion: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            c_r: 64,
            c_z: 64,
            c_v: 64,
            c_s: 64,
            prototypes: 16,
            degree: 8,
            seed: 0,
            d_scale: 80.0,
            disable_prototypes: false,
            disable_fusion: false,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [self.c_r, self.c_z, self.c_v, self.c_s, self.prototypes];
        if dims.contains(&0) {
            return Err(Error::Usage(format!("network widths must be ≥ 1: {self:?}")));
        }
        if self.degree < 1 {
            return Err(Error::Usage("polynomial degree must be ≥ 1".into()));
        }
        if !(self.d_scale.is_finite() && self.d_scale > 0.0) {
            return Err(Error::Usage(format!("d_scale must be positive, got {}", self.d_scale)));
        }
        Ok(())
    }

    /// Channels after the first encoder convolution.
    pub fn c_half(&self) -> usize {
        (self.c_z / 2).max(1)
    }
}

/// Parameter tensors in checkpoint order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    RadarW1,
    RadarB1,
    RadarW2,
    RadarB2,
    RadarW3,
    RadarB3,
    Prototypes,
    KeyW,
    ValueW,
    EncK1,
    EncB1,
    EncK2,
    EncB2,
    FuseKeyW,
    FuseValueW,
    CnnK1,
    CnnB1,
    CnnK2,
    CnnB2,
    HeadW1,
    HeadB1,
    HeadW2,
    HeadB2,
}

impl Param {
    pub const ALL: [Param; 23] = [
        Param::RadarW1,
        Param::RadarB1,
        Param::RadarW2,
        Param::RadarB2,
        Param::RadarW3,
        Param::RadarB3,
        Param::Prototypes,
        Param::KeyW,
        Param::ValueW,
        Param::EncK1,
        Param::EncB1,
        Param::EncK2,
        Param::EncB2,
        Param::FuseKeyW,
        Param::FuseValueW,
        Param::CnnK1,
        Param::CnnB1,
        Param::CnnK2,
        Param::CnnB2,
        Param::HeadW1,
        Param::HeadB1,
        Param::HeadW2,
        Param::HeadB2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::RadarW1 => "radar.w1",
            Param::RadarB1 => "radar.b1",
            Param::RadarW2 => "radar.w2",
            Param::RadarB2 => "radar.b2",
            Param::RadarW3 => "radar.w3",
            Param::RadarB3 => "radar.b3",
            Param::Prototypes => "prototypes",
            Param::KeyW => "radar.key",
            Param::ValueW => "radar.value",
            Param::EncK1 => "depth.k1",
            Param::EncB1 => "depth.b1",
            Param::EncK2 => "depth.k2",
            Param::EncB2 => "depth.b2",
            Param::FuseKeyW => "fuse.key",
            Param::FuseValueW => "fuse.value",
            Param::CnnK1 => "cnn.k1",
            Param::CnnB1 => "cnn.b1",
            Param::CnnK2 => "cnn.k2",
            Param::CnnB2 => "cnn.b2",
            Param::HeadW1 => "head.w1",
            Param::HeadB1 => "head.b1",
            Param::HeadW2 => "head.w2",
            Param::HeadB2 => "head.b2",
        }
    }

    /// Expected shape under `cfg`.
    pub fn shape(self, cfg: &NetConfig) -> Vec<usize> {
        let (r, z, v, s, h) = (cfg.c_r, cfg.c_z, cfg.c_v, cfg.c_s, cfg.c_half());
        let k = cfg.degree + 1;
        match self {
            Param::RadarW1 => vec![3, r],
            Param::RadarW2 | Param::RadarW3 | Param::KeyW | Param::ValueW => vec![r, r],
            Param::RadarB1 | Param::RadarB2 | Param::RadarB3 => vec![1, r],
            Param::Prototypes => vec![cfg.prototypes, r],
            Param::EncK1 => vec![3, 3, 1, h],
            Param::EncB1 => vec![1, h],
            Param::EncK2 => vec![3, 3, h, z],
            Param::EncB2 => vec![1, z],
            Param::FuseKeyW => vec![r, z],
            Param::FuseValueW => vec![r, v],
            Param::CnnK1 => vec![3, 3, v, s],
            Param::CnnK2 => vec![3, 3, s, s],
            Param::CnnB1 | Param::CnnB2 | Param::HeadB1 => vec![1, s],
            Param::HeadW1 => vec![s, s],
            Param::HeadW2 => vec![s, k],
            Param::HeadB2 => vec![1, k],
        }
    }

    fn fan_in(self, cfg: &NetConfig) -> usize {
        let shape = self.shape(cfg);
        shape[..shape.len() - 1].iter().product()
    }
}

/// All network weights plus the configuration they were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    config: NetConfig,
    tensors: Vec<Tensor>,
}

impl ModelParams {
    /// Seeded initialization. ReLU layers use He-normal weights, attention
    /// projections `N(0, 1/fan_in)`, prototypes `N(0, 1)`, biases zero. The
    /// head's last layer starts near zero with bias `(½, ½, 0, …)`, the
    /// identity in the shifted Legendre basis (see [`forward`]), so the
    /// untrained model predicts the identity transform.
    pub fn init(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let tensors = Param::ALL
            .iter()
            .map(|&p| {
                let shape = p.shape(&config);
                let fan_in = p.fan_in(&config) as f64;
                let std = match p {
                    Param::RadarB1
                    | Param::RadarB2
                    | Param::RadarB3
                    | Param::EncB1
                    | Param::EncB2
                    | Param::CnnB1
                    | Param::CnnB2
                    | Param::HeadB1 => 0.0,
                    Param::HeadB2 => {
                        let mut t = Tensor::zeros(&shape);
                        t.data_mut()[0] = 0.5;
                        t.data_mut()[1] = 0.5;
                        return t;
                    }
                    Param::Prototypes => 1.0,
                    Param::KeyW | Param::ValueW | Param::FuseKeyW | Param::FuseValueW | Param::RadarW3 => {
                        (1.0 / fan_in).sqrt()
                    }
                    Param::HeadW2 => 0.01 / fan_in.sqrt(),
                    _ => (2.0 / fan_in).sqrt(),
                };
                random_normal(&mut rng, &shape, std)
            })
            .collect();
        Ok(Self { config, tensors })
    }

    pub(crate) fn from_parts(config: NetConfig, tensors: Vec<Tensor>) -> Result<Self> {
        config.validate()?;
        if tensors.len() != Param::ALL.len() {
            return Err(Error::Dimension(format!(
                "expected {} parameter tensors, got {}",
                Param::ALL.len(),
                tensors.len()
            )));
        }
        for (p, t) in Param::ALL.iter().zip(&tensors) {
            if t.shape() != p.shape(&config) {
                return Err(Error::Dimension(format!(
                    "{}: shape {:?}, expected {:?}",
                    p.name(),
                    t.shape(),
                    p.shape(&config)
                )));
            }
            if !t.all_finite() {
                return Err(Error::Numerical(format!("{} has non-finite values", p.name())));
            }
        }
        Ok(Self { config, tensors })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn get(&self, p: Param) -> &Tensor {
        &self.tensors[p as usize]
    }

    pub fn get_mut(&mut self, p: Param) -> &mut Tensor {
        &mut self.tensors[p as usize]
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::all_finite)
    }

    /// Puts every tensor into `graph`, as leaves when `trainable`.
    pub fn bind(&self, graph: &mut Graph, trainable: bool) -> ParamNodes {
        ParamNodes {
            ids: self
                .tensors
                .iter()
                .map(|t| if trainable { graph.leaf(t.clone()) } else { graph.constant(t.clone()) })
                .collect(),
        }
    }
}

fn random_normal(rng: &mut ChaCha8Rng, shape: &[usize], std: f64) -> Tensor {
    let n: usize = shape.iter().product();
    if std == 0.0 {
        return Tensor::zeros(shape);
    }
    let dist = Normal::new(0.0, std).expect("finite std");
    Tensor::new(shape.to_vec(), (0..n).map(|_| dist.sample(rng)).collect()).expect("shape matches")
}

/// Graph handles of a bound [`ModelParams`].
#[derive(Debug, Clone)]
pub struct ParamNodes {
    ids: Vec<NodeId>,
}

impl ParamNodes {
    pub fn get(&self, p: Param) -> NodeId {
        self.ids[p as usize]
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }
}

/// Scaleless raster in the network's nominal units, `z · d_scale`.
pub fn nominal(z: &DepthMap, d_scale: f64) -> Result<DepthMap> {
    DepthMap::new(
        z.height(),
        z.width(),
        z.values().iter().map(|v| v * d_scale).collect(),
        DepthKind::Scaleless,
    )
}

/// Standardized radar inputs, one `(x, y, z)` row per point.
pub fn radar_input(cloud: &RadarCloud, d_scale: f64) -> Result<Tensor> {
    if cloud.is_empty() {
        return Err(Error::NoRadar);
    }
    let data = cloud
        .points()
        .iter()
        .flat_map(|p| [p.x / LATERAL_SCALE, p.y / LATERAL_SCALE, p.z / d_scale])
        .collect();
    Tensor::new(vec![cloud.len(), 3], data)
}

fn check_raster(z: &DepthMap) -> Result<()> {
    if z.height() % 4 != 0 || z.width() % 4 != 0 {
        return Err(Error::Usage(format!(
            "raster {}×{} must have dimensions divisible by 4",
            z.height(),
            z.width()
        )));
    }
    Ok(())
}

fn linear(g: &mut Graph, x: NodeId, w: NodeId, b: Option<NodeId>) -> Result<NodeId> {
    let y = g.matmul(x, w)?;
    match b {
        Some(b) => g.add_bias(y, b),
        None => Ok(y),
    }
}

/// `softmax(q kᵀ · scale) v`, returning the output and the attention rows.
fn attention(g: &mut Graph, q: NodeId, k: NodeId, v: NodeId, scale: f64) -> Result<(NodeId, NodeId)> {
    let kt = g.transpose(k)?;
    let scores = g.matmul(q, kt)?;
    let scores = g.scalar_mul(scores, scale);
    let weights = g.softmax_rows(scores)?;
    Ok((g.matmul(weights, v)?, weights))
}

/// `m×n` matrix with every row equal to the column mean of `x`.
fn mean_broadcast(g: &mut Graph, x: NodeId, rows: usize) -> Result<NodeId> {
    let mean = g.mean_rows(x)?;
    let ones = g.constant(Tensor::full(&[rows, 1], 1.0));
    g.matmul(ones, mean)
}

/// `M[i][k]`: coefficient of `u^i` in the shifted Legendre polynomial
/// `P̃_k(u) = P_k(2u − 1)`, orthogonal on `[0, 1]`.
pub fn shifted_legendre(degree: usize) -> Vec<Vec<f64>> {
    let binom = |n: usize, k: usize| -> f64 { (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64) };
    (0..=degree)
        .map(|i| {
            (0..=degree)
                .map(|k| {
                    if i > k {
                        0.0
                    } else {
                        let sign = if (i + k) % 2 == 0 { 1.0 } else { -1.0 };
                        sign * binom(k, i) * binom(k + i, i)
                    }
                })
                .collect()
        })
        .collect()
}

/// Values and `u`-derivatives of `P̃_0..P̃_N` at `u`, by the three-term
/// recurrence in `x = 2u − 1`. Stable where the monomial expansion cancels.
pub fn shifted_legendre_values(degree: usize, u: f64) -> (Vec<f64>, Vec<f64>) {
    let x = 2.0 * u - 1.0;
    let mut p = vec![1.0; degree + 1];
    let mut dp = vec![0.0; degree + 1];
    if degree >= 1 {
        p[1] = x;
        dp[1] = 1.0;
    }
    for n in 1..degree {
        let nf = n as f64;
        p[n + 1] = ((2.0 * nf + 1.0) * x * p[n] - nf * p[n - 1]) / (nf + 1.0);
        dp[n + 1] = dp[n - 1] + (2.0 * nf + 1.0) * p[n];
    }
    // d/du = 2 d/dx.
    (p, dp.into_iter().map(|v| 2.0 * v).collect())
}

/// Fixed `(N+1)×(N+1)` map from the head's raw outputs to monomial
/// coefficients in nominal units: the raw outputs are shifted Legendre
/// coefficients scaled by `1/d_scale`. Same function class as a direct
/// monomial head; the well-conditioned basis only changes the optimization.
fn head_basis(degree: usize, d_scale: f64) -> Tensor {
    let m = shifted_legendre(degree);
    let k = degree + 1;
    let mut data = vec![0.0; k * k];
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            // Row j of the result holds the monomial expansion of P̃_j.
            data[j * k + i] = d_scale * v;
        }
    }
    Tensor::new(vec![k, k], data).expect("square basis")
}

/// Every intermediate of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ForwardNodes {
    pub radar_features: NodeId,
    pub aggregated: NodeId,
    /// Prototype attention rows, absent when prototypes are disabled.
    pub prototype_attention: Option<NodeId>,
    pub depth_tokens: NodeId,
    pub fused: NodeId,
    /// Depth-radar attention rows, absent when fusion is disabled.
    pub fusion_attention: Option<NodeId>,
    pub pooled: NodeId,
    /// `1×(N+1)` raw head outputs: the transform is
    /// `d_scale · Σ_j head_j P̃_j(z / d_scale)`.
    pub head: NodeId,
    /// `1×(N+1)` monomial coefficients in nominal units.
    pub coeffs: NodeId,
}

pub fn radar_branch(g: &mut Graph, p: &ParamNodes, cloud: &RadarCloud, d_scale: f64) -> Result<NodeId> {
    let x = g.constant(radar_input(cloud, d_scale)?);
    let h = linear(g, x, p.get(Param::RadarW1), Some(p.get(Param::RadarB1)))?;
    let h = g.relu(h);
    let h = linear(g, h, p.get(Param::RadarW2), Some(p.get(Param::RadarB2)))?;
    let h = g.relu(h);
    linear(g, h, p.get(Param::RadarW3), Some(p.get(Param::RadarB3)))
}

fn prototype_branch(g: &mut Graph, p: &ParamNodes, cfg: &NetConfig, f_r: NodeId) -> Result<(NodeId, Option<NodeId>)> {
    let values = g.matmul(f_r, p.get(Param::ValueW))?;
    if cfg.disable_prototypes {
        return Ok((mean_broadcast(g, values, cfg.prototypes)?, None));
    }
    let keys = g.matmul(f_r, p.get(Param::KeyW))?;
    let scale = 1.0 / (cfg.c_r as f64).sqrt();
    let (r, w) = attention(g, p.get(Param::Prototypes), keys, values, scale)?;
    Ok((r, Some(w)))
}

fn depth_branch(g: &mut Graph, p: &ParamNodes, z: &DepthMap) -> Result<NodeId> {
    check_raster(z)?;
    let (h, w) = z.dims();
    let x = g.constant(Tensor::new(vec![h, w, 1], z.values().to_vec())?);
    let y = conv_relu(g, x, p.get(Param::EncK1), p.get(Param::EncB1), 2)?;
    let y = conv_relu(g, y, p.get(Param::EncK2), p.get(Param::EncB2), 2)?;
    let shape = g.value(y).shape().to_vec();
    g.reshape(y, &[shape[0] * shape[1], shape[2]])
}

/// Conv, bias, ReLU; keeps the `H×W×C` layout.
fn conv_relu(g: &mut Graph, x: NodeId, k: NodeId, b: NodeId, stride: usize) -> Result<NodeId> {
    let y = g.conv2d(x, k, stride)?;
    let shape = g.value(y).shape().to_vec();
    let flat = g.reshape(y, &[shape[0] * shape[1], shape[2]])?;
    let flat = g.add_bias(flat, b)?;
    let flat = g.relu(flat);
    g.reshape(flat, &shape)
}

fn fusion_branch(
    g: &mut Graph,
    p: &ParamNodes,
    cfg: &NetConfig,
    tokens: NodeId,
    r: NodeId,
) -> Result<(NodeId, Option<NodeId>)> {
    let values = g.matmul(r, p.get(Param::FuseValueW))?;
    if cfg.disable_fusion {
        let t = g.value(tokens).shape()[0];
        return Ok((mean_broadcast(g, values, t)?, None));
    }
    let keys = g.matmul(r, p.get(Param::FuseKeyW))?;
    let scale = 1.0 / (cfg.c_r as f64).sqrt();
    let (s, w) = attention(g, tokens, keys, values, scale)?;
    Ok((s, Some(w)))
}

/// Builds the full forward pass into `g`.
pub fn forward(g: &mut Graph, p: &ParamNodes, cfg: &NetConfig, z: &DepthMap, cloud: &RadarCloud) -> Result<ForwardNodes> {
    check_raster(z)?;
    let radar_features = radar_branch(g, p, cloud, cfg.d_scale)?;
    let (aggregated, prototype_attention) = prototype_branch(g, p, cfg, radar_features)?;
    let depth_tokens = depth_branch(g, p, z)?;
    let (fused, fusion_attention) = fusion_branch(g, p, cfg, depth_tokens, aggregated)?;

    let (h4, w4) = (z.height() / 4, z.width() / 4);
    let grid = g.reshape(fused, &[h4, w4, cfg.c_v])?;
    let y = conv_relu(g, grid, p.get(Param::CnnK1), p.get(Param::CnnB1), 1)?;
    let y = conv_relu(g, y, p.get(Param::CnnK2), p.get(Param::CnnB2), 1)?;
    let flat = g.reshape(y, &[h4 * w4, cfg.c_s])?;
    let pooled = g.mean_rows(flat)?;

    let hidden = linear(g, pooled, p.get(Param::HeadW1), Some(p.get(Param::HeadB1)))?;
    let hidden = g.relu(hidden);
    let raw = linear(g, hidden, p.get(Param::HeadW2), Some(p.get(Param::HeadB2)))?;
    let basis = g.constant(head_basis(cfg.degree, cfg.d_scale));
    let coeffs = g.matmul(raw, basis)?;
    Ok(ForwardNodes {
        radar_features,
        aggregated,
        prototype_attention,
        depth_tokens,
        fused,
        fusion_attention,
        pooled,
        head: raw,
        coeffs,
    })
}

/// Attention output and its weight rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Attended {
    pub output: Tensor,
    /// Row-stochastic weights; `None` for ablated (pooled) paths.
    pub weights: Option<Tensor>,
}

/// Per-point radar features `F_r` (`N_C × c_r`), in input order.
pub fn encode_radar(params: &ModelParams, cloud: &RadarCloud) -> Result<Tensor> {
    let mut g = Graph::new();
    let p = params.bind(&mut g, false);
    let f = radar_branch(&mut g, &p, cloud, params.config.d_scale)?;
    Ok(g.value(f).clone())
}

/// Prototype attention over radar features (`N_P × c_r`).
pub fn aggregate_prototypes(params: &ModelParams, f_r: &Tensor) -> Result<Attended> {
    let cfg = params.config;
    if f_r.shape().len() != 2 || f_r.shape()[1] != cfg.c_r {
        return Err(Error::Dimension(format!("radar features {:?}, expected N×{}", f_r.shape(), cfg.c_r)));
    }
    let mut g = Graph::new();
    let p = params.bind(&mut g, false);
    let f = g.constant(f_r.clone());
    let (r, w) = prototype_branch(&mut g, &p, &cfg, f)?;
    Ok(Attended {
        output: g.value(r).clone(),
        weights: w.map(|w| g.value(w).clone()),
    })
}

/// Depth tokens `Z` (`(H/4·W/4) × c_z`), row-major over the token grid.
pub fn encode_depth(params: &ModelParams, z: &DepthMap) -> Result<Tensor> {
    let mut g = Graph::new();
    let p = params.bind(&mut g, false);
    let t = depth_branch(&mut g, &p, z)?;
    Ok(g.value(t).clone())
}

/// Depth tokens attending over aggregated radar rows (`T × c_v`).
pub fn fuse(params: &ModelParams, z_tokens: &Tensor, r: &Tensor) -> Result<Attended> {
    let cfg = params.config;
    let mut g = Graph::new();
    let p = params.bind(&mut g, false);
    let zt = g.constant(z_tokens.clone());
    let rr = g.constant(r.clone());
    let (s, w) = fusion_branch(&mut g, &p, &cfg, zt, rr)?;
    Ok(Attended {
        output: g.value(s).clone(),
        weights: w.map(|w| g.value(w).clone()),
    })
}

/// Per-scene coefficients, `z_max = d_scale`. Apply to [`nominal`]`(z)`.
pub fn predict_coefficients(params: &ModelParams, z: &DepthMap, cloud: &RadarCloud) -> Result<PolyCoefficients> {
    let mut g = Graph::new();
    let p = params.bind(&mut g, false);
    let out = forward(&mut g, &p, &params.config, z, cloud)?;
    let c = g.value(out.coeffs);
    if !c.all_finite() {
        return Err(Error::Numerical("network produced non-finite coefficients".into()));
    }
    PolyCoefficients::new(c.data().to_vec(), params.config.d_scale)
}

/// Metric depth predicted for a scaleless raster.
pub fn predict_depth(params: &ModelParams, z: &DepthMap, cloud: &RadarCloud) -> Result<Evaluated> {
    let c = predict_coefficients(params, z, cloud)?;
    eval_poly(&c, &nominal(z, params.config.d_scale)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::Point3;

    fn small() -> NetConfig {
        NetConfig {
            c_r: 8,
            c_z: 6,
            c_v: 5,
            c_s: 7,
            prototypes: 4,
            degree: 3,
            seed: 3,
            ..NetConfig::default()
        }
    }

    fn cloud(n: usize) -> RadarCloud {
        RadarCloud::new(
            (0..n)
                .map(|i| Point3 {
                    x: i as f64 - 2.0,
                    y: 0.5 * i as f64,
                    z: 5.0 + 7.0 * i as f64,
                })
                .collect(),
        )
        .unwrap()
    }

    fn ramp(h: usize, w: usize) -> DepthMap {
        DepthMap::new(h, w, (0..h * w).map(|i| i as f64 / (h * w) as f64).collect(), DepthKind::Scaleless).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_radar_features() {
        let mut m = ModelParams::init(small()).unwrap();
        for t in m.tensors_mut() {
            t.data_mut().fill(0.0);
        }
        let f = encode_radar(&m, &cloud(3)).unwrap();
        assert!(f.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_point_attention_returns_its_value() {
        let m = ModelParams::init(small()).unwrap();
        let f = encode_radar(&m, &cloud(1)).unwrap();
        let r = aggregate_prototypes(&m, &f).unwrap();
        let mut g = Graph::new();
        let fv = g.constant(f.clone());
        let wv = g.constant(m.get(Param::ValueW).clone());
        let v = g.matmul(fv, wv).unwrap();
        for row in r.output.data().chunks(8) {
            for (a, b) in row.iter().zip(g.value(v).data()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn token_count_and_zero_input() {
        let mut m = ModelParams::init(small()).unwrap();
        let t = encode_depth(&m, &ramp(8, 12)).unwrap();
        assert_eq!(t.shape(), &[6, 6]);
        for b in [Param::EncB1, Param::EncB2] {
            m.get_mut(b).data_mut().fill(0.0);
        }
        let zero = DepthMap::new(8, 8, vec![0.0; 64], DepthKind::Scaleless).unwrap();
        assert!(encode_depth(&m, &zero).unwrap().data().iter().all(|v| *v == 0.0));
        assert!(matches!(encode_depth(&m, &ramp(6, 8)), Err(Error::Usage(_))));
    }

    #[test]
    fn legendre_rows_match_recurrence() {
        // (k+1) P̃_{k+1} = (2k+1)(2u−1) P̃_k − k P̃_{k−1}
        let m = shifted_legendre(6);
        for j in 0..=20 {
            let u = j as f64 / 20.0;
            let p: Vec<f64> = (0..=6)
                .map(|k| (0..=6).map(|i| m[i][k] * u.powi(i as i32)).sum())
                .collect();
            assert!((p[0] - 1.0).abs() < 1e-12 && (p[1] - (2.0 * u - 1.0)).abs() < 1e-12);
            for k in 1..6 {
                let kf = k as f64;
                let rhs = ((2.0 * kf + 1.0) * (2.0 * u - 1.0) * p[k] - kf * p[k - 1]) / (kf + 1.0);
                assert!((p[k + 1] - rhs).abs() < 1e-9, "k={k} u={u}");
            }
        }
    }

    #[test]
    fn legendre_values_match_the_expansion() {
        let m = shifted_legendre(8);
        for j in 0..=16 {
            let u = j as f64 / 16.0;
            let (p, dp) = shifted_legendre_values(8, u);
            for k in 0..=8 {
                let v: f64 = (0..=k).map(|i| m[i][k] * u.powi(i as i32)).sum();
                let d: f64 = (1..=k).map(|i| m[i][k] * i as f64 * u.powi(i as i32 - 1)).sum();
                assert!((p[k] - v).abs() < 1e-9 && (dp[k] - d).abs() < 1e-7, "k={k} u={u}");
            }
        }
    }

    #[test]
    fn init_is_identity_like() {
        let m = ModelParams::init(NetConfig::default()).unwrap();
        let c = predict_coefficients(&m, &ramp(16, 16), &cloud(5)).unwrap();
        let d = m.config().d_scale;
        assert_eq!(c.coeffs().len(), 9);
        for k in 0..=20 {
            let z = d * k as f64 / 20.0;
            assert!((crate::polytransform::value_at(&c, z) - z).abs() < 0.1 * d);
        }
    }

    #[test]
    fn empty_cloud_is_no_radar() {
        let m = ModelParams::init(small()).unwrap();
        assert!(matches!(
            predict_coefficients(&m, &ramp(8, 8), &RadarCloud::default()),
            Err(Error::NoRadar)
        ));
    }

    #[test]
    fn ablated_paths_have_no_attention() {
        let cfg = NetConfig {
            disable_prototypes: true,
            disable_fusion: true,
            ..small()
        };
        let m = ModelParams::init(cfg).unwrap();
        let f = encode_radar(&m, &cloud(4)).unwrap();
        let r = aggregate_prototypes(&m, &f).unwrap();
        assert!(r.weights.is_none());
        let rows: Vec<&[f64]> = r.output.data().chunks(8).collect();
        assert!(rows.windows(2).all(|w| w[0] == w[1]));
        assert!(predict_coefficients(&m, &ramp(8, 8), &cloud(4)).is_ok());
    }
}
