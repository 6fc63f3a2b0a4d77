use crate::autodiff::{Graph, NodeId, Tensor};
use crate::datamodel::{DepthMap, Mask, SceneSample};
use crate::error::{Error, Result};
use crate::network::{shifted_legendre_values, NetConfig};
use crate::polytransform::SlopeMap;

/// Loss weights and ablation switches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    /// Drop the slope regularizer (λ₃ treated as 0).
    pub disable_monotonicity: bool,
    /// Build the model with mean-pooled radar values instead of prototypes.
    pub disable_prototypes: bool,
    /// Build the model with pooled radar values broadcast to every token.
    pub disable_fusion: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 0.1,
            disable_monotonicity: false,
            disable_prototypes: false,
            disable_fusion: false,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2), ("lambda3", self.lambda3)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Usage(format!("{name} must be ≥ 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn effective_lambda3(&self) -> f64 {
        if self.disable_monotonicity {
            0.0
        } else {
            self.lambda3
        }
    }
}

/// Unweighted terms and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossTerms {
    /// Mean absolute error over masked pixels.
    pub l1: f64,
    /// Mean squared error over masked pixels.
    pub l2: f64,
    /// Mean `|1 − dd/dz|` over all pixels.
    pub slope: f64,
    pub total: f64,
}

impl LossTerms {
    fn weighted(l1: f64, l2: f64, slope: f64, cfg: &LossConfig) -> Self {
        Self {
            l1,
            l2,
            slope,
            total: cfg.lambda1 * l1 + cfg.lambda2 * l2 + cfg.effective_lambda3() * slope,
        }
    }
}

/// Three-term loss on precomputed predictions and slopes.
pub fn compute_loss(
    pred: &DepthMap,
    gt: &DepthMap,
    mask: &Mask,
    slope: &SlopeMap,
    cfg: &LossConfig,
) -> Result<LossTerms> {
    cfg.validate()?;
    pred.same_dims(gt, "prediction vs ground truth")?;
    mask.check_dims(gt)?;
    if (slope.height, slope.width) != gt.dims() {
        return Err(Error::Dimension(format!(
            "slope map {}×{} vs raster {}×{}",
            slope.height,
            slope.width,
            gt.height(),
            gt.width()
        )));
    }
    let n = mask.count();
    if n == 0 {
        return Err(Error::Degenerate("loss: empty mask".into()));
    }
    let (mut l1, mut l2) = (0.0, 0.0);
    for ((p, g), m) in pred.values().iter().zip(gt.values()).zip(mask.bits()) {
        if *m {
            let e = p - g;
            l1 += e.abs();
            l2 += e * e;
        }
    }
    let s = slope.values.iter().map(|v| (1.0 - v).abs()).sum::<f64>() / slope.values.len() as f64;
    Ok(LossTerms::weighted(l1 / n as f64, l2 / n as f64, s, cfg))
}

/// Per-scene constants for the graph loss, for a fixed degree and `z_max`.
///
/// With `u = z / z_max`, predictions are `V ĉᵀ` with `V[p, i] = u_p^i` over
/// masked pixels and slopes are `V' ĉᵀ` with `V'[p, i] = i u_p^(i−1) / z_max`
/// over all pixels.
#[derive(Debug, Clone)]
pub struct SceneTensors {
    pub vandermonde: Tensor,
    pub neg_target: Tensor,
    pub derivative: Tensor,
    pub masked: usize,
    pub pixels: usize,
}

impl SceneTensors {
    /// `z_scale` converts stored scaleless values into the coefficients' units.
    pub fn new(sample: &SceneSample, degree: usize, z_scale: f64, z_max: f64) -> Result<Self> {
        let k = degree + 1;
        let z = sample.scaleless.values();
        let gt = sample.ground_truth.values();
        let bits = sample.mask.bits();
        let masked = sample.mask.count();
        if masked == 0 {
            return Err(Error::Degenerate(format!("scene `{}` has no valid pixels", sample.id)));
        }
        let mut v = Vec::with_capacity(masked * k);
        let mut t = Vec::with_capacity(masked);
        let mut d = Vec::with_capacity(z.len() * k);
        for (i, &zv) in z.iter().enumerate() {
            let u = zv * z_scale / z_max;
            if bits[i] {
                let mut p = 1.0;
                for _ in 0..k {
                    v.push(p);
                    p *= u;
                }
                t.push(-gt[i]);
            }
            d.push(0.0);
            let mut p = 1.0;
            for j in 1..k {
                d.push(j as f64 * p / z_max);
                p *= u;
            }
        }
        Ok(Self {
            vandermonde: Tensor::new(vec![masked, k], v)?,
            neg_target: Tensor::new(vec![masked, 1], t)?,
            derivative: Tensor::new(vec![z.len(), k], d)?,
            masked,
            pixels: z.len(),
        })
    }
}

impl SceneTensors {
    /// Tensors for the network's raw head outputs ([`ForwardNodes::head`]):
    /// columns are `d_scale·P̃_j(u)` and its `z`-derivative, `u = z / d_scale`.
    /// The loss equals the monomial one on [`ForwardNodes::coeffs`] but
    /// avoids the cancellation of large monomial coefficients.
    ///
    /// [`ForwardNodes::head`]: crate::network::ForwardNodes::head
    /// [`ForwardNodes::coeffs`]: crate::network::ForwardNodes::coeffs
    pub fn for_network(sample: &SceneSample, cfg: &NetConfig) -> Result<Self> {
        let (k, ds) = (cfg.degree + 1, cfg.d_scale);
        let z = sample.scaleless.values();
        let gt = sample.ground_truth.values();
        let bits = sample.mask.bits();
        let masked = sample.mask.count();
        if masked == 0 {
            return Err(Error::Degenerate(format!("scene `{}` has no valid pixels", sample.id)));
        }
        let mut v = Vec::with_capacity(masked * k);
        let mut t = Vec::with_capacity(masked);
        let mut d = Vec::with_capacity(z.len() * k);
        for (i, &zv) in z.iter().enumerate() {
            // Nominal z over d_scale is the stored value itself.
            let (p, dp) = shifted_legendre_values(cfg.degree, zv);
            if bits[i] {
                v.extend(p.iter().map(|x| ds * x));
                t.push(-gt[i]);
            }
            // d(d_scale·P̃(z/d_scale))/dz = P̃'(u).
            d.extend(dp);
        }
        Ok(Self {
            vandermonde: Tensor::new(vec![masked, k], v)?,
            neg_target: Tensor::new(vec![masked, 1], t)?,
            derivative: Tensor::new(vec![z.len(), k], d)?,
            masked,
            pixels: z.len(),
        })
    }
}

/// Graph nodes of the weighted total and the three unweighted terms.
#[derive(Debug, Clone, Copy)]
pub struct LossNodes {
    pub total: NodeId,
    pub l1: NodeId,
    pub l2: NodeId,
    pub slope: NodeId,
}

impl LossNodes {
    pub fn terms(&self, g: &Graph) -> LossTerms {
        LossTerms {
            l1: g.value(self.l1).item(),
            l2: g.value(self.l2).item(),
            slope: g.value(self.slope).item(),
            total: g.value(self.total).item(),
        }
    }
}

/// Appends the three-term loss for `coeffs` (`1×(N+1)`) to `g`.
pub fn loss_graph(g: &mut Graph, coeffs: NodeId, scene: &SceneTensors, cfg: &LossConfig) -> Result<LossNodes> {
    let ct = g.transpose(coeffs)?;

    let v = g.constant(scene.vandermonde.clone());
    let pred = g.matmul(v, ct)?;
    let neg = g.constant(scene.neg_target.clone());
    let err = g.add(pred, neg)?;
    let abs = g.abs_sum(err);
    let l1 = g.scalar_mul(abs, 1.0 / scene.masked as f64);
    let sq = g.square_sum(err);
    let l2 = g.scalar_mul(sq, 1.0 / scene.masked as f64);

    let dv = g.constant(scene.derivative.clone());
    let slope = g.matmul(dv, ct)?;
    let neg_one = g.constant(Tensor::scalar(-1.0));
    let dev = g.add(slope, neg_one)?;
    let dev_abs = g.abs_sum(dev);
    let slope_term = g.scalar_mul(dev_abs, 1.0 / scene.pixels as f64);

    let a = g.scalar_mul(l1, cfg.lambda1);
    let b = g.scalar_mul(l2, cfg.lambda2);
    let c = g.scalar_mul(slope_term, cfg.effective_lambda3());
    let ab = g.add(a, b)?;
    let total = g.add(ab, c)?;
    Ok(LossNodes {
        total,
        l1,
        l2,
        slope: slope_term,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{DepthKind, PolyCoefficients, RadarCloud};
    use crate::polytransform::{eval_derivative, eval_poly};

    fn scene() -> SceneSample {
        let z = DepthMap::new(2, 2, vec![0.1, 0.4, 0.7, 1.0], DepthKind::Scaleless).unwrap();
        let gt = DepthMap::new(2, 2, vec![8.0, 0.0, 50.0, 80.0], DepthKind::GroundTruth).unwrap();
        SceneSample::new("s", None, z, RadarCloud::default(), gt).unwrap()
    }

    #[test]
    fn exact_identity_has_zero_loss() {
        let s = scene();
        let c = PolyCoefficients::identity(4, 80.0).unwrap();
        let nominal = DepthMap::new(2, 2, s.scaleless.values().iter().map(|v| v * 80.0).collect(), DepthKind::Metric)
            .unwrap();
        let pred = eval_poly(&c, &nominal).unwrap().depth;
        let slope = eval_derivative(&c, &nominal).unwrap();
        let gt = pred.clone();
        let t = compute_loss(&pred, &gt, &s.mask, &slope, &LossConfig::default()).unwrap();
        assert_eq!(t.total, 0.0);
        assert_eq!(t.slope, 0.0);
    }

    #[test]
    fn network_basis_matches_monomial_loss() {
        use crate::network::{forward, ModelParams};
        let s = scene();
        let net = NetConfig {
            c_r: 4,
            c_z: 4,
            c_v: 4,
            c_s: 4,
            prototypes: 2,
            degree: 6,
            seed: 2,
            ..NetConfig::default()
        };
        let mut params = ModelParams::init(net).unwrap();
        for t in params.tensors_mut() {
            for (i, w) in t.data_mut().iter_mut().enumerate() {
                *w += 0.01 * ((i % 7) as f64 - 3.0);
            }
        }
        let cloud = RadarCloud::new(vec![crate::datamodel::Point3 { x: 0.0, y: 0.0, z: 20.0 }]).unwrap();
        let z = DepthMap::new(4, 4, (0..16).map(|i| i as f64 / 15.0).collect(), DepthKind::Scaleless).unwrap();
        let gt = DepthMap::new(4, 4, (0..16).map(|i| 5.0 + 4.0 * i as f64).collect(), DepthKind::GroundTruth).unwrap();
        let s = SceneSample::new(s.id, None, z, cloud, gt).unwrap();
        let mut g = Graph::new();
        let nodes = params.bind(&mut g, false);
        let out = forward(&mut g, &nodes, &net, &s.scaleless, &s.cloud).unwrap();
        let cfg = LossConfig::default();
        let a = loss_graph(&mut g, out.head, &SceneTensors::for_network(&s, &net).unwrap(), &cfg).unwrap();
        let b = loss_graph(&mut g, out.coeffs, &SceneTensors::new(&s, 6, 80.0, 80.0).unwrap(), &cfg).unwrap();
        let (a, b) = (a.terms(&g), b.terms(&g));
        for (x, y) in [(a.l1, b.l1), (a.l2, b.l2), (a.slope, b.slope)] {
            assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{x} vs {y}");
        }
    }

    #[test]
    fn unit_offset_gives_two() {
        let s = scene();
        let pred = DepthMap::new(2, 2, s.ground_truth.values().iter().map(|v| v + 1.0).collect(), DepthKind::Metric)
            .unwrap();
        let slope = SlopeMap {
            height: 2,
            width: 2,
            values: vec![3.0; 4],
        };
        let cfg = LossConfig {
            lambda3: 0.0,
            ..LossConfig::default()
        };
        assert_eq!(compute_loss(&pred, &s.ground_truth, &s.mask, &slope, &cfg).unwrap().total, 2.0);
    }

    #[test]
    fn graph_loss_matches_plain_loss() {
        let s = scene();
        let c = PolyCoefficients::new(vec![2.0, 70.0, -5.0, 9.0], 80.0).unwrap();
        let nominal = DepthMap::new(2, 2, s.scaleless.values().iter().map(|v| v * 80.0).collect(), DepthKind::Metric)
            .unwrap();
        let mut g = Graph::new();
        let cn = g.leaf(Tensor::new(vec![1, 4], c.coeffs().to_vec()).unwrap());
        let st = SceneTensors::new(&s, 3, 80.0, 80.0).unwrap();
        let nodes = loss_graph(&mut g, cn, &st, &LossConfig::default()).unwrap();
        let pred = eval_poly(&c, &nominal).unwrap().depth;
        let slope = eval_derivative(&c, &nominal).unwrap();
        let plain = compute_loss(&pred, &s.ground_truth, &s.mask, &slope, &LossConfig::default()).unwrap();
        let graph = nodes.terms(&g);
        for (a, b) in [(plain.l1, graph.l1), (plain.l2, graph.l2), (plain.slope, graph.slope), (plain.total, graph.total)] {
            assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{plain:?} vs {graph:?}");
        }
    }

    #[test]
    fn empty_mask_is_degenerate() {
        let z = DepthMap::new(1, 2, vec![0.1, 0.2], DepthKind::Scaleless).unwrap();
        let gt = DepthMap::new(1, 2, vec![0.0, 0.0], DepthKind::GroundTruth).unwrap();
        let s = SceneSample::new("e", None, z.clone(), RadarCloud::default(), gt.clone()).unwrap();
        let slope = SlopeMap {
            height: 1,
            width: 2,
            values: vec![1.0; 2],
        };
        assert!(matches!(
            compute_loss(&z, &gt, &s.mask, &slope, &LossConfig::default()),
            Err(Error::Degenerate(_))
        ));
    }
}
