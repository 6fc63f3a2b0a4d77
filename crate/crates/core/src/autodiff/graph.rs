use super::tensor::{gemm_acc, gemm_nt_acc, gemm_tn_acc, Tensor};
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Constant,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    ScalarMul(NodeId, f64),
    Power(NodeId, u32),
    Relu(NodeId),
    Sum(NodeId),
    Mean(NodeId),
    AbsSum(NodeId),
    SquareSum(NodeId),
    SoftmaxRows(NodeId),
    Conv2d {
        input: NodeId,
        kernel: NodeId,
        stride: usize,
    },
    AddBias(NodeId, NodeId),
    Transpose(NodeId),
    Reshape(NodeId),
    MeanRows(NodeId),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    grad: Vec<f64>,
    op: Op,
    requires_grad: bool,
}

/// Append-only computation graph.
///
/// Nodes are stored in creation order, which is a topological order: an op can
/// only reference nodes that already exist. Leaves are differentiable inputs,
/// constants are not. Gradients accumulate across calls to [`Graph::backward`]
/// until [`Graph::zero_grad`].
#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn same_shape_or_scalar(a: &Tensor, b: &Tensor, what: &str) -> Result<Vec<usize>> {
    if a.shape() == b.shape() {
        Ok(a.shape().to_vec())
    } else if b.is_scalar() {
        Ok(a.shape().to_vec())
    } else if a.is_scalar() {
        Ok(b.shape().to_vec())
    } else {
        Err(Error::Dimension(format!(
            "{what}: shapes {:?} and {:?} are neither equal nor scalar",
            a.shape(),
            b.shape()
        )))
    }
}

fn broadcast_get(t: &Tensor, i: usize) -> f64 {
    if t.is_scalar() {
        t.data()[0]
    } else {
        t.data()[i]
    }
}

struct ConvGeom {
    h: usize,
    w: usize,
    cin: usize,
    k: usize,
    cout: usize,
    stride: usize,
    ho: usize,
    wo: usize,
}

impl ConvGeom {
    fn new(x: &Tensor, kernel: &Tensor, stride: usize) -> Result<Self> {
        let (h, w, cin) = match x.shape()[..] {
            [h, w, c] => (h, w, c),
            _ => {
                return Err(Error::Dimension(format!(
                    "conv2d input must be H×W×C, got {:?}",
                    x.shape()
                )))
            }
        };
        let (k, k2, kc, cout) = match kernel.shape()[..] {
            [a, b, c, d] => (a, b, c, d),
            _ => {
                return Err(Error::Dimension(format!(
                    "conv2d kernel must be k×k×Cin×Cout, got {:?}",
                    kernel.shape()
                )))
            }
        };
        if k != k2 || k % 2 == 0 {
            return Err(Error::Dimension(format!("conv2d kernel must be square and odd, got {k}×{k2}")));
        }
        if kc != cin {
            return Err(Error::Dimension(format!(
                "conv2d kernel expects {kc} input channels, input has {cin}"
            )));
        }
        if stride == 0 {
            return Err(Error::Dimension("conv2d stride must be ≥ 1".into()));
        }
        let pad = k / 2;
        if k > h + 2 * pad || k > w + 2 * pad {
            return Err(Error::Dimension(format!(
                "kernel {k} larger than padded input {}×{}",
                h + 2 * pad,
                w + 2 * pad
            )));
        }
        let ho = (h + 2 * pad - k) / stride + 1;
        let wo = (w + 2 * pad - k) / stride + 1;
        Ok(Self {
            h,
            w,
            cin,
            k,
            cout,
            stride,
            ho,
            wo,
        })
    }

    fn patch(&self) -> usize {
        self.k * self.k * self.cin
    }

    /// Zero-padded patches, one row per output pixel, columns ordered (ky, kx, c).
    fn im2col(&self, x: &[f64]) -> Vec<f64> {
        let pad = (self.k / 2) as isize;
        let patch = self.patch();
        let mut cols = vec![0.0; self.ho * self.wo * patch];
        for oy in 0..self.ho {
            for ox in 0..self.wo {
                let row = &mut cols[(oy * self.wo + ox) * patch..][..patch];
                for ky in 0..self.k {
                    let iy = (oy * self.stride) as isize + ky as isize - pad;
                    if iy < 0 || iy >= self.h as isize {
                        continue;
                    }
                    for kx in 0..self.k {
                        let ix = (ox * self.stride) as isize + kx as isize - pad;
                        if ix < 0 || ix >= self.w as isize {
                            continue;
                        }
                        let src = (iy as usize * self.w + ix as usize) * self.cin;
                        let dst = (ky * self.k + kx) * self.cin;
                        row[dst..dst + self.cin].copy_from_slice(&x[src..src + self.cin]);
                    }
                }
            }
        }
        cols
    }

    fn col2im_acc(&self, cols: &[f64], dx: &mut [f64]) {
        let pad = (self.k / 2) as isize;
        let patch = self.patch();
        for oy in 0..self.ho {
            for ox in 0..self.wo {
                let row = &cols[(oy * self.wo + ox) * patch..][..patch];
                for ky in 0..self.k {
                    let iy = (oy * self.stride) as isize + ky as isize - pad;
                    if iy < 0 || iy >= self.h as isize {
                        continue;
                    }
                    for kx in 0..self.k {
                        let ix = (ox * self.stride) as isize + kx as isize - pad;
                        if ix < 0 || ix >= self.w as isize {
                            continue;
                        }
                        let dst = (iy as usize * self.w + ix as usize) * self.cin;
                        let src = (ky * self.k + kx) * self.cin;
                        for c in 0..self.cin {
                            dx[dst + c] += row[src + c];
                        }
                    }
                }
            }
        }
    }
}

/// The parent's adjoint buffer, or None if it needs no gradient.
fn adjoint_slot<'a>(
    nodes: &[Node],
    adj: &'a mut [Option<Vec<f64>>],
    id: NodeId,
) -> Option<&'a mut Vec<f64>> {
    if !nodes[id.0].requires_grad {
        return None;
    }
    let n = nodes[id.0].value.numel();
    Some(adj[id.0].get_or_insert_with(|| vec![0.0; n]))
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            grad: Vec::new(),
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn rg(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    /// Differentiable input (a parameter).
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, true)
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Constant, false)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Accumulated gradient of `id`; zeros if no backward pass reached it.
    pub fn grad(&self, id: NodeId) -> Tensor {
        let node = &self.nodes[id.0];
        if node.grad.is_empty() {
            Tensor::zeros(node.value.shape())
        } else {
            Tensor::new(node.value.shape().to_vec(), node.grad.clone()).expect("grad shape")
        }
    }

    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.grad.clear();
        }
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, k) = self.value(a).dims2()?;
        let (k2, n) = self.value(b).dims2()?;
        if k != k2 {
            return Err(Error::Dimension(format!(
                "matmul inner dimensions differ: {m}×{k} · {k2}×{n}"
            )));
        }
        let mut out = vec![0.0; m * n];
        gemm_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b), rg))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        let shape = same_shape_or_scalar(va, vb, "add")?;
        let n: usize = shape.iter().product();
        let out = (0..n).map(|i| broadcast_get(va, i) + broadcast_get(vb, i)).collect();
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::new(shape, out)?, Op::Add(a, b), rg))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        let shape = same_shape_or_scalar(va, vb, "mul")?;
        let n: usize = shape.iter().product();
        let out = (0..n).map(|i| broadcast_get(va, i) * broadcast_get(vb, i)).collect();
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::new(shape, out)?, Op::Mul(a, b), rg))
    }

    pub fn scalar_mul(&mut self, a: NodeId, s: f64) -> NodeId {
        let v = self.value(a);
        let out = Tensor::new(v.shape().to_vec(), v.data().iter().map(|x| x * s).collect())
            .expect("same shape");
        let rg = self.rg(&[a]);
        self.push(out, Op::ScalarMul(a, s), rg)
    }

    pub fn power(&mut self, a: NodeId, exponent: u32) -> NodeId {
        let v = self.value(a);
        let e = exponent as i32;
        let out = Tensor::new(v.shape().to_vec(), v.data().iter().map(|x| x.powi(e)).collect())
            .expect("same shape");
        let rg = self.rg(&[a]);
        self.push(out, Op::Power(a, exponent), rg)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        let out = Tensor::new(v.shape().to_vec(), v.data().iter().map(|x| x.max(0.0)).collect())
            .expect("same shape");
        let rg = self.rg(&[a]);
        self.push(out, Op::Relu(a), rg)
    }

    fn reduce(&mut self, a: NodeId, op: Op, f: impl Fn(&[f64]) -> f64) -> NodeId {
        let out = Tensor::scalar(f(self.value(a).data()));
        let rg = self.rg(&[a]);
        self.push(out, op, rg)
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        self.reduce(a, Op::Sum(a), |d| d.iter().sum())
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        self.reduce(a, Op::Mean(a), |d| d.iter().sum::<f64>() / d.len() as f64)
    }

    pub fn abs_sum(&mut self, a: NodeId) -> NodeId {
        self.reduce(a, Op::AbsSum(a), |d| d.iter().map(|x| x.abs()).sum())
    }

    pub fn square_sum(&mut self, a: NodeId) -> NodeId {
        self.reduce(a, Op::SquareSum(a), |d| d.iter().map(|x| x * x).sum())
    }

    /// Row-wise softmax, stabilized by subtracting each row's maximum.
    pub fn softmax_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.value(a);
        let (m, n) = v.dims2()?;
        let mut out = v.data().to_vec();
        for row in out.chunks_mut(n) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                total += *x;
            }
            for x in row.iter_mut() {
                *x /= total;
            }
        }
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::SoftmaxRows(a), rg))
    }

    /// Cross-correlation of an `H×W×Cin` input with a `k×k×Cin×Cout` kernel,
    /// zero-padded by `k/2` on every side.
    pub fn conv2d(&mut self, input: NodeId, kernel: NodeId, stride: usize) -> Result<NodeId> {
        let geom = ConvGeom::new(self.value(input), self.value(kernel), stride)?;
        let cols = geom.im2col(self.value(input).data());
        let mut out = vec![0.0; geom.ho * geom.wo * geom.cout];
        gemm_acc(
            &cols,
            self.value(kernel).data(),
            &mut out,
            geom.ho * geom.wo,
            geom.patch(),
            geom.cout,
        );
        let rg = self.rg(&[input, kernel]);
        Ok(self.push(
            Tensor::new(vec![geom.ho, geom.wo, geom.cout], out)?,
            Op::Conv2d {
                input,
                kernel,
                stride,
            },
            rg,
        ))
    }

    /// `x[m×n] + b[1×n]`, the bias added to every row.
    pub fn add_bias(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let (m, n) = self.value(x).dims2()?;
        let bshape = self.value(bias).shape();
        if bshape != [1, n] {
            return Err(Error::Dimension(format!(
                "bias shape {bshape:?} does not match {m}×{n}"
            )));
        }
        let b = self.value(bias).data().to_vec();
        let mut out = self.value(x).data().to_vec();
        for row in out.chunks_mut(n) {
            for (o, bv) in row.iter_mut().zip(&b) {
                *o += bv;
            }
        }
        let rg = self.rg(&[x, bias]);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::AddBias(x, bias), rg))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        let out = self.value(a).transpose2()?;
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::Transpose(a), rg))
    }

    pub fn reshape(&mut self, a: NodeId, shape: &[usize]) -> Result<NodeId> {
        let out = self.value(a).reshaped(shape)?;
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::Reshape(a), rg))
    }

    /// Column means of a matrix: `m×n -> 1×n`.
    pub fn mean_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let (m, n) = self.value(a).dims2()?;
        let mut out = vec![0.0; n];
        for row in self.value(a).data().chunks(n) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        for o in &mut out {
            *o /= m as f64;
        }
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::new(vec![1, n], out)?, Op::MeanRows(a), rg))
    }

    /// Reverse pass from a scalar `loss`, accumulating into every node that
    /// requires a gradient.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            self.propagate(idx, &g, &mut adj);
            let node = &mut self.nodes[idx];
            if node.grad.is_empty() {
                node.grad = g;
            } else {
                for (acc, v) in node.grad.iter_mut().zip(&g) {
                    *acc += v;
                }
            }
        }
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        macro_rules! slot {
            ($id:expr) => {
                adjoint_slot(nodes, adj, $id)
            };
        }
        let out = &nodes[idx].value;

        match nodes[idx].op {
            Op::Leaf | Op::Constant => {}
            Op::MatMul(a, b) => {
                let (m, k) = nodes[a.0].value.dims2().expect("checked");
                let n = out.shape()[1];
                let av = nodes[a.0].value.data();
                let bv = nodes[b.0].value.data();
                if let Some(ga) = slot!(a) {
                    gemm_nt_acc(g, bv, ga, m, n, k);
                }
                if let Some(gb) = slot!(b) {
                    gemm_tn_acc(av, g, gb, m, k, n);
                }
            }
            Op::Add(a, b) => {
                for id in [a, b] {
                    let scalar_bcast = nodes[id.0].value.is_scalar() && g.len() > 1;
                    if let Some(ga) = slot!(id) {
                        if scalar_bcast {
                            ga[0] += g.iter().sum::<f64>();
                        } else {
                            for (x, y) in ga.iter_mut().zip(g) {
                                *x += y;
                            }
                        }
                    }
                }
            }
            Op::Mul(a, b) => {
                for (id, other) in [(a, b), (b, a)] {
                    let scalar_bcast = nodes[id.0].value.is_scalar() && g.len() > 1;
                    let ov = &nodes[other.0].value;
                    if let Some(ga) = slot!(id) {
                        if scalar_bcast {
                            ga[0] += g
                                .iter()
                                .enumerate()
                                .map(|(i, gv)| gv * broadcast_get(ov, i))
                                .sum::<f64>();
                        } else {
                            for (i, x) in ga.iter_mut().enumerate() {
                                *x += g[i] * broadcast_get(ov, i);
                            }
                        }
                    }
                }
            }
            Op::ScalarMul(a, s) => {
                if let Some(ga) = slot!(a) {
                    for (x, gv) in ga.iter_mut().zip(g) {
                        *x += s * gv;
                    }
                }
            }
            Op::Power(a, e) => {
                let av = nodes[a.0].value.data();
                if let Some(ga) = slot!(a) {
                    if e > 0 {
                        let ef = e as f64;
                        for ((x, gv), v) in ga.iter_mut().zip(g).zip(av) {
                            *x += gv * ef * v.powi(e as i32 - 1);
                        }
                    }
                }
            }
            Op::Relu(a) => {
                let av = nodes[a.0].value.data();
                if let Some(ga) = slot!(a) {
                    for ((x, gv), v) in ga.iter_mut().zip(g).zip(av) {
                        if *v > 0.0 {
                            *x += gv;
                        }
                    }
                }
            }
            Op::Sum(a) => {
                if let Some(ga) = slot!(a) {
                    for x in ga.iter_mut() {
                        *x += g[0];
                    }
                }
            }
            Op::Mean(a) => {
                if let Some(ga) = slot!(a) {
                    let s = g[0] / ga.len() as f64;
                    for x in ga.iter_mut() {
                        *x += s;
                    }
                }
            }
            Op::AbsSum(a) => {
                let av = nodes[a.0].value.data();
                if let Some(ga) = slot!(a) {
                    // Subgradient 0 at the kink.
                    for (x, v) in ga.iter_mut().zip(av) {
                        if *v > 0.0 {
                            *x += g[0];
                        } else if *v < 0.0 {
                            *x -= g[0];
                        }
                    }
                }
            }
            Op::SquareSum(a) => {
                let av = nodes[a.0].value.data();
                if let Some(ga) = slot!(a) {
                    for (x, v) in ga.iter_mut().zip(av) {
                        *x += 2.0 * v * g[0];
                    }
                }
            }
            Op::SoftmaxRows(a) => {
                let n = out.shape()[1];
                let y = out.data();
                if let Some(ga) = slot!(a) {
                    for ((grow, yrow), arow) in g.chunks(n).zip(y.chunks(n)).zip(ga.chunks_mut(n)) {
                        let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                        for ((x, gv), yv) in arow.iter_mut().zip(grow).zip(yrow) {
                            *x += yv * (gv - dot);
                        }
                    }
                }
            }
            Op::Conv2d {
                input,
                kernel,
                stride,
            } => {
                let xv = &nodes[input.0].value;
                let kv = &nodes[kernel.0].value;
                let geom = ConvGeom::new(xv, kv, stride).expect("checked");
                let pix = geom.ho * geom.wo;
                if nodes[kernel.0].requires_grad {
                    let cols = geom.im2col(xv.data());
                    let gk = slot!(kernel).expect("requires grad");
                    gemm_tn_acc(&cols, g, gk, pix, geom.patch(), geom.cout);
                }
                if let Some(gx) = slot!(input) {
                    let mut dcols = vec![0.0; pix * geom.patch()];
                    gemm_nt_acc(g, kv.data(), &mut dcols, pix, geom.cout, geom.patch());
                    geom.col2im_acc(&dcols, gx);
                }
            }
            Op::AddBias(x, b) => {
                let n = out.shape()[1];
                if let Some(gx) = slot!(x) {
                    for (a, gv) in gx.iter_mut().zip(g) {
                        *a += gv;
                    }
                }
                if let Some(gb) = slot!(b) {
                    for row in g.chunks(n) {
                        for (a, gv) in gb.iter_mut().zip(row) {
                            *a += gv;
                        }
                    }
                }
            }
            Op::Transpose(a) => {
                let (m, n) = nodes[a.0].value.dims2().expect("checked");
                if let Some(ga) = slot!(a) {
                    for i in 0..m {
                        for j in 0..n {
                            ga[i * n + j] += g[j * m + i];
                        }
                    }
                }
            }
            Op::Reshape(a) => {
                if let Some(ga) = slot!(a) {
                    for (x, gv) in ga.iter_mut().zip(g) {
                        *x += gv;
                    }
                }
            }
            Op::MeanRows(a) => {
                let (m, n) = nodes[a.0].value.dims2().expect("checked");
                if let Some(ga) = slot!(a) {
                    let inv = 1.0 / m as f64;
                    for row in ga.chunks_mut(n) {
                        for (x, gv) in row.iter_mut().zip(g) {
                            *x += gv * inv;
                        }
                    }
                }
            }
        }
    }
}
