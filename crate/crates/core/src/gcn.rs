//! Two-layer GCN, `logits = Â · relu(Â · X · W0 + b0) · W1 + b1`, with
//! hand-written reverse mode for both the weights and the input features.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub w0: Array2<f64>,
    pub b0: Option<Array1<f64>>,
    pub w1: Array2<f64>,
    pub b1: Option<Array1<f64>>,
}

impl ModelParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize, output_dim: usize, bias: bool) -> Self {
        ModelParams {
            w0: Array2::zeros((input_dim, hidden_dim)),
            b0: bias.then(|| Array1::zeros(hidden_dim)),
            w1: Array2::zeros((hidden_dim, output_dim)),
            b1: bias.then(|| Array1::zeros(output_dim)),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot(input_dim: usize, hidden_dim: usize, output_dim: usize, bias: bool, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(input_dim, hidden_dim, output_dim, bias);
        for w in [&mut p.w0, &mut p.w1] {
            let (fan_in, fan_out) = w.dim();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            w.mapv_inplace(|_| rng.random_range(-limit..limit));
        }
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w0.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w0.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn has_bias(&self) -> bool {
        self.b0.is_some()
    }

    fn check(&self) -> Result<()> {
        if self.w1.nrows() != self.hidden_dim() {
            return Err(Error::shape("W1 rows", self.hidden_dim(), self.w1.nrows()));
        }
        if let Some(b) = &self.b0 {
            if b.len() != self.hidden_dim() {
                return Err(Error::shape("b0", self.hidden_dim(), b.len()));
            }
        }
        if let Some(b) = &self.b1 {
            if b.len() != self.output_dim() {
                return Err(Error::shape("b1", self.output_dim(), b.len()));
            }
        }
        if self.b0.is_some() != self.b1.is_some() {
            return Err(Error::InvalidArgument(
                "bias must be set on both layers or neither".into(),
            ));
        }
        Ok(())
    }

    /// Parameter tensors as flat slices in a fixed order: W0, b0, W1, b1.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = vec![self.w0.as_slice().expect("standard layout")];
        if let Some(b) = &self.b0 {
            out.push(b.as_slice().expect("contiguous"));
        }
        out.push(self.w1.as_slice().expect("standard layout"));
        if let Some(b) = &self.b1 {
            out.push(b.as_slice().expect("contiguous"));
        }
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.w0.as_slice_mut().expect("standard layout")];
        if let Some(b) = &mut self.b0 {
            out.push(b.as_slice_mut().expect("contiguous"));
        }
        out.push(self.w1.as_slice_mut().expect("standard layout"));
        if let Some(b) = &mut self.b1 {
            out.push(b.as_slice_mut().expect("contiguous"));
        }
        out
    }

    /// Which of [`slices`](Self::slices) are weight matrices (subject to weight decay).
    pub fn is_weight(&self) -> Vec<bool> {
        if self.has_bias() {
            vec![true, false, true, false]
        } else {
            vec![true, true]
        }
    }

    pub fn zeros_like(&self) -> ModelParams {
        Self::zeros(self.input_dim(), self.hidden_dim(), self.output_dim(), self.has_bias())
    }
}

/// Gradients share the parameter layout.
pub type Gradients = ModelParams;

/// `X · W0`, reusable across adjacencies while the parameters are unchanged.
#[derive(Debug, Clone)]
pub struct Projection(Array2<f64>);

impl Projection {
    pub fn new(params: &ModelParams, x: &FeatureMatrix) -> Result<Self> {
        params.check()?;
        if x.dim() != params.input_dim() {
            return Err(Error::shape("feature dim", params.input_dim(), x.dim()));
        }
        Ok(Projection(x.dot(&params.w0)))
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }
}

fn check_finite(m: &Array2<f64>, layer: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { layer, epoch: None })
    }
}

fn add_bias(m: &mut Array2<f64>, b: &Option<Array1<f64>>) {
    if let Some(b) = b {
        *m += b;
    }
}

/// Cached intermediates of one forward pass. Borrowing the parameters,
/// adjacency and features ties the tape to the exact triple that produced it.
#[derive(Debug)]
pub struct ForwardTape<'a> {
    params: &'a ModelParams,
    adj: &'a NormalizedAdjacency,
    x: &'a FeatureMatrix,
    projection: Projection,
    z0: Array2<f64>,
    h0: Array2<f64>,
    logits: Array2<f64>,
}

impl<'a> ForwardTape<'a> {
    pub fn logits(&self) -> &Array2<f64> {
        &self.logits
    }

    pub fn hidden(&self) -> &Array2<f64> {
        &self.h0
    }

    pub fn projection(&self) -> &Projection {
        &self.projection
    }

    pub fn params(&self) -> &'a ModelParams {
        self.params
    }

    pub fn adjacency(&self) -> &'a NormalizedAdjacency {
        self.adj
    }
}

pub fn forward<'a>(
    params: &'a ModelParams,
    adj: &'a NormalizedAdjacency,
    x: &'a FeatureMatrix,
) -> Result<ForwardTape<'a>> {
    let projection = Projection::new(params, x)?;
    forward_with(params, adj, x, projection)
}

/// Forward pass reusing a precomputed projection of `x`.
pub fn forward_with<'a>(
    params: &'a ModelParams,
    adj: &'a NormalizedAdjacency,
    x: &'a FeatureMatrix,
    projection: Projection,
) -> Result<ForwardTape<'a>> {
    if adj.num_nodes() != x.num_nodes() {
        return Err(Error::shape("adjacency size", x.num_nodes(), adj.num_nodes()));
    }
    let (z0, h0, logits) = propagate(params, adj, &projection)?;
    Ok(ForwardTape {
        params,
        adj,
        x,
        projection,
        z0,
        h0,
        logits,
    })
}

fn propagate(
    params: &ModelParams,
    adj: &NormalizedAdjacency,
    projection: &Projection,
) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>)> {
    if projection.0.nrows() != adj.num_nodes() {
        return Err(Error::shape("projection rows", adj.num_nodes(), projection.0.nrows()));
    }
    let mut z0 = adj.matmul(&projection.0.view());
    add_bias(&mut z0, &params.b0);
    check_finite(&z0, "layer 0")?;
    let h0 = z0.mapv(|z| z.max(0.0));
    let mut logits = adj.matmul(&h0.dot(&params.w1).view());
    add_bias(&mut logits, &params.b1);
    check_finite(&logits, "layer 1")?;
    Ok((z0, h0, logits))
}

/// Logits on `adj` from a projection computed with the same parameters.
pub fn logits_from_projection(
    params: &ModelParams,
    adj: &NormalizedAdjacency,
    projection: &Projection,
) -> Result<Array2<f64>> {
    propagate(params, adj, projection).map(|(_, _, l)| l)
}

/// Logits of the single node `v`, touching only its two-hop neighborhood.
pub fn node_logits_from_projection(
    params: &ModelParams,
    adj: &NormalizedAdjacency,
    projection: &Projection,
    v: usize,
) -> Array1<f64> {
    let p = &projection.0;
    let mut agg = Array1::<f64>::zeros(params.output_dim());
    for (u, a_vu) in adj.row(v) {
        let mut z = Array1::<f64>::zeros(params.hidden_dim());
        for (w, a_uw) in adj.row(u) {
            z.scaled_add(a_uw, &p.row(w));
        }
        if let Some(b) = &params.b0 {
            z += b;
        }
        z.mapv_inplace(|x| x.max(0.0));
        agg.scaled_add(a_vu, &z.dot(&params.w1));
    }
    if let Some(b) = &params.b1 {
        agg += b;
    }
    agg
}

/// Gradient of a scalar loss w.r.t. the input features, stored only for
/// rows that can be nonzero.
#[derive(Debug, Clone)]
pub struct InputGradient {
    pub num_nodes: usize,
    pub rows: Vec<usize>,
    pub values: Array2<f64>,
}

impl InputGradient {
    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.num_nodes, self.values.ncols()));
        for (i, &r) in self.rows.iter().enumerate() {
            out.row_mut(r).assign(&self.values.row(i));
        }
        out
    }

    /// Per-node L1 norm of the gradient row.
    pub fn row_l1(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.num_nodes];
        for (i, &r) in self.rows.iter().enumerate() {
            out[r] = self.values.row(i).iter().map(|g| g.abs()).sum();
        }
        out
    }
}

struct HiddenGrads {
    d_p1: Array2<f64>,
    d_z0: Array2<f64>,
    d_p0: Array2<f64>,
}

fn hidden_grads(tape: &ForwardTape<'_>, dlogits: &ArrayView2<f64>) -> Result<HiddenGrads> {
    if dlogits.dim() != tape.logits.dim() {
        return Err(Error::shape(
            "upstream gradient",
            format!("{:?}", tape.logits.dim()),
            format!("{:?}", dlogits.dim()),
        ));
    }
    let d_p1 = tape.adj.matmul(dlogits);
    let mut d_z0 = d_p1.dot(&tape.params.w1.t());
    ndarray::Zip::from(&mut d_z0).and(&tape.z0).for_each(|g, &z| {
        if z <= 0.0 {
            *g = 0.0;
        }
    });
    let d_p0 = tape.adj.matmul(&d_z0.view());
    Ok(HiddenGrads { d_p1, d_z0, d_p0 })
}

fn input_grad_from(tape: &ForwardTape<'_>, d_p0: &Array2<f64>) -> InputGradient {
    let n = d_p0.nrows();
    let rows: Vec<usize> = (0..n).filter(|&r| d_p0.row(r).iter().any(|&g| g != 0.0)).collect();
    let w0t = tape.params.w0.t();
    let values = if rows.len() == n {
        d_p0.dot(&w0t)
    } else {
        d_p0.select(Axis(0), &rows).dot(&w0t)
    };
    InputGradient {
        num_nodes: n,
        rows,
        values,
    }
}

/// Exact gradients of a scalar loss w.r.t. all parameters and all input features.
pub fn backward(tape: &ForwardTape<'_>, dlogits: &ArrayView2<f64>) -> Result<(Gradients, Array2<f64>)> {
    let grads = weight_gradients(tape, dlogits)?;
    let hg = hidden_grads(tape, dlogits)?;
    Ok((grads, input_grad_from(tape, &hg.d_p0).to_dense()))
}

/// Parameter gradients only.
pub fn weight_gradients(tape: &ForwardTape<'_>, dlogits: &ArrayView2<f64>) -> Result<Gradients> {
    let hg = hidden_grads(tape, dlogits)?;
    let p = tape.params;
    Ok(ModelParams {
        w0: tape.x.t_dot(&hg.d_p0),
        b0: p.b0.as_ref().map(|_| hg.d_z0.sum_axis(Axis(0))),
        w1: tape.h0.t().dot(&hg.d_p1),
        b1: p.b1.as_ref().map(|_| dlogits.sum_axis(Axis(0))),
    })
}

/// Input-feature gradient only, skipping rows outside the receptive field.
pub fn input_gradient(tape: &ForwardTape<'_>, dlogits: &ArrayView2<f64>) -> Result<InputGradient> {
    let hg = hidden_grads(tape, dlogits)?;
    Ok(input_grad_from(tape, &hg.d_p0))
}

/// Row-wise softmax.
pub fn softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut prob = logits.clone();
    for mut row in prob.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|z| (z - m).exp());
        let s = row.sum();
        row /= s;
    }
    prob
}

pub fn predict_proba(params: &ModelParams, adj: &NormalizedAdjacency, x: &FeatureMatrix) -> Result<Array2<f64>> {
    let tape = forward(params, adj, x)?;
    Ok(softmax(tape.logits()))
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, x) in row.into_iter().enumerate() {
        if x > best_val {
            best = i;
            best_val = x;
        }
    }
    best
}

pub fn argmax_rows(m: &Array2<f64>) -> Vec<usize> {
    m.rows().into_iter().map(|r| argmax(r.iter().copied())).collect()
}

#[derive(Debug, Clone)]
pub struct XentOutput {
    pub loss: f64,
    pub prob: Array2<f64>,
    /// `∂loss/∂logits`, zero outside the mask.
    pub grad: Array2<f64>,
}

/// Mean cross-entropy over masked nodes.
pub fn softmax_xent(logits: &Array2<f64>, labels: &[usize], mask: &[bool]) -> Result<XentOutput> {
    let n = logits.nrows();
    if labels.len() != n || mask.len() != n {
        return Err(Error::shape("labels/mask length", n, labels.len().min(mask.len())));
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::InvalidArgument("empty loss mask".into()));
    }
    let prob = softmax(logits);
    let mut grad = Array2::zeros(logits.dim());
    let mut loss = 0.0;
    for v in (0..n).filter(|&v| mask[v]) {
        let row = logits.row(v);
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = m + row.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
        loss += lse - row[labels[v]];
        let mut g = grad.row_mut(v);
        g.assign(&prob.row(v));
        g[labels[v]] -= 1.0;
    }
    let scale = 1.0 / count as f64;
    grad *= scale;
    Ok(XentOutput {
        loss: loss * scale,
        prob,
        grad,
    })
}

/// Adam with decoupled weight decay applied to weight matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamState {
    pub fn new(params: &ModelParams, learning_rate: f64, weight_decay: f64) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }
}

pub fn adam_step(params: &mut ModelParams, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    let shapes = |p: &ModelParams| p.slices().iter().map(|s| s.len()).collect::<Vec<_>>();
    if shapes(params) != shapes(grads) || shapes(params) != shapes(&state.m) {
        return Err(Error::shape(
            "adam tensors",
            format!("{:?}", shapes(params)),
            format!("{:?}", shapes(grads)),
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);
    let is_weight = params.is_weight();
    let gs = grads.slices();
    let ms = state.m.slices_mut();
    let vs = state.v.slices_mut();
    for ((((p, g), m), v), w) in params.slices_mut().into_iter().zip(gs).zip(ms).zip(vs).zip(is_weight) {
        let decay = if w { state.weight_decay } else { 0.0 };
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= state.learning_rate * (m_hat / (v_hat.sqrt() + state.eps) + decay * p[i]);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    /// Early-stopping patience in epochs; 0 disables early stopping.
    pub patience: usize,
    pub bias: bool,
    pub normalize_features: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_dim: 64,
            learning_rate: 0.01,
            weight_decay: 5e-4,
            epochs: 200,
            patience: 30,
            bias: true,
            normalize_features: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 {
            return Err(Error::Config("train.hidden_dim must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("train.learning_rate must be positive".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config("train.weight_decay must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    seed: u64,
    train: TrainConfig,
    w0: Tensor,
    b0: Option<Tensor>,
    w1: Tensor,
    b1: Option<Tensor>,
}

const CHECKPOINT_FORMAT: &str = "xaidrop-gcn";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        let mat = |m: &Array2<f64>| Tensor {
            shape: m.shape().to_vec(),
            data: m.iter().copied().collect(),
        };
        let vec = |v: &Array1<f64>| Tensor {
            shape: vec![v.len()],
            data: v.to_vec(),
        };
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            seed: self.seed,
            train: self.train.clone(),
            w0: mat(&self.params.w0),
            b0: self.params.b0.as_ref().map(vec),
            w1: mat(&self.params.w1),
            b1: self.params.b1.as_ref().map(vec),
        };
        serde_json::to_string(&file).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let bad = |m: String| Error::InvalidArgument(format!("checkpoint: {m}"));
        let file: CheckpointFile = serde_json::from_str(s).map_err(|e| bad(e.to_string()))?;
        if file.format != CHECKPOINT_FORMAT || file.version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported format {} v{}", file.format, file.version)));
        }
        let mat = |t: Tensor| -> Result<Array2<f64>> {
            match t.shape[..] {
                [r, c] => Array2::from_shape_vec((r, c), t.data).map_err(|e| bad(e.to_string())),
                _ => Err(bad("matrix tensor must be 2-d".into())),
            }
        };
        let vec = |t: Tensor| -> Result<Array1<f64>> {
            if t.shape != [t.data.len()] {
                return Err(bad("bias tensor must be 1-d".into()));
            }
            Ok(Array1::from(t.data))
        };
        let params = ModelParams {
            w0: mat(file.w0)?,
            b0: file.b0.map(vec).transpose()?,
            w1: mat(file.w1)?,
            b1: file.b1.map(vec).transpose()?,
        };
        params.check()?;
        Ok(Checkpoint {
            params,
            train: file.train,
            seed: file.seed,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}
