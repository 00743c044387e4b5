use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Vector};
use crate::model::Objective;
use crate::rng::SplitMix64;

/// Hidden-layer activation function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    fn value(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// First derivative. The ReLU subgradient at the kink is taken as 0.
    fn d1(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    /// Second derivative. Zero everywhere for ReLU.
    fn d2(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            Activation::Relu | Activation::Identity => 0.0,
        }
    }
}

/// Training loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Mean over examples and output dimensions of the squared error.
    Mse,
    /// Mean over examples of the softmax cross-entropy against class indices.
    SoftmaxCrossEntropy,
}

/// Architecture of a multi-layer perceptron: layer widths (input first,
/// output last), hidden activation, and the training loss. The output layer
/// is always linear; for cross-entropy it produces logits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub loss: LossKind,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, activation: Activation, loss: LossKind) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidConfig(
                "an MLP needs at least one layer transition".into(),
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::InvalidConfig("layer sizes must be >= 1".into()));
        }
        Ok(Self {
            layer_sizes,
            activation,
            loss,
        })
    }

    /// Number of layer transitions.
    pub fn depth(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Total number of weights and biases.
    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[1] * w[0] + w[1])
            .sum()
    }

    /// Glorot-style uniform initialisation, `±sqrt(6 / (fan_in + fan_out))`
    /// per weight matrix, biases zero.
    pub fn init_params(&self, rng: &mut SplitMix64) -> ParamVector {
        let mut flat = Vec::with_capacity(self.param_count());
        for w in self.layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                flat.push(rng.next_uniform(-limit, limit));
            }
            flat.resize(flat.len() + fan_out, 0.0);
        }
        ParamVector {
            flat: Vector::from_vec(flat),
        }
    }

    /// Raw network outputs (regression values or logits), one row per
    /// example.
    pub fn predict(&self, params: &ParamVector, inputs: &DenseMatrix) -> Result<DenseMatrix> {
        if params.flat().len() != self.param_count() {
            return Err(Error::Dimension {
                context: "parameter vector",
                expected: self.param_count(),
                got: params.flat().len(),
            });
        }
        if inputs.cols() != self.input_width() {
            return Err(Error::Dimension {
                context: "prediction feature width",
                expected: self.input_width(),
                got: inputs.cols(),
            });
        }
        let layers = Layers::unpack(self, params.flat());
        let batch = Batch {
            inputs: inputs.clone(),
            targets: Targets::Values(DenseMatrix::zeros(inputs.rows(), self.output_width())),
        };
        let acts = layers.forward(&batch);
        Ok(acts.output().clone())
    }

    pub fn loss(&self, params: &ParamVector, batch: &Batch) -> Result<f64> {
        self.loss_flat(params.flat(), batch)
    }

    pub fn gradient(&self, params: &ParamVector, batch: &Batch) -> Result<Vector> {
        self.gradient_flat(params.flat(), batch)
    }

    /// Loss and gradient in one pass.
    pub fn loss_and_gradient(&self, params: &ParamVector, batch: &Batch) -> Result<(f64, Vector)> {
        self.check(params.flat(), batch)?;
        let layers = Layers::unpack(self, params.flat());
        let acts = layers.forward(batch);
        let loss = batch_loss(self, acts.output(), &batch.targets)?;
        let deltas = layers.backward(&acts, output_delta(self, acts.output(), &batch.targets)?);
        Ok((loss, layers.pack_gradient(&acts, &deltas)))
    }

    /// Exact Hessian-vector product by a forward-over-reverse sweep: the
    /// tangent of the whole backward pass along the parameter direction `v`.
    pub fn hvp(&self, params: &ParamVector, batch: &Batch, v: &Vector) -> Result<Vector> {
        self.hvp_flat(params.flat(), batch, v)
    }

    pub fn dense_hessian(&self, params: &ParamVector, batch: &Batch) -> Result<crate::linalg::SymMatrix> {
        MlpObjective { spec: self, batch }.dense_hessian(params.flat())
    }

    fn loss_flat(&self, flat: &Vector, batch: &Batch) -> Result<f64> {
        self.check(flat, batch)?;
        let layers = Layers::unpack(self, flat);
        let acts = layers.forward(batch);
        batch_loss(self, acts.output(), &batch.targets)
    }

    fn gradient_flat(&self, flat: &Vector, batch: &Batch) -> Result<Vector> {
        self.check(flat, batch)?;
        let layers = Layers::unpack(self, flat);
        let acts = layers.forward(batch);
        let deltas = layers.backward(&acts, output_delta(self, acts.output(), &batch.targets)?);
        Ok(layers.pack_gradient(&acts, &deltas))
    }

    fn hvp_flat(&self, flat: &Vector, batch: &Batch, v: &Vector) -> Result<Vector> {
        self.check(flat, batch)?;
        if v.len() != self.param_count() {
            return Err(Error::Dimension {
                context: "hvp direction",
                expected: self.param_count(),
                got: v.len(),
            });
        }
        let layers = Layers::unpack(self, flat);
        let tangent = Layers::unpack(self, v);
        let acts = layers.forward(batch);
        let deltas = layers.backward(&acts, output_delta(self, acts.output(), &batch.targets)?);
        let r_acts = layers.forward_tangent(&tangent, &acts);
        let r_delta_out = output_delta_tangent(self, acts.output(), r_acts.output(), &batch.targets);
        let r_deltas = layers.backward_tangent(&tangent, &acts, &r_acts, &deltas, r_delta_out);
        Ok(layers.pack_gradient_tangent(&acts, &r_acts, &deltas, &r_deltas))
    }

    fn check(&self, flat: &Vector, batch: &Batch) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension {
                context: "parameter vector",
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        if batch.inputs.cols() != self.input_width() {
            return Err(Error::Dimension {
                context: "batch feature width",
                expected: self.input_width(),
                got: batch.inputs.cols(),
            });
        }
        let n = batch.inputs.rows();
        if n == 0 {
            return Err(Error::InvalidConfig("empty batch".into()));
        }
        match (&batch.targets, self.loss) {
            (Targets::Values(t), LossKind::Mse) => {
                if t.rows() != n {
                    return Err(Error::Dimension {
                        context: "target row count",
                        expected: n,
                        got: t.rows(),
                    });
                }
                if t.cols() != self.output_width() {
                    return Err(Error::Dimension {
                        context: "target width",
                        expected: self.output_width(),
                        got: t.cols(),
                    });
                }
            }
            (Targets::Classes(c), LossKind::SoftmaxCrossEntropy) => {
                if c.len() != n {
                    return Err(Error::Dimension {
                        context: "class target count",
                        expected: n,
                        got: c.len(),
                    });
                }
                if let Some(&bad) = c.iter().find(|&&k| k >= self.output_width()) {
                    return Err(Error::Dimension {
                        context: "class index",
                        expected: self.output_width(),
                        got: bad,
                    });
                }
            }
            (Targets::Values(_), LossKind::SoftmaxCrossEntropy) => {
                return Err(Error::InvalidConfig(
                    "softmax cross-entropy expects class-index targets".into(),
                ))
            }
            (Targets::Classes(_), LossKind::Mse) => {
                return Err(Error::InvalidConfig(
                    "mean-squared error expects value targets".into(),
                ))
            }
        }
        Ok(())
    }
}

/// Flat parameter vector of an [`MlpSpec`].
///
/// Layout: for each layer transition in order, the weight matrix
/// (`fan_out x fan_in`, row-major) followed by the bias vector. The layout is
/// fixed so parameter vectors are bit-stable across runs and processes.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    flat: Vector,
}

impl ParamVector {
    pub fn from_flat(spec: &MlpSpec, flat: Vector) -> Result<Self> {
        if flat.len() != spec.param_count() {
            return Err(Error::Dimension {
                context: "ParamVector::from_flat",
                expected: spec.param_count(),
                got: flat.len(),
            });
        }
        Ok(Self { flat })
    }

    pub fn flat(&self) -> &Vector {
        &self.flat
    }

    pub fn into_flat(self) -> Vector {
        self.flat
    }
}

/// Regression targets or classification class indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Values(DenseMatrix),
    Classes(Vec<usize>),
}

/// A batch of examples: inputs row-per-example plus targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: DenseMatrix,
    pub targets: Targets,
}

/// Binds an [`MlpSpec`] to a batch so it can be driven through [`Objective`].
#[derive(Debug, Clone, Copy)]
pub struct MlpObjective<'a> {
    pub spec: &'a MlpSpec,
    pub batch: &'a Batch,
}

impl Objective for MlpObjective<'_> {
    fn dim(&self) -> usize {
        self.spec.param_count()
    }

    fn loss(&self, x: &Vector) -> Result<f64> {
        self.spec.loss_flat(x, self.batch)
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        self.spec.gradient_flat(x, self.batch)
    }

    fn hvp(&self, x: &Vector, v: &Vector) -> Result<Vector> {
        self.spec.hvp_flat(x, self.batch, v)
    }
}

// ---------------------------------------------------------------------------
// implementation
// ---------------------------------------------------------------------------

/// Per-layer weight/bias views unpacked from a flat vector.
struct Layers<'s> {
    spec: &'s MlpSpec,
    weights: Vec<DenseMatrix>,
    biases: Vec<Vector>,
}

/// Per-layer activations: `values[0]` is the input batch, `values[l]` the
/// output of transition `l`; `pre[l]` is the pre-activation of transition `l`.
struct Activations {
    values: Vec<DenseMatrix>,
    pre: Vec<DenseMatrix>,
}

impl Activations {
    fn output(&self) -> &DenseMatrix {
        self.values.last().unwrap()
    }
}

impl<'s> Layers<'s> {
    fn unpack(spec: &'s MlpSpec, flat: &Vector) -> Self {
        let mut weights = Vec::with_capacity(spec.depth());
        let mut biases = Vec::with_capacity(spec.depth());
        let data = flat.as_slice();
        let mut offset = 0;
        for w in spec.layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let mut wm = DenseMatrix::zeros(fan_out, fan_in);
            for r in 0..fan_out {
                wm.row_mut(r)
                    .copy_from_slice(&data[offset + r * fan_in..offset + (r + 1) * fan_in]);
            }
            offset += fan_out * fan_in;
            biases.push(Vector::from_vec(data[offset..offset + fan_out].to_vec()));
            offset += fan_out;
            weights.push(wm);
        }
        Self {
            spec,
            weights,
            biases,
        }
    }

    fn forward(&self, batch: &Batch) -> Activations {
        let depth = self.spec.depth();
        let act = self.spec.activation;
        let mut values = Vec::with_capacity(depth + 1);
        let mut pre = Vec::with_capacity(depth);
        values.push(batch.inputs.clone());
        for l in 0..depth {
            let mut z = values[l].matmul_transposed(&self.weights[l]);
            add_row_broadcast(&mut z, &self.biases[l]);
            let a = if l + 1 == depth {
                z.clone()
            } else {
                map_entries(&z, |x| act.value(x))
            };
            pre.push(z);
            values.push(a);
        }
        Activations { values, pre }
    }

    /// Backward pass; returns `delta[l] = dL/d pre[l]` for every transition.
    fn backward(&self, acts: &Activations, delta_out: DenseMatrix) -> Vec<DenseMatrix> {
        let depth = self.spec.depth();
        let act = self.spec.activation;
        let mut deltas = vec![DenseMatrix::zeros(0, 0); depth];
        deltas[depth - 1] = delta_out;
        for l in (0..depth - 1).rev() {
            let upstream = deltas[l + 1].matmul(&self.weights[l + 1]);
            deltas[l] = zip_entries(&upstream, &acts.pre[l], |u, z| u * act.d1(z));
        }
        deltas
    }

    fn pack_gradient(&self, acts: &Activations, deltas: &[DenseMatrix]) -> Vector {
        let mut flat = Vec::with_capacity(self.spec.param_count());
        for (l, delta) in deltas.iter().enumerate() {
            let dw = delta.transposed_matmul(&acts.values[l]);
            flat.extend_from_slice(dw.as_slice());
            for j in 0..delta.cols() {
                flat.push(delta.column(j).iter().sum());
            }
        }
        Vector::from_vec(flat)
    }

    /// Tangent of the forward pass along a parameter direction.
    fn forward_tangent(&self, tangent: &Layers, acts: &Activations) -> Activations {
        let depth = self.spec.depth();
        let act = self.spec.activation;
        let n = acts.values[0].rows();
        let mut values = Vec::with_capacity(depth + 1);
        let mut pre = Vec::with_capacity(depth);
        values.push(DenseMatrix::zeros(n, acts.values[0].cols()));
        for l in 0..depth {
            let mut rz = values[l].matmul_transposed(&self.weights[l]);
            rz.add_in_place(&acts.values[l].matmul_transposed(&tangent.weights[l]));
            add_row_broadcast(&mut rz, &tangent.biases[l]);
            let ra = if l + 1 == depth {
                rz.clone()
            } else {
                zip_entries(&rz, &acts.pre[l], |r, z| r * act.d1(z))
            };
            pre.push(rz);
            values.push(ra);
        }
        Activations { values, pre }
    }

    /// Tangent of the backward pass; returns `R{delta[l]}`.
    fn backward_tangent(
        &self,
        tangent: &Layers,
        acts: &Activations,
        r_acts: &Activations,
        deltas: &[DenseMatrix],
        r_delta_out: DenseMatrix,
    ) -> Vec<DenseMatrix> {
        let depth = self.spec.depth();
        let act = self.spec.activation;
        let mut r_deltas = vec![DenseMatrix::zeros(0, 0); depth];
        r_deltas[depth - 1] = r_delta_out;
        for l in (0..depth - 1).rev() {
            let r_upstream = r_deltas[l + 1].matmul(&self.weights[l + 1]);
            let upstream_tangent = deltas[l + 1].matmul(&tangent.weights[l + 1]);
            let upstream = deltas[l + 1].matmul(&self.weights[l + 1]);
            let mut out = DenseMatrix::zeros(upstream.rows(), upstream.cols());
            for i in 0..out.rows() {
                for j in 0..out.cols() {
                    let z = acts.pre[l][(i, j)];
                    let rz = r_acts.pre[l][(i, j)];
                    out[(i, j)] = (r_upstream[(i, j)] + upstream_tangent[(i, j)]) * act.d1(z)
                        + upstream[(i, j)] * act.d2(z) * rz;
                }
            }
            r_deltas[l] = out;
        }
        r_deltas
    }

    /// Tangent of the packed gradient: the Hessian-vector product.
    fn pack_gradient_tangent(
        &self,
        acts: &Activations,
        r_acts: &Activations,
        deltas: &[DenseMatrix],
        r_deltas: &[DenseMatrix],
    ) -> Vector {
        let mut flat = Vec::with_capacity(self.spec.param_count());
        for l in 0..self.spec.depth() {
            let dw = r_deltas[l]
                .transposed_matmul(&acts.values[l])
                .as_slice()
                .iter()
                .zip(deltas[l].transposed_matmul(&r_acts.values[l]).as_slice())
                .map(|(a, b)| a + b)
                .collect::<Vec<_>>();
            flat.extend_from_slice(&dw);
            for j in 0..r_deltas[l].cols() {
                flat.push(r_deltas[l].column(j).iter().sum());
            }
        }
        Vector::from_vec(flat)
    }
}

fn batch_loss(spec: &MlpSpec, out: &DenseMatrix, targets: &Targets) -> Result<f64> {
    let n = out.rows();
    match (targets, spec.loss) {
        (Targets::Values(y), LossKind::Mse) => {
            let denom = (n * out.cols()) as f64;
            let mut sum = 0.0;
            for i in 0..n {
                for j in 0..out.cols() {
                    let r = out[(i, j)] - y[(i, j)];
                    sum += r * r;
                }
            }
            Ok(sum / denom)
        }
        (Targets::Classes(classes), LossKind::SoftmaxCrossEntropy) => {
            let mut sum = 0.0;
            for i in 0..n {
                let row = out.row(i);
                sum += log_sum_exp(row) - row[classes[i]];
            }
            Ok(sum / n as f64)
        }
        _ => Err(Error::InvalidConfig(
            "targets do not match the configured loss".into(),
        )),
    }
}

/// `dL/d pre-activation` at the output layer, including the batch-mean
/// scaling.
fn output_delta(spec: &MlpSpec, out: &DenseMatrix, targets: &Targets) -> Result<DenseMatrix> {
    let n = out.rows();
    match (targets, spec.loss) {
        (Targets::Values(y), LossKind::Mse) => {
            let scale = 2.0 / (n * out.cols()) as f64;
            Ok(zip_entries(out, y, |o, t| scale * (o - t)))
        }
        (Targets::Classes(classes), LossKind::SoftmaxCrossEntropy) => {
            let mut delta = DenseMatrix::zeros(n, out.cols());
            for i in 0..n {
                let row = out.row(i);
                let lse = log_sum_exp(row);
                for j in 0..out.cols() {
                    delta[(i, j)] = (row[j] - lse).exp() / n as f64;
                }
                delta[(i, classes[i])] -= 1.0 / n as f64;
            }
            Ok(delta)
        }
        _ => Err(Error::InvalidConfig(
            "targets do not match the configured loss".into(),
        )),
    }
}

/// Tangent of [`output_delta`] along the output tangent `r_out`.
fn output_delta_tangent(
    spec: &MlpSpec,
    out: &DenseMatrix,
    r_out: &DenseMatrix,
    targets: &Targets,
) -> DenseMatrix {
    let n = out.rows();
    match (targets, spec.loss) {
        (Targets::Values(_), LossKind::Mse) => {
            let scale = 2.0 / (n * out.cols()) as f64;
            map_entries(r_out, |r| scale * r)
        }
        (Targets::Classes(_), LossKind::SoftmaxCrossEntropy) => {
            // R{p} = p .* (Rz - p . Rz) per row; the one-hot term is constant.
            let mut delta = DenseMatrix::zeros(n, out.cols());
            for i in 0..n {
                let row = out.row(i);
                let lse = log_sum_exp(row);
                let p: Vec<f64> = row.iter().map(|&z| (z - lse).exp()).collect();
                let dot: f64 = p
                    .iter()
                    .zip(r_out.row(i))
                    .map(|(pj, rj)| pj * rj)
                    .sum();
                for j in 0..out.cols() {
                    delta[(i, j)] = p[j] * (r_out[(i, j)] - dot) / n as f64;
                }
            }
            delta
        }
        _ => unreachable!("target kind validated before differentiation"),
    }
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + row.iter().map(|&z| (z - m).exp()).sum::<f64>().ln()
}

fn add_row_broadcast(m: &mut DenseMatrix, bias: &Vector) {
    for i in 0..m.rows() {
        for (x, b) in m.row_mut(i).iter_mut().zip(bias.iter()) {
            *x += b;
        }
    }
}

fn map_entries(m: &DenseMatrix, f: impl Fn(f64) -> f64) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(m.rows(), m.cols());
    for i in 0..m.rows() {
        for (o, &x) in out.row_mut(i).iter_mut().zip(m.row(i)) {
            *o = f(x);
        }
    }
    out
}

fn zip_entries(a: &DenseMatrix, b: &DenseMatrix, f: impl Fn(f64, f64) -> f64) -> DenseMatrix {
    debug_assert_eq!(a.rows(), b.rows());
    debug_assert_eq!(a.cols(), b.cols());
    let mut out = DenseMatrix::zeros(a.rows(), a.cols());
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            out[(i, j)] = f(a[(i, j)], b[(i, j)]);
        }
    }
    out
}
