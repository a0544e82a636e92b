//! Fully connected networks with hand-written backpropagation and Adam.
//!
//! Batches are matrices with one sample per row. A [`Mlp`] forward pass
//! returns a [`ForwardRecord`] holding every layer's pre- and
//! post-activation values; [`Mlp::backward`] consumes it together with the
//! gradient of some scalar with respect to the network output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Tanh,
    Relu,
}

impl Activation {
    fn code(self) -> u8 {
        match self {
            Activation::Linear => 0,
            Activation::Tanh => 1,
            Activation::Relu => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Activation::Linear),
            1 => Ok(Activation::Tanh),
            2 => Ok(Activation::Relu),
            _ => Err(Error::Format(format!("unknown activation code {c}"))),
        }
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    #[inline]
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Activation::Linear),
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            _ => Err(Error::InvalidArchitecture(format!(
                "unknown activation `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out × in`
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn input_width(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_width(&self) -> usize {
        self.weight.rows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

/// Per-layer values retained by [`Mlp::forward`].
#[derive(Debug, Clone)]
pub struct ForwardRecord {
    pub input: Matrix,
    pub pre: Vec<Matrix>,
    pub post: Vec<Matrix>,
}

impl ForwardRecord {
    pub fn output(&self) -> &Matrix {
        self.post.last().unwrap_or(&self.input)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Gradients shaped like an [`Mlp`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<LayerGrad>,
}

impl GradientSet {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        GradientSet {
            layers: mlp
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weight: Matrix::zeros(l.weight.rows(), l.weight.cols()),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    /// Weights row-major then bias, layer by layer (same order as
    /// [`Mlp::parameters`]).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weight.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    fn check_congruent(&self, mlp: &Mlp) -> Result<()> {
        let ok =
            self.layers.len() == mlp.layers.len()
                && self.layers.iter().zip(&mlp.layers).all(|(g, l)| {
                    g.weight.shape() == l.weight.shape() && g.bias.len() == l.bias.len()
                });
        if ok {
            Ok(())
        } else {
            Err(Error::shape(
                "gradients congruent with network",
                "different layout",
            ))
        }
    }
}

/// Glorot-uniform weights, zero biases, deterministic per seed.
///
/// `activations` holds one entry per layer, i.e. `widths.len() - 1`.
pub fn init_mlp(widths: &[usize], activations: &[Activation], seed: u64) -> Result<Mlp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_mlp_with(widths, activations, &mut rng)
}

pub fn init_mlp_with(
    widths: &[usize],
    activations: &[Activation],
    rng: &mut impl Rng,
) -> Result<Mlp> {
    if widths.len() < 2 {
        return Err(Error::InvalidArchitecture(
            "need at least an input and an output width".into(),
        ));
    }
    if widths.contains(&0) {
        return Err(Error::InvalidArchitecture("zero-width layer".into()));
    }
    if activations.len() != widths.len() - 1 {
        return Err(Error::InvalidArchitecture(format!(
            "{} layers but {} activations",
            widths.len() - 1,
            activations.len()
        )));
    }
    let layers = widths
        .windows(2)
        .zip(activations)
        .map(|(w, &activation)| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            DenseLayer {
                weight: Matrix::from_vec(fan_out, fan_in, data).unwrap(),
                bias: vec![0.0; fan_out],
                activation,
            }
        })
        .collect();
    Ok(Mlp { layers })
}

impl Mlp {
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArchitecture("no layers".into()));
        }
        for w in layers.windows(2) {
            if w[0].output_width() != w[1].input_width() {
                return Err(Error::InvalidArchitecture(format!(
                    "layer widths do not chain: {} -> {}",
                    w[0].output_width(),
                    w[1].input_width()
                )));
            }
        }
        for l in &layers {
            if l.bias.len() != l.output_width() {
                return Err(Error::InvalidArchitecture("bias length mismatch".into()));
            }
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input_width()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].output_width()
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.rows() * l.weight.cols() + l.bias.len())
            .sum()
    }

    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_parameters());
        for l in &self.layers {
            out.extend_from_slice(l.weight.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_parameters() {
            return Err(Error::shape(self.num_parameters(), params.len()));
        }
        let mut at = 0;
        for l in &mut self.layers {
            let n = l.weight.rows() * l.weight.cols();
            l.weight.as_mut_slice().copy_from_slice(&params[at..at + n]);
            at += n;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    pub fn forward(&self, batch: &Matrix) -> Result<ForwardRecord> {
        if batch.cols() != self.input_width() {
            return Err(Error::shape(
                format!("batch with {} columns", self.input_width()),
                format!("{}x{}", batch.rows(), batch.cols()),
            ));
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let x = post.last().unwrap_or(batch);
            let mut z = x.matmul_t(&layer.weight)?;
            for r in 0..z.rows() {
                for (v, b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
                    *v += b;
                }
            }
            let mut a = z.clone();
            for v in a.as_mut_slice() {
                *v = layer.activation.apply(*v);
            }
            pre.push(z);
            post.push(a);
        }
        Ok(ForwardRecord {
            input: batch.clone(),
            pre,
            post,
        })
    }

    /// Network output only.
    pub fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        let mut rec = self.forward(batch)?;
        Ok(rec.post.pop().expect("at least one layer"))
    }

    /// Reverse-mode gradients. Returns the parameter gradients and the
    /// gradient with respect to the network input.
    pub fn backward(
        &self,
        record: &ForwardRecord,
        upstream: &Matrix,
    ) -> Result<(GradientSet, Matrix)> {
        if record.pre.len() != self.layers.len() {
            return Err(Error::shape(
                format!("record of {} layers", self.layers.len()),
                record.pre.len(),
            ));
        }
        let out = record.output();
        if upstream.shape() != out.shape() {
            return Err(Error::shape(
                format!("{}x{}", out.rows(), out.cols()),
                format!("{}x{}", upstream.rows(), upstream.cols()),
            ));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (z, a) = (&record.pre[i], &record.post[i]);
            if layer.activation != Activation::Linear {
                for ((d, &zv), &av) in delta
                    .as_mut_slice()
                    .iter_mut()
                    .zip(z.as_slice())
                    .zip(a.as_slice())
                {
                    *d *= layer.activation.derivative(zv, av);
                }
            }
            let x = if i == 0 {
                &record.input
            } else {
                &record.post[i - 1]
            };
            let weight = delta.t_matmul(x)?;
            let mut bias = vec![0.0; layer.output_width()];
            for r in 0..delta.rows() {
                for (b, d) in bias.iter_mut().zip(delta.row(r)) {
                    *b += d;
                }
            }
            grads.push(LayerGrad { weight, bias });
            delta = delta.matmul(&layer.weight)?;
        }
        grads.reverse();
        Ok((GradientSet { layers: grads }, delta))
    }

    /// `MLP1` container: magic, u32 layer count, then per layer u32 in,
    /// u32 out, u8 activation code, weights row-major and biases as f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(b"MLP1");
        w.u32(self.layers.len());
        for l in &self.layers {
            w.u32(l.input_width());
            w.u32(l.output_width());
            w.u8(l.activation.code());
            w.f64s(l.weight.as_slice());
            w.f64s(&l.bias);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, b"MLP1")?;
        let n = r.u32()?;
        let mut layers = Vec::with_capacity(n);
        for _ in 0..n {
            let fan_in = r.u32()?;
            let fan_out = r.u32()?;
            let activation = Activation::from_code(r.u8()?)?;
            let weight = Matrix::from_vec(fan_out, fan_in, r.f64s(fan_in * fan_out)?)?;
            let bias = r.f64s(fan_out)?;
            layers.push(DenseLayer {
                weight,
                bias,
                activation,
            });
        }
        r.finish()?;
        Mlp::from_layers(layers).map_err(|e| Error::Format(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: GradientSet,
    second: GradientSet,
}

impl AdamState {
    pub fn new(mlp: &Mlp, config: AdamConfig) -> Result<Self> {
        let unit = |b: f64| b > 0.0 && b < 1.0;
        let valid =
            config.lr >= 0.0 && unit(config.beta1) && unit(config.beta2) && config.epsilon > 0.0;
        if !valid {
            return Err(Error::InvalidConfig(format!(
                "bad Adam settings {config:?}"
            )));
        }
        Ok(AdamState {
            config,
            step: 0,
            first: GradientSet::zeros_like(mlp),
            second: GradientSet::zeros_like(mlp),
        })
    }
}

/// One bias-corrected Adam update applied in place.
pub fn adam_step(mlp: &mut Mlp, grads: &GradientSet, state: &mut AdamState) -> Result<()> {
    grads.check_congruent(mlp)?;
    state.first.check_congruent(mlp)?;
    state.step += 1;
    let AdamConfig {
        lr,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);

    let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let mhat = *m / c1;
            let vhat = *v / c2;
            *p -= lr * mhat / (vhat.sqrt() + epsilon);
        }
    };

    for (((layer, g), m), v) in mlp
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut state.first.layers)
        .zip(&mut state.second.layers)
    {
        update(
            layer.weight.as_mut_slice(),
            g.weight.as_slice(),
            m.weight.as_mut_slice(),
            v.weight.as_mut_slice(),
        );
        update(&mut layer.bias, &g.bias, &mut m.bias, &mut v.bias);
    }
    Ok(())
}
