//! Fully connected networks with hand-written layer derivatives.
//!
//! Each layer knows its forward map, its vector-Jacobian product (reverse
//! mode, used for training) and its Jacobian-vector product (forward mode,
//! used to build the generator Jacobian at a latent point).

use crate::error::{Error, Result};
use crate::linalg::{gemm, Matrix};
use crate::rng::Rng;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    LeakyRelu(f64),
    Identity,
    Sigmoid,
}

impl Activation {
    pub fn validate(self) -> Result<()> {
        match self {
            Activation::LeakyRelu(s) if !(s > 0.0 && s < 1.0) => Err(Error::Config(format!(
                "leaky ReLU slope must lie in (0, 1), got {s}"
            ))),
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu(s) => {
                if z > 0.0 {
                    z
                } else {
                    s * z
                }
            }
            Activation::Identity => z,
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative at pre-activation `z`.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu(s) => {
                if z > 0.0 {
                    1.0
                } else {
                    s
                }
            }
            Activation::Identity => 1.0,
            Activation::Sigmoid => {
                let y = 1.0 / (1.0 + (-z).exp());
                y * (1.0 - y)
            }
        }
    }

    pub(crate) fn tag(self) -> (u8, f64) {
        match self {
            Activation::Identity => (0, 0.0),
            Activation::LeakyRelu(s) => (1, s),
            Activation::Sigmoid => (2, 0.0),
        }
    }

    pub(crate) fn from_tag(tag: u8, param: f64) -> Option<Self> {
        match tag {
            0 => Some(Activation::Identity),
            1 => Some(Activation::LeakyRelu(param)),
            2 => Some(Activation::Sigmoid),
            _ => None,
        }
    }
}

/// Weight initialization scheme. Biases always start at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Normal with standard deviation `sqrt(2 / fan_in)`.
    HeNormal,
    /// Normal with standard deviation `sqrt(2 / (fan_in + fan_out))`.
    XavierNormal,
}

impl Init {
    pub fn std_dev(self, fan_in: usize, fan_out: usize) -> f64 {
        match self {
            Init::HeNormal => (2.0 / fan_in as f64).sqrt(),
            Init::XavierNormal => (2.0 / (fan_in + fan_out) as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// Shape `(out, in)`.
    weights: Matrix,
    bias: Vec<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::Shape(format!(
                "bias of length {} for a layer with {} outputs",
                bias.len(),
                weights.rows()
            )));
        }
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(Error::Shape("layer dimensions must be positive".into()));
        }
        activation.validate()?;
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Pre-activations `X Wᵀ + b` for a batch.
    fn pre_activation(&self, input: &Matrix) -> Matrix {
        let mut z = Matrix::zeros(input.rows(), self.out_dim());
        for i in 0..z.rows() {
            z.row_mut(i).copy_from_slice(&self.bias);
        }
        gemm(input, false, &self.weights, true, 1.0, &mut z);
        z
    }

    fn activate(&self, pre: &Matrix) -> Matrix {
        let act = self.activation;
        let data = pre.as_slice().iter().map(|&z| act.apply(z)).collect();
        Matrix::from_raw(pre.rows(), pre.cols(), data)
    }
}

/// Per-layer parameter gradients, laid out like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<LayerGrads>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrads {
                    weights: Matrix::zeros(l.out_dim(), l.in_dim()),
                    bias: vec![0.0; l.out_dim()],
                })
                .collect(),
        }
    }

    pub fn accumulate(&mut self, other: &MlpGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.add_scaled(&b.weights, 1.0);
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
    }

    /// Flat views in parameter order (`W₀, b₀, W₁, b₁, …`).
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

/// Activations retained from a forward pass, consumed by [`Mlp::backward_cached`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `inputs[k]` is the input to layer `k`; the final entry is the network output.
    activations: Vec<Matrix>,
    pre_activations: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("cache holds at least the input")
    }

    pub fn input(&self) -> &Matrix {
        &self.activations[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("a network needs at least one layer".into()));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Shape(format!(
                    "layer {k} emits {} values but layer {} expects {}",
                    pair[0].out_dim(),
                    k + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Random network with `dims = [in, hidden…, out]`: `hidden` activation on
    /// every layer except the last, which uses `output`.
    pub fn init(
        dims: &[usize],
        hidden: Activation,
        output: Activation,
        init: Init,
        rng: &mut Rng,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config(format!(
                "network dims need an input and an output, got {dims:?}"
            )));
        }
        if dims.contains(&0) {
            return Err(Error::Config(format!("zero-width layer in {dims:?}")));
        }
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let std = init.std_dev(fan_in, fan_out);
                let mut weights = rng.gaussian(fan_out, fan_in);
                weights.as_mut_slice().iter_mut().for_each(|v| *v *= std);
                let act = if k == last { output } else { hidden };
                DenseLayer::new(weights, vec![0.0; fan_out], act)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.in_dim() * l.out_dim() + l.out_dim())
            .sum()
    }

    /// Mutable flat views in parameter order (`W₀, b₀, W₁, b₁, …`).
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                let DenseLayer { weights, bias, .. } = l;
                [weights.as_mut_slice(), bias.as_mut_slice()]
            })
            .collect()
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn check_input(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "network expects {} inputs, batch has {} columns",
                self.input_dim(),
                batch.cols()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_input(batch)?;
        let mut a = self.layers[0].activate(&self.layers[0].pre_activation(batch));
        for layer in &self.layers[1..] {
            a = layer.activate(&layer.pre_activation(&a));
        }
        Ok(a)
    }

    /// Single-point convenience wrapper around [`Mlp::forward`].
    pub fn forward_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(&Matrix::row_vector(x))?.into_vec())
    }

    pub fn forward_cached(&self, batch: &Matrix) -> Result<ForwardCache> {
        self.check_input(batch)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        activations.push(batch.clone());
        for layer in &self.layers {
            let z = layer.pre_activation(activations.last().unwrap());
            activations.push(layer.activate(&z));
            pre_activations.push(z);
        }
        Ok(ForwardCache {
            activations,
            pre_activations,
        })
    }

    /// Gradients of a loss whose derivative with respect to the network
    /// output is `upstream`. Returns parameter and input gradients.
    pub fn backward(&self, batch: &Matrix, upstream: &Matrix) -> Result<(MlpGrads, Matrix)> {
        let cache = self.forward_cached(batch)?;
        self.backward_cached(&cache, upstream)
    }

    pub fn backward_cached(
        &self,
        cache: &ForwardCache,
        upstream: &Matrix,
    ) -> Result<(MlpGrads, Matrix)> {
        let out = cache.output();
        if upstream.shape() != out.shape() {
            return Err(Error::Shape(format!(
                "upstream gradient is {}x{}, network output is {}x{}",
                upstream.rows(),
                upstream.cols(),
                out.rows(),
                out.cols()
            )));
        }
        let mut layer_grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.clone();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let act = layer.activation;
            // dL/dZ = dL/dY ⊙ act'(Z)
            for (d, &z) in delta
                .as_mut_slice()
                .iter_mut()
                .zip(cache.pre_activations[k].as_slice())
            {
                *d *= act.derivative(z);
            }
            let input = &cache.activations[k];
            let mut gw = Matrix::zeros(layer.out_dim(), layer.in_dim());
            gemm(&delta, true, input, false, 0.0, &mut gw);
            let mut gb = vec![0.0; layer.out_dim()];
            for row in delta.iter_rows() {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            let mut next = Matrix::zeros(delta.rows(), layer.in_dim());
            gemm(&delta, false, &layer.weights, false, 0.0, &mut next);
            layer_grads.push(LayerGrads {
                weights: gw,
                bias: gb,
            });
            delta = next;
        }
        layer_grads.reverse();
        Ok((
            MlpGrads {
                layers: layer_grads,
            },
            delta,
        ))
    }

    /// Forward-mode pass: pushes each row of `tangents` through the network
    /// linearized at `x`. Returns `f(x)` and the directional derivatives,
    /// one row per tangent.
    pub fn jvp(&self, x: &[f64], tangents: &Matrix) -> Result<(Vec<f64>, Matrix)> {
        if x.len() != self.input_dim() || tangents.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "jvp at a point of length {} with {}-wide tangents on a {}-input network",
                x.len(),
                tangents.cols(),
                self.input_dim()
            )));
        }
        let mut a = Matrix::row_vector(x);
        let mut t = tangents.clone();
        for layer in &self.layers {
            let z = layer.pre_activation(&a);
            let mut tz = Matrix::zeros(t.rows(), layer.out_dim());
            gemm(&t, false, &layer.weights, true, 0.0, &mut tz);
            let act = layer.activation;
            let slopes: Vec<f64> = z.as_slice().iter().map(|&v| act.derivative(v)).collect();
            for i in 0..tz.rows() {
                for (v, s) in tz.row_mut(i).iter_mut().zip(&slopes) {
                    *v *= s;
                }
            }
            a = layer.activate(&z);
            t = tz;
        }
        Ok((a.into_vec(), t))
    }

    /// Jacobian `J[i][j] = ∂f_i/∂x_j` at `x`, built from `input_dim`
    /// forward-mode passes. Also returns `f(x)`.
    pub fn jacobian_with_value(&self, x: &[f64]) -> Result<(Vec<f64>, Matrix)> {
        let (value, t) = self.jvp(x, &Matrix::identity(self.input_dim()))?;
        Ok((value, t.transpose()))
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<Matrix> {
        Ok(self.jacobian_with_value(x)?.1)
    }

    /// Same Jacobian via `output_dim` reverse-mode passes.
    pub fn jacobian_reverse(&self, x: &[f64]) -> Result<Matrix> {
        let n = self.output_dim();
        let mut batch = Matrix::zeros(n, x.len());
        for i in 0..n {
            batch.row_mut(i).copy_from_slice(x);
        }
        let (_, input_grads) = self.backward(&batch, &Matrix::identity(n))?;
        Ok(input_grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn linear(w: Vec<Vec<f64>>, b: Vec<f64>) -> Mlp {
        let layer =
            DenseLayer::new(Matrix::from_rows(&w).unwrap(), b, Activation::Identity).unwrap();
        Mlp::new(vec![layer]).unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = linear(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]);
        assert_eq!(net.forward_point(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn leaky_relu_negative_branch() {
        assert_eq!(Activation::LeakyRelu(0.2).apply(-1.0), -0.2);
        assert_eq!(Activation::LeakyRelu(0.2).apply(3.0), 3.0);
        assert!(Activation::LeakyRelu(1.5).validate().is_err());
        assert!(Activation::LeakyRelu(0.0).validate().is_err());
    }

    #[test]
    fn zero_input_follows_bias_path() {
        let mut rng = Rng::new(42, Stream::Init);
        let mut net = Mlp::init(
            &[3, 4, 2],
            Activation::LeakyRelu(0.2),
            Activation::Identity,
            Init::HeNormal,
            &mut rng,
        )
        .unwrap();
        // give the biases values so the path is non-trivial
        for (i, s) in net.param_slices_mut().into_iter().enumerate() {
            if i % 2 == 1 {
                for (j, v) in s.iter_mut().enumerate() {
                    *v = 0.3 * j as f64 - 0.4;
                }
            }
        }
        let out = net.forward_point(&[0.0, 0.0, 0.0]).unwrap();

        // hand-unrolled: h = leaky(b0), y = W1 h + b1
        let l0 = &net.layers()[0];
        let l1 = &net.layers()[1];
        let h: Vec<f64> = l0
            .bias()
            .iter()
            .map(|&b| if b > 0.0 { b } else { 0.2 * b })
            .collect();
        for i in 0..2 {
            let mut y = l1.bias()[i];
            for j in 0..4 {
                y += l1.weights()[(i, j)] * h[j];
            }
            assert!((out[i] - y).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_shape_mismatch() {
        let net = linear(vec![vec![1.0, 0.0]], vec![0.0]);
        assert!(matches!(
            net.forward(&Matrix::zeros(1, 3)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn linear_backward_matches_closed_form() {
        // y = W x, loss = y, upstream 1 -> dW = xᵀ, dx = W
        let net = linear(vec![vec![2.0, -3.0]], vec![0.0]);
        let x = Matrix::row_vector(&[0.5, 4.0]);
        let (grads, dx) = net.backward(&x, &Matrix::row_vector(&[1.0])).unwrap();
        assert_eq!(grads.layers[0].weights.as_slice(), &[0.5, 4.0]);
        assert_eq!(grads.layers[0].bias, vec![1.0]);
        assert_eq!(dx.as_slice(), &[2.0, -3.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = Rng::new(1, Stream::Init);
        let net = Mlp::init(
            &[3, 5, 2],
            Activation::LeakyRelu(0.2),
            Activation::Sigmoid,
            Init::HeNormal,
            &mut rng,
        )
        .unwrap();
        let x = rng.gaussian(4, 3);
        let (grads, dx) = net.backward(&x, &Matrix::zeros(4, 2)).unwrap();
        assert!(grads.slices().iter().all(|s| s.iter().all(|&v| v == 0.0)));
        assert!(dx.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn jacobian_of_affine_map_is_weight_matrix() {
        let w = vec![vec![1.0, 2.0], vec![-0.5, 0.25], vec![3.0, 0.0]];
        let net = linear(w.clone(), vec![1.0, 2.0, 3.0]);
        let j = net.jacobian(&[0.3, -0.7]).unwrap();
        assert_eq!(j, Matrix::from_rows(&w).unwrap());
    }

    #[test]
    fn leaky_layer_in_active_region_has_weight_jacobian() {
        let w = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.2, 1.0]]).unwrap();
        let layer = DenseLayer::new(w.clone(), vec![1.0, 1.0], Activation::LeakyRelu(0.2)).unwrap();
        let net = Mlp::new(vec![layer]).unwrap();
        // all pre-activations positive at this point
        assert_eq!(net.jacobian(&[0.5, 0.5]).unwrap(), w);
    }

    #[test]
    fn init_shapes_and_determinism() {
        let make = || {
            let mut rng = Rng::new(5, Stream::Init);
            Mlp::init(
                &[2, 4, 1],
                Activation::LeakyRelu(0.2),
                Activation::Identity,
                Init::HeNormal,
                &mut rng,
            )
            .unwrap()
        };
        let a = make();
        let b = make();
        assert_eq!(a, b);
        assert_eq!(a.layers()[0].weights().shape(), (4, 2));
        assert_eq!(a.layers()[1].weights().shape(), (1, 4));
        assert!(a.layers().iter().all(|l| l.bias().iter().all(|&v| v == 0.0)));

        let mut rng = Rng::new(5, Stream::Init);
        assert!(matches!(
            Mlp::init(&[], Activation::Identity, Activation::Identity, Init::HeNormal, &mut rng),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn he_init_variance() {
        let mut rng = Rng::new(17, Stream::Init);
        let net = Mlp::init(
            &[50, 2000],
            Activation::LeakyRelu(0.2),
            Activation::Identity,
            Init::HeNormal,
            &mut rng,
        )
        .unwrap();
        let w = net.layers()[0].weights().as_slice();
        assert_eq!(w.len(), 100_000);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (w.len() - 1) as f64;
        let target = 2.0 / 50.0;
        assert!((var - target).abs() / target < 0.2, "var {var} target {target}");
    }
}
