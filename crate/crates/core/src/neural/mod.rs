//! Small differentiable network for action values `Q(s, ·; θ)`.
//!
//! Supports dense and 2D convolution layers, ReLU, flatten and optional
//! batch normalisation, trained with plain gradient descent on the
//! half-squared TD error.

mod io;
mod layers;
mod tensor;

use rand::Rng;

pub use io::{load_weights, read_weights, save_weights, write_weights, WEIGHTS_MAGIC, WEIGHTS_VERSION};
pub use layers::{BatchNorm, BatchStats, Conv2d, Dense, Layer};
pub use tensor::TensorBuf;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use layers::Cache;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch normalisation uses batch statistics and reports them.
    Train,
    /// Batch normalisation uses its running statistics; no state changes.
    Infer,
}

/// Gradient of the loss with respect to every learnable parameter, laid out
/// like [`Layer::params`], plus batch-norm statistics gathered in training
/// mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Vec<T>>,
    pub bn_stats: Vec<Option<BatchStats<T>>>,
    /// Mean half-squared TD error of the batch.
    pub loss: f64,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(net: &QNetwork<T>) -> Self {
        Self {
            layers: net.layers.iter().map(|l| vec![T::zero(); l.params().len()]).collect(),
            bn_stats: vec![None; net.layers.len()],
            loss: 0.0,
        }
    }

    pub fn norm(&self) -> f64 {
        self.layers.iter().flatten().map(|g| g.as_f64().powi(2)).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.layers.iter_mut().flatten() {
            *g = T::lit(g.as_f64() * factor);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.layers.iter().flatten().all(|g| *g == T::zero())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork<T> {
    input_shape: Vec<usize>,
    layers: Vec<Layer<T>>,
    /// Per-sample activation shapes: `shapes[i]` feeds `layers[i]`.
    shapes: Vec<Vec<usize>>,
}

impl<T: Scalar> QNetwork<T> {
    /// Build from explicit layers, checking that shapes chain.
    pub fn from_layers(input_shape: Vec<usize>, layers: Vec<Layer<T>>) -> Result<Self> {
        let mut shapes = vec![input_shape.clone()];
        for (i, layer) in layers.iter().enumerate() {
            let next = layer
                .output_shape(shapes.last().expect("non-empty"))
                .map_err(|e| e.context(format!("layer {i} ({})", layer.kind_name())))?;
            shapes.push(next);
        }
        Ok(Self { input_shape, layers, shapes })
    }

    /// Dense ReLU stack ending in a linear layer with `n_out` outputs.
    pub fn mlp<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], n_out: usize, rng: &mut R) -> Self {
        let mut layers = Vec::new();
        let mut width = input_dim;
        for &h in hidden {
            layers.push(Layer::Dense(Dense::new(width, h, rng)));
            layers.push(Layer::Relu);
            width = h;
        }
        layers.push(Layer::Dense(Self::head(width, n_out, rng)));
        Self::from_layers(vec![input_dim], layers).expect("mlp shapes chain")
    }

    /// `conv(3x3, stride 1, pad 1) [-> BN] -> ReLU` per entry of `channels`,
    /// then flatten, a hidden dense ReLU layer and a linear head.
    pub fn conv<R: Rng + ?Sized>(
        input_shape: [usize; 3],
        channels: &[usize],
        batchnorm: bool,
        hidden: usize,
        n_out: usize,
        rng: &mut R,
    ) -> Self {
        let mut layers = Vec::new();
        let mut c_in = input_shape[0];
        for &c in channels {
            layers.push(Layer::Conv2d(Conv2d::new(c_in, c, 3, 1, 1, rng)));
            if batchnorm {
                layers.push(Layer::BatchNorm(BatchNorm::new(c)));
            }
            layers.push(Layer::Relu);
            c_in = c;
        }
        layers.push(Layer::Flatten);
        let flat = c_in * input_shape[1] * input_shape[2];
        layers.push(Layer::Dense(Dense::new(flat, hidden, rng)));
        layers.push(Layer::Relu);
        layers.push(Layer::Dense(Self::head(hidden, n_out, rng)));
        Self::from_layers(input_shape.to_vec(), layers).expect("conv shapes chain")
    }

    /// Output layer with small weights so initial values are near zero.
    fn head<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Dense<T> {
        let mut d = Dense::new(n_in, n_out, rng);
        let wl = n_in * n_out;
        for w in &mut d.params[..wl] {
            *w *= T::lit(0.1);
        }
        d
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_len(&self) -> usize {
        self.shapes.last().map(|s| s.iter().product()).unwrap_or(0)
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn has_batchnorm(&self) -> bool {
        self.layers.iter().any(|l| matches!(l, Layer::BatchNorm(_)))
    }

    /// Number of learnable scalars (weights, biases, batch-norm affine).
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.params().len()).sum()
    }

    /// Deep copy; later updates to `self` do not affect the copy.
    pub fn clone_params(&self) -> Self {
        self.clone()
    }

    pub fn params_flat(&self) -> Vec<T> {
        self.layers.iter().flat_map(|l| l.params().iter().copied()).collect()
    }

    pub fn set_params_flat(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape { expected: vec![self.param_count()], got: vec![flat.len()] });
        }
        let mut rest = flat;
        for layer in &mut self.layers {
            let p = layer.params_mut();
            let (head, tail) = rest.split_at(p.len());
            p.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    fn check_input(&self, obs: &TensorBuf<T>) -> Result<()> {
        if obs.shape() != self.input_shape.as_slice() {
            return Err(Error::Shape { expected: self.input_shape.clone(), got: obs.shape().to_vec() });
        }
        Ok(())
    }

    fn stack(&self, obs: &[&TensorBuf<T>]) -> Result<Vec<T>> {
        let mut x = Vec::with_capacity(obs.len() * self.input_shape.iter().product::<usize>());
        for o in obs {
            self.check_input(o)?;
            x.extend_from_slice(o.data());
        }
        Ok(x)
    }

    /// Run the layers, keeping every layer input and cache.
    fn run(&self, x: Vec<T>, n: usize, mode: Mode) -> (Vec<Vec<T>>, Vec<Cache<T>>) {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut caches = Vec::with_capacity(self.layers.len());
        acts.push(x);
        for (i, layer) in self.layers.iter().enumerate() {
            let (y, c) = layer.forward(acts.last().expect("non-empty"), n, &self.shapes[i], mode == Mode::Train);
            acts.push(y);
            caches.push(c);
        }
        (acts, caches)
    }

    /// `Q(s, ·; θ)` in inference mode.
    pub fn forward(&self, obs: &TensorBuf<T>) -> Result<Vec<T>> {
        self.check_input(obs)?;
        let (mut acts, _) = self.run(obs.data().to_vec(), 1, Mode::Infer);
        Ok(acts.pop().expect("output"))
    }

    /// Inference for several observations at once.
    pub fn forward_batch(&self, obs: &[&TensorBuf<T>]) -> Result<Vec<Vec<T>>> {
        if obs.is_empty() {
            return Ok(Vec::new());
        }
        let x = self.stack(obs)?;
        let (mut acts, _) = self.run(x, obs.len(), Mode::Infer);
        let out = acts.pop().expect("output");
        Ok(out.chunks_exact(self.output_len()).map(<[T]>::to_vec).collect())
    }

    /// Gradient of `½ (y - Q(s, a; θ))²` for a single sample.
    pub fn backward(&self, obs: &TensorBuf<T>, action: usize, td_target: T) -> Result<Gradients<T>> {
        self.backward_batch(&[(obs, action, td_target)], Mode::Train)
    }

    /// Gradient of the batch mean of `½ (y - Q(s, a; θ))²`.
    ///
    /// Only the selected action's output receives an error signal; the other
    /// outputs influence the result only through shared layers.
    pub fn backward_batch(&self, batch: &[(&TensorBuf<T>, usize, T)], mode: Mode) -> Result<Gradients<T>> {
        if batch.is_empty() {
            return Err(Error::Numeric("empty batch".into()));
        }
        let n = batch.len();
        let n_out = self.output_len();
        for &(_, a, y) in batch {
            if a >= n_out {
                return Err(Error::Shape { expected: vec![n_out], got: vec![a] });
            }
            if !y.is_finite() {
                return Err(Error::Numeric(format!("non-finite TD target {y}")));
            }
        }
        let obs: Vec<&TensorBuf<T>> = batch.iter().map(|b| b.0).collect();
        let x = self.stack(&obs)?;
        let (acts, caches) = self.run(x, n, mode);
        let out = acts.last().expect("output");

        let mut g = vec![T::zero(); n * n_out];
        let mut loss = 0.0f64;
        for (s, &(_, a, y)) in batch.iter().enumerate() {
            let q = out[s * n_out + a].as_f64();
            let residual = q - y.as_f64();
            loss += 0.5 * residual * residual;
            g[s * n_out + a] = T::lit(residual / n as f64);
        }
        loss /= n as f64;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss {loss}")));
        }

        let mut grads = Gradients::zeros_like(self);
        grads.loss = loss;
        for i in (0..self.layers.len()).rev() {
            let (gx, gp) = self.layers[i].backward(&acts[i], &caches[i], &g, n, &self.shapes[i]);
            if !gp.is_empty() {
                grads.layers[i] = gp;
            }
            if let Cache::BatchNorm(_, stats) = &caches[i] {
                grads.bn_stats[i] = Some(stats.clone());
            }
            g = gx;
        }
        Ok(grads)
    }

    /// `θ ← θ - lr ∇`, folding in any batch-norm statistics gathered in
    /// training mode.
    pub fn sgd_step(&mut self, grads: &Gradients<T>, lr: T) {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            for (p, g) in layer.params_mut().iter_mut().zip(&grads.layers[i]) {
                *p -= lr * *g;
            }
            if let (Layer::BatchNorm(bn), Some(stats)) = (layer, &grads.bn_stats[i]) {
                bn.update_running(stats);
            }
        }
    }

    pub fn cast<U: Scalar>(&self) -> QNetwork<U> {
        let c = |v: &[T]| v.iter().map(|x| U::lit(x.as_f64())).collect::<Vec<U>>();
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                Layer::Dense(d) => Layer::Dense(Dense { n_in: d.n_in, n_out: d.n_out, params: c(&d.params) }),
                Layer::Conv2d(k) => Layer::Conv2d(Conv2d {
                    c_in: k.c_in,
                    c_out: k.c_out,
                    kernel: k.kernel,
                    stride: k.stride,
                    pad: k.pad,
                    params: c(&k.params),
                }),
                Layer::BatchNorm(b) => Layer::BatchNorm(BatchNorm {
                    channels: b.channels,
                    params: c(&b.params),
                    running_mean: c(&b.running_mean),
                    running_var: c(&b.running_var),
                    momentum: U::lit(b.momentum.as_f64()),
                    eps: U::lit(b.eps.as_f64()),
                }),
                Layer::Relu => Layer::Relu,
                Layer::Flatten => Layer::Flatten,
            })
            .collect();
        QNetwork { input_shape: self.input_shape.clone(), layers, shapes: self.shapes.clone() }
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
