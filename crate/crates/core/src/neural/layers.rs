//! Layer kinds and their batched forward/backward passes.
//!
//! Activations are flat buffers holding `n` samples back to back, each with
//! the per-sample shape the layer expects. Reductions accumulate in `f64`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub n_in: usize,
    pub n_out: usize,
    /// `n_out x n_in` weights (row-major) followed by `n_out` biases.
    pub params: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    /// `c_out x c_in x k x k` weights followed by `c_out` biases.
    pub params: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    pub channels: usize,
    /// `gamma` then `beta`, one per channel.
    pub params: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub momentum: T,
    pub eps: T,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    Dense(Dense<T>),
    Conv2d(Conv2d<T>),
    BatchNorm(BatchNorm<T>),
    Relu,
    Flatten,
}

/// Uniform He initialisation bound for ReLU networks.
fn he_bound(fan_in: usize) -> f64 {
    (6.0 / fan_in.max(1) as f64).sqrt()
}

impl<T: Scalar> Dense<T> {
    pub fn new<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let b = he_bound(n_in);
        let mut params: Vec<T> = (0..n_in * n_out).map(|_| T::lit(rng.gen_range(-b..b))).collect();
        params.extend(std::iter::repeat_n(T::zero(), n_out));
        Self { n_in, n_out, params }
    }

    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self { n_in, n_out, params: vec![T::zero(); n_in * n_out + n_out] }
    }

    pub fn weights(&self) -> &[T] {
        &self.params[..self.n_in * self.n_out]
    }

    pub fn bias(&self) -> &[T] {
        &self.params[self.n_in * self.n_out..]
    }

    fn forward(&self, x: &[T], n: usize) -> Vec<T> {
        let (w, b) = (self.weights(), self.bias());
        let mut out = Vec::with_capacity(n * self.n_out);
        for xs in x.chunks_exact(self.n_in).take(n) {
            for o in 0..self.n_out {
                let row = &w[o * self.n_in..(o + 1) * self.n_in];
                let acc: f64 = row.iter().zip(xs).map(|(a, c)| a.as_f64() * c.as_f64()).sum();
                out.push(T::lit(acc + b[o].as_f64()));
            }
        }
        out
    }

    fn backward(&self, x: &[T], g: &[T], n: usize) -> (Vec<T>, Vec<T>) {
        let w = self.weights();
        let mut gp = vec![0.0f64; self.params.len()];
        let mut gx = vec![T::zero(); n * self.n_in];
        let wlen = self.n_in * self.n_out;
        for s in 0..n {
            let xs = &x[s * self.n_in..(s + 1) * self.n_in];
            let gs = &g[s * self.n_out..(s + 1) * self.n_out];
            let gxs = &mut gx[s * self.n_in..(s + 1) * self.n_in];
            let mut gx_acc = vec![0.0f64; self.n_in];
            for (o, go) in gs.iter().enumerate() {
                let go = go.as_f64();
                if go == 0.0 {
                    continue;
                }
                gp[wlen + o] += go;
                let row = &w[o * self.n_in..(o + 1) * self.n_in];
                let grow = &mut gp[o * self.n_in..(o + 1) * self.n_in];
                for i in 0..self.n_in {
                    grow[i] += go * xs[i].as_f64();
                    gx_acc[i] += go * row[i].as_f64();
                }
            }
            for (dst, v) in gxs.iter_mut().zip(gx_acc) {
                *dst = T::lit(v);
            }
        }
        (gx, gp.into_iter().map(T::lit).collect())
    }
}

impl<T: Scalar> Conv2d<T> {
    pub fn new<R: Rng + ?Sized>(
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        rng: &mut R,
    ) -> Self {
        let fan_in = c_in * kernel * kernel;
        let b = he_bound(fan_in);
        let mut params: Vec<T> = (0..c_out * fan_in).map(|_| T::lit(rng.gen_range(-b..b))).collect();
        params.extend(std::iter::repeat_n(T::zero(), c_out));
        Self { c_in, c_out, kernel, stride, pad, params }
    }

    fn weight_len(&self) -> usize {
        self.c_out * self.c_in * self.kernel * self.kernel
    }

    pub fn out_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let (hp, wp) = (h + 2 * self.pad, w + 2 * self.pad);
        if self.stride == 0 || hp < self.kernel || wp < self.kernel {
            return None;
        }
        Some(((hp - self.kernel) / self.stride + 1, (wp - self.kernel) / self.stride + 1))
    }

    /// Input coordinate for output `o` and kernel tap `k`, if inside.
    fn tap(&self, o: usize, k: usize, len: usize) -> Option<usize> {
        let i = (o * self.stride + k) as isize - self.pad as isize;
        (i >= 0 && (i as usize) < len).then_some(i as usize)
    }

    fn forward(&self, x: &[T], n: usize, h: usize, w: usize) -> Vec<T> {
        let (ho, wo) = self.out_hw(h, w).expect("validated shape");
        let k = self.kernel;
        let (wts, bias) = self.params.split_at(self.weight_len());
        let mut out = vec![T::zero(); n * self.c_out * ho * wo];
        for s in 0..n {
            let xs = &x[s * self.c_in * h * w..(s + 1) * self.c_in * h * w];
            for co in 0..self.c_out {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut acc = bias[co].as_f64();
                        for ci in 0..self.c_in {
                            for ky in 0..k {
                                let Some(iy) = self.tap(oy, ky, h) else { continue };
                                for kx in 0..k {
                                    let Some(ix) = self.tap(ox, kx, w) else { continue };
                                    let wv = wts[((co * self.c_in + ci) * k + ky) * k + kx];
                                    acc += wv.as_f64() * xs[(ci * h + iy) * w + ix].as_f64();
                                }
                            }
                        }
                        out[((s * self.c_out + co) * ho + oy) * wo + ox] = T::lit(acc);
                    }
                }
            }
        }
        out
    }

    fn backward(&self, x: &[T], g: &[T], n: usize, h: usize, w: usize) -> (Vec<T>, Vec<T>) {
        let (ho, wo) = self.out_hw(h, w).expect("validated shape");
        let k = self.kernel;
        let wl = self.weight_len();
        let wts = &self.params[..wl];
        let mut gp = vec![0.0f64; self.params.len()];
        let mut gx = vec![0.0f64; n * self.c_in * h * w];
        for s in 0..n {
            let xs = &x[s * self.c_in * h * w..(s + 1) * self.c_in * h * w];
            let gxs = &mut gx[s * self.c_in * h * w..(s + 1) * self.c_in * h * w];
            for co in 0..self.c_out {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let go = g[((s * self.c_out + co) * ho + oy) * wo + ox].as_f64();
                        if go == 0.0 {
                            continue;
                        }
                        gp[wl + co] += go;
                        for ci in 0..self.c_in {
                            for ky in 0..k {
                                let Some(iy) = self.tap(oy, ky, h) else { continue };
                                for kx in 0..k {
                                    let Some(ix) = self.tap(ox, kx, w) else { continue };
                                    let wi = ((co * self.c_in + ci) * k + ky) * k + kx;
                                    let xi = (ci * h + iy) * w + ix;
                                    gp[wi] += go * xs[xi].as_f64();
                                    gxs[xi] += go * wts[wi].as_f64();
                                }
                            }
                        }
                    }
                }
            }
        }
        (gx.into_iter().map(T::lit).collect(), gp.into_iter().map(T::lit).collect())
    }
}

/// Per-channel statistics of one training batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct BnCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(channels: usize) -> Self {
        let mut params = vec![T::one(); channels];
        params.extend(std::iter::repeat_n(T::zero(), channels));
        Self {
            channels,
            params,
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            momentum: T::lit(0.1),
            eps: T::lit(1e-5),
        }
    }

    fn gamma(&self) -> &[T] {
        &self.params[..self.channels]
    }

    fn beta(&self) -> &[T] {
        &self.params[self.channels..]
    }

    fn forward_infer(&self, x: &[T], n: usize, spatial: usize) -> Vec<T> {
        let c = self.channels;
        let mut out = Vec::with_capacity(x.len());
        for s in 0..n {
            for ch in 0..c {
                let inv = 1.0 / (self.running_var[ch].as_f64() + self.eps.as_f64()).sqrt();
                let (g, b, m) = (self.gamma()[ch].as_f64(), self.beta()[ch].as_f64(), self.running_mean[ch].as_f64());
                for i in 0..spatial {
                    let v = x[(s * c + ch) * spatial + i].as_f64();
                    out.push(T::lit(g * (v - m) * inv + b));
                }
            }
        }
        out
    }

    fn forward_train(&self, x: &[T], n: usize, spatial: usize) -> (Vec<T>, BnCache, BatchStats<T>) {
        let c = self.channels;
        let m = (n * spatial) as f64;
        let mut mean = vec![0.0f64; c];
        let mut var = vec![0.0f64; c];
        for s in 0..n {
            for ch in 0..c {
                for i in 0..spatial {
                    mean[ch] += x[(s * c + ch) * spatial + i].as_f64();
                }
            }
        }
        mean.iter_mut().for_each(|v| *v /= m);
        for s in 0..n {
            for ch in 0..c {
                for i in 0..spatial {
                    let d = x[(s * c + ch) * spatial + i].as_f64() - mean[ch];
                    var[ch] += d * d;
                }
            }
        }
        var.iter_mut().for_each(|v| *v /= m);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps.as_f64()).sqrt()).collect();
        let mut xhat = vec![0.0f64; x.len()];
        let mut out = vec![T::zero(); x.len()];
        for s in 0..n {
            for ch in 0..c {
                for i in 0..spatial {
                    let idx = (s * c + ch) * spatial + i;
                    let xh = (x[idx].as_f64() - mean[ch]) * inv_std[ch];
                    xhat[idx] = xh;
                    out[idx] = T::lit(self.gamma()[ch].as_f64() * xh + self.beta()[ch].as_f64());
                }
            }
        }
        let stats = BatchStats {
            mean: mean.into_iter().map(T::lit).collect(),
            var: var.into_iter().map(T::lit).collect(),
            count: n * spatial,
        };
        (out, BnCache { xhat, inv_std }, stats)
    }

    fn backward(&self, cache: &BnCache, g: &[T], n: usize, spatial: usize) -> (Vec<T>, Vec<T>) {
        let c = self.channels;
        let m = (n * spatial) as f64;
        let mut sum_g = vec![0.0f64; c];
        let mut sum_gx = vec![0.0f64; c];
        for s in 0..n {
            for ch in 0..c {
                for i in 0..spatial {
                    let idx = (s * c + ch) * spatial + i;
                    let gv = g[idx].as_f64();
                    sum_g[ch] += gv;
                    sum_gx[ch] += gv * cache.xhat[idx];
                }
            }
        }
        let mut gx = vec![T::zero(); g.len()];
        for s in 0..n {
            for ch in 0..c {
                let scale = self.gamma()[ch].as_f64() * cache.inv_std[ch] / m;
                for i in 0..spatial {
                    let idx = (s * c + ch) * spatial + i;
                    let v = m * g[idx].as_f64() - sum_g[ch] - cache.xhat[idx] * sum_gx[ch];
                    gx[idx] = T::lit(scale * v);
                }
            }
        }
        let mut gp: Vec<T> = sum_gx.into_iter().map(T::lit).collect();
        gp.extend(sum_g.into_iter().map(T::lit));
        (gx, gp)
    }

    /// Fold one batch's statistics into the running estimates.
    pub fn update_running(&mut self, stats: &BatchStats<T>) {
        let mom = self.momentum.as_f64();
        let unbias = if stats.count > 1 { stats.count as f64 / (stats.count - 1) as f64 } else { 1.0 };
        for ch in 0..self.channels {
            let rm = self.running_mean[ch].as_f64();
            let rv = self.running_var[ch].as_f64();
            self.running_mean[ch] = T::lit((1.0 - mom) * rm + mom * stats.mean[ch].as_f64());
            self.running_var[ch] = T::lit((1.0 - mom) * rv + mom * stats.var[ch].as_f64() * unbias);
        }
    }
}

/// What a layer remembers from the forward pass besides its input.
#[derive(Debug, Clone)]
pub(crate) enum Cache<T> {
    None,
    BatchNorm(BnCache, BatchStats<T>),
}

impl<T: Scalar> Layer<T> {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Conv2d(_) => "conv2d",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::Relu => "relu",
            Layer::Flatten => "flatten",
        }
    }

    pub fn params(&self) -> &[T] {
        match self {
            Layer::Dense(d) => &d.params,
            Layer::Conv2d(c) => &c.params,
            Layer::BatchNorm(b) => &b.params,
            Layer::Relu | Layer::Flatten => &[],
        }
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        match self {
            Layer::Dense(d) => &mut d.params,
            Layer::Conv2d(c) => &mut c.params,
            Layer::BatchNorm(b) => &mut b.params,
            Layer::Relu | Layer::Flatten => &mut [],
        }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mismatch = |expected: Vec<usize>| Err(Error::Shape { expected, got: input.to_vec() });
        match self {
            Layer::Dense(d) => {
                if input != [d.n_in] {
                    return mismatch(vec![d.n_in]);
                }
                Ok(vec![d.n_out])
            }
            Layer::Conv2d(c) => match input {
                [ch, h, w] if *ch == c.c_in => match c.out_hw(*h, *w) {
                    Some((ho, wo)) => Ok(vec![c.c_out, ho, wo]),
                    None => mismatch(vec![c.c_in, c.kernel, c.kernel]),
                },
                _ => mismatch(vec![c.c_in, 0, 0]),
            },
            Layer::BatchNorm(b) => match input.first() {
                Some(&ch) if ch == b.channels => Ok(input.to_vec()),
                _ => mismatch(vec![b.channels]),
            },
            Layer::Relu => Ok(input.to_vec()),
            Layer::Flatten => Ok(vec![input.iter().product()]),
        }
    }

    pub(crate) fn forward(&self, x: &[T], n: usize, in_shape: &[usize], train: bool) -> (Vec<T>, Cache<T>) {
        match self {
            Layer::Dense(d) => (d.forward(x, n), Cache::None),
            Layer::Conv2d(c) => (c.forward(x, n, in_shape[1], in_shape[2]), Cache::None),
            Layer::BatchNorm(b) => {
                let spatial: usize = in_shape[1..].iter().product();
                if train {
                    let (out, cache, stats) = b.forward_train(x, n, spatial);
                    (out, Cache::BatchNorm(cache, stats))
                } else {
                    (b.forward_infer(x, n, spatial), Cache::None)
                }
            }
            Layer::Relu => (x.iter().map(|v| v.max(T::zero())).collect(), Cache::None),
            Layer::Flatten => (x.to_vec(), Cache::None),
        }
    }

    /// Returns `(dL/dx, dL/dparams)` given the layer input and `dL/dy`.
    pub(crate) fn backward(
        &self,
        x: &[T],
        cache: &Cache<T>,
        g: &[T],
        n: usize,
        in_shape: &[usize],
    ) -> (Vec<T>, Vec<T>) {
        match self {
            Layer::Dense(d) => d.backward(x, g, n),
            Layer::Conv2d(c) => c.backward(x, g, n, in_shape[1], in_shape[2]),
            Layer::BatchNorm(b) => {
                let spatial: usize = in_shape[1..].iter().product();
                match cache {
                    Cache::BatchNorm(bc, _) => b.backward(bc, g, n, spatial),
                    Cache::None => {
                        // Inference-mode normalisation is a fixed affine map.
                        let c = b.channels;
                        let mut gx = vec![T::zero(); g.len()];
                        let mut gp = vec![0.0f64; 2 * c];
                        for s in 0..n {
                            for ch in 0..c {
                                let inv = 1.0 / (b.running_var[ch].as_f64() + b.eps.as_f64()).sqrt();
                                for i in 0..spatial {
                                    let idx = (s * c + ch) * spatial + i;
                                    let gv = g[idx].as_f64();
                                    let xh = (x[idx].as_f64() - b.running_mean[ch].as_f64()) * inv;
                                    gp[ch] += gv * xh;
                                    gp[c + ch] += gv;
                                    gx[idx] = T::lit(gv * b.gamma()[ch].as_f64() * inv);
                                }
                            }
                        }
                        (gx, gp.into_iter().map(T::lit).collect())
                    }
                }
            }
            Layer::Relu => {
                (x.iter().zip(g).map(|(xv, gv)| if *xv > T::zero() { *gv } else { T::zero() }).collect(), Vec::new())
            }
            Layer::Flatten => (g.to_vec(), Vec::new()),
        }
    }
}
