use rand::{Rng, RngCore};

use super::spec::{Activation, LayerSpec};
use super::tensor::Tensor;

/// Per-pass bookkeeping a layer needs for its backward pass, beyond the
/// input and output activations the network keeps anyway.
#[derive(Debug, Clone)]
pub(crate) enum Extra {
    None,
    /// Flat input index of each pooled maximum.
    Argmax(Vec<usize>),
    /// Inverted-dropout multipliers (0 or 1/(1-rate)).
    Mask(Vec<f64>),
}

#[derive(Debug, Clone)]
pub(crate) struct Layer {
    pub spec: LayerSpec,
    pub in_shape: Vec<usize>,
    pub out_shape: Vec<usize>,
    /// Weights followed by biases.
    pub params: Vec<f64>,
}

impl Layer {
    pub fn new(spec: LayerSpec, in_shape: Vec<usize>, out_shape: Vec<usize>, rng: &mut dyn RngCore) -> Self {
        let params = match spec {
            LayerSpec::Dense { units, activation } => {
                let fan_in = in_shape[0];
                init(units * fan_in, units, fan_in, units, activation, rng)
            }
            LayerSpec::Conv { filters, kernel, activation, .. } => {
                let area = kernel[0] * kernel[1];
                let fan_in = in_shape[0] * area;
                init(filters * fan_in, filters, fan_in, filters * area, activation, rng)
            }
            _ => Vec::new(),
        };
        Self { spec, in_shape, out_shape, params }
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn forward(&self, x: &Tensor, rng: Option<&mut dyn RngCore>) -> (Tensor, Extra) {
        let n = x.batch();
        let mut out_shape = vec![n];
        out_shape.extend_from_slice(&self.out_shape);
        match self.spec {
            LayerSpec::Dense { units, activation } => {
                let fan_in = self.in_shape[0];
                let (w, b) = self.params.split_at(units * fan_in);
                let mut out = vec![0.0; n * units];
                for (xs, ys) in x.data().chunks_exact(fan_in).zip(out.chunks_exact_mut(units)) {
                    for (u, y) in ys.iter_mut().enumerate() {
                        *y = b[u] + dot(&w[u * fan_in..(u + 1) * fan_in], xs);
                    }
                }
                activate(&mut out, units, activation);
                (Tensor::new(out_shape, out).expect("dense shape"), Extra::None)
            }
            LayerSpec::Conv { filters, kernel, stride, activation } => {
                let out =
                    conv_forward(x.data(), n, &self.in_shape, &self.out_shape, filters, kernel, stride, &self.params);
                let mut out = out;
                activate(&mut out, self.out_shape.iter().product(), activation);
                (Tensor::new(out_shape, out).expect("conv shape"), Extra::None)
            }
            LayerSpec::MaxPool { window } => {
                let (out, argmax) = pool_forward(x.data(), n, &self.in_shape, &self.out_shape, window);
                (Tensor::new(out_shape, out).expect("pool shape"), Extra::Argmax(argmax))
            }
            LayerSpec::Flatten => (x.clone().reshape(out_shape).expect("flatten shape"), Extra::None),
            LayerSpec::Dropout { rate } => match rng {
                Some(rng) if rate > 0.0 => {
                    let keep = 1.0 / (1.0 - rate);
                    let mask: Vec<f64> =
                        (0..x.len()).map(|_| if rng.random::<f64>() >= rate { keep } else { 0.0 }).collect();
                    let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
                    (Tensor::new(out_shape, data).expect("dropout shape"), Extra::Mask(mask))
                }
                _ => (x.clone(), Extra::None),
            },
        }
    }

    /// Returns the gradient w.r.t. the input; parameter gradients are
    /// accumulated into `grads` (same layout as `params`).
    pub fn backward(
        &self,
        input: &Tensor,
        output: &Tensor,
        extra: &Extra,
        grad_out: &Tensor,
        grads: &mut [f64],
    ) -> Tensor {
        let n = input.batch();
        match self.spec {
            LayerSpec::Dense { units, activation } => {
                let fan_in = self.in_shape[0];
                let delta = activation_backward(output.data(), grad_out.data(), units, activation);
                let (w, _) = self.params.split_at(units * fan_in);
                let (gw, gb) = grads.split_at_mut(units * fan_in);
                let mut gx = vec![0.0; n * fan_in];
                for ((xs, ds), gxs) in
                    input.data().chunks_exact(fan_in).zip(delta.chunks_exact(units)).zip(gx.chunks_exact_mut(fan_in))
                {
                    for (u, &d) in ds.iter().enumerate() {
                        if d == 0.0 {
                            continue;
                        }
                        gb[u] += d;
                        axpy(d, xs, &mut gw[u * fan_in..(u + 1) * fan_in]);
                        axpy(d, &w[u * fan_in..(u + 1) * fan_in], gxs);
                    }
                }
                Tensor::new(input.shape().to_vec(), gx).expect("dense grad shape")
            }
            LayerSpec::Conv { filters, kernel, stride, activation } => {
                let per = self.out_shape.iter().product();
                let delta = activation_backward(output.data(), grad_out.data(), per, activation);
                let gx = conv_backward(
                    input.data(),
                    &delta,
                    n,
                    &self.in_shape,
                    &self.out_shape,
                    filters,
                    kernel,
                    stride,
                    &self.params,
                    grads,
                );
                Tensor::new(input.shape().to_vec(), gx).expect("conv grad shape")
            }
            LayerSpec::MaxPool { .. } => {
                let Extra::Argmax(argmax) = extra else { unreachable!("max pool without argmax") };
                let mut gx = vec![0.0; input.len()];
                for (&idx, &g) in argmax.iter().zip(grad_out.data()) {
                    gx[idx] += g;
                }
                Tensor::new(input.shape().to_vec(), gx).expect("pool grad shape")
            }
            LayerSpec::Flatten => grad_out.clone().reshape(input.shape().to_vec()).expect("flatten grad"),
            LayerSpec::Dropout { .. } => match extra {
                Extra::Mask(mask) => {
                    let data = grad_out.data().iter().zip(mask).map(|(g, m)| g * m).collect();
                    Tensor::new(input.shape().to_vec(), data).expect("dropout grad")
                }
                _ => grad_out.clone(),
            },
        }
    }
}

fn init(
    weights: usize,
    biases: usize,
    fan_in: usize,
    fan_out: usize,
    a: Activation,
    rng: &mut dyn RngCore,
) -> Vec<f64> {
    // He-uniform for ReLU, Glorot-uniform otherwise.
    let limit = match a {
        Activation::Relu => (6.0 / fan_in as f64).sqrt(),
        Activation::Linear | Activation::Softmax => (6.0 / (fan_in + fan_out) as f64).sqrt(),
    };
    let mut p: Vec<f64> = (0..weights).map(|_| rng.random_range(-limit..limit)).collect();
    p.extend(std::iter::repeat_n(0.0, biases));
    p
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn activate(values: &mut [f64], per_sample: usize, a: Activation) {
    match a {
        Activation::Linear => {}
        Activation::Relu => values.iter_mut().for_each(|v| *v = v.max(0.0)),
        Activation::Softmax => values.chunks_exact_mut(per_sample).for_each(softmax_in_place),
    }
}

pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Gradient w.r.t. pre-activations given the activated output.
fn activation_backward(out: &[f64], g: &[f64], per_sample: usize, a: Activation) -> Vec<f64> {
    match a {
        Activation::Linear => g.to_vec(),
        Activation::Relu => out.iter().zip(g).map(|(&y, &g)| if y > 0.0 { g } else { 0.0 }).collect(),
        Activation::Softmax => {
            let mut d = vec![0.0; g.len()];
            for ((ys, gs), ds) in
                out.chunks_exact(per_sample).zip(g.chunks_exact(per_sample)).zip(d.chunks_exact_mut(per_sample))
            {
                let s = dot(ys, gs);
                for ((dv, &y), &gv) in ds.iter_mut().zip(ys).zip(gs) {
                    *dv = y * (gv - s);
                }
            }
            d
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_forward(
    x: &[f64],
    n: usize,
    in_shape: &[usize],
    out_shape: &[usize],
    filters: usize,
    kernel: [usize; 2],
    stride: usize,
    params: &[f64],
) -> Vec<f64> {
    let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
    let (oh, ow) = (out_shape[1], out_shape[2]);
    let [kh, kw] = kernel;
    let wlen = filters * c * kh * kw;
    let (wt, b) = params.split_at(wlen);
    let mut out = vec![0.0; n * filters * oh * ow];
    for s in 0..n {
        let xs = &x[s * c * h * w..(s + 1) * c * h * w];
        for f in 0..filters {
            for r in 0..oh {
                for q in 0..ow {
                    let mut acc = b[f];
                    for ci in 0..c {
                        for i in 0..kh {
                            let xrow = &xs[(ci * h + r * stride + i) * w + q * stride..][..kw];
                            let wrow = &wt[((f * c + ci) * kh + i) * kw..][..kw];
                            acc += dot(xrow, wrow);
                        }
                    }
                    out[((s * filters + f) * oh + r) * ow + q] = acc;
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    x: &[f64],
    delta: &[f64],
    n: usize,
    in_shape: &[usize],
    out_shape: &[usize],
    filters: usize,
    kernel: [usize; 2],
    stride: usize,
    params: &[f64],
    grads: &mut [f64],
) -> Vec<f64> {
    let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
    let (oh, ow) = (out_shape[1], out_shape[2]);
    let [kh, kw] = kernel;
    let wlen = filters * c * kh * kw;
    let wt = &params[..wlen];
    let (gw, gb) = grads.split_at_mut(wlen);
    let mut gx = vec![0.0; x.len()];
    for s in 0..n {
        let base = s * c * h * w;
        for f in 0..filters {
            for r in 0..oh {
                for q in 0..ow {
                    let d = delta[((s * filters + f) * oh + r) * ow + q];
                    if d == 0.0 {
                        continue;
                    }
                    gb[f] += d;
                    for ci in 0..c {
                        for i in 0..kh {
                            let xoff = base + (ci * h + r * stride + i) * w + q * stride;
                            let woff = ((f * c + ci) * kh + i) * kw;
                            for j in 0..kw {
                                gw[woff + j] += d * x[xoff + j];
                                gx[xoff + j] += d * wt[woff + j];
                            }
                        }
                    }
                }
            }
        }
    }
    gx
}

fn pool_forward(
    x: &[f64],
    n: usize,
    in_shape: &[usize],
    out_shape: &[usize],
    window: [usize; 2],
) -> (Vec<f64>, Vec<usize>) {
    let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
    let (oh, ow) = (out_shape[1], out_shape[2]);
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut arg = Vec::with_capacity(n * c * oh * ow);
    for s in 0..n {
        for ci in 0..c {
            let base = (s * c + ci) * h * w;
            for r in 0..oh {
                for q in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = usize::MAX;
                    for i in 0..window[0] {
                        for j in 0..window[1] {
                            let idx = base + (r * window[0] + i) * w + q * window[1] + j;
                            // Strict comparison keeps the lowest index on ties.
                            if x[idx] > best || best_idx == usize::MAX {
                                best = x[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    out.push(best);
                    arg.push(best_idx);
                }
            }
        }
    }
    (out, arg)
}
