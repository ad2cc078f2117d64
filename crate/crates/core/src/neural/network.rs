use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{Extra, Layer};
use super::spec::NetworkSpec;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Parameter gradients, one flat block per layer (weights then biases).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<f64>>);

impl Gradients {
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone)]
struct Trace {
    /// Input of every layer followed by the network output.
    activations: Vec<Tensor>,
    extras: Vec<Extra>,
}

/// A layer stack with its parameters and the trace of the last training pass.
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    layers: Vec<Layer>,
    dropout_rng: ChaCha8Rng,
    trace: Option<Trace>,
}

impl Network {
    /// Builds the network with seeded He/Glorot-uniform initialization.
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self> {
        let shapes = spec.shapes()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut in_shape = spec.input_shape.clone();
        let mut layers = Vec::with_capacity(spec.layers.len());
        for (l, out) in spec.layers.iter().zip(shapes) {
            layers.push(Layer::new(l.clone(), in_shape, out.clone(), &mut rng));
            in_shape = out;
        }
        let mut dropout_rng = ChaCha8Rng::seed_from_u64(seed);
        dropout_rng.set_stream(1);
        Ok(Self { spec, layers, dropout_rng, trace: None })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    /// Per-layer parameter blocks.
    pub fn params(&self) -> Vec<&[f64]> {
        self.layers.iter().map(|l| l.params.as_slice()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        self.layers.iter_mut().map(|l| &mut l.params).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub(crate) fn set_params(&mut self, blocks: Vec<Vec<f64>>) -> Result<()> {
        if blocks.len() != self.layers.len() {
            return Err(Error::Checkpoint(format!(
                "{} parameter blocks for {} layers",
                blocks.len(),
                self.layers.len()
            )));
        }
        for (layer, block) in self.layers.iter_mut().zip(blocks) {
            if block.len() != layer.params.len() {
                return Err(Error::Checkpoint(format!(
                    "block of {} values for a layer with {} parameters",
                    block.len(),
                    layer.params.len()
                )));
            }
            layer.params = block;
        }
        Ok(())
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape().len() < 2 || x.shape()[1..] != self.spec.input_shape[..] {
            return Err(Error::Shape(format!(
                "input {:?} does not match [batch, {:?}]",
                x.shape(),
                self.spec.input_shape
            )));
        }
        Ok(())
    }

    /// Forward pass. Training passes draw dropout masks from the network's
    /// own stream and record the trace needed by [`Network::backward`].
    pub fn forward(&mut self, x: &Tensor, training: bool) -> Result<Tensor> {
        if training {
            let mut rng = self.dropout_rng.clone();
            let out = self.forward_with_rng(x, &mut rng);
            self.dropout_rng = rng;
            out
        } else {
            self.trace = None;
            self.predict(x)
        }
    }

    /// Training pass with an explicit dropout-mask stream.
    pub fn forward_with_rng(&mut self, x: &Tensor, rng: &mut dyn RngCore) -> Result<Tensor> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut extras = Vec::with_capacity(self.layers.len());
        activations.push(x.clone());
        for layer in &self.layers {
            let (out, extra) = layer.forward(activations.last().expect("input"), Some(&mut *rng));
            activations.push(out);
            extras.push(extra);
        }
        let out = activations.last().cloned().expect("output");
        self.trace = Some(Trace { activations, extras });
        Ok(out)
    }

    /// Inference pass (no dropout, no trace); safe to share across threads.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = layer.forward(&cur, None).0;
        }
        Ok(cur)
    }

    /// Backpropagates `loss_grad` (gradient w.r.t. the last training output).
    pub fn backward(&mut self, loss_grad: &Tensor) -> Result<Gradients> {
        let trace = self
            .trace
            .take()
            .ok_or_else(|| Error::State("backward called without a preceding training forward pass".into()))?;
        let output = trace.activations.last().expect("output");
        if loss_grad.shape() != output.shape() {
            return Err(Error::Shape(format!("loss gradient {:?} vs output {:?}", loss_grad.shape(), output.shape())));
        }
        let mut grads: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.param_count()]).collect();
        let mut g = loss_grad.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            g = layer.backward(&trace.activations[i], &trace.activations[i + 1], &trace.extras[i], &g, &mut grads[i]);
        }
        Ok(Gradients(grads))
    }
}
