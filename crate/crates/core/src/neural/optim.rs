use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::Loss;
use super::network::{Gradients, Network};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Minibatch SGD settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub minibatch_size: usize,
    pub epochs: usize,
    /// Multiplicative learning-rate decay applied after every epoch.
    pub lr_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.01, momentum: 0.9, minibatch_size: 50, epochs: 10, lr_decay: 1.0, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument(format!("momentum {}", self.momentum)));
        }
        if self.minibatch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidArgument("minibatch size and epochs must be positive".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::InvalidArgument(format!("lr decay {}", self.lr_decay)));
        }
        Ok(())
    }
}

/// Momentum buffers, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity(pub Vec<Vec<f64>>);

impl Velocity {
    pub fn zeros_like(net: &Network) -> Self {
        Self(net.params().iter().map(|p| vec![0.0; p.len()]).collect())
    }
}

/// `v ← momentum·v − lr·g; w ← w + v`.
pub fn sgd_step(params: &mut [&mut Vec<f64>], grads: &Gradients, velocity: &mut Velocity, lr: f64, momentum: f64) {
    for ((w, g), v) in params.iter_mut().zip(&grads.0).zip(&mut velocity.0) {
        for ((wi, gi), vi) in w.iter_mut().zip(g).zip(v.iter_mut()) {
            *vi = momentum * *vi - lr * gi;
            *wi += *vi;
        }
    }
}

/// Trains `net` on `(inputs, targets)` and returns the mean minibatch loss of
/// every epoch. Sample order is reshuffled each epoch from `config.seed`.
pub fn train(
    net: &mut Network,
    inputs: &Tensor,
    targets: &Tensor,
    loss: Loss,
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    if inputs.batch() != targets.batch() {
        return Err(Error::Shape(format!("{} inputs vs {} targets", inputs.batch(), targets.batch())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..inputs.batch()).collect();
    let mut velocity = Velocity::zeros_like(net);
    let mut lr = config.learning_rate;
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.minibatch_size) {
            let x = inputs.select(chunk);
            let y = targets.select(chunk);
            let out = net.forward(&x, true)?;
            total += loss.value(&out, &y)?;
            batches += 1;
            let grads = net.backward(&loss.grad(&out, &y)?)?;
            sgd_step(&mut net.params_mut(), &grads, &mut velocity, lr, config.momentum);
        }
        history.push(total / batches as f64);
        lr *= config.lr_decay;
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(w: &mut Vec<f64>, v: &mut Velocity, g: f64) {
        let grads = Gradients(vec![vec![g]]);
        let mut params = vec![w];
        sgd_step(&mut params, &grads, v, 0.1, 0.9);
    }

    #[test]
    fn first_step_is_plain_sgd() {
        let mut w = vec![0.0];
        let mut v = Velocity(vec![vec![0.0]]);
        step(&mut w, &mut v, 1.0);
        assert!((w[0] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn two_steps_unroll() {
        let mut w = vec![0.0];
        let mut v = Velocity(vec![vec![0.0]]);
        step(&mut w, &mut v, 1.0);
        step(&mut w, &mut v, 1.0);
        assert!((w[0] + 0.29).abs() < 1e-12);
    }

    #[test]
    fn velocity_decays_geometrically() {
        let mut w = vec![0.0];
        let mut v = Velocity(vec![vec![1.0]]);
        for k in 1..=5 {
            step(&mut w, &mut v, 0.0);
            assert!((v.0[0][0] - 0.9f64.powi(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { momentum: 1.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { minibatch_size: 0, ..TrainConfig::default() }.validate().is_err());
    }
}
