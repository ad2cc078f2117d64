use super::tensor::Tensor;
use crate::error::{Error, Result};

const LOG_FLOOR: f64 = 1e-12;

/// Training objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    Mse,
    CrossEntropy,
}

impl Loss {
    pub fn value(self, pred: &Tensor, target: &Tensor) -> Result<f64> {
        match self {
            Loss::Mse => mse(pred, target),
            Loss::CrossEntropy => cross_entropy(pred, target),
        }
    }

    pub fn grad(self, pred: &Tensor, target: &Tensor) -> Result<Tensor> {
        match self {
            Loss::Mse => mse_grad(pred, target),
            Loss::CrossEntropy => cross_entropy_grad(pred, target),
        }
    }
}

fn same_shape(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// Mean squared difference over all entries.
pub fn mse(pred: &Tensor, target: &Tensor) -> Result<f64> {
    same_shape(pred, target)?;
    let n = pred.len() as f64;
    Ok(pred.data().iter().zip(target.data()).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n)
}

pub fn mse_grad(pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    same_shape(pred, target)?;
    let n = pred.len() as f64;
    let data = pred.data().iter().zip(target.data()).map(|(p, t)| 2.0 * (p - t) / n).collect();
    Tensor::new(pred.shape().to_vec(), data)
}

/// `-Σ target·ln(pred)` averaged over the batch, with ln clamped at 1e-12.
pub fn cross_entropy(probs: &Tensor, target: &Tensor) -> Result<f64> {
    same_shape(probs, target)?;
    let batch = probs.batch() as f64;
    Ok(-probs
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| if *t == 0.0 { 0.0 } else { t * p.max(LOG_FLOOR).ln() })
        .sum::<f64>()
        / batch)
}

pub fn cross_entropy_grad(probs: &Tensor, target: &Tensor) -> Result<Tensor> {
    same_shape(probs, target)?;
    let batch = probs.batch() as f64;
    let data = probs.data().iter().zip(target.data()).map(|(p, t)| -t / p.max(LOG_FLOOR) / batch).collect();
    Tensor::new(probs.shape().to_vec(), data)
}
