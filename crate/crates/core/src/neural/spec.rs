use std::fmt;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
    Softmax,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Linear => "linear",
            Activation::Softmax => "softmax",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    /// Valid (unpadded) 2-D convolution over `[maps, height, width]` samples;
    /// every filter spans all input maps.
    Conv {
        filters: usize,
        kernel: [usize; 2],
        stride: usize,
        activation: Activation,
    },
    /// Non-overlapping max pooling; trailing rows/columns that do not fill a
    /// window are dropped.
    MaxPool {
        window: [usize; 2],
    },
    Flatten,
    Dense {
        units: usize,
        activation: Activation,
    },
    /// Inverted dropout, active only in training passes.
    Dropout {
        rate: f64,
    },
}

/// Ordered layer stack plus the per-sample input shape.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// Per-sample output shape of every layer, checking that the stack composes.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut shape = self.input_shape.clone();
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Shape(format!("bad input shape {shape:?}")));
        }
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let last = i + 1 == self.layers.len();
            shape = match *layer {
                LayerSpec::Conv { filters, kernel, stride, activation } => {
                    let [_, h, w] = three_d(&shape, i)?;
                    if filters == 0 || stride == 0 || kernel[0] == 0 || kernel[1] == 0 || kernel[0] > h || kernel[1] > w
                    {
                        return Err(Error::Shape(format!("layer {i}: conv kernel {kernel:?} on {shape:?}")));
                    }
                    check_activation(activation, last, i)?;
                    vec![filters, (h - kernel[0]) / stride + 1, (w - kernel[1]) / stride + 1]
                }
                LayerSpec::MaxPool { window } => {
                    let [c, h, w] = three_d(&shape, i)?;
                    if window[0] == 0 || window[1] == 0 || window[0] > h || window[1] > w {
                        return Err(Error::Shape(format!("layer {i}: pool {window:?} on {shape:?}")));
                    }
                    vec![c, h / window[0], w / window[1]]
                }
                LayerSpec::Flatten => vec![shape.iter().product()],
                LayerSpec::Dense { units, activation } => {
                    if shape.len() != 1 || units == 0 {
                        return Err(Error::Shape(format!("layer {i}: dense needs flat input, got {shape:?}")));
                    }
                    check_activation(activation, last, i)?;
                    vec![units]
                }
                LayerSpec::Dropout { rate } => {
                    if !(0.0..1.0).contains(&rate) {
                        return Err(Error::InvalidArgument(format!("layer {i}: dropout rate {rate}")));
                    }
                    shape.clone()
                }
            };
            out.push(shape.clone());
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.shapes().map(|_| ())
    }

    pub fn output_shape(&self) -> Result<Vec<usize>> {
        Ok(self.shapes()?.pop().unwrap_or_else(|| self.input_shape.clone()))
    }

    /// Hex SHA-256 of the canonical description; identifies checkpoints.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_string().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn three_d(shape: &[usize], i: usize) -> Result<[usize; 3]> {
    match *shape {
        [c, h, w] => Ok([c, h, w]),
        _ => Err(Error::Shape(format!("layer {i}: expected [maps, height, width], got {shape:?}"))),
    }
}

fn check_activation(a: Activation, last: bool, i: usize) -> Result<()> {
    if a == Activation::Softmax && !last {
        return Err(Error::InvalidArgument(format!("layer {i}: softmax is only allowed as the final activation")));
    }
    Ok(())
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv { filters, kernel, stride, activation } => {
                write!(f, "conv({filters},{}x{},{stride},{})", kernel[0], kernel[1], activation.name())
            }
            LayerSpec::MaxPool { window } => write!(f, "maxpool({}x{})", window[0], window[1]),
            LayerSpec::Flatten => write!(f, "flatten"),
            LayerSpec::Dense { units, activation } => write!(f, "dense({units},{})", activation.name()),
            LayerSpec::Dropout { rate } => write!(f, "dropout({rate})"),
        }
    }
}

impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dims: Vec<String> = self.input_shape.iter().map(|d| d.to_string()).collect();
        write!(f, "input({})", dims.join("x"))?;
        for l in &self.layers {
            write!(f, ";{l}")?;
        }
        Ok(())
    }
}
