use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::{MatRef, Matrix, Real};

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply<T: Real>(self, v: T) -> T {
        match self {
            Activation::Relu => v.max(T::zero()),
            Activation::Tanh => v.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation value.
    #[inline]
    pub fn derivative<T: Real>(self, pre: T) -> T {
        match self {
            Activation::Relu => {
                if pre > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                T::one() - t * t
            }
        }
    }
}

/// One affine map `y = W x + b`, `W` stored row-major as `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Layer<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: vec![T::zero(); inputs * outputs], bias: vec![T::zero(); outputs] }
    }

    pub(crate) fn weight_view(&self) -> MatRef<'_, T> {
        MatRef::row_major(&self.weights, self.outputs, self.inputs)
    }
}

/// Fully connected classifier head producing one raw logit.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierNet<T> {
    layers: Vec<Layer<T>>,
    activation: Activation,
}

/// Parameter-shaped buffer (gradients, optimizer moments).
pub type Gradients<T> = Vec<Layer<T>>;

impl<T: Real> ClassifierNet<T> {
    pub fn from_layers(layers: Vec<Layer<T>>, activation: Activation) -> Result<Self> {
        let last = layers.last().ok_or_else(|| invalid("network needs at least one layer"))?;
        if last.outputs != 1 {
            return Err(Error::DimensionMismatch { what: "output layer width", expected: 1, got: last.outputs });
        }
        for l in &layers {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(invalid("layer buffers do not match declared shape"));
            }
        }
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::DimensionMismatch {
                    what: "consecutive layer shapes",
                    expected: pair[0].outputs,
                    got: pair[1].inputs,
                });
            }
        }
        Ok(Self { layers, activation })
    }

    /// All-zero network with the given hidden widths.
    pub fn zeros(input_dim: usize, hidden: &[usize], activation: Activation) -> Self {
        let layers = Self::shapes(input_dim, hidden).map(|(i, o)| Layer::zeros(i, o)).collect();
        Self { layers, activation }
    }

    /// Weights and biases uniform on `(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn init<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], activation: Activation, rng: &mut R) -> Self {
        let layers = Self::shapes(input_dim, hidden)
            .map(|(i, o)| {
                let bound = 1.0 / (i as f64).sqrt();
                let weights = (0..i * o).map(|_| T::lit(rng.random_range(-bound..bound))).collect();
                let bias = (0..o).map(|_| T::lit(rng.random_range(-bound..bound))).collect();
                Layer { inputs: i, outputs: o, weights, bias }
            })
            .collect();
        Self { layers, activation }
    }

    fn shapes(input_dim: usize, hidden: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
        let ins = std::iter::once(input_dim).chain(hidden.iter().copied());
        let outs = hidden.iter().copied().chain(std::iter::once(1));
        ins.zip(outs)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &T> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn all_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    pub fn zero_gradients(&self) -> Gradients<T> {
        self.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect()
    }

    /// Logit for a single input vector.
    pub fn forward(&self, input: &[T]) -> Result<T> {
        let m = Matrix::from_vec(1, input.len(), input.to_vec());
        Ok(self.forward_batch(&m)?[0])
    }

    /// Logits for every row of `inputs`.
    pub fn forward_batch(&self, inputs: &Matrix<T>) -> Result<Vec<T>> {
        if inputs.cols != self.input_dim() {
            return Err(Error::DimensionMismatch { what: "network input", expected: self.input_dim(), got: inputs.cols });
        }
        let last = self.layers.len() - 1;
        let mut h = self.affine(0, inputs);
        for k in 1..=last {
            for v in &mut h.data {
                *v = self.activation.apply(*v);
            }
            h = self.affine(k, &h);
        }
        Ok(h.data)
    }

    /// `input * W^T + b` for layer `k`.
    pub(crate) fn affine(&self, k: usize, input: &Matrix<T>) -> Matrix<T> {
        let layer = &self.layers[k];
        let mut out = Matrix::zeros(input.rows, layer.outputs);
        for r in 0..input.rows {
            out.data[r * layer.outputs..(r + 1) * layer.outputs].copy_from_slice(&layer.bias);
        }
        T::gemm(T::one(), input.view(), layer.weight_view().t(), T::one(), &mut out);
        out
    }
}

const WEIGHTS_FORMAT: &str = "bnre-weights";
const WEIGHTS_VERSION: u32 = 1;

/// On-disk JSON layout of a trained network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    pub format: String,
    pub version: u32,
    pub layer_shapes: Vec<[usize; 2]>,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl<T: Real> ClassifierNet<T> {
    pub fn to_weights_file(&self) -> WeightsFile {
        WeightsFile {
            format: WEIGHTS_FORMAT.to_string(),
            version: WEIGHTS_VERSION,
            layer_shapes: self.layers.iter().map(|l| [l.outputs, l.inputs]).collect(),
            weights: self.layers.iter().flat_map(|l| l.weights.iter().map(|w| w.as_f64())).collect(),
            biases: self.layers.iter().flat_map(|l| l.bias.iter().map(|b| b.as_f64())).collect(),
            activation: self.activation,
        }
    }

    pub fn from_weights_file(file: &WeightsFile) -> Result<Self> {
        if file.format != WEIGHTS_FORMAT {
            return Err(Error::Format(format!("expected format \"{WEIGHTS_FORMAT}\", found \"{}\"", file.format)));
        }
        if file.version != WEIGHTS_VERSION {
            return Err(Error::Format(format!(
                "unsupported weights version {}, expected version {WEIGHTS_VERSION}",
                file.version
            )));
        }
        let mut w = file.weights.iter();
        let mut b = file.biases.iter();
        let mut layers = Vec::with_capacity(file.layer_shapes.len());
        for &[outputs, inputs] in &file.layer_shapes {
            let weights: Vec<T> = w.by_ref().take(outputs * inputs).map(|&v| T::lit(v)).collect();
            let bias: Vec<T> = b.by_ref().take(outputs).map(|&v| T::lit(v)).collect();
            if weights.len() != outputs * inputs || bias.len() != outputs {
                return Err(Error::Format("weights file is shorter than its layer shapes".into()));
            }
            layers.push(Layer { inputs, outputs, weights, bias });
        }
        if w.next().is_some() || b.next().is_some() {
            return Err(Error::Format("weights file has trailing parameters".into()));
        }
        Self::from_layers(layers, file.activation).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_weights_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: WeightsFile = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        Self::from_weights_file(&file)
    }
}
