use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
    Softmax,
}

impl Activation {
    fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Identity => 1,
            Activation::Softmax => 2,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Identity),
            2 => Some(Activation::Softmax),
            _ => None,
        }
    }

    fn apply(self, z: &[f64]) -> Vec<f64> {
        match self {
            Activation::Relu => z.iter().map(|&v| v.max(0.0)).collect(),
            Activation::Identity => z.to_vec(),
            Activation::Softmax => softmax(z),
        }
    }

    /// Maps `dL/da` to `dL/dz` given pre-activation `z` and output `a`.
    fn backprop(self, z: &[f64], a: &[f64], grad: &[f64]) -> Vec<f64> {
        match self {
            Activation::Relu => z
                .iter()
                .zip(grad)
                .map(|(&zi, &g)| if zi > 0.0 { g } else { 0.0 })
                .collect(),
            Activation::Identity => grad.to_vec(),
            Activation::Softmax => {
                let dot: f64 = a.iter().zip(grad).map(|(p, g)| p * g).sum();
                a.iter().zip(grad).map(|(&p, &g)| p * (g - dot)).collect()
            }
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// `y = W x + b` with `W` stored row-major as `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<f64>, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if weights.len() != inputs * outputs {
            return Err(Error::Shape {
                context: "dense layer weights",
                expected: inputs * outputs,
                actual: weights.len(),
            });
        }
        if bias.len() != outputs {
            return Err(Error::Shape {
                context: "dense layer bias",
                expected: outputs,
                actual: bias.len(),
            });
        }
        Ok(Self { inputs, outputs, weights, bias, activation })
    }

    /// He-uniform weights, zero bias.
    pub fn he_uniform<R: Rng + ?Sized>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / inputs as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Self {
            inputs,
            outputs,
            weights,
            bias: vec![0.0; outputs],
            activation,
        }
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

#[derive(Debug, Clone)]
struct ForwardCache {
    /// Input fed to each layer (after the previous layer's dropout).
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    /// Per hidden layer: dropout scale factors (0 or 1/(1-p)).
    masks: Vec<Option<Vec<f64>>>,
}

/// Parameter gradients for every layer, plus the gradient at the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
    pub input: Vec<f64>,
}

impl Gradients {
    /// Layer-by-layer flattening matching [`DenseNetwork::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .flat_map(|(w, b)| w.iter().chain(b).copied())
            .collect()
    }
}

/// Feed-forward stack of dense layers with inverted dropout on hidden activations.
#[derive(Debug, Clone)]
pub struct DenseNetwork {
    layers: Vec<DenseLayer>,
    dropout: f64,
    cache: Option<ForwardCache>,
}

impl DenseNetwork {
    pub fn new(layers: Vec<DenseLayer>, dropout: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::State("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::Shape {
                    context: "adjacent layer widths",
                    expected: pair[0].outputs,
                    actual: pair[1].inputs,
                });
            }
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::State(format!("dropout probability {dropout} outside [0, 1)")));
        }
        Ok(Self { layers, dropout, cache: None })
    }

    /// `sizes = [input, hidden.., output]`; hidden layers use ReLU.
    pub fn he_uniform<R: Rng + ?Sized>(sizes: &[usize], output: Activation, dropout: f64, rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::State("network needs input and output widths".into()));
        }
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last { output } else { Activation::Relu };
                DenseLayer::he_uniform(w[0], w[1], act, rng)
            })
            .collect();
        Self::new(layers, dropout)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_width() {
            return Err(Error::Shape {
                context: "network input",
                expected: self.input_width(),
                actual: input.len(),
            });
        }
        Ok(())
    }

    /// Inference pass: no dropout, no cache.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        for layer in &self.layers {
            x = layer.activation.apply(&layer.affine(&x));
        }
        Ok(x)
    }

    /// Forward pass. With `training`, hidden activations go through dropout
    /// drawn from `rng` and the pass is cached for [`Self::backward`].
    pub fn forward<R: Rng + ?Sized>(&mut self, input: &[f64], training: bool, rng: &mut R) -> Result<Vec<f64>> {
        if !training {
            self.cache = None;
            return self.predict(input);
        }
        self.check_input(input)?;
        let last = self.layers.len() - 1;
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
            post: Vec::with_capacity(self.layers.len()),
            masks: Vec::with_capacity(self.layers.len()),
        };
        let mut x = input.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.affine(&x);
            let a = layer.activation.apply(&z);
            cache.inputs.push(std::mem::take(&mut x));
            let mask = (i < last && self.dropout > 0.0).then(|| {
                let keep = 1.0 / (1.0 - self.dropout);
                (0..a.len())
                    .map(|_| if rng.random::<f64>() < self.dropout { 0.0 } else { keep })
                    .collect::<Vec<f64>>()
            });
            x = match &mask {
                Some(m) => a.iter().zip(m).map(|(v, s)| v * s).collect(),
                None => a.clone(),
            };
            cache.pre.push(z);
            cache.post.push(a);
            cache.masks.push(mask);
        }
        self.cache = Some(cache);
        Ok(x)
    }

    /// Gradients of a loss whose gradient w.r.t. the network output is
    /// `grad_output`, using the cached training pass.
    pub fn backward(&self, grad_output: &[f64]) -> Result<Gradients> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("backward called without a cached training forward pass".into()))?;
        if grad_output.len() != self.output_width() {
            return Err(Error::Shape {
                context: "output gradient",
                expected: self.output_width(),
                actual: grad_output.len(),
            });
        }
        let n = self.layers.len();
        let mut grad_w = vec![Vec::new(); n];
        let mut grad_b = vec![Vec::new(); n];
        let mut grad = grad_output.to_vec();
        for i in (0..n).rev() {
            let layer = &self.layers[i];
            if let Some(mask) = &cache.masks[i] {
                grad = grad.iter().zip(mask).map(|(g, m)| g * m).collect();
            }
            let dz = layer.activation.backprop(&cache.pre[i], &cache.post[i], &grad);
            let x = &cache.inputs[i];
            let mut dw = vec![0.0; layer.weights.len()];
            for (row, &d) in dw.chunks_exact_mut(layer.inputs).zip(&dz) {
                for (slot, &xi) in row.iter_mut().zip(x) {
                    *slot = d * xi;
                }
            }
            let mut dx = vec![0.0; layer.inputs];
            for (row, &d) in layer.weights.chunks_exact(layer.inputs).zip(&dz) {
                for (slot, &w) in dx.iter_mut().zip(row) {
                    *slot += w * d;
                }
            }
            grad_w[i] = dw;
            grad_b[i] = dz;
            grad = dx;
        }
        Ok(Gradients { weights: grad_w, bias: grad_b, input: grad })
    }

    /// Plain SGD step: `p <- p - lr * g`.
    pub fn apply(&mut self, grads: &Gradients, learning_rate: f64) {
        for ((layer, dw), db) in self.layers.iter_mut().zip(&grads.weights).zip(&grads.bias) {
            for (w, g) in layer.weights.iter_mut().zip(dw) {
                *w -= learning_rate * g;
            }
            for (b, g) in layer.bias.iter_mut().zip(db) {
                *b -= learning_rate * g;
            }
        }
    }

    /// Backpropagates `grad_output`, applies SGD and consumes the cache.
    /// Returns the gradient at the network input.
    pub fn backward_and_update(&mut self, grad_output: &[f64], learning_rate: f64) -> Result<Vec<f64>> {
        let grads = self.backward(grad_output)?;
        self.apply(&grads, learning_rate);
        self.cache = None;
        Ok(grads.input)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters, layer by layer: weights row-major, then bias.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::Shape {
                context: "parameter vector",
                expected: self.parameter_count(),
                actual: params.len(),
            });
        }
        let mut it = params.iter().copied();
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w = it.next().expect("length checked");
            }
        }
        self.cache = None;
        Ok(())
    }

    const MAGIC: &'static [u8; 4] = b"EDNN";

    /// Flat little-endian record: magic, layer count, per-layer
    /// `(inputs, outputs, activation)`, dropout, then every parameter as f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 17 * self.layers.len() + 8 * self.parameter_count());
        out.extend_from_slice(Self::MAGIC);
        out.extend_from_slice(&(self.layers.len() as u64).to_le_bytes());
        for layer in &self.layers {
            out.extend_from_slice(&(layer.inputs as u64).to_le_bytes());
            out.extend_from_slice(&(layer.outputs as u64).to_le_bytes());
            out.push(layer.activation.code());
        }
        out.extend_from_slice(&self.dropout.to_le_bytes());
        for p in self.parameters() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut reader = Reader { bytes, pos: 0 };
        if reader.take(4)? != Self::MAGIC {
            return Err(Error::Decode("bad magic".into()));
        }
        let count = reader.u64()? as usize;
        let mut shapes = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let inputs = reader.u64()? as usize;
            let outputs = reader.u64()? as usize;
            let act = Activation::from_code(reader.take(1)?[0])
                .ok_or_else(|| Error::Decode("unknown activation code".into()))?;
            shapes.push((inputs, outputs, act));
        }
        let dropout = reader.f64()?;
        let mut layers = Vec::with_capacity(shapes.len());
        for (inputs, outputs, act) in shapes {
            let weights = (0..inputs * outputs).map(|_| reader.f64()).collect::<Result<Vec<_>>>()?;
            let bias = (0..outputs).map(|_| reader.f64()).collect::<Result<Vec<_>>>()?;
            layers.push(DenseLayer::new(inputs, outputs, weights, bias, act)?);
        }
        if reader.pos != bytes.len() {
            return Err(Error::Decode(format!("{} trailing bytes", bytes.len() - reader.pos)));
        }
        Self::new(layers, dropout)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Decode("record truncated".into()))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
