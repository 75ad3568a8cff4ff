//! Mean-aggregation message passing.
//!
//! Per layer and node `v`: `m_v` is the mean of the neighbors' feature rows
//! (zero without neighbors) and `x'_v = relu(W_self x_v + W_msg m_v + b)`.

use std::cmp::Ordering;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GraphBatch {
    /// One row per node.
    pub node_features: Vec<Vec<f64>>,
    /// Neighbor lists per node.
    pub adjacency: Vec<Vec<usize>>,
    /// Optional per-edge attributes; carried but not consumed by [`GnnLayer`].
    pub edge_features: Option<Vec<Vec<f64>>>,
}

impl GraphBatch {
    pub fn new(node_features: Vec<Vec<f64>>, adjacency: Vec<Vec<usize>>) -> Self {
        Self { node_features, adjacency, edge_features: None }
    }

    pub fn validate(&self) -> Result<()> {
        validate_graph(&self.node_features, &self.adjacency)
    }
}

fn validate_graph(x: &[Vec<f64>], adjacency: &[Vec<usize>]) -> Result<()> {
    if adjacency.len() != x.len() {
        return Err(Error::Shape {
            context: "adjacency node count",
            expected: x.len(),
            actual: adjacency.len(),
        });
    }
    if let Some(first) = x.first() {
        if let Some(row) = x.iter().find(|r| r.len() != first.len()) {
            return Err(Error::Shape {
                context: "node feature width",
                expected: first.len(),
                actual: row.len(),
            });
        }
    }
    for (v, list) in adjacency.iter().enumerate() {
        for &u in list {
            if u >= x.len() {
                return Err(Error::Topology(format!("node {v} lists unknown neighbor {u}")));
            }
            if !adjacency[u].contains(&v) {
                return Err(Error::Topology(format!("edge {v}->{u} has no reverse edge")));
            }
        }
    }
    Ok(())
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Mean of neighbor rows. Rows are summed in sorted value order, so the
/// result does not depend on how nodes are labeled.
pub fn aggregate_mean(x: &[Vec<f64>], adjacency: &[Vec<usize>]) -> Vec<Vec<f64>> {
    let width = x.first().map_or(0, Vec::len);
    adjacency
        .iter()
        .map(|list| {
            let mut rows: Vec<&[f64]> = list.iter().map(|&u| x[u].as_slice()).collect();
            rows.sort_by(|a, b| lexicographic(a, b));
            let mut m = vec![0.0; width];
            for row in &rows {
                for (slot, v) in m.iter_mut().zip(row.iter()) {
                    *slot += v;
                }
            }
            if !rows.is_empty() {
                let deg = rows.len() as f64;
                m.iter_mut().for_each(|v| *v /= deg);
            }
            m
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnLayer {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs x inputs`, row-major.
    pub w_self: Vec<f64>,
    pub w_msg: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    x: Vec<Vec<f64>>,
    messages: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnLayerGradients {
    pub w_self: Vec<f64>,
    pub w_msg: Vec<f64>,
    pub bias: Vec<f64>,
}

impl GnnLayer {
    pub fn he_uniform<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        // Fan-in counts both the self and the message path.
        let limit = (6.0 / (2 * inputs) as f64).sqrt();
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-limit..=limit)).collect() };
        let w_self = draw(inputs * outputs);
        let w_msg = draw(inputs * outputs);
        Self { inputs, outputs, w_self, w_msg, bias: vec![0.0; outputs] }
    }

    /// `W_self = I`, `W_msg = 0`, `b = 0` for a square layer.
    pub fn identity(width: usize) -> Self {
        let mut w_self = vec![0.0; width * width];
        for i in 0..width {
            w_self[i * width + i] = 1.0;
        }
        Self {
            inputs: width,
            outputs: width,
            w_self,
            w_msg: vec![0.0; width * width],
            bias: vec![0.0; width],
        }
    }

    fn check(&self, x: &[Vec<f64>]) -> Result<()> {
        if let Some(row) = x.iter().find(|r| r.len() != self.inputs) {
            return Err(Error::Shape {
                context: "gnn layer input width",
                expected: self.inputs,
                actual: row.len(),
            });
        }
        Ok(())
    }

    fn pre_activation(&self, xv: &[f64], mv: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|o| {
                let row = o * self.inputs..(o + 1) * self.inputs;
                let s: f64 = self.w_self[row.clone()].iter().zip(xv).map(|(w, v)| w * v).sum();
                let m: f64 = self.w_msg[row].iter().zip(mv).map(|(w, v)| w * v).sum();
                s + m + self.bias[o]
            })
            .collect()
    }

    fn run(&self, x: &[Vec<f64>], adjacency: &[Vec<usize>]) -> Result<(Vec<Vec<f64>>, LayerCache)> {
        self.check(x)?;
        validate_graph(x, adjacency)?;
        let messages = aggregate_mean(x, adjacency);
        let pre: Vec<Vec<f64>> = x
            .iter()
            .zip(&messages)
            .map(|(xv, mv)| self.pre_activation(xv, mv))
            .collect();
        let out = pre.iter().map(|z| z.iter().map(|v| v.max(0.0)).collect()).collect();
        Ok((out, LayerCache { x: x.to_vec(), messages, pre }))
    }

    pub fn forward(&self, x: &[Vec<f64>], adjacency: &[Vec<usize>]) -> Result<Vec<Vec<f64>>> {
        self.run(x, adjacency).map(|(out, _)| out)
    }

    fn backward(&self, cache: &LayerCache, adjacency: &[Vec<usize>], grad_out: &[Vec<f64>]) -> (GnnLayerGradients, Vec<Vec<f64>>) {
        let n = cache.x.len();
        let mut grads = GnnLayerGradients {
            w_self: vec![0.0; self.w_self.len()],
            w_msg: vec![0.0; self.w_msg.len()],
            bias: vec![0.0; self.outputs],
        };
        let mut dx = vec![vec![0.0; self.inputs]; n];
        let mut dm = vec![vec![0.0; self.inputs]; n];
        for v in 0..n {
            for o in 0..self.outputs {
                let dz = if cache.pre[v][o] > 0.0 { grad_out[v][o] } else { 0.0 };
                if dz == 0.0 {
                    continue;
                }
                grads.bias[o] += dz;
                for i in 0..self.inputs {
                    let k = o * self.inputs + i;
                    grads.w_self[k] += dz * cache.x[v][i];
                    grads.w_msg[k] += dz * cache.messages[v][i];
                    dx[v][i] += dz * self.w_self[k];
                    dm[v][i] += dz * self.w_msg[k];
                }
            }
        }
        for (v, list) in adjacency.iter().enumerate() {
            if list.is_empty() {
                continue;
            }
            let inv = 1.0 / list.len() as f64;
            for &u in list {
                for i in 0..self.inputs {
                    dx[u][i] += dm[v][i] * inv;
                }
            }
        }
        (grads, dx)
    }

    fn apply(&mut self, grads: &GnnLayerGradients, learning_rate: f64) {
        for (w, g) in self.w_self.iter_mut().zip(&grads.w_self) {
            *w -= learning_rate * g;
        }
        for (w, g) in self.w_msg.iter_mut().zip(&grads.w_msg) {
            *w -= learning_rate * g;
        }
        for (b, g) in self.bias.iter_mut().zip(&grads.bias) {
            *b -= learning_rate * g;
        }
    }
}

/// One message-passing round over `batch`.
pub fn gnn_layer(batch: &GraphBatch, layer: &GnnLayer) -> Result<Vec<Vec<f64>>> {
    layer.forward(&batch.node_features, &batch.adjacency)
}

/// Stack of [`GnnLayer`]s trained by backpropagation from downstream gradients.
#[derive(Debug, Clone)]
pub struct GnnEncoder {
    layers: Vec<GnnLayer>,
    cache: Option<(Vec<Vec<usize>>, Vec<LayerCache>)>,
}

impl GnnEncoder {
    pub fn new(layers: Vec<GnnLayer>) -> Result<Self> {
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::Shape {
                    context: "adjacent gnn layer widths",
                    expected: pair[0].outputs,
                    actual: pair[1].inputs,
                });
            }
        }
        Ok(Self { layers, cache: None })
    }

    pub fn he_uniform<R: Rng + ?Sized>(input: usize, width: usize, num_layers: usize, rng: &mut R) -> Result<Self> {
        let layers = (0..num_layers)
            .map(|i| GnnLayer::he_uniform(if i == 0 { input } else { width }, width, rng))
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[GnnLayer] {
        &self.layers
    }

    pub fn output_width(&self) -> Option<usize> {
        self.layers.last().map(|l| l.outputs)
    }

    pub fn encode(&self, x: &[Vec<f64>], adjacency: &[Vec<usize>]) -> Result<Vec<Vec<f64>>> {
        let mut h = x.to_vec();
        for layer in &self.layers {
            h = layer.forward(&h, adjacency)?;
        }
        Ok(h)
    }

    /// Like [`Self::encode`] but keeps what [`Self::backward_and_update`] needs.
    pub fn forward_train(&mut self, x: &[Vec<f64>], adjacency: &[Vec<usize>]) -> Result<Vec<Vec<f64>>> {
        let mut h = x.to_vec();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (out, cache) = layer.run(&h, adjacency)?;
            caches.push(cache);
            h = out;
        }
        self.cache = Some((adjacency.to_vec(), caches));
        Ok(h)
    }

    /// Per-layer parameter gradients (first layer first) and the gradient at
    /// the input node features, from the cached training pass.
    pub fn backward(&self, grad_out: &[Vec<f64>]) -> Result<(Vec<GnnLayerGradients>, Vec<Vec<f64>>)> {
        let (adjacency, caches) = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("gnn backward without a cached forward pass".into()))?;
        let mut grad = grad_out.to_vec();
        let mut all = Vec::with_capacity(self.layers.len());
        for (layer, cache) in self.layers.iter().zip(caches).rev() {
            let (g, dx) = layer.backward(cache, adjacency, &grad);
            all.push(g);
            grad = dx;
        }
        all.reverse();
        Ok((all, grad))
    }

    /// SGD step with gradients from [`Self::backward`]; consumes the cache.
    pub fn apply(&mut self, grads: &[GnnLayerGradients], learning_rate: f64) {
        for (layer, g) in self.layers.iter_mut().zip(grads) {
            layer.apply(g, learning_rate);
        }
        self.cache = None;
    }

    /// Returns the gradient at the input node features.
    pub fn backward_and_update(&mut self, grad_out: &[Vec<f64>], learning_rate: f64) -> Result<Vec<Vec<f64>>> {
        let (grads, dx) = self.backward(grad_out)?;
        self.apply(&grads, learning_rate);
        Ok(dx)
    }
}

impl GnnLayerGradients {
    pub fn squared_norm(&self) -> f64 {
        self.w_self.iter().chain(&self.w_msg).chain(&self.bias).map(|g| g * g).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn isolated_node_sees_no_message() {
        let mut rng = stream(1, Stream::Initialization);
        let layer = GnnLayer::he_uniform(3, 4, &mut rng);
        let x = vec![vec![0.2, -0.5, 0.9]];
        let out = layer.forward(&x, &[vec![]]).unwrap();
        let expected: Vec<f64> = layer.pre_activation(&x[0], &[0.0; 3]).into_iter().map(|v| v.max(0.0)).collect();
        assert_eq!(out[0], expected);
    }

    #[test]
    fn identical_nodes_stay_identical() {
        let mut rng = stream(2, Stream::Initialization);
        let layer = GnnLayer::he_uniform(2, 5, &mut rng);
        let x = vec![vec![0.3, 0.7], vec![0.3, 0.7]];
        let out = layer.forward(&x, &[vec![1], vec![0]]).unwrap();
        assert_eq!(out[0], out[1]);
    }

    #[test]
    fn star_messages_are_means_of_the_others() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let adjacency: Vec<Vec<usize>> = (0..6).map(|v| (0..6).filter(|&u| u != v).collect()).collect();
        let m = aggregate_mean(&x, &adjacency);
        for v in 0..6 {
            let others: Vec<usize> = (0..6).filter(|&u| u != v).collect();
            let mean0 = others.iter().map(|&u| u as f64).sum::<f64>() / 5.0;
            let mean1 = others.iter().map(|&u| (u * u) as f64).sum::<f64>() / 5.0;
            assert!((m[v][0] - mean0).abs() < 1e-12);
            assert!((m[v][1] - mean1).abs() < 1e-12);
        }
    }

    #[test]
    fn asymmetric_or_dangling_adjacency_is_rejected() {
        let batch = GraphBatch::new(vec![vec![1.0], vec![2.0]], vec![vec![1], vec![]]);
        assert!(batch.validate().is_err());
        let batch = GraphBatch::new(vec![vec![1.0]], vec![vec![3]]);
        assert!(batch.validate().is_err());
        let layer = GnnLayer::identity(2);
        assert!(matches!(layer.forward(&[vec![1.0]], &[vec![]]), Err(Error::Shape { .. })));
    }

    #[test]
    fn encoder_gradients_match_finite_differences() {
        let mut rng = stream(11, Stream::Initialization);
        let mut enc = GnnEncoder::he_uniform(3, 4, 2, &mut rng).unwrap();
        let x: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let adjacency = vec![vec![1, 2], vec![0], vec![0, 3], vec![2]];
        let loss = |e: &GnnEncoder, x: &[Vec<f64>]| -> f64 {
            e.encode(x, &adjacency).unwrap().iter().flatten().enumerate().map(|(k, v)| (k as f64 + 1.0) * v).sum()
        };
        let grad_out: Vec<Vec<f64>> = (0..4).map(|v| (0..4).map(|o| (v * 4 + o) as f64 + 1.0).collect()).collect();
        let mut probe = enc.clone();
        probe.forward_train(&x, &adjacency).unwrap();
        let dx = probe.backward_and_update(&grad_out, 0.0).unwrap();
        let h = 1e-5;
        for v in 0..4 {
            for i in 0..3 {
                let mut xp = x.clone();
                xp[v][i] += h;
                let mut xm = x.clone();
                xm[v][i] -= h;
                let numeric = (loss(&enc, &xp) - loss(&enc, &xm)) / (2.0 * h);
                assert!((numeric - dx[v][i]).abs() < 1e-6 * numeric.abs().max(1.0), "{numeric} vs {}", dx[v][i]);
            }
        }
        // A real step changes the parameters.
        let before = enc.layers()[0].w_self.clone();
        enc.forward_train(&x, &adjacency).unwrap();
        enc.backward_and_update(&grad_out, 0.01).unwrap();
        assert_ne!(enc.layers()[0].w_self, before);
    }
}
