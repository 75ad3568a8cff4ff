//! Small from-scratch neural toolkit: dense layers with backpropagation,
//! inverted dropout, softmax heads, and a mean-aggregation GNN layer.

mod dense;
mod gnn;

pub use dense::{softmax, Activation, DenseLayer, DenseNetwork, Gradients};
pub use gnn::{aggregate_mean, gnn_layer, GnnEncoder, GnnLayer, GnnLayerGradients, GraphBatch};
