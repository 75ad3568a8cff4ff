use rand::Rng;

use super::{argmax, DecisionContext, Hyperparameters, SchedulerPolicy, ServerFeatures, StepFeedback};
use crate::error::{Error, Result};
use crate::neural::{Activation, DenseNetwork, GnnEncoder};
use crate::rng::{stream, Stream, StreamRng};

/// Network input: one feature row per server plus the server graph.
#[derive(Debug, Clone, PartialEq)]
pub struct QInput {
    pub nodes: Vec<Vec<f64>>,
    pub adjacency: Vec<Vec<usize>>,
}

impl QInput {
    pub fn new(features: &[ServerFeatures], server_graph: &[Vec<usize>]) -> Self {
        Self {
            nodes: features.iter().map(|f| f.to_vec()).collect(),
            adjacency: server_graph.to_vec(),
        }
    }

    fn flatten(rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().flatten().copied().collect()
    }
}

/// Online deep Q-learning over the concatenated server features, optionally
/// with a GNN encoder in front trained jointly through the TD loss.
///
/// No replay buffer and no target network: every transition is one SGD step
/// on `(R + gamma * max_a Q(S', a) - Q(S, A))^2` with the target held fixed.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    encoder: Option<GnnEncoder>,
    net: DenseNetwork,
    hp: Hyperparameters,
    decisions: u64,
    exploration: StreamRng,
    dropout_rng: StreamRng,
    pending: Vec<(QInput, usize)>,
}

impl DqnAgent {
    pub fn new(servers: usize, use_gnn: bool, hp: &Hyperparameters, seed: u64) -> Result<Self> {
        let mut init = stream(seed, Stream::Initialization);
        let width = hp.hidden_width;
        let encoder = use_gnn
            .then(|| GnnEncoder::he_uniform(ServerFeatures::WIDTH, width, hp.gnn_layers, &mut init))
            .transpose()?;
        let per_node = if use_gnn { width } else { ServerFeatures::WIDTH };
        let net = DenseNetwork::he_uniform(&[per_node * servers, width, servers], Activation::Identity, hp.dropout, &mut init)?;
        Self::from_parts(encoder, net, hp, seed)
    }

    pub fn from_parts(encoder: Option<GnnEncoder>, net: DenseNetwork, hp: &Hyperparameters, seed: u64) -> Result<Self> {
        Ok(Self {
            encoder,
            net,
            hp: hp.clone(),
            decisions: 0,
            exploration: stream(seed, Stream::Exploration),
            dropout_rng: stream(seed, Stream::Dropout),
            pending: Vec::new(),
        })
    }

    /// Sets every Q-head bias to `q0`. With `q0` above any achievable return,
    /// untried actions look better than tried ones until their estimates fall.
    pub fn with_optimistic_init(mut self, q0: f64) -> Self {
        if let Some(head) = self.net.layers_mut().last_mut() {
            head.bias.fill(q0);
        }
        self
    }

    pub fn network(&self) -> &DenseNetwork {
        &self.net
    }

    pub fn encoder(&self) -> Option<&GnnEncoder> {
        self.encoder.as_ref()
    }

    pub fn decisions(&self) -> u64 {
        self.decisions
    }

    /// `max(epsilon_0 * decay^k, epsilon_min)` after `k` decisions.
    pub fn epsilon(&self) -> f64 {
        let k = i32::try_from(self.decisions).unwrap_or(i32::MAX);
        (self.hp.epsilon * self.hp.epsilon_decay.powi(k)).max(self.hp.epsilon_min)
    }

    fn embed(&self, input: &QInput) -> Result<Vec<f64>> {
        match &self.encoder {
            Some(enc) => Ok(QInput::flatten(&enc.encode(&input.nodes, &input.adjacency)?)),
            None => Ok(QInput::flatten(&input.nodes)),
        }
    }

    /// Q-value of every server, inference mode.
    pub fn q_values(&self, input: &QInput) -> Result<Vec<f64>> {
        self.net.predict(&self.embed(input)?)
    }

    /// Epsilon-greedy choice. The exploration coin is always drawn; the random
    /// server only when exploring.
    pub fn dqn_decide(&mut self, input: &QInput) -> Result<usize> {
        let q = self.q_values(input)?;
        let eps = self.epsilon();
        let coin: f64 = self.exploration.random();
        let choice = if coin < eps {
            self.exploration.random_range(0..q.len())
        } else {
            argmax(&q)
        };
        self.decisions += 1;
        Ok(choice)
    }

    /// One TD step on `(state, action, reward, next)`. Returns the TD error
    /// measured on the training pass.
    ///
    /// The step descends `(y - Q(S, A))^2` with `y = R + gamma * max Q(S', .)`
    /// held fixed, scaled by `1 / (2 |grad Q(S, A)|^2)` over every trained
    /// parameter. To first order `Q(S, A)` then moves by exactly
    /// `alpha * (y - Q(S, A))`, the tabular rule, and the step stays stable for
    /// any `alpha < 2` whatever the network's width or dropout mask.
    pub fn dqn_update(&mut self, state: &QInput, action: usize, reward: f64, next: &QInput) -> Result<f64> {
        let next_q = self.q_values(next)?;
        let target = reward + self.hp.gamma * next_q.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let embedded = match &mut self.encoder {
            Some(enc) => QInput::flatten(&enc.forward_train(&state.nodes, &state.adjacency)?),
            None => QInput::flatten(&state.nodes),
        };
        let q = self.net.forward(&embedded, true, &mut self.dropout_rng)?;
        if action >= q.len() {
            return Err(Error::Shape {
                context: "dqn action index",
                expected: q.len(),
                actual: action,
            });
        }
        let td = target - q[action];
        let mut unit = vec![0.0; q.len()];
        unit[action] = 1.0;
        let dense = self.net.backward(&unit)?;
        let mut norm: f64 = dense.flatten().iter().map(|g| g * g).sum();
        let encoder_grads = match &self.encoder {
            Some(enc) => {
                let width = dense.input.len() / state.nodes.len();
                let rows: Vec<Vec<f64>> = dense.input.chunks_exact(width).map(<[f64]>::to_vec).collect();
                let (grads, _) = enc.backward(&rows)?;
                norm += grads.iter().map(|g| g.squared_norm()).sum::<f64>();
                Some(grads)
            }
            None => None,
        };
        if td == 0.0 || norm == 0.0 {
            return Ok(td);
        }
        // apply() subtracts rate * grad Q, so a rate of -alpha * td / norm
        // moves Q(S, A) toward the target.
        let step = -self.hp.alpha * td / norm;
        self.net.apply(&dense, step);
        if let (Some(enc), Some(grads)) = (&mut self.encoder, encoder_grads) {
            enc.apply(&grads, step);
        }
        Ok(td)
    }
}

impl SchedulerPolicy for DqnAgent {
    fn name(&self) -> &'static str {
        if self.encoder.is_some() {
            "dqn_gnn"
        } else {
            "dqn"
        }
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Option<usize>> {
        let input = QInput::new(ctx.features, ctx.server_graph);
        let action = self.dqn_decide(&input)?;
        self.pending.push((input, action));
        Ok(Some(action))
    }

    fn observe(&mut self, feedback: &StepFeedback<'_>) -> Result<()> {
        let next = QInput::new(feedback.features, feedback.server_graph);
        for (state, action) in std::mem::take(&mut self.pending) {
            self.dqn_update(&state, action, feedback.reward, &next)?;
        }
        Ok(())
    }
}
